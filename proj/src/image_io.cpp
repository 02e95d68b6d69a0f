#include "clue/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include <jpeglib.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace clue {
namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

cv::Mat to_mat(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
    throw DimensionError("image I/O expects 1×H×W or 3×H×W, got " + shape_str(image.shape()));
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  cv::Mat m(h, w, c == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < h; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      if (c == 1) {
        row[x] = to_byte(image.at(0, y, x));
      } else {
        // OpenCV stores BGR.
        for (int ch = 0; ch < 3; ++ch) row[3 * x + ch] = to_byte(image.at(2 - ch, y, x));
      }
    }
  }
  return m;
}

Tensor from_mat(const cv::Mat& m, int channels) {
  if (m.empty()) throw FormatError("could not decode image");
  if (m.channels() != channels)
    throw FormatError("decoded image has " + std::to_string(m.channels()) + " channels, expected " +
                      std::to_string(channels));
  Tensor t({channels, m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      if (channels == 1) {
        t.at(0, y, x) = row[x] / 255.0f;
      } else {
        for (int ch = 0; ch < 3; ++ch) t.at(2 - ch, y, x) = row[3 * x + ch] / 255.0f;
      }
    }
  }
  return t;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

[[noreturn]] void on_jpeg_error(j_common_ptr info) {
  std::longjmp(reinterpret_cast<JpegError*>(info->err)->jump, 1);
}

// Interleaved 8-bit pixels in, JFIF bytes out. Every component is sampled 1×1.
std::vector<std::uint8_t> jpeg_encode(const std::vector<std::uint8_t>& pixels, int w, int h, int c,
                                      int quality) {
  jpeg_compress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  unsigned char* buf = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buf);
    throw FormatError("JPEG encoding failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &size);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = c;
  cinfo.in_color_space = c == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  for (int i = 0; i < cinfo.num_components; ++i) {
    cinfo.comp_info[i].h_samp_factor = 1;
    cinfo.comp_info[i].v_samp_factor = 1;
  }
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(pixels.data() + static_cast<std::size_t>(cinfo.next_scanline) * w * c);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> out(buf, buf + size);
  std::free(buf);
  return out;
}

std::vector<std::uint8_t> jpeg_decode(const std::vector<std::uint8_t>& bytes, int w, int h, int c) {
  jpeg_decompress_struct dinfo{};
  JpegError err{};
  dinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&dinfo);
    throw FormatError("JPEG decoding failed");
  }
  jpeg_create_decompress(&dinfo);
  jpeg_mem_src(&dinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&dinfo, TRUE);
  dinfo.out_color_space = c == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&dinfo);
  if (static_cast<int>(dinfo.output_width) != w || static_cast<int>(dinfo.output_height) != h ||
      dinfo.output_components != c) {
    jpeg_destroy_decompress(&dinfo);
    throw FormatError("JPEG decode produced unexpected geometry");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h * c);
  while (dinfo.output_scanline < dinfo.output_height) {
    JSAMPROW row = out.data() + static_cast<std::size_t>(dinfo.output_scanline) * w * c;
    jpeg_read_scanlines(&dinfo, &row, 1);
  }
  jpeg_finish_decompress(&dinfo);
  jpeg_destroy_decompress(&dinfo);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Tensor& image) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_mat(image), buf)) throw FormatError("PNG encoding failed");
  return buf;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (!cv::imwrite(path.string(), to_mat(image)))
    throw FormatError("could not write " + path.string());
}

Tensor read_png(const std::filesystem::path& path, int channels) {
  if (!std::filesystem::exists(path)) throw FormatError("missing image file " + path.string());
  cv::Mat m = cv::imread(path.string(), channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  if (m.empty()) throw FormatError("could not decode " + path.string());
  return from_mat(m, channels);
}

Tensor jpeg_roundtrip(const Tensor& image, int quality) {
  if (quality < 1 || quality > 100) throw DomainError("JPEG quality must be in [1, 100]");
  const cv::Mat m = to_mat(image);
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(c) * h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        pixels[(static_cast<std::size_t>(y) * w + x) * c + ch] =
            c == 1 ? m.ptr<std::uint8_t>(y)[x] : m.ptr<std::uint8_t>(y)[3 * x + 2 - ch];
  const std::vector<std::uint8_t> decoded = jpeg_decode(jpeg_encode(pixels, w, h, c, quality), w, h, c);
  Tensor out({c, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        out.at(ch, y, x) = decoded[(static_cast<std::size_t>(y) * w + x) * c + ch] / 255.0f;
  return out;
}

Tensor quantize8(const Tensor& image) {
  Tensor out = image;
  for (float& v : out.values()) v = to_byte(v) / 255.0f;
  return out;
}

double psnr(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "psnr");
  double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace clue

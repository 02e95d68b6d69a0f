#pragma once

#include "clue/tensor.hpp"

namespace clue {

// Bilinear resize of a C×H×W tensor with half-pixel centers
// (align_corners = false); edge samples clamp to the border.
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);
// Adjoint of resize_bilinear: scatters an out_h×out_w gradient back onto
// the in_h×in_w grid.
Tensor resize_bilinear_adjoint(const Tensor& grad_out, int in_h, int in_w);

// Separable Gaussian blur, kernel radius ceil(3σ), replicate border.
// σ == 0 returns the input unchanged.
Tensor gaussian_blur(const Tensor& x, float sigma);

// One of the 8 symmetries of the square: bit 0 flips columns, bit 1 flips
// rows, bit 2 transposes. Requires H == W when transposing.
Tensor dihedral(const Tensor& x, int op);

// Zero-pads a C×H×W tensor on the bottom/right up to multiples of `m`.
Tensor pad_to_multiple(const Tensor& x, int m);

}  // namespace clue

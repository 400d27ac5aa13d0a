#pragma once

#include "semjscc/rng.hpp"
#include "semjscc/tensor.hpp"

namespace semjscc {

// All operations take and return (C,H,W) tensors with values in [0,1].

Tensor bilinear_resize(const Tensor& img, int out_h, int out_w);
Tensor crop(const Tensor& img, int y0, int x0, int h, int w);
Tensor center_crop(const Tensor& img, int h, int w);
Tensor hflip(const Tensor& img);
Tensor to_grayscale(const Tensor& img);                  // luma replicated per channel
Tensor gaussian_blur(const Tensor& img, double sigma);   // separable, reflect padding
void clamp01(Tensor& img);

// Random crop of area fraction in [min_scale,1] and aspect in [3/4,4/3],
// resized back to the input size.
Tensor random_resized_crop(const Tensor& img, Rng& rng, double min_scale);

// Per-channel gain plus brightness shift, each drawn from [-strength,strength].
Tensor color_jitter(const Tensor& img, Rng& rng, double strength);

}  // namespace semjscc

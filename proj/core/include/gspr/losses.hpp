#pragma once

#include "gspr/image.hpp"

namespace gspr {

// Mean absolute difference over every scalar.
double l1_loss(const Image& a, const Image& b);

// Structural similarity with an 11x11 Gaussian window (sigma 1.5) over
// valid window positions, averaged over positions and channels.
double ssim(const Image& a, const Image& b);

// (1 - SSIM) / 2, in [0, 1].
double dssim_loss(const Image& a, const Image& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// (1 - lambda) * L1 + lambda * D-SSIM, with detach-masked pixels of `render`
// replaced by `gt` so they carry neither residual nor gradient.
double mgs_loss(const Image& render, const Image& gt, double lambda, const Mask& detach_mask);

}  // namespace gspr

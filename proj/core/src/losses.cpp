#include "gspr/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "gspr/error.hpp"

namespace gspr {
namespace {

void require_same(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw InputError("image dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                     std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                     "x" + std::to_string(b.channels));
  }
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (auto& x : w) x /= sum;
  return w;
}

// Valid-mode separable filtering of one channel: (W-10) x (H-10) output.
std::vector<double> filter_valid(const std::vector<double>& plane, int width, int height,
                                 const std::array<double, kSsimWindow>& w) {
  const int ow = width - kSsimWindow + 1;
  const int oh = height - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += w[k] * plane[static_cast<std::size_t>(y) * width + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += w[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double l1_loss(const Image& a, const Image& b) {
  require_same(a, b);
  if (a.data.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  return s / static_cast<double>(a.data.size());
}

double ssim(const Image& a, const Image& b) {
  require_same(a, b);
  if (a.width < kSsimWindow || a.height < kSsimWindow) {
    throw InputError("SSIM needs images of at least 11x11 pixels");
  }
  const auto w = gaussian_window();
  const std::size_t pixels = static_cast<std::size_t>(a.width) * a.height;
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels; ++c) {
    std::vector<double> x(pixels), y(pixels), xx(pixels), yy(pixels), xy(pixels);
    for (std::size_t i = 0; i < pixels; ++i) {
      x[i] = a.data[i * a.channels + c];
      y[i] = b.data[i * b.channels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, a.width, a.height, w);
    const auto my = filter_valid(y, a.width, a.height, w);
    const auto sxx = filter_valid(xx, a.width, a.height, w);
    const auto syy = filter_valid(yy, a.width, a.height, w);
    const auto sxy = filter_valid(xy, a.width, a.height, w);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      const double num = (2.0 * mx[i] * my[i] + kSsimC1) * (2.0 * cov + kSsimC2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + kSsimC1) * (vx + vy + kSsimC2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double dssim_loss(const Image& a, const Image& b) { return std::clamp((1.0 - ssim(a, b)) / 2.0, 0.0, 1.0); }

double mgs_loss(const Image& render, const Image& gt, double lambda, const Mask& detach_mask) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("mgs_loss lambda must lie in [0, 1]");
  require_same(render, gt);
  Image effective = render;
  if (!detach_mask.data.empty()) {
    if (!detach_mask.same_size(render.width, render.height)) {
      throw InputError("detach mask size differs from the image");
    }
    for (int y = 0; y < render.height; ++y) {
      for (int x = 0; x < render.width; ++x) {
        if (!detach_mask.at(x, y)) continue;
        for (int c = 0; c < render.channels; ++c) effective.at(x, y, c) = gt.at(x, y, c);
      }
    }
  }
  const double l1 = l1_loss(effective, gt);
  if (lambda == 0.0) return l1;
  return (1.0 - lambda) * l1 + lambda * dssim_loss(effective, gt);
}

}  // namespace gspr

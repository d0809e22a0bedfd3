#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gspr {

// Dense row-major grid of `channels` values per cell.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, int c = 1, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  T& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  const T& at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool same_shape(const Grid& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool same_size(int w, int h) const { return width == w && height == h; }
};

// RGB image with values in [0, 1].
using Image = Grid<double>;
using SemanticMap = Grid<std::uint16_t>;
// Boolean grid; nonzero = set.
using Mask = Grid<std::uint8_t>;

inline Image make_image(int w, int h, double fill = 0.0) { return Image(w, h, 3, fill); }

}  // namespace gspr

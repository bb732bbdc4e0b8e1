#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xsand/engine.hpp"
#include "xsand/lattice.hpp"

namespace xsand {

/// 8-bit grayscale raster, row 0 at the top.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Gray level of a site: untoppled is white, toppled sites darken with their
/// chip count (0, 1, 2, 3, >=4 chips -> 224, 176, 128, 64, 0).
std::uint8_t sandpile_gray(std::uint64_t odometer, std::int64_t chips);

/// Render a 2D window (or the x_3 = ... = 0 slice of a higher-dimensional one).
/// Highest x_2 is the top row.
Image render_sandpile(const Sandpile& state, const Window& w);
Image render_mask(const Window& w, const std::function<bool(const Point&)>& on);  // on -> black

void write_pgm(const std::string& path, const Image& img);
Image read_pgm(const std::string& path);

/// Header line "# lower=... upper=..." then x_1..x_d,value rows in offset order.
template <class T>
void write_grid_csv(const std::string& path, const Grid<T>& g);

/// Arrival times as x_1..x_d,t with an empty field for unreached sites.
void write_arrival_csv(const std::string& path, const Grid<std::uint32_t>& arrival);

}  // namespace xsand

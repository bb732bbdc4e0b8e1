#include "xsand/snapshot.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace xsand {

namespace {

Window slice_2d(const Window& w) {
  if (w.dim() < 2) throw std::invalid_argument("rendering needs d >= 2");
  return Window(Point{w.lower()[0], w.lower()[1]}, Point{w.upper()[0], w.upper()[1]});
}

Point lift(const Point& p2, int dim) {
  Point x(dim);
  x[0] = p2[0];
  x[1] = p2[1];
  return x;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

void write_point(std::ostream& os, const Point& x) {
  for (int i = 0; i < x.dim(); ++i) os << x[i] << ',';
}

}  // namespace

std::uint8_t sandpile_gray(std::uint64_t odometer, std::int64_t chips) {
  if (odometer == 0) return 255;
  static constexpr std::uint8_t kLevels[] = {224, 176, 128, 64, 0};
  if (chips <= 0) return kLevels[0];
  return kLevels[chips >= 4 ? 4 : chips];
}

Image render_mask(const Window& w, const std::function<bool(const Point&)>& on) {
  const Window s = slice_2d(w);
  Image img;
  img.width = static_cast<int>(s.extent(0));
  img.height = static_cast<int>(s.extent(1));
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 255);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const Point p{s.lower()[0] + c, s.upper()[1] - r};
      if (on(lift(p, w.dim()))) img.pixels[static_cast<std::size_t>(r) * img.width + c] = 0;
    }
  return img;
}

Image render_sandpile(const Sandpile& state, const Window& w) {
  const Window s = slice_2d(w);
  Image img;
  img.width = static_cast<int>(s.extent(0));
  img.height = static_cast<int>(s.extent(1));
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const Point x = lift(Point{s.lower()[0] + c, s.upper()[1] - r}, w.dim());
      img.pixels[static_cast<std::size_t>(r) * img.width + c] = sandpile_gray(state.odometer_at(x), state.chips_at(x));
    }
  return img;
}

void write_pgm(const std::string& path, const Image& img) {
  auto os = open_out(path, std::ios::out | std::ios::binary);
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw std::runtime_error("failed writing " + path);
}

Image read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string magic;
  int maxval = 0;
  Image img;
  is >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255) throw std::runtime_error(path + " is not an 8-bit P5 image");
  is.get();
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!is) throw std::runtime_error("truncated image " + path);
  return img;
}

template <class T>
void write_grid_csv(const std::string& path, const Grid<T>& g) {
  auto os = open_out(path, std::ios::out | std::ios::binary);
  const Window& w = g.window();
  os << "# lower=";
  for (int i = 0; i < w.dim(); ++i) os << (i ? ";" : "") << w.lower()[i];
  os << " upper=";
  for (int i = 0; i < w.dim(); ++i) os << (i ? ";" : "") << w.upper()[i];
  os << '\n';
  for (int i = 0; i < w.dim(); ++i) os << 'x' << i + 1 << ',';
  os << "value\n";
  std::size_t k = 0;
  for_each_point(w, [&](const Point& x) {
    write_point(os, x);
    os << +g.at_offset(k++) << '\n';
  });
}

template void write_grid_csv<std::int32_t>(const std::string&, const Grid<std::int32_t>&);
template void write_grid_csv<std::uint64_t>(const std::string&, const Grid<std::uint64_t>&);
template void write_grid_csv<std::uint32_t>(const std::string&, const Grid<std::uint32_t>&);

void write_arrival_csv(const std::string& path, const Grid<std::uint32_t>& arrival) {
  auto os = open_out(path, std::ios::out | std::ios::binary);
  const Window& w = arrival.window();
  for (int i = 0; i < w.dim(); ++i) os << 'x' << i + 1 << ',';
  os << "t\n";
  std::size_t k = 0;
  for_each_point(w, [&](const Point& x) {
    write_point(os, x);
    const std::uint32_t t = arrival.at_offset(k++);
    if (t != kUnreached) os << t;
    os << '\n';
  });
}

}  // namespace xsand

#include "xsand/lattice.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace xsand {

Point::Point(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("point dimension out of range: " + std::to_string(dim));
}

Point::Point(std::initializer_list<Coord> coords) : dim_(static_cast<int>(coords.size())) {
  if (dim_ < 1 || dim_ > kMaxDim) throw std::invalid_argument("point dimension out of range");
  std::copy(coords.begin(), coords.end(), c_.begin());
}

Point Point::unit(int dim, int axis, Coord scale) {
  Point p(dim);
  p[axis] = scale;
  return p;
}

Point Point::filled(int dim, Coord value) {
  Point p(dim);
  for (int i = 0; i < dim; ++i) p[i] = value;
  return p;
}

Coord Point::l1() const {
  Coord s = 0;
  for (int i = 0; i < dim_; ++i) s += c_[i] < 0 ? -c_[i] : c_[i];
  return s;
}

Coord Point::linf() const {
  Coord s = 0;
  for (int i = 0; i < dim_; ++i) s = std::max(s, c_[i] < 0 ? -c_[i] : c_[i]);
  return s;
}

Point& Point::operator+=(const Point& o) {
  if (o.dim_ != dim_) throw std::invalid_argument("point dimension mismatch");
  for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
  return *this;
}

Point& Point::operator-=(const Point& o) {
  if (o.dim_ != dim_) throw std::invalid_argument("point dimension mismatch");
  for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
  return *this;
}

Point& Point::operator*=(Coord s) {
  for (int i = 0; i < dim_; ++i) c_[i] *= s;
  return *this;
}

bool operator==(const Point& a, const Point& b) {
  if (a.dim_ != b.dim_) return false;
  for (int i = 0; i < a.dim_; ++i)
    if (a.c_[i] != b.c_[i]) return false;
  return true;
}

bool operator<(const Point& a, const Point& b) {
  if (a.dim_ != b.dim_) return a.dim_ < b.dim_;
  for (int i = 0; i < a.dim_; ++i)
    if (a.c_[i] != b.c_[i]) return a.c_[i] < b.c_[i];
  return false;
}

std::string Point::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Point& p) {
  os << '(';
  for (int i = 0; i < p.dim(); ++i) {
    if (i) os << ',';
    os << p[i];
  }
  return os << ')';
}

std::size_t PointHash::operator()(const Point& p) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(p.dim());
  for (int i = 0; i < p.dim(); ++i) {
    h ^= static_cast<std::uint64_t>(p[i]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

Window::Window(Point lower, Point upper) : lower_(lower), upper_(upper) {
  if (lower.dim() != upper.dim()) throw std::invalid_argument("window corner dimensions differ");
  for (int i = 0; i < lower.dim(); ++i)
    if (lower[i] > upper[i]) throw std::invalid_argument("window lower corner exceeds upper corner");
}

Window Window::centered(const Point& center, Coord radius) {
  if (radius < 0) throw std::invalid_argument("negative window radius");
  return Window(center - Point::filled(center.dim(), radius), center + Point::filled(center.dim(), radius));
}

Window Window::cube(const Point& offset, Coord side) {
  if (side < 1) throw std::invalid_argument("cube side must be positive");
  return Window(offset + Point::filled(offset.dim(), 1), offset + Point::filled(offset.dim(), side));
}

std::uint64_t Window::volume() const {
  if (lower_.dim() == 0) return 0;
  std::uint64_t v = 1;
  for (int i = 0; i < dim(); ++i) {
    const auto e = static_cast<std::uint64_t>(extent(i));
    if (e != 0 && v > (std::uint64_t{1} << 62) / e) throw ResourceError("window volume overflows");
    v *= e;
  }
  return v;
}

bool Window::contains(const Point& x) const {
  if (x.dim() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (x[i] < lower_[i] || x[i] > upper_[i]) return false;
  return true;
}

bool Window::on_inner_boundary(const Point& x) const {
  if (!contains(x)) return false;
  for (int i = 0; i < dim(); ++i)
    if (x[i] == lower_[i] || x[i] == upper_[i]) return true;
  return false;
}

Window Window::dilated(Coord r) const {
  return Window(lower_ - Point::filled(dim(), r), upper_ + Point::filled(dim(), r));
}

Window Window::intersect(const Window& o) const {
  Window w;
  w.lower_ = lower_;
  w.upper_ = upper_;
  for (int i = 0; i < dim(); ++i) {
    w.lower_[i] = std::max(lower_[i], o.lower_[i]);
    w.upper_[i] = std::min(upper_[i], o.upper_[i]);
  }
  return w;
}

bool Window::empty() const {
  if (lower_.dim() == 0) return true;
  for (int i = 0; i < dim(); ++i)
    if (lower_[i] > upper_[i]) return true;
  return false;
}

std::size_t Window::offset_of(const Point& x) const {
  std::size_t off = 0;
  std::size_t stride = 1;
  for (int i = 0; i < dim(); ++i) {
    off += static_cast<std::size_t>(x[i] - lower_[i]) * stride;
    stride *= static_cast<std::size_t>(extent(i));
  }
  return off;
}

Point Window::point_at(std::size_t offset) const {
  Point x(dim());
  for (int i = 0; i < dim(); ++i) {
    const auto e = static_cast<std::size_t>(extent(i));
    x[i] = lower_[i] + static_cast<Coord>(offset % e);
    offset /= e;
  }
  return x;
}

Coord Window::depth(const Point& x) const {
  Coord d = std::numeric_limits<Coord>::max();
  for (int i = 0; i < dim(); ++i) d = std::min({d, x[i] - lower_[i], upper_[i] - x[i]});
  return d;
}

std::ostream& operator<<(std::ostream& os, const Window& w) { return os << '[' << w.lower() << ',' << w.upper() << ']'; }

namespace {
std::atomic<std::uint64_t> g_budget{std::uint64_t{3} << 30};
}

std::uint64_t memory_budget_bytes() { return g_budget.load(); }
void set_memory_budget_bytes(std::uint64_t bytes) { g_budget.store(bytes); }

void check_allocation(std::uint64_t sites, std::uint64_t bytes_per_site, const char* what) {
  if (bytes_per_site != 0 && sites > memory_budget_bytes() / bytes_per_site) {
    throw ResourceError(std::string(what) + " of " + std::to_string(sites) + " sites exceeds the memory budget");
  }
}

}  // namespace xsand

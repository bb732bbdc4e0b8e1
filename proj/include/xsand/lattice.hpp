#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xsand {

inline constexpr int kMaxDim = 8;

using Coord = std::int64_t;

/// Thrown when a requested window or grid would not fit the memory budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point of Z^d, 1 <= d <= kMaxDim.
class Point {
 public:
  Point() = default;
  explicit Point(int dim);
  Point(std::initializer_list<Coord> coords);

  static Point zeros(int dim) { return Point(dim); }
  static Point unit(int dim, int axis, Coord scale = 1);
  static Point filled(int dim, Coord value);

  int dim() const { return dim_; }
  Coord operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
  Coord& operator[](int i) { return c_[static_cast<std::size_t>(i)]; }

  Coord l1() const;
  Coord linf() const;

  Point& operator+=(const Point& o);
  Point& operator-=(const Point& o);
  Point& operator*=(Coord s);

  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator*(Point a, Coord s) { return a *= s; }
  friend Point operator*(Coord s, Point a) { return a *= s; }
  friend Point operator-(Point a) { return a *= -1; }

  friend bool operator==(const Point& a, const Point& b);
  friend bool operator<(const Point& a, const Point& b);  // lexicographic, for ordered containers

  std::string str() const;

 private:
  std::array<Coord, kMaxDim> c_{};
  int dim_ = 0;
};

std::ostream& operator<<(std::ostream& os, const Point& p);

struct PointHash {
  std::size_t operator()(const Point& p) const noexcept;
};

/// Axis-aligned box [lower, upper] of Z^d, both corners inclusive.
class Window {
 public:
  Window() = default;
  Window(Point lower, Point upper);

  /// The box [-radius, radius]^d translated to `center`.
  static Window centered(const Point& center, Coord radius);
  static Window centered(int dim, Coord radius) { return centered(Point::zeros(dim), radius); }
  /// Q_k shifted by `offset`: {offset + 1 <= x <= offset + k}.
  static Window cube(const Point& offset, Coord side);

  int dim() const { return lower_.dim(); }
  const Point& lower() const { return lower_; }
  const Point& upper() const { return upper_; }
  Coord extent(int axis) const { return upper_[axis] - lower_[axis] + 1; }
  std::uint64_t volume() const;

  bool contains(const Point& x) const;
  bool on_inner_boundary(const Point& x) const;  // in the box, adjacent to its complement
  Window dilated(Coord r) const;
  Window intersect(const Window& o) const;  // may be empty; check with empty()
  bool empty() const;

  /// Row-major position, axis 0 fastest.
  std::size_t offset_of(const Point& x) const;
  Point point_at(std::size_t offset) const;

  /// Distance from `x` (inside) to the complement, in L-infinity steps.
  Coord depth(const Point& x) const;

  friend bool operator==(const Window& a, const Window& b) {
    return a.lower_ == b.lower_ && a.upper_ == b.upper_;
  }

 private:
  Point lower_;
  Point upper_;
};

std::ostream& operator<<(std::ostream& os, const Window& w);

/// Bytes allowed for one dense allocation; windows above this raise ResourceError.
std::uint64_t memory_budget_bytes();
void set_memory_budget_bytes(std::uint64_t bytes);
void check_allocation(std::uint64_t sites, std::uint64_t bytes_per_site, const char* what);

/// Dense values over a window, axis 0 fastest.
template <class T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(Window w, T fill = T{}) : window_(std::move(w)) {
    check_allocation(window_.volume(), sizeof(T), "grid");
    data_.assign(static_cast<std::size_t>(window_.volume()), fill);
  }

  const Window& window() const { return window_; }
  std::size_t size() const { return data_.size(); }

  T& operator[](const Point& x) { return data_[window_.offset_of(x)]; }
  const T& operator[](const Point& x) const { return data_[window_.offset_of(x)]; }
  T& at_offset(std::size_t i) { return data_[i]; }
  const T& at_offset(std::size_t i) const { return data_[i]; }

  /// Value at x, or `outside` if x is not in the window.
  T get_or(const Point& x, T outside) const {
    return window_.contains(x) ? data_[window_.offset_of(x)] : outside;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.window_ == b.window_ && a.data_ == b.data_;
  }

 private:
  Window window_;
  std::vector<T> data_;
};

/// Visit every point of a window in offset order.
template <class F>
void for_each_point(const Window& w, F&& f) {
  if (w.empty()) return;
  Point x = w.lower();
  const int d = w.dim();
  for (;;) {
    f(x);
    int axis = 0;
    while (axis < d) {
      if (x[axis] < w.upper()[axis]) {
        ++x[axis];
        break;
      }
      x[axis] = w.lower()[axis];
      ++axis;
    }
    if (axis == d) return;
  }
}

/// Floor division for possibly negative numerators.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

constexpr std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

}  // namespace xsand

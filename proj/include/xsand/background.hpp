#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xsand/lattice.hpp"

namespace xsand {

enum class Family {
  Constant,
  BernoulliTwoPoint,
  BernoulliCloud,
  RandomCheckerboard,
  PeriodicTiling,
  Counterexample2D,
  CounterexampleStacked,
};

std::string to_string(Family f);
Family family_from_string(const std::string& name);

/// A tile of a checkerboard: values over the box {0 <= x < sides}, axis 0 fastest.
struct Tile {
  std::vector<int> values;
};

/// Family-specific parameters. Only the fields relevant to the family are read.
struct BackgroundParams {
  int constant = 0;                 // Constant
  int a = 0, b = 0;                 // BernoulliTwoPoint: b with probability p, else a
  double p = 0.0;                   // BernoulliTwoPoint, BernoulliCloud
  std::vector<Point> cloud;         // BernoulliCloud point set S
  Point box;                        // checkerboard / periodic tile sides
  std::vector<Tile> tiles;          // RandomCheckerboard tiles, PeriodicTiling uses tiles[0]
  std::vector<double> tile_probs;   // RandomCheckerboard probabilities (sum to 1)
  double zeta2_prob = 0.0;          // Counterexample families: chance a tile box is zeta_2
};

/// A deterministic, coordinate-addressable background field eta: Z^d -> Z.
///
/// Values are a pure function of (spec, x). Random families draw through a
/// counter-based hash of (seed, family tag, owning index), so the field can be
/// sampled lazily anywhere on the lattice in any order.
class BackgroundSpec {
 public:
  BackgroundSpec() = default;

  static BackgroundSpec constant(int dim, int value);
  static BackgroundSpec bernoulli(int dim, int a, int b, double p, std::uint64_t seed);
  /// eta = 2d-1 on every shifted copy S + j with U_j < p, else 2d-2.
  static BackgroundSpec cloud(int dim, std::vector<Point> points, double p, std::uint64_t seed);
  static BackgroundSpec checkerboard(Point box, std::vector<Tile> tiles, std::vector<double> probs, std::uint64_t seed);
  static BackgroundSpec periodic(Point box, Tile tile);
  /// Tiling of the 4x4 boxes zeta_1, zeta_2 (chance zeta2_prob each box).
  static BackgroundSpec counterexample(double zeta2_prob = 0.0, std::uint64_t seed = 0);
  /// 2(d-2) + the two-dimensional counterexample evaluated at (x_1, x_2).
  static BackgroundSpec counterexample_stacked(int dim, double zeta2_prob = 0.0, std::uint64_t seed = 0);

  Family family() const { return family_; }
  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const BackgroundParams& params() const { return params_; }
  int eta_min() const { return eta_min_; }
  int eta_max() const { return eta_max_; }
  int threshold() const { return 2 * dim_; }

  /// Copy with a different seed.
  BackgroundSpec with_seed(std::uint64_t seed) const;

  /// Value at x. Throws std::invalid_argument on dimension mismatch.
  int at(const Point& x) const;

  /// Range of dependence K: eta(x), eta(y) independent when |x - y|_1 > K.
  Coord dependence_range() const;
  /// A common period along every axis for periodic families, 0 when not periodic.
  Coord period() const;
  static Coord period_of_box(const Point& box);

  nlohmann::json to_json() const;
  static BackgroundSpec from_json(const nlohmann::json& j);

  /// Tile values given as matrices: first row is the highest x_2,
  /// left-to-right is increasing x_1.
  static Tile tile_from_rows(const std::vector<std::vector<int>>& rows_top_down);

  static const Tile& zeta1();
  static const Tile& zeta2();

  friend bool operator==(const BackgroundSpec& a, const BackgroundSpec& b) { return a.to_json() == b.to_json(); }

 private:
  void finalize();
  int checkerboard_at(const Point& x, std::uint64_t tag) const;
  int counterexample2d_at(Coord x1, Coord x2) const;

  Family family_ = Family::Constant;
  int dim_ = 0;
  std::uint64_t seed_ = 0;
  BackgroundParams params_;
  int eta_min_ = 0;
  int eta_max_ = 0;
};

int background_at(const BackgroundSpec& spec, const Point& x);
Grid<int> fill_window(const BackgroundSpec& spec, const Window& w);

/// Counter-based hashing used by every random family.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_point(std::uint64_t seed, std::uint64_t tag, const Point& x);
double to_unit(std::uint64_t h);

}  // namespace xsand

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xsand/analysis.hpp"
#include "xsand/background.hpp"
#include "xsand/engine.hpp"
#include "xsand/snapshot.hpp"

namespace xsand {

/// Primitive integer directions with |x|_inf <= m for the smallest m giving at
/// least `min_count` of them. Sorted by angle in 2D, lexicographically otherwise.
std::vector<Point> direction_fan(int dim, int min_count);

struct SpeedConfig {
  std::uint64_t n_budget = 1 << 16;  // chip budget of the threshold search
  Coord max_radius = 2048;           // largest window tried for one arrival field
  int workers = 1;
};

/// T(n x) / n for one seed, or nullopt when no explosion was found.
struct SpeedSample {
  Point direction;
  Coord scale = 0;
  std::uint64_t seed = 0;
  std::optional<double> ratio;
};

/// First-toppling times of the explosion seeded with the least exploding n at the
/// origin, on a window large enough that every target is reached before the
/// frontier (the radius is doubled until that holds or max_radius is exceeded).
struct SeededArrival {
  std::uint64_t chips = 0;
  Coord radius = 0;
  Grid<std::uint32_t> t;
};
std::optional<SeededArrival> seeded_arrival(const BackgroundSpec& spec, const std::vector<Point>& targets,
                                            const SpeedConfig& cfg = {});

struct DirectionSpeed {
  Point direction;
  std::vector<SpeedSample> samples;
  int skipped_seeds = 0;  // no threshold within budget
};
DirectionSpeed estimate_direction_speed(const BackgroundSpec& spec, const Point& direction,
                                        const std::vector<Coord>& scales, const std::vector<std::uint64_t>& seeds,
                                        const SpeedConfig& cfg = {});

/// T_hat(3 + 8n) / (3 + 8n) on the width-4 counterexample cylinder, n = 1..periods.
std::vector<SpeedSample> cylinder_lower_bound_ratios(int periods);

/// A raster of a star-shaped set in the plane: pixel (i, j) stands for the
/// point (i, j) / scale, |i|, |j| <= half.
struct BallRaster {
  double scale = 1.0;
  Coord half = 0;
  std::vector<std::uint8_t> inside;  // row-major, i fastest, j from -half

  bool at(Coord i, Coord j) const;
  bool contains(double y1, double y2) const;  // nearest pixel
  double area() const;
  Image image() const;  // inside is black, highest j on top

  static BallRaster l1_ball(double scale);
  /// {y : norm(y) <= 1}
  static BallRaster from_norm(const std::function<double(double, double)>& norm, double scale, Coord half);
  /// {y : T(scale * y) <= scale} from a 2D (slice of an) arrival grid.
  static BallRaster from_arrival(const Grid<std::uint32_t>& t, double scale);
  /// Same from several arrival grids, using the mean arrival (unreached counts as never).
  static BallRaster from_mean_arrival(const std::vector<Grid<std::uint32_t>>& ts, double scale);
};

struct ShapeEstimate {
  BackgroundSpec spec;
  std::vector<Point> directions;
  std::vector<Coord> scales;
  std::vector<SpeedSample> samples;
  std::vector<double> n_hat;     // per direction, mean ratio at the largest scale
  std::vector<double> n_hat_se;  // standard error across seeds
  std::vector<int> successes;    // seeds with an explosion, per direction
  int skipped_seeds = 0;
  BallRaster ball;  // {N_hat <= 1}, polygon through the fan (x_3 = ... = 0 slice)
  double convexity_score = 0.0;
  double symmetry_score = 0.0;
  std::optional<double> symmetry_pvalue;
  double scale_spread = 0.0;  // largest relative spread of per-scale means
  bool converged = false;     // two largest scales agree within 2 standard errors
  std::vector<std::string> flags;
  /// N_hat extended 1-homogeneously; nullopt off the fan.
  std::optional<double> norm(const Point& x) const;
  nlohmann::json to_json() const;
  void write_speed_csv(const std::string& path) const;
};

struct ShapeConfig {
  SpeedConfig speed;
  double raster_scale = 100.0;
  int permutation_rounds = 999;
  std::uint64_t permutation_seed = 7;
};

ShapeEstimate estimate_limit_shape(const BackgroundSpec& spec, int direction_count, const std::vector<Coord>& scales,
                                   const std::vector<std::uint64_t>& seeds, const ShapeConfig& cfg = {});

/// |{T <= t} / t  symmetric-difference  ball| / |ball|, counted on lattice sites
/// of the 2D slice.
double support_ball_difference(const Grid<std::uint32_t>& arrival, std::int64_t t, const BallRaster& ball);
/// Same for an arbitrary support predicate on a window.
double support_ball_difference(const std::function<bool(const Point&)>& support, const Window& window,
                               std::int64_t t, const BallRaster& ball);
/// Per-time metric for the explosion of `spec` (seeded with its threshold at the origin).
std::vector<double> shape_convergence_metric(const BackgroundSpec& spec, const std::vector<std::int64_t>& times,
                                             const BallRaster& ball, const SpeedConfig& cfg = {});

/// Gnuplot script plotting a speed CSV (direction, n, seed, ratio).
void write_gnuplot_script(const std::string& path, const std::string& csv_name, const std::string& title);

// ---------------------------------------------------------------- counterexample

/// The width-4 cylinder of the counterexample: modified tiles with the seeded
/// first block, `length` columns.
std::pair<Grid<int>, Grid<std::uint64_t>> counterexample_cylinder(Coord length);

struct CheckResult {
  bool ok = true;
  std::string first_failure;
  nlohmann::json detail;
};

struct CounterexampleReport {
  CheckResult arrival_bounds;    // T(4n+1) in [4n+1, 4n+4]
  CheckResult cylinder;          // T_hat(3+8n) = 12n and the 12-step reset
  CheckResult stacked;           // v_t(x) <= v_t^2D(x_1, x_2)
  CheckResult explosive;         // toppling transcript to the modified tiles
  bool ok() const { return arrival_bounds.ok && cylinder.ok && stacked.ok && explosive.ok; }
  nlohmann::json to_json() const;
};

struct CounterexampleConfig {
  Coord n_max = 99;
  int cylinder_periods = 50;
  std::vector<int> dimensions{2, 3};
  Coord stacked_radius = 14;
  int stacked_samples = 10;  // random (x, t) pairs reported per run; all pairs are checked
  std::uint64_t seed = 1;
};
CounterexampleReport verify_counterexample(const CounterexampleConfig& cfg);

}  // namespace xsand

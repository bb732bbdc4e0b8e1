#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xsand/background.hpp"
#include "xsand/engine.hpp"
#include "xsand/waves.hpp"

namespace xsand {

/// Chips as a function of the site; lets predicates run on modified configurations.
using ChipField = std::function<std::int64_t(const Point&)>;
ChipField field_of(const BackgroundSpec& spec);
ChipField field_of(const Grid<int>& values, std::int64_t outside = 0);

// ---------------------------------------------------------------- crossing times

/// Line through `cube` along `axis` with the other coordinates taken from z.
std::vector<Point> crossing_line(const Window& cube, int axis, const Point& z);

/// Base points z (one per distinct line) with the line inside the closed cube.
std::vector<Point> line_bases(const Window& cube, int axis);

/// Run the {cube^c ∪ line}-frozen toppling with w_0 = 1 on the line and return the
/// first t >= 1 at which every site of the cube has fired, or nullopt when that
/// does not happen within `cap_steps` steps.
std::optional<std::int64_t> crossing_time(const ChipField& eta, const Window& cube, int axis, const Point& z,
                                          std::int64_t cap_steps);
/// The cube Q_k shifted by `offset`; capped at k^d + 1.
std::optional<std::int64_t> crossing_time(const BackgroundSpec& spec, Coord k, int axis, const Point& z,
                                          const Point& offset);

struct CrossingReport {
  Coord k = 0;
  Point offset;
  struct Entry {
    int axis;
    Point z;
    std::optional<std::int64_t> time;
  };
  std::vector<Entry> entries;
  std::optional<std::int64_t> max_time;  // nullopt if some line failed
  bool good = false;                     // max_time <= k^d
  nlohmann::json to_json() const;
};
CrossingReport crossing_report(const BackgroundSpec& spec, Coord k, const Point& offset);

struct GoodCubeMap {
  Coord k = 0;
  Window macro;  // macroscopic indices j; cube j is Q_k shifted by k*j
  Grid<std::uint8_t> good;
  Grid<std::int32_t> component;  // -1 for bad cubes
  std::vector<std::uint64_t> component_sizes;
  std::int32_t largest = -1;
  bool largest_spans = false;  // touches every face of the macro window
  struct Distance {
    Point a, b;
    std::int64_t l1;
    std::int64_t chemical;  // -1 when disconnected
  };
  std::vector<Distance> distances;
  nlohmann::json to_json() const;
};
GoodCubeMap good_cube_map(const BackgroundSpec& spec, Coord k, const Window& macro, std::size_t distance_samples = 64,
                          std::uint64_t sample_seed = 1);

// ---------------------------------------------------------------- box predicates

/// Face-seeded crossing: seed w_0 = 1 on the external face (axis, side) and
/// require every site of the box to have fired by t = |box|.
bool is_box_crossing(const ChipField& eta, const Window& box, int axis, bool upper_side = false);
bool is_box_crossing_all(const ChipField& eta, const Window& box);  // every direction, both faces
/// Every line seeded separately fills the box within sum_i k_i steps. Boxes with
/// a side above 64 are checked on a seeded subsample of `sample_count` lines.
struct StrongCrossing {
  bool holds = false;
  std::size_t lines_checked = 0;
  std::size_t lines_total = 0;
  bool subsampled = false;
};
StrongCrossing strong_box_crossing(const ChipField& eta, const Window& box, std::size_t sample_count = 4096,
                                   std::uint64_t seed = 1);
bool is_strongly_box_crossing(const ChipField& eta, const Window& box);

/// Firing the outer boundary of `box` makes every site fire within |box| steps.
bool is_recurrent_on(const ChipField& eta, const Window& box);

/// Path-filling check: the path-frozen run with w_0 = 1 on the path; returns the
/// first t with w_t >= 1 on the bounding rectangle, or nullopt.
std::optional<std::int64_t> path_fill_time(const ChipField& eta, const std::vector<Point>& path, std::int64_t budget);

// ---------------------------------------------------------------- bootstrap coupling

/// Once-only toppling from u_0 = 0 on the box, outside frozen at 0.
bool spanned_by_toppling(const Grid<int>& thresholds);
/// Direct d-neighbour bootstrap infection (value 2d = initially infected).
bool spanned_by_infection(const Grid<int>& thresholds);
/// Runs both and throws std::logic_error if they disagree.
bool bootstrap_internally_spanned(const Grid<int>& thresholds);
/// Field on Q_n: 2d with probability p, else d (counter-based hash of the seed).
Grid<int> bootstrap_field(int dim, Coord n, double p, std::uint64_t seed);

struct SpanningPoint {
  Coord n;
  int trials;
  int successes;
  double fraction() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};
std::vector<SpanningPoint> spanning_curve(int dim, double p, const std::vector<Coord>& sizes, int trials,
                                          std::uint64_t seed);
void write_spanning_csv(const std::string& path, const std::vector<SpanningPoint>& curve);

// ---------------------------------------------------------------- dimensional reduction

struct ReductionCheck {
  bool odometers_equal = true;
  bool chips_relation = true;
  std::int64_t steps = 0;
  std::string first_mismatch;
  bool ok() const { return odometers_equal && chips_relation; }
};
/// `eta` on Q_n^(d) (values in {d, 2d-1}); face index f in [0, 2d): axis f mod d,
/// lower face for f < d. Runs the constrained d- and (d-1)-dimensional processes
/// side by side.
ReductionCheck dimensional_reduction_check(const Grid<int>& eta, int face);

// ---------------------------------------------------------------- explosion threshold

struct ExplosionConfig {
  Coord radius = 64;  // frontier radius R
  std::uint64_t n_budget = 1 << 20;
  bool scale_window_with_n = true;  // radius at least 2 ceil(n^(1/d)) + 2
  std::optional<Point> source;      // default: the origin
  // Once the exact run has spread this far (0: automatic), a capped continuation
  // from its current state is tried; it fires every site at most once more and is
  // dominated by the exact run, so reaching the frontier certifies an explosion.
  bool use_probe = true;
  Coord probe_start_radius = 0;
  Coord probe_halfwidth = 24;  // d >= 3: the continuation lives on a tube along +e_1
  bool want_certificate = false;
  int workers = 1;
};

struct ExplosionCertificate {
  std::string route;          // description of the construction used
  std::vector<Window> boxes;  // sub-boxes that were checked
  bool strongly_box_crossing = false;
  bool recurrent = false;
  bool origin_box_fires = false;
  bool valid() const { return strongly_box_crossing && recurrent && origin_box_fires; }
  nlohmann::json to_json() const;
};

struct ExplosionThreshold {
  std::optional<std::uint64_t> m;  // least n with a frontier hit
  bool minimal_certified = false;  // m - 1 verified to stabilize (or m = 1)
  std::optional<std::uint64_t> upper_bound;  // smallest n shown to explode
  int exact_runs = 0;
  int probe_runs = 0;
  std::vector<std::string> notes;
  std::optional<ExplosionCertificate> certificate;
  nlohmann::json to_json() const;
};

Coord explosion_radius(const ExplosionConfig& cfg, int dim, std::uint64_t n);

enum class Verdict { Explodes, Stabilizes, Unknown };
const char* to_string(Verdict v);

struct ExplosionRun {
  Verdict verdict = Verdict::Unknown;
  bool by_probe = false;  // decided by a capped continuation
  int probes = 0;
  std::int64_t steps = 0;
  std::string note;
};
/// Does eta + n delta_source reach the frontier of the radius explosion_radius(n)
/// window? Uses the exact run, with capped continuations when enabled.
ExplosionRun explodes(const BackgroundSpec& spec, std::uint64_t n, const ExplosionConfig& cfg);

ExplosionThreshold explosion_threshold(const BackgroundSpec& spec, const ExplosionConfig& cfg);

/// Counterexample explosion transcript: eta' = eta + Δ(1{eta >= 2d-2} + origin block).
Grid<int> modified_counterexample(const BackgroundSpec& spec, const Window& w);
/// Criteria certificate for checkerboard-type families seeded with n chips at the
/// origin; nullopt for families the construction does not cover.
std::optional<ExplosionCertificate> explosion_certificate(const BackgroundSpec& spec, std::uint64_t n);

// ---------------------------------------------------------------- arrival fields

/// T (explosion, seeded with M_eta found on `window`), T_hat (last wave) or
/// T_tilde on every site of `window` (T_tilde is expensive; use small windows).
ArrivalField arrival_field(const BackgroundSpec& spec, ArrivalKind kind, const Point& z, const Window& window,
                           std::uint64_t n_budget = 1 << 16, int workers = 1);

}  // namespace xsand

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "xsand/background.hpp"
#include "xsand/engine.hpp"

namespace xsand {

struct WaveConfig {
  Coord radius = 64;  // frontier radius around the source
  std::int64_t step_budget = std::numeric_limits<std::int64_t>::max();
  bool track_arrival = false;
  // Enlarge the window with n so a stabilizing wave on a robust background never
  // reaches the frontier: its support radius is about sqrt(2d n).
  bool scale_window_with_n = true;
  int workers = 1;
};

/// Window radius actually used for an n-wave.
Coord wave_radius(const WaveConfig& cfg, int dim, std::uint64_t n);

/// {z}-frozen run with the source odometer held at n; all other sites use the
/// floor recursion.
struct WaveRun {
  Point z;
  std::uint64_t n = 0;
  StabilizeOutcome outcome;
  Sandpile state;
  bool stabilized() const { return outcome.kind == OutcomeKind::Stabilized; }
  bool exploded() const { return outcome.kind == OutcomeKind::FrontierHit; }
  nlohmann::json summary() const;
};

WaveRun run_n_wave(const BackgroundSpec& spec, const Point& z, std::uint64_t n, const WaveConfig& cfg);

struct WaveThreshold {
  std::optional<std::uint64_t> m_hat;  // empty: no exploding wave up to n_budget
  bool verified = false;               // (m_hat - 1)-wave stabilized, m_hat-wave hit the frontier
  int runs = 0;
  std::vector<std::string> warnings;
};

/// Least n whose wave reaches the frontier: doubling from n = 1, then bisection.
WaveThreshold last_wave_threshold(const BackgroundSpec& spec, const Point& z, const WaveConfig& cfg,
                                  std::uint64_t n_budget);

struct PenultimateCluster {
  Point z;
  std::uint64_t m_hat = 0;
  std::vector<Point> sites;  // sorted
  Window bbox;
  std::vector<Point> support;  // {u~ > 0}, sorted
  bool contains(const Point& x) const;
  /// Support of u~ is a box and the cluster is {z} plus its lattice neighbours.
  bool is_rectangle_dilation() const;
};

/// P(z) = {z} and every site adjacent to the support of the penultimate wave.
std::optional<PenultimateCluster> penultimate_cluster(const BackgroundSpec& spec, const Point& z,
                                                      const WaveConfig& cfg, std::uint64_t n_budget);

/// Per-background memo of penultimate clusters keyed by site.
class ClusterCache {
 public:
  ClusterCache(BackgroundSpec spec, WaveConfig cfg, std::uint64_t n_budget)
      : spec_(std::move(spec)), cfg_(cfg), n_budget_(n_budget) {}
  const std::optional<PenultimateCluster>& get(const Point& x);
  const BackgroundSpec& spec() const { return spec_; }
  std::size_t size() const { return cache_.size(); }

 private:
  BackgroundSpec spec_;
  WaveConfig cfg_;
  std::uint64_t n_budget_;
  std::unordered_map<Point, std::optional<PenultimateCluster>, PointHash> cache_;
};

enum class ArrivalKind { Explosion, LastWave, PenultimateCluster };
const char* to_string(ArrivalKind k);

struct ArrivalField {
  ArrivalKind kind = ArrivalKind::Explosion;
  Point source;
  std::uint64_t n = 0;  // chips (explosion) or wave size
  Grid<std::uint32_t> t;  // kUnreached when not reached before the frontier
  std::int64_t frontier_time = -1;  // -1 if the run stabilized
  bool source_in_cluster = false;   // T~ only: some P(x) contained the source
  std::uint32_t at(const Point& x) const { return t.get_or(x, kUnreached); }
};

/// First-toppling times of s_0 = eta + n delta_z on `window` (run until the frontier
/// is hit; arrivals up to that moment are exact).
ArrivalField explosion_arrival(const BackgroundSpec& spec, const Point& z, std::uint64_t n, const Window& window,
                               int workers = 1);
/// Arrival times of the n-wave from z on `window`.
ArrivalField wave_arrival(const BackgroundSpec& spec, const Point& z, std::uint64_t n, const Window& window,
                          int workers = 1);
/// T~(s, x) for each x of `targets`, from a last-wave arrival field of s.
std::vector<std::uint32_t> cluster_arrival(const ArrivalField& last_wave, ClusterCache& cache,
                                           const std::vector<Point>& targets, bool* touched_source = nullptr);

}  // namespace xsand

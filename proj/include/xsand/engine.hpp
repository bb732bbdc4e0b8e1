#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "xsand/background.hpp"
#include "xsand/lattice.hpp"

namespace xsand {

enum class Topology {
  Open,      // chips leaving the window fall into an untracked sink
  Cylinder,  // d = 2, x_2 periodic with period extent(1), x_1 = lower edge reflecting, upper edge open
};

enum class Rule {
  Single,  // fire once per step when s >= 2d
  Floor,   // fire floor(s / 2d) times per step (literal floor recursion)
};

inline constexpr std::uint64_t kNoCap = std::numeric_limits<std::uint64_t>::max();
inline constexpr std::uint32_t kUnreached = 0;  // arrival sentinel

struct SiteSetup {
  std::int64_t chips = 0;    // s_0 before the seeded odometer is applied
  bool frozen = false;
  std::uint64_t w0 = 0;      // seeded odometer; must vanish off frozen sites
  std::uint64_t cap = kNoCap;
};

using SiteInit = std::function<SiteSetup(const Point&)>;

struct EngineOptions {
  Rule rule = Rule::Single;
  Topology topology = Topology::Open;
  bool track_arrival = false;
  bool stop_on_frontier = true;
  int workers = 1;
};

enum class OutcomeKind { Stabilized, BudgetExceeded, FrontierHit };

struct StabilizeOutcome {
  OutcomeKind kind = OutcomeKind::Stabilized;
  std::int64_t time = 0;  // fixed-point time, budget, or time of the frontier firing
  Point witness;          // frontier site for FrontierHit
  std::int64_t steps = 0;
};

const char* to_string(OutcomeKind k);

struct StepStats {
  std::size_t fired_sites = 0;
  std::uint64_t topplings = 0;
  bool frontier = false;
  Point witness;
};

/// Windowed sandpile state: chips s_t, odometer v_t, frozen mask, optional caps
/// and first-toppling times. The tracked window is padded by one halo layer that
/// acts as the sink; chips exported there are tallied.
///
/// A growing state allocates only a box around the seeds and enlarges it
/// whenever a site on its edge is about to fire, up to `max_window`.
class Sandpile {
 public:
  Sandpile() = default;
  Sandpile(const Window& window, SiteInit init, EngineOptions opt = {});
  static Sandpile growing(const Window& max_window, const Window& initial, SiteInit init, EngineOptions opt = {});

  int dim() const { return dim_; }
  std::int64_t t() const { return t_; }
  const Window& window() const { return max_window_; }
  const Window& allocated() const { return alloc_; }
  const EngineOptions& options() const { return opt_; }
  int threshold() const { return 2 * dim_; }

  /// Advance one parallel step. Returns what fired.
  StepStats step();
  /// Iterate step() until fixed point, budget, or frontier.
  StabilizeOutcome run(std::int64_t step_budget);

  std::int64_t chips_at(const Point& x) const;
  std::uint64_t odometer_at(const Point& x) const;
  std::uint32_t arrival_at(const Point& x) const;  // kUnreached if never positive
  bool frozen_at(const Point& x) const;

  Grid<std::int32_t> chips(const Window& w) const;
  Grid<std::uint64_t> odometer(const Window& w) const;
  Grid<std::uint32_t> arrival(const Window& w) const;
  Grid<std::int32_t> chips() const { return chips(alloc_); }
  Grid<std::uint64_t> odometer() const { return odometer(alloc_); }
  Grid<std::uint32_t> arrival() const { return arrival(alloc_); }

  /// Bounding box of {v > 0} over non-frozen sites; empty optional if none.
  std::optional<Window> support_box() const;
  std::uint64_t support_size() const;
  std::uint64_t total_topplings() const { return topplings_; }

  /// Chips on tracked sites plus chips exported to the sink.
  std::int64_t tracked_chips() const;
  std::int64_t exported_chips() const;

  /// Full scan: true when no free site is unstable.
  bool is_stable_scan() const;

  void set_workers(int w) { opt_.workers = w; }

 private:
  enum : std::uint8_t { kFrozen = 1, kHalo = 2, kEdge = 4, kGrow = 8 };

  void allocate(const Window& alloc);
  void rebuild(const Window& new_alloc);
  void build_cylinder_table();
  std::size_t index_of(const Point& x) const;  // x inside padded window
  bool in_padded(const Point& x) const { return padded_.contains(x); }
  void decide();
  void scatter();
  template <bool kCyl>
  void scatter_range(std::size_t lo, std::size_t hi, bool atomic);
  Window grown(const Window& a) const;

  int dim_ = 0;
  EngineOptions opt_;
  SiteInit init_;
  Window max_window_, alloc_, padded_;
  std::vector<std::int64_t> stride_;
  std::vector<std::int32_t> s_;
  std::vector<std::uint64_t> v_;
  std::vector<std::uint8_t> flags_;
  std::vector<std::uint64_t> cap_;
  std::vector<std::uint32_t> arrival_;
  std::vector<std::uint32_t> nbr_;  // cylinder only: 4 neighbor slots per site
  std::vector<std::uint32_t> stamp_;
  std::uint32_t stamp_value_ = 0;
  std::vector<std::uint32_t> active_;
  std::vector<std::uint32_t> fires_;
  std::vector<std::uint32_t> counts_;  // Floor rule firing counts, parallel to fires_
  std::int64_t t_ = 0;
  std::uint64_t topplings_ = 0;
  bool has_caps_ = false;
};

/// s_0 = eta + extra * delta_source, nothing frozen.
SiteInit background_init(const BackgroundSpec& spec, const Point& source, std::int64_t extra);

/// Smallest centered window on which `steps` steps from a source are exact
/// (the toppled set grows by at most one lattice step per parallel step).
Window exact_window(const Point& center, std::int64_t steps);

StabilizeOutcome stabilize(Sandpile& state, std::int64_t step_budget);

/// S-frozen parallel toppling of a background on a window.
struct FrozenRun {
  StabilizeOutcome outcome;
  Sandpile state;
};
FrozenRun frozen_run(const BackgroundSpec& spec, const std::function<bool(const Point&)>& frozen,
                     const std::function<std::uint64_t(const Point&)>& w0, const Window& window,
                     std::int64_t step_budget, EngineOptions opt = {});

/// Topples one unstable site at a time in a seeded random order. Independent of
/// the parallel kernel. Returns nullopt when `topple_budget` is exhausted.
std::optional<Grid<std::uint64_t>> sequential_oracle(const Window& window, const SiteInit& init,
                                                     std::uint64_t fire_order_seed,
                                                     std::uint64_t topple_budget = 100'000'000);

/// One frame of a cylinder run.
struct CylinderFrame {
  Grid<std::int32_t> chips;
  Grid<std::uint64_t> odometer;
};

struct CylinderRun {
  std::vector<CylinderFrame> frames;  // frames[t] = (s_t, w_t)
  std::vector<std::size_t> fired_per_step;
  std::optional<std::int64_t> period;   // time period of the front configuration
  std::optional<std::int64_t> advance;  // horizontal shift per period
  Sandpile state;
};

/// Width-4 cylinder run: x_2 periodic, reflecting at x_1 = 0, caps on the odometer.
/// `zeta` are the chips before the seeded odometer w0 is applied; w0 sites are
/// held at their seeded value.
CylinderRun cylinder_run(const Grid<int>& zeta, const Grid<std::uint64_t>& w0, std::int64_t steps,
                         std::uint64_t cap = 1, bool keep_frames = true);

/// Period detection on a frame sequence: smallest P with an advance A such that
/// the configuration around the rightmost toppled column repeats after P steps,
/// shifted by A, for every t in [from, frames - P).
std::optional<std::pair<std::int64_t, std::int64_t>> detect_front_period(const std::vector<CylinderFrame>& frames,
                                                                         std::int64_t from);
/// True when the front repeats after `period` steps shifted by `advance` for every t >= from.
bool front_period_holds(const std::vector<CylinderFrame>& frames, std::int64_t period, std::int64_t advance,
                        std::int64_t from);

}  // namespace xsand

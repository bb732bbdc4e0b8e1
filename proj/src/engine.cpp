#include "xsand/engine.hpp"

#include <algorithm>
#include <atomic>
#include <random>
#include <stdexcept>
#include <thread>

namespace xsand {

const char* to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Stabilized:
      return "Stabilized";
    case OutcomeKind::BudgetExceeded:
      return "BudgetExceeded";
    case OutcomeKind::FrontierHit:
      return "FrontierHit";
  }
  return "?";
}

namespace {

constexpr std::size_t kParallelMin = 1 << 14;

template <class F>
void split_work(int workers, std::size_t n, F&& f) {
  if (workers <= 1 || n < kParallelMin) {
    f(0, std::size_t{0}, n);
    return;
  }
  const auto w = static_cast<std::size_t>(workers);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t lo = n * k / w, hi = n * (k + 1) / w;
    pool.emplace_back([&f, k, lo, hi] { f(static_cast<int>(k), lo, hi); });
  }
  for (auto& th : pool) th.join();
}

std::int32_t narrow_chips(std::int64_t c) {
  if (c > std::numeric_limits<std::int32_t>::max() || c < std::numeric_limits<std::int32_t>::min())
    throw std::invalid_argument("chip count does not fit in 32 bits");
  return static_cast<std::int32_t>(c);
}

}  // namespace

Sandpile::Sandpile(const Window& window, SiteInit init, EngineOptions opt)
    : dim_(window.dim()), opt_(opt), init_(std::move(init)), max_window_(window) {
  if (opt_.topology == Topology::Cylinder && dim_ != 2) throw std::invalid_argument("cylinder topology needs d = 2");
  allocate(window);
}

Sandpile Sandpile::growing(const Window& max_window, const Window& initial, SiteInit init, EngineOptions opt) {
  if (opt.topology != Topology::Open) throw std::invalid_argument("growing windows need open topology");
  Sandpile sp;
  sp.dim_ = max_window.dim();
  sp.opt_ = opt;
  sp.init_ = std::move(init);
  sp.max_window_ = max_window;
  Window a = initial.intersect(max_window);
  if (a.empty()) throw std::invalid_argument("initial window outside the maximal window");
  sp.allocate(a);
  return sp;
}

void Sandpile::allocate(const Window& alloc) {
  alloc_ = alloc;
  padded_ = alloc.dilated(1);
  const std::uint64_t n = padded_.volume();
  std::uint64_t per_site = 4 + 8 + 1 + 4 + 4;
  if (opt_.track_arrival) per_site += 4;
  if (opt_.topology == Topology::Cylinder) per_site += 16;
  check_allocation(n, per_site, "sandpile window");
  if (n >= std::numeric_limits<std::uint32_t>::max()) throw ResourceError("sandpile window exceeds 2^32 sites");

  stride_.assign(static_cast<std::size_t>(dim_), 1);
  for (int k = 1; k < dim_; ++k) stride_[k] = stride_[k - 1] * padded_.extent(k - 1);

  const auto sz = static_cast<std::size_t>(n);
  s_.assign(sz, 0);
  v_.assign(sz, 0);
  flags_.assign(sz, 0);
  stamp_.assign(sz, 0);
  stamp_value_ = 0;
  cap_.clear();
  has_caps_ = false;
  arrival_.assign(opt_.track_arrival ? sz : 0, kUnreached);
  if (opt_.topology == Topology::Cylinder) build_cylinder_table();

  const int thr = threshold();
  std::vector<std::uint32_t> seeded;
  std::size_t i = 0;
  for_each_point(padded_, [&](const Point& x) {
    if (!alloc_.contains(x)) {
      flags_[i] = kHalo;
    } else {
      const SiteSetup su = init_(x);
      s_[i] = narrow_chips(su.chips);
      if (su.frozen) flags_[i] |= kFrozen;
      if (su.w0 > 0) {
        if (!su.frozen) throw std::invalid_argument("seeded odometer on a non-frozen site " + x.str());
        v_[i] = su.w0;
        seeded.push_back(static_cast<std::uint32_t>(i));
        if (opt_.track_arrival) arrival_[i] = 1;
      }
      if (su.cap != kNoCap) {
        if (!has_caps_) {
          cap_.assign(sz, kNoCap);
          has_caps_ = true;
        }
        cap_[i] = su.cap;
      }
      bool edge = false, grow = false;
      for (int k = 0; k < dim_; ++k) {
        const bool lo = x[k] == alloc_.lower()[k], hi = x[k] == alloc_.upper()[k];
        if (!lo && !hi) continue;
        const bool lo_max = x[k] == max_window_.lower()[k], hi_max = x[k] == max_window_.upper()[k];
        if (opt_.topology == Topology::Cylinder) {
          if (k == 0 && hi && hi_max) edge = true;
          continue;
        }
        if ((lo && lo_max) || (hi && hi_max)) edge = true;
        if ((lo && !lo_max) || (hi && !hi_max)) grow = true;
      }
      if (edge) flags_[i] |= kEdge;
      if (grow) flags_[i] |= kGrow;
    }
    ++i;
  });

  // apply the Laplacian of the seeded odometer
  for (std::uint32_t j : seeded) {
    const auto w = static_cast<std::int64_t>(v_[j]);
    s_[j] = narrow_chips(s_[j] - thr * w);
    if (opt_.topology == Topology::Cylinder) {
      for (int k = 0; k < 4; ++k) s_[nbr_[4 * j + k]] = narrow_chips(s_[nbr_[4 * j + k]] + w);
    } else {
      for (int k = 0; k < dim_; ++k) {
        s_[j + stride_[k]] = narrow_chips(s_[j + stride_[k]] + w);
        s_[j - stride_[k]] = narrow_chips(s_[j - stride_[k]] + w);
      }
    }
  }

  active_.clear();
  for (std::size_t j = 0; j < sz; ++j)
    if (!(flags_[j] & (kHalo | kFrozen)) && s_[j] >= thr && (!has_caps_ || v_[j] < cap_[j]))
      active_.push_back(static_cast<std::uint32_t>(j));
}

void Sandpile::build_cylinder_table() {
  const std::size_t n = static_cast<std::size_t>(padded_.volume());
  nbr_.assign(4 * n, 0);
  const Coord x1lo = alloc_.lower()[0];
  const Coord x2lo = alloc_.lower()[1], h = alloc_.extent(1);
  std::size_t i = 0;
  for_each_point(padded_, [&](const Point& x) {
    if (alloc_.contains(x)) {
      const Point left = x[0] == x1lo ? x : Point{x[0] - 1, x[1]};
      const Point right{x[0] + 1, x[1]};
      const Point down{x[0], x2lo + floor_mod(x[1] - 1 - x2lo, h)};
      const Point up{x[0], x2lo + floor_mod(x[1] + 1 - x2lo, h)};
      nbr_[4 * i + 0] = static_cast<std::uint32_t>(padded_.offset_of(left));
      nbr_[4 * i + 1] = static_cast<std::uint32_t>(padded_.offset_of(right));
      nbr_[4 * i + 2] = static_cast<std::uint32_t>(padded_.offset_of(down));
      nbr_[4 * i + 3] = static_cast<std::uint32_t>(padded_.offset_of(up));
    }
    ++i;
  });
}

void Sandpile::rebuild(const Window& na) {
  auto old_s = std::move(s_);
  auto old_v = std::move(v_);
  auto old_flags = std::move(flags_);
  auto old_cap = std::move(cap_);
  auto old_arrival = std::move(arrival_);
  const bool old_caps = has_caps_;
  const Window old_alloc = alloc_, old_pad = padded_;
  auto old_active = std::move(active_);

  // Fresh sites come from init_; copied sites overwrite them below.
  const SiteInit saved = init_;
  init_ = [&](const Point& x) -> SiteSetup {
    if (old_alloc.contains(x)) return SiteSetup{};
    SiteSetup su = saved(x);
    if (su.w0 > 0) throw std::invalid_argument("seeded odometer outside the initial window at " + x.str());
    if (old_pad.contains(x)) su.chips += old_s[old_pad.offset_of(x)];
    return su;
  };
  allocate(na);
  init_ = saved;

  if (old_caps && !has_caps_) {
    cap_.assign(s_.size(), kNoCap);
    has_caps_ = true;
  }
  std::size_t oi = 0;
  for_each_point(old_pad, [&](const Point& x) {
    const std::size_t ni = padded_.offset_of(x);
    if (old_alloc.contains(x)) {
      s_[ni] = old_s[oi];
      v_[ni] = old_v[oi];
      flags_[ni] = static_cast<std::uint8_t>((flags_[ni] & ~kFrozen) | (old_flags[oi] & kFrozen));
      if (has_caps_) cap_[ni] = old_caps ? old_cap[oi] : kNoCap;
      if (opt_.track_arrival) arrival_[ni] = old_arrival[oi];
    } else if (!alloc_.contains(x)) {
      s_[ni] = old_s[oi];
    }
    ++oi;
  });

  active_.clear();
  for (std::uint32_t j : old_active) active_.push_back(static_cast<std::uint32_t>(padded_.offset_of(old_pad.point_at(j))));
  const int thr = threshold();
  // newly exposed sites that already start unstable
  std::size_t i = 0;
  for_each_point(padded_, [&](const Point& x) {
    if (alloc_.contains(x) && !old_alloc.contains(x) && !(flags_[i] & kFrozen) && s_[i] >= thr &&
        (!has_caps_ || v_[i] < cap_[i]))
      active_.push_back(static_cast<std::uint32_t>(i));
    ++i;
  });
  std::sort(active_.begin(), active_.end());
  active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
}

Window Sandpile::grown(const Window& a) const {
  Point lo = a.lower(), hi = a.upper();
  for (int k = 0; k < dim_; ++k) {
    const Coord m = std::max<Coord>(8, a.extent(k) / 2);
    lo[k] = std::max(max_window_.lower()[k], lo[k] - m);
    hi[k] = std::min(max_window_.upper()[k], hi[k] + m);
  }
  return Window(lo, hi);
}

std::size_t Sandpile::index_of(const Point& x) const { return padded_.offset_of(x); }

void Sandpile::decide() {
  const int thr = threshold();
  const bool floor_rule = opt_.rule == Rule::Floor;
  auto test = [&](std::uint32_t i, std::uint32_t* count) -> bool {
    if (flags_[i] & (kHalo | kFrozen)) return false;
    const std::int32_t s = s_[i];
    if (s < thr) return false;
    std::uint64_t c = floor_rule ? static_cast<std::uint64_t>(s / thr) : 1;
    if (has_caps_) {
      if (v_[i] >= cap_[i]) return false;
      c = std::min(c, cap_[i] - v_[i]);
    }
    *count = static_cast<std::uint32_t>(c);
    return true;
  };
  fires_.clear();
  counts_.clear();
  const int workers = std::max(1, opt_.workers);
  if (workers <= 1 || active_.size() < kParallelMin) {
    for (std::uint32_t i : active_) {
      std::uint32_t c;
      if (test(i, &c)) {
        fires_.push_back(i);
        counts_.push_back(c);
      }
    }
    return;
  }
  std::vector<std::vector<std::uint32_t>> f(static_cast<std::size_t>(workers)), c(f.size());
  split_work(workers, active_.size(), [&](int k, std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      std::uint32_t cnt;
      if (test(active_[j], &cnt)) {
        f[k].push_back(active_[j]);
        c[k].push_back(cnt);
      }
    }
  });
  for (std::size_t k = 0; k < f.size(); ++k) {
    fires_.insert(fires_.end(), f[k].begin(), f[k].end());
    counts_.insert(counts_.end(), c[k].begin(), c[k].end());
  }
}

template <bool kCyl>
void Sandpile::scatter_range(std::size_t lo, std::size_t hi, bool atomic) {
  const int thr = threshold();
  const auto t_next = static_cast<std::uint32_t>(t_ + 1);
  auto add = [&](std::size_t j, std::int32_t c) {
    if (atomic)
      std::atomic_ref<std::int32_t>(s_[j]).fetch_add(c, std::memory_order_relaxed);
    else
      s_[j] += c;
  };
  for (std::size_t f = lo; f < hi; ++f) {
    const std::uint32_t i = fires_[f];
    const auto c = static_cast<std::int32_t>(counts_[f]);
    if (opt_.track_arrival && v_[i] == 0) arrival_[i] = t_next;
    v_[i] += static_cast<std::uint64_t>(c);
    add(i, -thr * c);
    if constexpr (kCyl) {
      for (int k = 0; k < 4; ++k) add(nbr_[4 * i + k], c);
    } else {
      for (int k = 0; k < dim_; ++k) {
        add(i + static_cast<std::size_t>(stride_[k]), c);
        add(i - static_cast<std::size_t>(stride_[k]), c);
      }
    }
  }
}

void Sandpile::scatter() {
  const int workers = std::max(1, opt_.workers);
  const bool cyl = opt_.topology == Topology::Cylinder;
  const bool par = workers > 1 && fires_.size() >= kParallelMin;
  split_work(par ? workers : 1, fires_.size(), [&](int, std::size_t lo, std::size_t hi) {
    if (cyl)
      scatter_range<true>(lo, hi, par);
    else
      scatter_range<false>(lo, hi, par);
  });
  for (std::uint32_t c : counts_) topplings_ += c;

  if (++stamp_value_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    stamp_value_ = 1;
  }
  active_.clear();
  auto push = [&](std::size_t j) {
    if (flags_[j] & kHalo) return;
    if (stamp_[j] == stamp_value_) return;
    stamp_[j] = stamp_value_;
    active_.push_back(static_cast<std::uint32_t>(j));
  };
  for (std::uint32_t i : fires_) {
    push(i);
    if (cyl) {
      for (int k = 0; k < 4; ++k) push(nbr_[4 * i + k]);
    } else {
      for (int k = 0; k < dim_; ++k) {
        push(i + static_cast<std::size_t>(stride_[k]));
        push(i - static_cast<std::size_t>(stride_[k]));
      }
    }
  }
}

StepStats Sandpile::step() {
  StepStats st;
  decide();
  for (;;) {
    bool grow = false;
    for (std::uint32_t i : fires_)
      if (flags_[i] & kGrow) {
        grow = true;
        break;
      }
    if (!grow) break;
    rebuild(grown(alloc_));
    decide();
  }
  if (fires_.empty()) return st;
  for (std::uint32_t i : fires_)
    if (flags_[i] & kEdge) {
      st.frontier = true;
      st.witness = padded_.point_at(i);
      break;
    }
  st.fired_sites = fires_.size();
  const std::uint64_t before = topplings_;
  scatter();
  st.topplings = topplings_ - before;
  ++t_;
  return st;
}

StabilizeOutcome Sandpile::run(std::int64_t step_budget) {
  StabilizeOutcome o;
  const std::int64_t start = t_;
  while (t_ < step_budget) {
    const StepStats st = step();
    if (st.fired_sites == 0) {
      if (!is_stable_scan()) throw std::logic_error("active list missed an unstable site");
      o.kind = OutcomeKind::Stabilized;
      o.time = t_;
      o.steps = t_ - start;
      return o;
    }
    if (st.frontier && opt_.stop_on_frontier) {
      o.kind = OutcomeKind::FrontierHit;
      o.time = t_;
      o.witness = st.witness;
      o.steps = t_ - start;
      return o;
    }
  }
  decide();
  o.kind = fires_.empty() ? OutcomeKind::Stabilized : OutcomeKind::BudgetExceeded;
  o.time = t_;
  o.steps = t_ - start;
  return o;
}

std::int64_t Sandpile::chips_at(const Point& x) const {
  if (alloc_.contains(x)) return s_[index_of(x)];
  if (max_window_.contains(x)) return init_(x).chips;
  return 0;
}

std::uint64_t Sandpile::odometer_at(const Point& x) const { return alloc_.contains(x) ? v_[index_of(x)] : 0; }

std::uint32_t Sandpile::arrival_at(const Point& x) const {
  if (!opt_.track_arrival) throw std::logic_error("arrival times were not tracked");
  return alloc_.contains(x) ? arrival_[index_of(x)] : kUnreached;
}

bool Sandpile::frozen_at(const Point& x) const {
  if (alloc_.contains(x)) return flags_[index_of(x)] & kFrozen;
  return !max_window_.contains(x) || init_(x).frozen;
}

Grid<std::int32_t> Sandpile::chips(const Window& w) const {
  Grid<std::int32_t> g(w);
  std::size_t i = 0;
  for_each_point(w, [&](const Point& x) { g.at_offset(i++) = static_cast<std::int32_t>(chips_at(x)); });
  return g;
}

Grid<std::uint64_t> Sandpile::odometer(const Window& w) const {
  Grid<std::uint64_t> g(w);
  std::size_t i = 0;
  for_each_point(w, [&](const Point& x) { g.at_offset(i++) = odometer_at(x); });
  return g;
}

Grid<std::uint32_t> Sandpile::arrival(const Window& w) const {
  Grid<std::uint32_t> g(w);
  std::size_t i = 0;
  for_each_point(w, [&](const Point& x) { g.at_offset(i++) = arrival_at(x); });
  return g;
}

std::optional<Window> Sandpile::support_box() const {
  Point lo = Point::filled(dim_, std::numeric_limits<Coord>::max());
  Point hi = Point::filled(dim_, std::numeric_limits<Coord>::min());
  bool any = false;
  std::size_t i = 0;
  for_each_point(padded_, [&](const Point& x) {
    if (!(flags_[i] & (kHalo | kFrozen)) && v_[i] > 0) {
      any = true;
      for (int k = 0; k < dim_; ++k) {
        lo[k] = std::min(lo[k], x[k]);
        hi[k] = std::max(hi[k], x[k]);
      }
    }
    ++i;
  });
  if (!any) return std::nullopt;
  return Window(lo, hi);
}

std::uint64_t Sandpile::support_size() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < v_.size(); ++i)
    if (!(flags_[i] & (kHalo | kFrozen)) && v_[i] > 0) ++n;
  return n;
}

std::int64_t Sandpile::tracked_chips() const {
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < s_.size(); ++i)
    if (!(flags_[i] & kHalo)) sum += s_[i];
  return sum;
}

std::int64_t Sandpile::exported_chips() const {
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < s_.size(); ++i)
    if (flags_[i] & kHalo) sum += s_[i];
  return sum;
}

bool Sandpile::is_stable_scan() const {
  const int thr = threshold();
  for (std::size_t i = 0; i < s_.size(); ++i) {
    if (flags_[i] & (kHalo | kFrozen)) continue;
    if (s_[i] >= thr && (!has_caps_ || v_[i] < cap_[i])) return false;
  }
  return true;
}

SiteInit background_init(const BackgroundSpec& spec, const Point& source, std::int64_t extra) {
  return [spec, source, extra](const Point& x) {
    SiteSetup su;
    su.chips = spec.at(x) + (x == source ? extra : 0);
    return su;
  };
}

Window exact_window(const Point& center, std::int64_t steps) { return Window::centered(center, steps + 1); }

StabilizeOutcome stabilize(Sandpile& state, std::int64_t step_budget) { return state.run(step_budget); }

FrozenRun frozen_run(const BackgroundSpec& spec, const std::function<bool(const Point&)>& frozen,
                     const std::function<std::uint64_t(const Point&)>& w0, const Window& window,
                     std::int64_t step_budget, EngineOptions opt) {
  SiteInit init = [spec, frozen, w0](const Point& x) {
    SiteSetup su;
    su.chips = spec.at(x);
    su.frozen = frozen(x);
    su.w0 = w0(x);
    return su;
  };
  FrozenRun r{StabilizeOutcome{}, Sandpile(window, init, opt)};
  r.outcome = r.state.run(step_budget);
  return r;
}

std::optional<Grid<std::uint64_t>> sequential_oracle(const Window& window, const SiteInit& init,
                                                     std::uint64_t fire_order_seed, std::uint64_t topple_budget) {
  const int d = window.dim();
  const int thr = 2 * d;
  const auto n = static_cast<std::size_t>(window.volume());
  std::vector<std::int64_t> s(n);
  std::vector<std::uint64_t> v(n, 0), cap(n, kNoCap);
  std::vector<char> frozen(n, 0), queued(n, 0);
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = window.point_at(i);
    const SiteSetup su = init(pts[i]);
    s[i] = su.chips;
    frozen[i] = su.frozen;
    v[i] = su.w0;
    cap[i] = su.cap;
  }
  auto neighbors = [&](std::size_t i, auto&& f) {
    for (int k = 0; k < d; ++k)
      for (int sgn : {-1, 1}) {
        const Point y = pts[i] + Point::unit(d, k, sgn);
        if (window.contains(y)) f(window.offset_of(y));
      }
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] == 0) continue;
    s[i] -= thr * static_cast<std::int64_t>(v[i]);
    neighbors(i, [&](std::size_t j) { s[j] += static_cast<std::int64_t>(v[i]); });
  }
  auto unstable = [&](std::size_t i) { return !frozen[i] && s[i] >= thr && v[i] < cap[i]; };
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < n; ++i)
    if (unstable(i)) {
      pending.push_back(i);
      queued[i] = 1;
    }
  std::mt19937_64 rng(fire_order_seed);
  std::uint64_t done = 0;
  while (!pending.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, pending.size() - 1);
    const std::size_t k = pick(rng);
    const std::size_t i = pending[k];
    pending[k] = pending.back();
    pending.pop_back();
    queued[i] = 0;
    if (!unstable(i)) continue;
    if (++done > topple_budget) return std::nullopt;
    s[i] -= thr;
    ++v[i];
    neighbors(i, [&](std::size_t j) {
      ++s[j];
      if (!queued[j] && unstable(j)) {
        pending.push_back(j);
        queued[j] = 1;
      }
    });
    if (unstable(i)) {
      pending.push_back(i);
      queued[i] = 1;
    }
  }
  Grid<std::uint64_t> g(window);
  g.data() = std::move(v);
  return g;
}

CylinderRun cylinder_run(const Grid<int>& zeta, const Grid<std::uint64_t>& w0, std::int64_t steps, std::uint64_t cap,
                         bool keep_frames) {
  const Window& w = zeta.window();
  if (w.dim() != 2 || !(w0.window() == w)) throw std::invalid_argument("cylinder grids must share a 2D window");
  SiteInit init = [zeta, w0, cap](const Point& x) {
    SiteSetup su;
    su.chips = zeta[x];
    su.w0 = w0[x];
    su.frozen = su.w0 > 0;
    su.cap = cap;
    return su;
  };
  EngineOptions opt;
  opt.topology = Topology::Cylinder;
  opt.track_arrival = true;
  CylinderRun r;
  r.state = Sandpile(w, init, opt);
  // The seeded block is held at w0 (frozen). With cap 1 this is the same as letting
  // it evolve, since those sites cannot fire again.
  if (keep_frames) r.frames.push_back({r.state.chips(w), r.state.odometer(w)});
  for (std::int64_t t = 0; t < steps; ++t) {
    const StepStats st = r.state.step();
    if (st.fired_sites == 0) break;
    r.fired_per_step.push_back(st.fired_sites);
    if (keep_frames) r.frames.push_back({r.state.chips(w), r.state.odometer(w)});
    if (st.frontier) break;
  }
  if (keep_frames && r.frames.size() > 2) {
    if (auto pa = detect_front_period(r.frames, 0)) {
      r.period = pa->first;
      r.advance = pa->second;
    }
  }
  return r;
}

namespace {

// rightmost column holding a positive odometer, or lower-1 when none
Coord front_column(const CylinderFrame& f) {
  const Window& w = f.odometer.window();
  Coord best = w.lower()[0] - 1;
  for_each_point(w, [&](const Point& x) {
    if (f.odometer[x] > 0) best = std::max(best, x[0]);
  });
  return best;
}

bool same_front(const CylinderFrame& a, Coord fa, const CylinderFrame& b, Coord fb) {
  constexpr Coord kBehind = 4, kAhead = 8;
  const Window& w = a.odometer.window();
  for (Coord c = -kBehind; c <= kAhead; ++c) {
    const Coord ca = fa + c, cb = fb + c;
    const bool ina = ca >= w.lower()[0] && ca <= w.upper()[0];
    const bool inb = cb >= w.lower()[0] && cb <= w.upper()[0];
    if (!ina || !inb) continue;
    for (Coord x2 = w.lower()[1]; x2 <= w.upper()[1]; ++x2) {
      const Point pa{ca, x2}, pb{cb, x2};
      if (a.odometer[pa] != b.odometer[pb]) return false;
      if (a.odometer[pa] == 0 && a.chips[pa] != b.chips[pb]) return false;
    }
  }
  return true;
}

}  // namespace

namespace {

std::vector<Coord> front_columns(const std::vector<CylinderFrame>& frames) {
  std::vector<Coord> front;
  front.reserve(frames.size());
  for (const auto& f : frames) front.push_back(front_column(f));
  return front;
}

bool period_holds(const std::vector<CylinderFrame>& frames, const std::vector<Coord>& front, std::int64_t p, Coord a,
                  std::int64_t from) {
  const auto n = static_cast<std::int64_t>(frames.size());
  for (std::int64_t t = from; t + p < n; ++t) {
    if (front[t + p] - front[t] != a) return false;
    if (!same_front(frames[t], front[t], frames[t + p], front[t + p])) return false;
  }
  return true;
}

}  // namespace

std::optional<std::pair<std::int64_t, std::int64_t>> detect_front_period(const std::vector<CylinderFrame>& frames,
                                                                         std::int64_t from) {
  const auto n = static_cast<std::int64_t>(frames.size());
  if (n - from < 3) return std::nullopt;
  const std::vector<Coord> front = front_columns(frames);
  if (front[from] < frames[0].odometer.window().lower()[0]) return std::nullopt;
  for (std::int64_t p = 1; 2 * p <= n - from; ++p) {
    const Coord a = front[from + p] - front[from];
    if (a <= 0) continue;
    if (period_holds(frames, front, p, a, from)) return std::make_pair(p, a);
  }
  return std::nullopt;
}

bool front_period_holds(const std::vector<CylinderFrame>& frames, std::int64_t period, std::int64_t advance,
                        std::int64_t from) {
  const auto n = static_cast<std::int64_t>(frames.size());
  if (period < 1 || n - from <= period) return false;
  return period_holds(frames, front_columns(frames), period, advance, from);
}

}  // namespace xsand

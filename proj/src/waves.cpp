#include "xsand/waves.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace xsand {

Coord wave_radius(const WaveConfig& cfg, int dim, std::uint64_t n) {
  if (!cfg.scale_window_with_n) return cfg.radius;
  const double r = 2.0 * std::sqrt(2.0 * dim * static_cast<double>(n)) + 4.0;
  return std::max<Coord>(cfg.radius, static_cast<Coord>(std::ceil(r)));
}

nlohmann::json WaveRun::summary() const {
  nlohmann::json j;
  auto pt = [](const Point& p) {
    std::vector<Coord> v;
    for (int i = 0; i < p.dim(); ++i) v.push_back(p[i]);
    return v;
  };
  j["z"] = pt(z);
  j["n"] = n;
  j["outcome"] = to_string(outcome.kind);
  j["steps"] = outcome.steps;
  j["support_size"] = state.support_size();
  if (auto b = state.support_box()) j["support_box"] = {pt(b->lower()), pt(b->upper())};
  return j;
}

WaveRun run_n_wave(const BackgroundSpec& spec, const Point& z, std::uint64_t n, const WaveConfig& cfg) {
  if (z.dim() != spec.dim()) throw std::invalid_argument("source dimension does not match background");
  const Coord r = wave_radius(cfg, spec.dim(), n);
  const Window max_w = Window::centered(z, r);
  const Window init_w = Window::centered(z, std::min<Coord>(r, 8));
  SiteInit init = [spec, z, n](const Point& x) {
    SiteSetup su;
    su.chips = spec.at(x);
    if (x == z) {
      su.frozen = true;
      su.w0 = n;
    }
    return su;
  };
  EngineOptions opt;
  opt.rule = Rule::Floor;
  opt.track_arrival = cfg.track_arrival;
  opt.workers = cfg.workers;
  WaveRun w;
  w.z = z;
  w.n = n;
  w.state = Sandpile::growing(max_w, init_w, init, opt);
  w.outcome = w.state.run(cfg.step_budget);
  return w;
}

WaveThreshold last_wave_threshold(const BackgroundSpec& spec, const Point& z, const WaveConfig& cfg,
                                  std::uint64_t n_budget) {
  WaveThreshold res;
  if (n_budget < 1) throw std::invalid_argument("n budget must be positive");
  std::uint64_t lo = 0, hi = 0;  // lo stabilizes, hi explodes
  auto explodes = [&](std::uint64_t n) -> std::optional<bool> {
    ++res.runs;
    const WaveRun w = run_n_wave(spec, z, n, cfg);
    if (w.outcome.kind == OutcomeKind::BudgetExceeded) return std::nullopt;
    return w.exploded();
  };
  std::uint64_t n = 1;
  for (;;) {
    const auto e = explodes(n);
    if (!e) {
      res.warnings.push_back("step budget exhausted at n = " + std::to_string(n));
      return res;
    }
    if (*e) {
      hi = n;
      break;
    }
    lo = n;
    if (n >= n_budget) return res;
    n = std::min(n_budget, 2 * n);
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    const auto e = explodes(mid);
    if (!e) {
      res.warnings.push_back("step budget exhausted at n = " + std::to_string(mid));
      return res;
    }
    (*e ? hi : lo) = mid;
  }
  res.m_hat = hi;
  res.verified = true;
  if (cfg.radius < 2 * spec.dependence_range() + 8)
    res.warnings.push_back("frontier radius is small compared with the dependence range");
  return res;
}

bool PenultimateCluster::contains(const Point& x) const { return std::binary_search(sites.begin(), sites.end(), x); }

namespace {

std::vector<Point> neighbour_closure(const Point& z, const std::vector<Point>& support) {
  std::set<Point> s{z};
  for (const Point& y : support)
    for (int k = 0; k < y.dim(); ++k)
      for (int sg : {-1, 1}) s.insert(y + Point::unit(y.dim(), k, sg));
  return {s.begin(), s.end()};
}

}  // namespace

bool PenultimateCluster::is_rectangle_dilation() const {
  if (support.empty()) return sites.size() == 1 && sites[0] == z;
  Point lo = support[0], hi = support[0];
  for (const Point& y : support)
    for (int k = 0; k < y.dim(); ++k) {
      lo[k] = std::min(lo[k], y[k]);
      hi[k] = std::max(hi[k], y[k]);
    }
  const Window box(lo, hi);
  if (box.volume() != support.size()) return false;
  return neighbour_closure(z, support) == sites;
}

std::optional<PenultimateCluster> penultimate_cluster(const BackgroundSpec& spec, const Point& z,
                                                      const WaveConfig& cfg, std::uint64_t n_budget) {
  const WaveThreshold th = last_wave_threshold(spec, z, cfg, n_budget);
  if (!th.m_hat) return std::nullopt;
  PenultimateCluster pc;
  pc.z = z;
  pc.m_hat = *th.m_hat;
  if (pc.m_hat > 1) {
    const WaveRun w = run_n_wave(spec, z, pc.m_hat - 1, cfg);
    if (!w.stabilized()) throw std::logic_error("penultimate wave did not stabilize");
    const Window& a = w.state.allocated();
    for_each_point(a, [&](const Point& x) {
      if (w.state.odometer_at(x) > 0) pc.support.push_back(x);
    });
    std::sort(pc.support.begin(), pc.support.end());
  }
  pc.sites = neighbour_closure(z, pc.support);
  Point lo = pc.sites[0], hi = pc.sites[0];
  for (const Point& y : pc.sites)
    for (int k = 0; k < y.dim(); ++k) {
      lo[k] = std::min(lo[k], y[k]);
      hi[k] = std::max(hi[k], y[k]);
    }
  pc.bbox = Window(lo, hi);
  return pc;
}

const std::optional<PenultimateCluster>& ClusterCache::get(const Point& x) {
  auto it = cache_.find(x);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(x, penultimate_cluster(spec_, x, cfg_, n_budget_)).first->second;
}

const char* to_string(ArrivalKind k) {
  switch (k) {
    case ArrivalKind::Explosion:
      return "T";
    case ArrivalKind::LastWave:
      return "T_hat";
    case ArrivalKind::PenultimateCluster:
      return "T_tilde";
  }
  return "?";
}

namespace {

ArrivalField collect(const Sandpile& st, const StabilizeOutcome& o, const Window& window) {
  ArrivalField f;
  f.t = st.arrival(window);
  f.frontier_time = o.kind == OutcomeKind::FrontierHit ? o.time : -1;
  return f;
}

}  // namespace

ArrivalField explosion_arrival(const BackgroundSpec& spec, const Point& z, std::uint64_t n, const Window& window,
                               int workers) {
  EngineOptions opt;
  opt.track_arrival = true;
  opt.workers = workers;
  Sandpile st = Sandpile::growing(window, Window::centered(z, 8).intersect(window),
                                  background_init(spec, z, static_cast<std::int64_t>(n)), opt);
  const StabilizeOutcome o = st.run(std::numeric_limits<std::int64_t>::max());
  ArrivalField f = collect(st, o, window);
  f.kind = ArrivalKind::Explosion;
  f.source = z;
  f.n = n;
  return f;
}

ArrivalField wave_arrival(const BackgroundSpec& spec, const Point& z, std::uint64_t n, const Window& window,
                          int workers) {
  SiteInit init = [spec, z, n](const Point& x) {
    SiteSetup su;
    su.chips = spec.at(x);
    if (x == z) {
      su.frozen = true;
      su.w0 = n;
    }
    return su;
  };
  EngineOptions opt;
  opt.rule = Rule::Floor;
  opt.track_arrival = true;
  opt.workers = workers;
  Sandpile st = Sandpile::growing(window, Window::centered(z, 8).intersect(window), init, opt);
  const StabilizeOutcome o = st.run(std::numeric_limits<std::int64_t>::max());
  ArrivalField f = collect(st, o, window);
  f.kind = ArrivalKind::LastWave;
  f.source = z;
  f.n = n;
  return f;
}

std::vector<std::uint32_t> cluster_arrival(const ArrivalField& last_wave, ClusterCache& cache,
                                           const std::vector<Point>& targets, bool* touched_source) {
  std::vector<std::uint32_t> out;
  out.reserve(targets.size());
  for (const Point& x : targets) {
    const auto& pc = cache.get(x);
    if (!pc) {
      out.push_back(kUnreached);
      continue;
    }
    if (touched_source && pc->contains(last_wave.source)) *touched_source = true;
    std::uint32_t worst = 0;
    for (const Point& y : pc->sites) {
      const std::uint32_t ty = last_wave.at(y);
      if (ty == kUnreached) {
        worst = kUnreached;
        break;
      }
      worst = std::max(worst, ty);
    }
    out.push_back(worst);
  }
  return out;
}

}  // namespace xsand

#include "xsand/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace xsand {

namespace {

constexpr std::uint64_t kTagBootstrap = 0xb0075'7a9ULL;
constexpr std::uint64_t kTagSample = 0x5a3b'1e11ULL;

nlohmann::json point_json(const Point& p) {
  std::vector<Coord> v;
  for (int i = 0; i < p.dim(); ++i) v.push_back(p[i]);
  return v;
}

nlohmann::json window_json(const Window& w) { return {{"lower", point_json(w.lower())}, {"upper", point_json(w.upper())}}; }

// Box-frozen run: everything outside `box` is frozen, sites where seeded() holds
// are frozen at odometer 1. Returns the arrival grid on the box after `budget`
// steps (or earlier stabilization).
Grid<std::uint32_t> seeded_box_run(const ChipField& eta, const Window& box,
                                   const std::function<bool(const Point&)>& seeded, std::int64_t budget) {
  SiteInit init = [&eta, &box, &seeded](const Point& x) {
    SiteSetup su;
    su.chips = eta(x);
    const bool s = seeded(x);
    su.frozen = s || !box.contains(x);
    su.w0 = s ? 1 : 0;
    return su;
  };
  EngineOptions opt;
  opt.track_arrival = true;
  opt.stop_on_frontier = false;
  Sandpile st(box.dilated(1), init, opt);
  st.run(budget);
  return st.arrival(box);
}

// Largest arrival, or nullopt if some site never fired.
std::optional<std::int64_t> fill_time(const Grid<std::uint32_t>& arrival) {
  std::int64_t worst = 0;
  for (std::uint32_t a : arrival.data()) {
    if (a == kUnreached) return std::nullopt;
    worst = std::max<std::int64_t>(worst, a);
  }
  return worst;
}

// Number of coordinates (other than `skip`) outside [lower, upper].
int outside_count(const Window& w, const Point& z, int skip) {
  int c = 0;
  for (int k = 0; k < w.dim(); ++k)
    if (k != skip && !(z[k] >= w.lower()[k] && z[k] <= w.upper()[k])) ++c;
  return c;
}

std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  while (e-- > 0) r *= b;
  return r;
}

bool line_fills(const ChipField& eta, const Window& box, int axis, const Point& z, std::int64_t budget) {
  const Window& b = box;
  auto on_line = [b, axis, z](const Point& x) {
    for (int k = 0; k < x.dim(); ++k)
      if (k != axis && x[k] != z[k]) return false;
    return x[axis] >= b.lower()[axis] && x[axis] <= b.upper()[axis];
  };
  return fill_time(seeded_box_run(eta, box, on_line, budget)).has_value();
}

}  // namespace

ChipField field_of(const BackgroundSpec& spec) {
  return [spec](const Point& x) -> std::int64_t { return spec.at(x); };
}

ChipField field_of(const Grid<int>& values, std::int64_t outside) {
  return [values, outside](const Point& x) -> std::int64_t { return values.get_or(x, static_cast<int>(outside)); };
}

// ---------------------------------------------------------------- crossing times

std::vector<Point> crossing_line(const Window& cube, int axis, const Point& z) {
  std::vector<Point> line;
  Point x = z;
  for (Coord j = cube.lower()[axis]; j <= cube.upper()[axis]; ++j) {
    x[axis] = j;
    line.push_back(x);
  }
  return line;
}

std::vector<Point> line_bases(const Window& cube, int axis) {
  if (axis < 0 || axis >= cube.dim()) throw std::invalid_argument("axis out of range");
  Point lo = cube.lower() - Point::filled(cube.dim(), 1);
  Point hi = cube.upper() + Point::filled(cube.dim(), 1);
  lo[axis] = hi[axis] = cube.lower()[axis] - 1;
  std::vector<Point> out;
  for_each_point(Window(lo, hi), [&](const Point& z) {
    if (outside_count(cube, z, axis) <= 1) out.push_back(z);
  });
  return out;
}

std::optional<std::int64_t> crossing_time(const ChipField& eta, const Window& cube, int axis, const Point& z,
                                          std::int64_t cap_steps) {
  if (axis < 0 || axis >= cube.dim()) throw std::invalid_argument("axis out of range");
  if (z.dim() != cube.dim()) throw std::invalid_argument("base point dimension mismatch");
  if (!cube.dilated(1).contains(z) || outside_count(cube, z, axis) > 1)
    throw std::invalid_argument("base point " + z.str() + " does not give a line of the closed cube");
  const Window c = cube;
  auto on_line = [c, axis, z](const Point& x) {
    for (int k = 0; k < x.dim(); ++k)
      if (k != axis && x[k] != z[k]) return false;
    return x[axis] >= c.lower()[axis] && x[axis] <= c.upper()[axis];
  };
  return fill_time(seeded_box_run(eta, cube, on_line, cap_steps));
}

std::optional<std::int64_t> crossing_time(const BackgroundSpec& spec, Coord k, int axis, const Point& z,
                                          const Point& offset) {
  const Window cube = Window::cube(offset, k);
  return crossing_time(field_of(spec), cube, axis, z, static_cast<std::int64_t>(ipow(k, spec.dim())) + 1);
}

nlohmann::json CrossingReport::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["offset"] = point_json(offset);
  nlohmann::json es = nlohmann::json::array();
  for (const auto& e : entries)
    es.push_back({{"axis", e.axis + 1}, {"z", point_json(e.z)}, {"time", e.time ? nlohmann::json(*e.time) : "inf"}});
  j["entries"] = es;
  j["max_time"] = max_time ? nlohmann::json(*max_time) : nlohmann::json("inf");
  j["good"] = good;
  return j;
}

CrossingReport crossing_report(const BackgroundSpec& spec, Coord k, const Point& offset) {
  CrossingReport r;
  r.k = k;
  r.offset = offset;
  const Window cube = Window::cube(offset, k);
  const auto eta = field_of(spec);
  const auto kd = static_cast<std::int64_t>(ipow(k, spec.dim()));
  std::int64_t worst = 0;
  bool all = true;
  for (int i = 0; i < spec.dim(); ++i)
    for (const Point& z : line_bases(cube, i)) {
      const auto t = crossing_time(eta, cube, i, z, kd + 1);
      r.entries.push_back({i, z, t});
      if (!t)
        all = false;
      else
        worst = std::max(worst, *t);
    }
  if (all) r.max_time = worst;
  r.good = all && worst <= kd;
  return r;
}

namespace {

bool cube_good(const ChipField& eta, const Window& cube, std::int64_t kd) {
  for (int i = 0; i < cube.dim(); ++i)
    for (const Point& z : line_bases(cube, i)) {
      const auto t = crossing_time(eta, cube, i, z, kd);
      if (!t) return false;
    }
  return true;
}

std::vector<Point> lattice_neighbours(const Point& x) {
  std::vector<Point> out;
  for (int k = 0; k < x.dim(); ++k)
    for (int s : {-1, 1}) out.push_back(x + Point::unit(x.dim(), k, s));
  return out;
}

}  // namespace

nlohmann::json GoodCubeMap::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["macro"] = window_json(macro);
  std::uint64_t n_good = 0;
  for (auto g : good.data()) n_good += g;
  j["cubes"] = good.size();
  j["good_cubes"] = n_good;
  j["components"] = component_sizes.size();
  j["largest_size"] = largest >= 0 ? component_sizes[static_cast<std::size_t>(largest)] : 0;
  j["largest_spans"] = largest_spans;
  std::vector<int> flags(good.data().begin(), good.data().end());
  j["good"] = flags;
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : distances)
    ds.push_back({{"a", point_json(d.a)}, {"b", point_json(d.b)}, {"l1", d.l1}, {"chemical", d.chemical}});
  j["distances"] = ds;
  return j;
}

GoodCubeMap good_cube_map(const BackgroundSpec& spec, Coord k, const Window& macro, std::size_t distance_samples,
                          std::uint64_t sample_seed) {
  GoodCubeMap m;
  m.k = k;
  m.macro = macro;
  m.good = Grid<std::uint8_t>(macro, 0);
  m.component = Grid<std::int32_t>(macro, -1);
  const auto eta = field_of(spec);
  const auto kd = static_cast<std::int64_t>(ipow(k, spec.dim()));
  for_each_point(macro, [&](const Point& j) { m.good[j] = cube_good(eta, Window::cube(j * k, k), kd) ? 1 : 0; });

  std::vector<Point> good_sites;
  for_each_point(macro, [&](const Point& j) {
    if (!m.good[j] || m.component[j] >= 0) return;
    const auto id = static_cast<std::int32_t>(m.component_sizes.size());
    std::deque<Point> q{j};
    m.component[j] = id;
    std::uint64_t size = 0;
    while (!q.empty()) {
      const Point x = q.front();
      q.pop_front();
      ++size;
      for (const Point& y : lattice_neighbours(x))
        if (macro.contains(y) && m.good[y] && m.component[y] < 0) {
          m.component[y] = id;
          q.push_back(y);
        }
    }
    m.component_sizes.push_back(size);
  });
  for_each_point(macro, [&](const Point& j) {
    if (m.good[j]) good_sites.push_back(j);
  });
  if (!m.component_sizes.empty()) {
    m.largest = static_cast<std::int32_t>(std::max_element(m.component_sizes.begin(), m.component_sizes.end()) -
                                          m.component_sizes.begin());
    std::vector<char> lo(static_cast<std::size_t>(macro.dim()), 0), hi(lo);
    for (const Point& j : good_sites)
      if (m.component[j] == m.largest)
        for (int a = 0; a < macro.dim(); ++a) {
          if (j[a] == macro.lower()[a]) lo[static_cast<std::size_t>(a)] = 1;
          if (j[a] == macro.upper()[a]) hi[static_cast<std::size_t>(a)] = 1;
        }
    m.largest_spans = std::all_of(lo.begin(), lo.end(), [](char c) { return c; }) &&
                      std::all_of(hi.begin(), hi.end(), [](char c) { return c; });
  }

  if (good_sites.size() >= 2) {
    for (std::size_t s = 0; s < distance_samples; ++s) {
      const std::uint64_t h = mix64(sample_seed ^ mix64(kTagSample + s));
      const Point a = good_sites[h % good_sites.size()];
      const Point b = good_sites[mix64(h) % good_sites.size()];
      GoodCubeMap::Distance d{a, b, (a - b).l1(), -1};
      Grid<std::int64_t> dist(macro, -1);
      std::deque<Point> q{a};
      dist[a] = 0;
      while (!q.empty() && dist[b] < 0) {
        const Point x = q.front();
        q.pop_front();
        for (const Point& y : lattice_neighbours(x))
          if (macro.contains(y) && m.good[y] && dist[y] < 0) {
            dist[y] = dist[x] + 1;
            q.push_back(y);
          }
      }
      d.chemical = dist[b];
      m.distances.push_back(d);
    }
  }
  return m;
}

// ---------------------------------------------------------------- box predicates

bool is_box_crossing(const ChipField& eta, const Window& box, int axis, bool upper_side) {
  if (axis < 0 || axis >= box.dim()) throw std::invalid_argument("axis out of range");
  const Coord face = upper_side ? box.upper()[axis] + 1 : box.lower()[axis] - 1;
  auto on_face = [axis, face](const Point& x) { return x[axis] == face; };
  return fill_time(seeded_box_run(eta, box, on_face, static_cast<std::int64_t>(box.volume()))).has_value();
}

bool is_box_crossing_all(const ChipField& eta, const Window& box) {
  for (int i = 0; i < box.dim(); ++i)
    for (bool up : {false, true})
      if (!is_box_crossing(eta, box, i, up)) return false;
  return true;
}

StrongCrossing strong_box_crossing(const ChipField& eta, const Window& box, std::size_t sample_count,
                                   std::uint64_t seed) {
  StrongCrossing r;
  std::int64_t sum_k = 0;
  Coord max_side = 0;
  for (int i = 0; i < box.dim(); ++i) {
    sum_k += box.extent(i);
    max_side = std::max(max_side, box.extent(i));
  }
  std::vector<std::pair<int, Point>> lines;
  for (int i = 0; i < box.dim(); ++i)
    for (const Point& z : line_bases(box, i)) lines.emplace_back(i, z);
  r.lines_total = lines.size();
  if (max_side > 64 && lines.size() > sample_count) {
    r.subsampled = true;
    std::vector<std::pair<int, Point>> pick;
    for (std::size_t s = 0; s < sample_count; ++s) pick.push_back(lines[mix64(seed + kTagSample * (s + 1)) % lines.size()]);
    lines.swap(pick);
  }
  r.holds = true;
  for (const auto& [i, z] : lines) {
    ++r.lines_checked;
    if (!line_fills(eta, box, i, z, sum_k)) {
      r.holds = false;
      break;
    }
  }
  return r;
}

bool is_strongly_box_crossing(const ChipField& eta, const Window& box) { return strong_box_crossing(eta, box).holds; }

bool is_recurrent_on(const ChipField& eta, const Window& box) {
  const Window b = box;
  auto on_boundary = [b](const Point& x) { return !b.contains(x) && outside_count(b, x, -1) == 1; };
  return fill_time(seeded_box_run(eta, box, on_boundary, static_cast<std::int64_t>(box.volume()))).has_value();
}

std::optional<std::int64_t> path_fill_time(const ChipField& eta, const std::vector<Point>& path, std::int64_t budget) {
  if (path.empty()) throw std::invalid_argument("empty path");
  Point lo = path[0], hi = path[0];
  for (const Point& p : path)
    for (int k = 0; k < p.dim(); ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  const Window rect(lo, hi);
  const std::set<Point> on(path.begin(), path.end());
  SiteInit init = [&eta, &on](const Point& x) {
    SiteSetup su;
    su.chips = eta(x);
    if (on.count(x)) {
      su.frozen = true;
      su.w0 = 1;
    }
    return su;
  };
  EngineOptions opt;
  opt.track_arrival = true;
  opt.stop_on_frontier = false;
  Sandpile st = Sandpile::growing(rect.dilated(budget + 1), rect.dilated(1), init, opt);
  st.run(budget);
  return fill_time(st.arrival(rect));
}

// ---------------------------------------------------------------- bootstrap coupling

bool spanned_by_toppling(const Grid<int>& thresholds) {
  const Grid<int> g = thresholds;
  SiteInit init = [&g](const Point& x) {
    SiteSetup su;
    su.chips = g[x];
    su.cap = 1;
    return su;
  };
  EngineOptions opt;
  opt.stop_on_frontier = false;
  Sandpile st(thresholds.window(), init, opt);
  st.run(static_cast<std::int64_t>(thresholds.size()) + 2);
  const Grid<std::uint64_t> odo = st.odometer(thresholds.window());
  for (std::uint64_t v : odo.data())
    if (v == 0) return false;
  return true;
}

bool spanned_by_infection(const Grid<int>& thresholds) {
  const Window& w = thresholds.window();
  const int need = 2 * w.dim();
  Grid<std::uint8_t> infected(w, 0);
  Grid<int> level(w, 0);
  std::deque<Point> q;
  for_each_point(w, [&](const Point& x) {
    level[x] = thresholds[x];
    if (level[x] >= need) {
      infected[x] = 1;
      q.push_back(x);
    }
  });
  std::size_t count = q.size();
  while (!q.empty()) {
    const Point x = q.front();
    q.pop_front();
    for (const Point& y : lattice_neighbours(x)) {
      if (!w.contains(y) || infected[y]) continue;
      if (++level[y] >= need) {
        infected[y] = 1;
        ++count;
        q.push_back(y);
      }
    }
  }
  return count == thresholds.size();
}

bool bootstrap_internally_spanned(const Grid<int>& thresholds) {
  const bool a = spanned_by_toppling(thresholds);
  const bool b = spanned_by_infection(thresholds);
  if (a != b) throw std::logic_error("once-only toppling and bootstrap infection disagree");
  return a;
}

Grid<int> bootstrap_field(int dim, Coord n, double p, std::uint64_t seed) {
  Grid<int> g(Window::cube(Point::zeros(dim), n));
  for_each_point(g.window(), [&](const Point& x) {
    g[x] = to_unit(hash_point(seed, kTagBootstrap, x)) < p ? 2 * dim : dim;
  });
  return g;
}

std::vector<SpanningPoint> spanning_curve(int dim, double p, const std::vector<Coord>& sizes, int trials,
                                          std::uint64_t seed) {
  std::vector<SpanningPoint> out;
  for (Coord n : sizes) {
    SpanningPoint sp{n, trials, 0};
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t s = mix64(seed ^ mix64(static_cast<std::uint64_t>(n) * 0x9e37ULL + static_cast<std::uint64_t>(t)));
      if (bootstrap_internally_spanned(bootstrap_field(dim, n, p, s))) ++sp.successes;
    }
    out.push_back(sp);
  }
  return out;
}

void write_spanning_csv(const std::string& path, const std::vector<SpanningPoint>& curve) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "n,trials,successes\n";
  for (const auto& p : curve) os << p.n << ',' << p.trials << ',' << p.successes << '\n';
}

// ---------------------------------------------------------------- dimensional reduction

ReductionCheck dimensional_reduction_check(const Grid<int>& eta, int face) {
  const Window& q = eta.window();
  const int d = q.dim();
  if (d < 2) throw std::invalid_argument("dimensional reduction needs d >= 2");
  if (face < 0 || face >= 2 * d) throw std::invalid_argument("face index must lie in [0, 2d)");
  for (int v : eta.data())
    if (v != d && v != 2 * d - 1) throw std::invalid_argument("background values must lie in {d, 2d-1}");
  const int a = face % d;
  const bool lower = face < d;
  const Coord layer = lower ? q.lower()[a] : q.upper()[a];
  const Coord outer = lower ? layer - 1 : layer + 1;

  auto drop = [a, d](const Point& x) {
    Point y(d - 1);
    for (int k = 0, j = 0; k < d; ++k)
      if (k != a) y[j++] = x[k];
    return y;
  };
  auto lift = [a, d](const Point& y, Coord c) {
    Point x(d);
    for (int k = 0, j = 0; k < d; ++k) x[k] = k == a ? c : y[j++];
    return x;
  };
  const Window qr(drop(q.lower()), drop(q.upper()));

  SiteInit init_d = [&eta, &q, &qr, a, layer, outer, drop](const Point& x) {
    SiteSetup su;
    if (!q.contains(x)) {
      su.frozen = true;
      if (x[a] == outer && qr.contains(drop(x))) su.w0 = 1;
      return su;
    }
    su.chips = eta[x];
    if (x[a] != layer)
      su.frozen = true;
    else
      su.cap = 1;
    return su;
  };
  SiteInit init_r = [&eta, layer, lift](const Point& y) {
    SiteSetup su;
    su.chips = eta[lift(y, layer)] - 1;
    su.cap = 1;
    return su;
  };
  EngineOptions opt;
  opt.stop_on_frontier = false;
  Sandpile full(q.dilated(1), init_d, opt);
  Sandpile red(qr, init_r, opt);

  ReductionCheck rc;
  auto compare = [&]() {
    for_each_point(qr, [&](const Point& y) {
      const Point x = lift(y, layer);
      const std::uint64_t u = full.odometer_at(x);
      if (u != red.odometer_at(y) && rc.odometers_equal) {
        rc.odometers_equal = false;
        rc.first_mismatch = "odometer at t=" + std::to_string(full.t()) + " x=" + x.str();
      }
      if (u == 0 && full.chips_at(x) != red.chips_at(y) + 2 && rc.chips_relation) {
        rc.chips_relation = false;
        if (rc.first_mismatch.empty()) rc.first_mismatch = "chips at t=" + std::to_string(full.t()) + " x=" + x.str();
      }
    });
  };
  compare();
  const auto limit = static_cast<std::int64_t>(qr.volume()) + 2;
  while (rc.ok() && full.t() < limit) {
    const auto a1 = full.step();
    const auto a2 = red.step();
    compare();
    if (a1.fired_sites == 0 && a2.fired_sites == 0) break;
  }
  rc.steps = full.t();
  return rc;
}

// ---------------------------------------------------------------- explosion threshold

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Explodes:
      return "explodes";
    case Verdict::Stabilizes:
      return "stabilizes";
    case Verdict::Unknown:
      return "unknown";
  }
  return "?";
}

Coord explosion_radius(const ExplosionConfig& cfg, int dim, std::uint64_t n) {
  if (!cfg.scale_window_with_n) return cfg.radius;
  const auto root = static_cast<Coord>(std::ceil(std::pow(static_cast<double>(n), 1.0 / dim) - 1e-9));
  return std::max<Coord>(cfg.radius, 2 * root + 2);
}

namespace {

Coord spread_radius(const Window& alloc, const Point& z) {
  Coord r = 0;
  for (int k = 0; k < z.dim(); ++k) r = std::max({r, z[k] - alloc.lower()[k], alloc.upper()[k] - z[k]});
  return r;
}

// Capped continuation from the current exact state: every site may fire once
// more. Dominated by the exact run, so reaching the frontier is a certificate.
bool continuation_reaches(const Sandpile& exact, const BackgroundSpec& spec, const Point& z, Coord radius,
                          const ExplosionConfig& cfg) {
  const int d = spec.dim();
  const Window full = Window::centered(z, radius);
  const Window& a = exact.allocated();
  Window where = full;
  if (d >= 3) {
    const Coord h = std::max(cfg.probe_halfwidth, spread_radius(a, z));
    Point lo = z - Point::filled(d, h), hi = z + Point::filled(d, h);
    lo[0] = z[0] - spread_radius(a, z);
    hi[0] = z[0] + radius;
    where = Window(lo, hi).intersect(full);
  }
  SiteInit init = [&exact, &a](const Point& x) {
    SiteSetup su;
    su.chips = exact.chips_at(x);
    if (a.contains(x) && exact.frozen_at(x)) su.frozen = true;
    su.cap = 1;
    return su;
  };
  EngineOptions opt;
  opt.workers = cfg.workers;
  opt.stop_on_frontier = d < 3;  // in 2D every edge of the window is the frontier
  Sandpile cont = Sandpile::growing(where, a.intersect(where), init, opt);
  const StabilizeOutcome o = cont.run(std::numeric_limits<std::int64_t>::max());
  if (d < 3) return o.kind == OutcomeKind::FrontierHit;
  const Window& ca = cont.allocated();
  if (ca.upper()[0] < z[0] + radius) return false;
  Point lo = ca.lower(), hi = ca.upper();
  lo[0] = hi[0] = z[0] + radius;
  bool hit = false;
  for_each_point(Window(lo, hi), [&](const Point& x) { hit = hit || cont.odometer_at(x) > 0; });
  return hit;
}

}  // namespace

ExplosionRun explodes(const BackgroundSpec& spec, std::uint64_t n, const ExplosionConfig& cfg) {
  ExplosionRun r;
  const int d = spec.dim();
  const Point z = cfg.source.value_or(Point::zeros(d));
  const Coord radius = explosion_radius(cfg, d, n);
  EngineOptions opt;
  opt.workers = cfg.workers;
  Coord next_probe = cfg.probe_start_radius > 0 ? cfg.probe_start_radius : (d == 2 ? 48 : 16);
  try {
    Sandpile st = Sandpile::growing(Window::centered(z, radius), Window::centered(z, std::min<Coord>(radius, 8)),
                                    background_init(spec, z, static_cast<std::int64_t>(n)), opt);
    for (;;) {
      const StepStats s = st.step();
      if (s.fired_sites == 0) {
        if (!st.is_stable_scan()) throw std::logic_error("active list missed an unstable site");
        r.verdict = Verdict::Stabilizes;
        break;
      }
      if (s.frontier) {
        r.verdict = Verdict::Explodes;
        break;
      }
      if (cfg.use_probe && next_probe < radius && spread_radius(st.allocated(), z) >= next_probe) {
        ++r.probes;
        if (continuation_reaches(st, spec, z, radius, cfg)) {
          r.verdict = Verdict::Explodes;
          r.by_probe = true;
          break;
        }
        next_probe *= 2;
      }
    }
    r.steps = st.t();
  } catch (const ResourceError& e) {
    r.verdict = Verdict::Unknown;
    r.note = e.what();
  }
  return r;
}

nlohmann::json ExplosionCertificate::to_json() const {
  nlohmann::json j;
  j["route"] = route;
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& b : boxes) bs.push_back(window_json(b));
  j["boxes"] = bs;
  j["strongly_box_crossing"] = strongly_box_crossing;
  j["recurrent"] = recurrent;
  j["origin_box_fires"] = origin_box_fires;
  j["valid"] = valid();
  return j;
}

nlohmann::json ExplosionThreshold::to_json() const {
  nlohmann::json j;
  j["m"] = m ? nlohmann::json(*m) : nlohmann::json(nullptr);
  j["minimal_certified"] = minimal_certified;
  j["upper_bound"] = upper_bound ? nlohmann::json(*upper_bound) : nlohmann::json(nullptr);
  j["status"] = m ? "found" : (upper_bound ? "indeterminate" : "not_found_within_budget");
  j["exact_runs"] = exact_runs;
  j["probe_runs"] = probe_runs;
  j["notes"] = notes;
  if (certificate) j["certificate"] = certificate->to_json();
  return j;
}

ExplosionThreshold explosion_threshold(const BackgroundSpec& spec, const ExplosionConfig& cfg) {
  if (cfg.n_budget < 1 || cfg.radius < 1) throw std::invalid_argument("budgets must be positive");
  ExplosionThreshold res;
  std::map<std::uint64_t, Verdict> seen;
  auto eval = [&](std::uint64_t n) {
    const ExplosionRun r = explodes(spec, n, cfg);
    ++res.exact_runs;
    res.probe_runs += r.probes;
    if (r.verdict == Verdict::Unknown)
      res.notes.push_back("n = " + std::to_string(n) + " undecided: " + r.note);
    else if (r.by_probe)
      res.notes.push_back("n = " + std::to_string(n) + " explosion certified by a capped continuation");
    seen[n] = r.verdict;
    return r.verdict;
  };
  std::uint64_t lo = 0, hi = 0;
  for (std::uint64_t n = 1;; n = std::min(cfg.n_budget, 2 * n)) {
    const Verdict v = eval(n);
    if (v == Verdict::Explodes) {
      hi = n;
      break;
    }
    if (v == Verdict::Stabilizes) lo = n;
    if (n >= cfg.n_budget) break;
  }
  if (hi == 0) {
    res.notes.push_back("no frontier hit for n <= " + std::to_string(cfg.n_budget));
    return res;
  }
  for (;;) {
    // Next candidate in (lo, hi) closest to the middle that is not undecided.
    std::optional<std::uint64_t> pick;
    const std::uint64_t mid = lo + (hi - lo) / 2;
    for (std::uint64_t off = 0; off < hi - lo && !pick; ++off) {
      for (std::uint64_t c : {mid - off, mid + off})
        if (c > lo && c < hi && !seen.count(c)) {
          pick = c;
          break;
        }
      if (mid < off) break;
    }
    if (!pick) break;
    const Verdict v = eval(*pick);
    if (v == Verdict::Explodes) hi = *pick;
    if (v == Verdict::Stabilizes) lo = *pick;
  }
  res.upper_bound = hi;
  if (hi - lo == 1) {
    res.m = hi;
    res.minimal_certified = true;
  } else {
    res.notes.push_back("threshold lies in (" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  if (cfg.want_certificate) res.certificate = explosion_certificate(spec, hi);
  return res;
}

Grid<int> modified_counterexample(const BackgroundSpec& spec, const Window& w) {
  const int d = spec.dim();
  const int two_d = 2 * d;
  auto fired = [&spec, two_d](const Point& x) {
    int f = spec.at(x) >= two_d - 2 ? 1 : 0;
    if ((x[0] == 0 || x[0] == -1) && (x[1] == 0 || x[1] == -1)) {
      bool rest = true;
      for (int k = 2; k < x.dim(); ++k) rest = rest && x[k] == 0;
      if (rest) f += 1;
    }
    return f;
  };
  Grid<int> g(w);
  for_each_point(w, [&](const Point& x) {
    int v = spec.at(x) - two_d * fired(x);
    for (const Point& y : lattice_neighbours(x)) v += fired(y);
    g[x] = v;
  });
  return g;
}

std::optional<ExplosionCertificate> explosion_certificate(const BackgroundSpec& spec, std::uint64_t n) {
  const int d = spec.dim();
  ExplosionCertificate c;
  if (spec.family() == Family::Counterexample2D) {
    c.route = "topple every site with eta >= 2 and the 2x2 block at the origin; check the modified tiles";
    const Window area = Window::centered(2, 12);
    const Grid<int> mod = modified_counterexample(spec, area);
    const ChipField f = field_of(mod);
    c.strongly_box_crossing = true;
    c.recurrent = true;
    for (Coord a : {4, -8})
      for (Coord b : {4, -8}) {
        const Window box(Point{a, b}, Point{a + 3, b + 3});
        c.boxes.push_back(box);
        c.strongly_box_crossing = c.strongly_box_crossing && is_strongly_box_crossing(f, box);
        c.recurrent = c.recurrent && is_recurrent_on(f, box);
      }
    // The box at the origin fires completely with three extra chips, everything else held at 0.
    Grid<int> origin_box(Window(Point{0, 0}, Point{3, 3}));
    for_each_point(origin_box.window(), [&](const Point& x) { origin_box[x] = mod[x] + (x == Point{0, 0} ? 3 : 0); });
    c.origin_box_fires = spanned_by_toppling(origin_box);
    return c;
  }
  if (spec.family() == Family::PeriodicTiling || spec.family() == Family::RandomCheckerboard) {
    if (spec.eta_min() < 2 * d - 2) return std::nullopt;
    c.route = "background >= 2d-2; every tile strongly box-crossing and recurrent";
    const Point& box = spec.params().box;
    c.strongly_box_crossing = true;
    c.recurrent = true;
    for (const Tile& t : spec.params().tiles) {
      Grid<int> g(Window(Point::zeros(d), box - Point::filled(d, 1)));
      g.data() = t.values;
      const ChipField f = field_of(g);
      c.boxes.push_back(g.window());
      c.strongly_box_crossing = c.strongly_box_crossing && is_strongly_box_crossing(f, g.window());
      c.recurrent = c.recurrent && is_recurrent_on(f, g.window());
    }
    Grid<int> origin_box(Window(Point::zeros(d), box - Point::filled(d, 1)));
    for_each_point(origin_box.window(), [&](const Point& x) {
      origin_box[x] = spec.at(x) + (x == Point::zeros(d) ? static_cast<int>(std::min<std::uint64_t>(n, 1 << 20)) : 0);
    });
    // Chips from a multiply-fired origin are not captured by the once-only run; use the exact run on the box.
    SiteInit init = [&origin_box](const Point& x) {
      SiteSetup su;
      su.chips = origin_box[x];
      return su;
    };
    EngineOptions opt;
    opt.stop_on_frontier = false;
    Sandpile st(origin_box.window(), init, opt);
    st.run(std::numeric_limits<std::int64_t>::max());
    c.origin_box_fires = true;
    const Grid<std::uint64_t> odo = st.odometer(origin_box.window());
    for (auto v : odo.data()) c.origin_box_fires = c.origin_box_fires && v > 0;
    return c;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- arrival fields

ArrivalField arrival_field(const BackgroundSpec& spec, ArrivalKind kind, const Point& z, const Window& window,
                           std::uint64_t n_budget, int workers) {
  Coord radius = 0;
  for (int k = 0; k < z.dim(); ++k) radius = std::max({radius, z[k] - window.lower()[k], window.upper()[k] - z[k]});
  switch (kind) {
    case ArrivalKind::Explosion: {
      ExplosionConfig cfg;
      cfg.radius = radius;
      cfg.n_budget = n_budget;
      cfg.source = z;
      cfg.workers = workers;
      cfg.scale_window_with_n = false;
      const ExplosionThreshold th = explosion_threshold(spec, cfg);
      if (!th.upper_bound) throw std::runtime_error("no explosion within the chip budget");
      return explosion_arrival(spec, z, *th.upper_bound, window, workers);
    }
    case ArrivalKind::LastWave:
    case ArrivalKind::PenultimateCluster: {
      WaveConfig wc;
      wc.radius = radius;
      wc.workers = workers;
      const WaveThreshold th = last_wave_threshold(spec, z, wc, n_budget);
      if (!th.m_hat) throw std::runtime_error("no exploding wave within the budget");
      ArrivalField f = wave_arrival(spec, z, *th.m_hat, window, workers);
      if (kind == ArrivalKind::LastWave) return f;
      ClusterCache cache(spec, wc, n_budget);
      std::vector<Point> targets;
      for_each_point(window, [&](const Point& x) { targets.push_back(x); });
      bool touched = false;
      const auto vals = cluster_arrival(f, cache, targets, &touched);
      ArrivalField g = f;
      g.kind = ArrivalKind::PenultimateCluster;
      g.source_in_cluster = touched;
      for (std::size_t i = 0; i < targets.size(); ++i) g.t[targets[i]] = vals[i];
      return g;
    }
  }
  throw std::invalid_argument("unknown arrival kind");
}

}  // namespace xsand

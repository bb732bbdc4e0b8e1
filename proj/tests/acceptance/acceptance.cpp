// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any failed.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "../unit/reference.hpp"
#include "xsand/analysis.hpp"
#include "xsand/engine.hpp"
#include "xsand/shapes.hpp"
#include "xsand/stats.hpp"
#include "xsand/waves.hpp"

using namespace xsand;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

template <class... A>
std::string cat(const A&... a) {
  std::ostringstream os;
  (os << ... << a);
  return os.str();
}

// ---------------------------------------------------------------- 1

std::string frame_string(const CylinderFrame& f, Coord row_x2) {
  std::string s;
  for (Coord x1 = 0; x1 < 12; ++x1) {
    const Point p{x1, row_x2};
    s += f.odometer[p] > 0 ? '*' : static_cast<char>('0' + f.chips[p]);
  }
  return s;
}

Outcome front_states() {
  const auto t0 = std::chrono::steady_clock::now();
  // Rows from x_2 = 3 down to 0.
  const std::vector<std::vector<std::string>> expected = {
      {"****42233223", "***423322332", "***423322332", "****42233223"},
      {"*****3233223", "****43322332", "****43322332", "*****3233223"},
      {"*****3233223", "*****4322332", "*****4322332", "*****3233223"},
      {"*****4233223", "******422332", "******422332", "*****4233223"},
      {"******433223", "*******32332", "*******32332", "******433223"},
      {"*******43223", "*******32332", "*******32332", "*******43223"},
      {"********4223", "*******42332", "*******42332", "********4223"},
      {"*********323", "********4332", "********4332", "*********323"},
      {"*********323", "*********432", "*********432", "*********323"},
      {"*********423", "**********42", "**********42", "*********423"},
      {"**********43", "***********3", "***********3", "**********43"},
      {"***********4", "***********3", "***********3", "***********4"},
      {"************", "***********4", "***********4", "************"},
  };
  const auto [z, w0] = counterexample_cylinder(64);
  const CylinderRun r = cylinder_run(z, w0, 60);
  int mismatches = 0;
  for (std::size_t t = 0; t < expected.size(); ++t)
    for (int row = 0; row < 4; ++row)
      if (t >= r.frames.size() || frame_string(r.frames[t], 3 - row) != expected[t][static_cast<std::size_t>(row)])
        ++mismatches;
  const bool reset = front_period_holds(r.frames, 12, 8, 0);
  const bool divides = r.period && r.advance && 12 % *r.period == 0 && *r.advance * 12 == 8 * *r.period;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && reset && divides && secs < 1.0,
          cat("row mismatches ", mismatches, ", period 12 advance 8 ", reset ? "holds" : "fails", ", minimal period ",
              r.period ? *r.period : -1, " advance ", r.advance ? *r.advance : -1, ", ", secs, "s")};
}

// ---------------------------------------------------------------- 2

Outcome arrival_bounds() {
  CounterexampleConfig cfg;
  cfg.n_max = 401;
  cfg.cylinder_periods = 50;
  const CounterexampleReport rep = verify_counterexample(cfg);
  // Independent of the cylinder check: the sampled ratios must equal 12n / (3 + 8n).
  const auto ratios = cylinder_lower_bound_ratios(50);
  bool exact = ratios.size() == 50;
  double limsup = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    exact = exact && ratios[i].ratio && std::abs(*ratios[i].ratio - 12 * n / (3 + 8 * n)) < 1e-12;
    if (ratios[i].ratio) limsup = std::max(limsup, *ratios[i].ratio);
  }
  const double liminf = rep.arrival_bounds.detail.value("last_ratio", 0.0);
  const bool ok = rep.ok() && exact && std::abs(liminf - 1.0) <= 0.02 && limsup >= 1.5 * 0.98;
  return {ok, cat("bounds ", rep.arrival_bounds.ok ? "ok" : rep.arrival_bounds.first_failure, ", cylinder ",
                  rep.cylinder.ok ? "ok" : rep.cylinder.first_failure, ", stacked ", rep.stacked.ok ? "ok" : "fail",
                  ", transcript ", rep.explosive.ok ? "ok" : "fail", ", liminf sample ", liminf, ", limsup sample ",
                  limsup)};
}

// ---------------------------------------------------------------- 3

Outcome growth_exponent() {
  std::vector<double> ns, diam;
  std::string pts;
  for (int k = 10; k <= 16; ++k) {
    const std::int64_t n = std::int64_t{1} << k;
    const Coord r = static_cast<Coord>(2 * std::sqrt(static_cast<double>(n))) + 8;
    Sandpile st = Sandpile::growing(Window::centered(2, r), Window::centered(2, 8),
                                    background_init(BackgroundSpec::constant(2, 2), Point{0, 0}, n));
    const auto out = st.run(std::numeric_limits<std::int64_t>::max());
    if (out.kind != OutcomeKind::Stabilized) return {false, cat("n = ", n, " did not stabilize")};
    const Window b = *st.support_box();
    Coord extent = 0;
    for (int a = 0; a < 2; ++a) extent = std::max(extent, b.upper()[a] - b.lower()[a] + 1);
    ns.push_back(static_cast<double>(n));
    diam.push_back(static_cast<double>(extent));
    pts += cat(" ", extent);
  }
  const LinearFit f = power_law_fit(ns, diam);
  return {std::abs(f.slope - 0.5) <= 0.05, cat("exponent ", f.slope, " (R2 ", f.r2, "), diameters", pts)};
}

// ---------------------------------------------------------------- 4

Outcome wave_square() {
  const BackgroundSpec spec = BackgroundSpec::constant(2, 2);
  WaveConfig cfg;
  cfg.radius = 8;
  auto covered_radius = [&](std::uint64_t n) {
    const WaveRun wr = run_n_wave(spec, Point{0, 0}, n, cfg);
    if (!wr.stabilized()) throw std::runtime_error("wave on the robust background did not stabilize");
    Coord r = 0;
    for (;; ++r) {
      bool full = true;
      for_each_point(Window::centered(2, r + 1), [&](const Point& x) { full = full && wr.state.odometer_at(x) > 0; });
      if (!full) return r;
    }
  };
  bool ok = true;
  std::string out;
  for (Coord R : {8, 16, 32}) {
    std::uint64_t hi = 1;
    while (covered_radius(hi) < R) hi *= 2;
    std::uint64_t lo = hi / 2;  // lo does not cover (or is 0)
    while (hi - lo > 1) {
      const std::uint64_t mid = lo + (hi - lo) / 2;
      (covered_radius(mid) >= R ? hi : lo) = mid;
    }
    const Coord r = covered_radius(hi);
    const double bound = (std::sqrt(static_cast<double>(hi)) - 3) / 2;
    ok = ok && static_cast<double>(r) >= bound;
    out += cat(" R=", R, ": n=", hi, " radius ", r, " >= ", bound, ";");
  }
  return {ok, out};
}

// ---------------------------------------------------------------- 5

Outcome recurrence() {
  bool ok = true;
  std::string out;
  for (int d : {2, 3})
    for (Coord n : {4, 8, 16, 32}) {
      const bool r = is_recurrent_on(field_of(BackgroundSpec::constant(d, d)), Window::cube(Point::zeros(d), n));
      ok = ok && r;
      if (!r) out += cat(" d=", d, " n=", n, " not recurrent;");
    }
  return {ok, ok ? "all 8 boxes recurrent" : out};
}

// ---------------------------------------------------------------- 6

Outcome reduction() {
  int passed = 0, total = 0;
  std::string first;
  for (int d : {2, 3})
    for (std::uint64_t s = 1; s <= 20; ++s) {
      const Coord n = d == 2 ? 10 : 6;
      const BackgroundSpec spec = BackgroundSpec::bernoulli(d, d, 2 * d - 1, 0.5, 1000 * static_cast<std::uint64_t>(d) + s);
      Grid<int> eta(Window(Point::filled(d, 1), Point::filled(d, n)));
      for_each_point(eta.window(), [&](const Point& x) { eta[x] = spec.at(x); });
      const ReductionCheck c = dimensional_reduction_check(eta, static_cast<int>(s % static_cast<std::uint64_t>(2 * d)));
      ++total;
      if (c.ok())
        ++passed;
      else if (first.empty())
        first = cat(", first mismatch d=", d, " seed ", s, ": ", c.first_mismatch);
    }
  return {passed == total && total == 40, cat(passed, "/", total, " instances", first)};
}

// ---------------------------------------------------------------- 7

Outcome spanning() {
  const auto curve = spanning_curve(2, 0.1, {8, 16, 32, 64}, 200, 1);
  std::vector<double> n, p;
  bool nondecreasing = true;
  std::string pts;
  for (const auto& c : curve) {
    if (!p.empty() && c.fraction() < p.back()) nondecreasing = false;
    n.push_back(static_cast<double>(c.n));
    p.push_back(c.fraction());
    pts += cat(" ", c.successes, "/", c.trials);
  }
  const SaturationFit f = saturation_fit(n, p);
  return {nondecreasing && f.rate > 0 && f.r2 >= 0.9,
          cat("spanned", pts, ", c ", f.c, " C ", f.rate, " R2 ", f.r2, nondecreasing ? "" : ", not monotone")};
}

// ---------------------------------------------------------------- 8

Outcome explosiveness() {
  bool ok = true;
  std::string out;
  for (int d : {2, 3}) {
    int found = 0, minimal = 0;
    for (std::uint64_t s = 1; s <= 100; ++s) {
      ExplosionConfig cfg;
      cfg.radius = 512;
      const ExplosionThreshold th = explosion_threshold(BackgroundSpec::bernoulli(d, d, 2 * d - 1, 0.25, s), cfg);
      found += th.m.has_value();
      minimal += th.minimal_certified;
    }
    ok = ok && found >= 95;
    out += cat(" d=", d, ": found ", found, "/100 (minimal certified ", minimal, ");");
  }
  return {ok, out};
}

// ---------------------------------------------------------------- 9

struct Instance {
  Window w;
  Grid<std::int64_t> chips;
};

Instance random_instance(std::mt19937_64& rng, int d, Coord r) {
  const Window w = Window::centered(d, r);
  Instance in{w, Grid<std::int64_t>(w)};
  for_each_point(w, [&](const Point& x) { in.chips[x] = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(2 * d)); });
  in.chips[Point::zeros(d)] += static_cast<std::int64_t>(rng() % 40);
  return in;
}

SiteInit init_of(const Grid<std::int64_t>& chips) {
  return [&chips](const Point& x) {
    SiteSetup s;
    s.chips = chips[x];
    return s;
  };
}

std::string abelian_suite() {
  std::mt19937_64 rng(105);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 2;
    const Instance in = random_instance(rng, d, d == 2 ? 5 : 2);
    EngineOptions opt;
    opt.stop_on_frontier = false;
    Sandpile st(in.w, init_of(in.chips), opt);
    if (st.run(1'000'000).kind != OutcomeKind::Stabilized) return cat("instance ", trial, " did not stabilize");
    const auto seq = ref::sequential_stabilize(in.w, in.chips, rng());
    if (!seq || st.odometer(in.w).data() != seq->data()) return cat("odometer differs on instance ", trial);
  }
  return {};
}

std::string monotone_suite() {
  std::mt19937_64 rng(121);
  for (int pair = 0; pair < 100; ++pair) {
    const int d = 2 + pair % 2;
    const Instance lo = random_instance(rng, d, d == 2 ? 6 : 3);
    Instance hi = lo;
    for_each_point(hi.w, [&](const Point& x) { hi.chips[x] += static_cast<std::int64_t>(rng() % 2); });
    EngineOptions opt;
    opt.stop_on_frontier = false;
    Sandpile a(lo.w, init_of(lo.chips), opt), b(hi.w, init_of(hi.chips), opt);
    for (int t = 0; t < 30; ++t) {
      a.step();
      b.step();
      bool ok = true;
      for_each_point(lo.w, [&](const Point& x) { ok = ok && a.odometer_at(x) <= b.odometer_at(x); });
      if (!ok) return cat("pair ", pair, " violates at t = ", t + 1);
    }
  }
  return {};
}

std::string last_wave_suite() {
  int runs = 0;
  for (std::uint64_t seed = 1; runs < 50; ++seed) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, 500 + seed);
    WaveConfig cfg;
    cfg.radius = 20;
    const WaveThreshold th = last_wave_threshold(spec, Point{0, 0}, cfg, 4096);
    if (!th.m_hat) return cat("no exploding wave for seed ", seed);
    ++runs;
    const WaveRun pen = run_n_wave(spec, Point{0, 0}, *th.m_hat - 1, cfg);
    if (!pen.stabilized()) return cat("penultimate wave did not stabilize, seed ", seed);
    WaveConfig c = cfg;
    c.step_budget = 0;
    Sandpile st = run_n_wave(spec, Point{0, 0}, *th.m_hat, c).state;
    for (int t = 1; t <= 80; ++t) {
      const StepStats ss = st.step();
      bool ok = true;
      for_each_point(st.allocated(), [&](const Point& x) {
        if (x != Point{0, 0}) ok = ok && st.odometer_at(x) <= 1 + pen.state.odometer_at(x);
      });
      if (!ok) return cat("bound violated, seed ", seed, " t ", t);
      if (ss.frontier || ss.fired_sites == 0) break;
    }
  }
  return {};
}

std::string subadditive_suite() {
  const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, 17);
  std::mt19937_64 rng(12);
  WaveConfig cfg;
  cfg.radius = 24;
  ClusterCache cache(spec, cfg, 4096);
  auto pick = [&] { return Point{static_cast<Coord>(rng() % 13) - 6, static_cast<Coord>(rng() % 13) - 6}; };
  auto tilde = [&](const Point& a, const Point& b) {
    const WaveThreshold th = last_wave_threshold(spec, a, cfg, 4096);
    if (!th.m_hat) throw std::runtime_error("no exploding wave");
    const ArrivalField lw = wave_arrival(spec, a, *th.m_hat, Window::centered(a, 40));
    return cluster_arrival(lw, cache, {b})[0];
  };
  int checked = 0;
  for (int k = 0; k < 50; ++k) {
    const Point a = pick(), b = pick(), c = pick();
    const auto ac = tilde(a, c), ab = tilde(a, b), bc = tilde(b, c);
    if (ab == kUnreached || bc == kUnreached) continue;
    if (ac == kUnreached || ac > ab + bc) return cat("triple ", k, " violates");
    ++checked;
  }
  if (checked < 45) return cat("only ", checked, " triples resolved");
  return {};
}

std::string dominance_suite() {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, seed);
    const Window w = Window::centered(2, 24);
    const ArrivalField hat = arrival_field(spec, ArrivalKind::LastWave, Point{0, 0}, w);
    const ArrivalField tilde = arrival_field(spec, ArrivalKind::PenultimateCluster, Point{0, 0}, w);
    bool ok = true;
    for_each_point(Window::centered(2, 10), [&](const Point& x) {
      const auto a = hat.at(x), b = tilde.at(x);
      if (b != kUnreached) ok = ok && a != kUnreached && a <= b;
    });
    if (!ok) return cat("T_hat > T_tilde for seed ", seed);
  }
  return {};
}

// Mean |T - T_hat| over eight directions at n = 64 ... 512; the gap must stay bounded
// (fitted growth below 0.01 per unit of distance, and no seed growing by more than 2).
std::string flatness_suite(std::string& info) {
  const std::vector<Coord> scales = {64, 128, 256, 512};
  const std::vector<Point> dirs = {Point{1, 0},  Point{0, 1},  Point{-1, 0}, Point{0, -1},
                                   Point{1, 1},  Point{-1, 1}, Point{-1, -1}, Point{1, -1}};
  std::vector<double> xs, gaps;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, s);
    std::vector<Point> targets;
    for (const Point& d : dirs) targets.push_back(d * scales.back());
    const auto sa = seeded_arrival(spec, targets);
    if (!sa) return cat("no explosion for seed ", s);
    WaveConfig wc;
    wc.radius = 32;
    const WaveThreshold th = last_wave_threshold(spec, Point{0, 0}, wc, 4096);
    if (!th.m_hat) return cat("no exploding wave for seed ", s);
    const ArrivalField wa = wave_arrival(spec, Point{0, 0}, *th.m_hat, Window::centered(2, 2 * scales.back() + 2));
    std::vector<double> per;
    for (Coord n : scales) {
      double sum = 0;
      for (const Point& d : dirs) {
        const auto a = sa->t[d * n], b = wa.at(d * n);
        if (a == kUnreached || b == kUnreached) return cat("unreached target, seed ", s, " n ", n);
        sum += std::abs(static_cast<double>(a) - static_cast<double>(b));
      }
      per.push_back(sum / static_cast<double>(dirs.size()));
      xs.push_back(static_cast<double>(n));
      gaps.push_back(per.back());
    }
    info += cat(" seed ", s, ":");
    for (double g : per) info += cat(" ", g);
    if (per.back() > per.front() + 2) return cat("gap grows for seed ", s);
  }
  const LinearFit f = linear_fit(xs, gaps);
  info += cat("; slope ", f.slope);
  if (std::abs(f.slope) >= 0.01) return cat("gap grows with distance, slope ", f.slope);
  return {};
}

Outcome property_suites() {
  std::string failed, flat_info;
  auto run = [&](const char* name, const std::function<std::string()>& suite) {
    const std::string r = suite();
    if (!r.empty()) failed += cat(" ", name, ": ", r, ";");
  };
  run("abelian", abelian_suite);
  run("monotonicity", monotone_suite);
  run("last wave", last_wave_suite);
  run("subadditivity", subadditive_suite);
  run("T_hat <= T_tilde", dominance_suite);
  run("flatness", [&] { return flatness_suite(flat_info); });
  return {failed.empty(), failed.empty() ? cat("all suites hold; |T - T_hat|", flat_info) : failed};
}

// ---------------------------------------------------------------- 10

Outcome shape_trend() {
  // Reference ball: mean arrival over seeds disjoint from the measured ones, at t = 512.
  std::vector<Grid<std::uint32_t>> ts;
  for (std::uint64_t s = 101; s <= 110; ++s) {
    const auto sa = seeded_arrival(BackgroundSpec::bernoulli(2, 2, 3, 0.5, s),
                                   {Point{512, 0}, Point{0, 512}, Point{-512, 0}, Point{0, -512}, Point{362, 362}});
    if (!sa) return {false, cat("no explosion for reference seed ", s)};
    ts.push_back(sa->t);
  }
  const BallRaster ball = BallRaster::from_mean_arrival(ts, 512);
  std::vector<double> avg(3, 0.0);
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const auto m = shape_convergence_metric(BackgroundSpec::bernoulli(2, 2, 3, 0.5, s), {64, 128, 256}, ball);
    for (std::size_t i = 0; i < 3; ++i) avg[i] += m[i] / 10;
  }
  const auto l1 = shape_convergence_metric(BackgroundSpec::constant(2, 3), {64, 128, 256}, BallRaster::l1_ball(100));
  const bool ok = avg[0] > avg[1] && avg[1] > avg[2] && l1[2] < 0.05;
  return {ok, cat("Bernoulli mean metric ", avg[0], " > ", avg[1], " > ", avg[2], "; constant 3 at t=256: ", l1[2])};
}

}  // namespace

int main() {
  criterion(1, "counterexample front states", front_states);
  criterion(2, "counterexample arrival bounds", arrival_bounds);
  criterion(3, "robust growth exponent", growth_exponent);
  criterion(4, "wave square lower bound", wave_square);
  criterion(5, "recurrence", recurrence);
  criterion(6, "dimensional reduction", reduction);
  criterion(7, "bootstrap spanning curve", spanning);
  criterion(8, "explosiveness statistics", explosiveness);
  criterion(9, "property suites", property_suites);
  criterion(10, "shape convergence trend", shape_trend);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <random>

#include "reference.hpp"
#include "xsand/analysis.hpp"
#include "xsand/waves.hpp"

using namespace xsand;

namespace {

Grid<std::int64_t> eta_grid(const BackgroundSpec& spec, const Window& w) {
  Grid<std::int64_t> g(w);
  for_each_point(w, [&](const Point& x) { g[x] = spec.at(x); });
  return g;
}

}  // namespace

TEST_CASE("a stabilizing n-wave ends at the fixed point of the floor recursion") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 1, 3, 0.4, seed);
    WaveConfig cfg;
    cfg.radius = 12;
    cfg.scale_window_with_n = false;
    for (std::uint64_t n : {1, 2, 3, 5}) {
      const WaveRun wr = run_n_wave(spec, Point{0, 0}, n, cfg);
      if (!wr.stabilized()) continue;
      const Window w = Window::centered(2, 12);
      const auto fixed = ref::floor_wave(w, eta_grid(spec, w), Point{0, 0}, n);
      REQUIRE(fixed);
      CHECK(wr.state.odometer(w).data() == fixed->data());
    }
  }
}

TEST_CASE("robust backgrounds have no exploding wave") {
  WaveConfig cfg;
  cfg.radius = 16;
  const WaveThreshold th = last_wave_threshold(BackgroundSpec::constant(2, 2), Point{0, 0}, cfg, 256);
  CHECK_FALSE(th.m_hat);
}

TEST_CASE("constant 3: the first wave explodes and its cluster is the source") {
  WaveConfig cfg;
  cfg.radius = 16;
  const BackgroundSpec spec = BackgroundSpec::constant(2, 3);
  const WaveThreshold th = last_wave_threshold(spec, Point{0, 0}, cfg, 64);
  REQUIRE(th.m_hat);
  CHECK(*th.m_hat == 1);
  const auto pc = penultimate_cluster(spec, Point{0, 0}, cfg, 64);
  REQUIRE(pc);
  CHECK(pc->sites == std::vector<Point>{Point{0, 0}});
  // u_1 > 0 on the neighbours of the source, so T_hat(x) = |x|_1.
  const ArrivalField af = wave_arrival(spec, Point{0, 0}, 1, Window::centered(2, 20));
  for (Coord a = -15; a <= 15; ++a) {
    const Point x{a, 3};
    CHECK(af.at(x) == static_cast<std::uint32_t>(x.l1()));
  }
}

TEST_CASE("the threshold is minimal: the wave below it stabilizes, the threshold wave does not") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, seed);
    WaveConfig cfg;
    cfg.radius = 24;
    const WaveThreshold th = last_wave_threshold(spec, Point{0, 0}, cfg, 4096);
    REQUIRE(th.m_hat);
    CHECK(th.verified);
    CHECK(run_n_wave(spec, Point{0, 0}, *th.m_hat, cfg).exploded());
    if (*th.m_hat > 1) CHECK(run_n_wave(spec, Point{0, 0}, *th.m_hat - 1, cfg).stabilized());
  }
}

TEST_CASE("last wave stays within one of the penultimate wave") {
  int runs = 0;
  for (std::uint64_t seed = 1; runs < 50; ++seed) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, seed);
    WaveConfig cfg;
    cfg.radius = 20;
    const WaveThreshold th = last_wave_threshold(spec, Point{0, 0}, cfg, 4096);
    REQUIRE(th.m_hat);
    ++runs;
    const std::uint64_t m = *th.m_hat;
    const WaveRun pen = run_n_wave(spec, Point{0, 0}, m - 1, cfg);
    REQUIRE(pen.stabilized());
    // Step the m-wave by hand and compare at every time.
    WaveConfig c = cfg;
    c.step_budget = 0;
    Sandpile st = run_n_wave(spec, Point{0, 0}, m, c).state;
    for (int t = 1; t <= 60; ++t) {
      const StepStats ss = st.step();
      bool ok = true;
      for_each_point(st.allocated(), [&](const Point& x) {
        if (x == Point{0, 0}) return;
        ok = ok && st.odometer_at(x) <= 1 + pen.state.odometer_at(x);
      });
      REQUIRE_MESSAGE(ok, "seed " << seed << " t " << t);
      if (ss.frontier || ss.fired_sites == 0) break;
    }
  }
}

TEST_CASE("penultimate clusters on eta >= 2d-2 are dilated rectangles") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.3, seed);
    WaveConfig cfg;
    cfg.radius = 24;
    const auto pc = penultimate_cluster(spec, Point{0, 0}, cfg, 4096);
    REQUIRE(pc);
    CHECK(pc->is_rectangle_dilation());
    CHECK(pc->contains(Point{0, 0}));
  }
}

TEST_CASE("cluster arrival dominates last-wave arrival") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, seed);
    const Window w = Window::centered(2, 24);
    const ArrivalField hat = arrival_field(spec, ArrivalKind::LastWave, Point{0, 0}, w);
    const ArrivalField tilde = arrival_field(spec, ArrivalKind::PenultimateCluster, Point{0, 0}, w);
    for_each_point(Window::centered(2, 10), [&](const Point& x) {
      const auto a = hat.at(x), b = tilde.at(x);
      if (b != kUnreached) {
        REQUIRE(a != kUnreached);
        CHECK(a <= b);
      }
    });
  }
}

TEST_CASE("cluster arrival times are subadditive") {
  const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, 17);
  std::mt19937_64 rng(2);
  WaveConfig cfg;
  cfg.radius = 24;
  ClusterCache cache(spec, cfg, 4096);
  auto pick = [&] { return Point{static_cast<Coord>(rng() % 13) - 6, static_cast<Coord>(rng() % 13) - 6}; };
  auto tilde = [&](const Point& a, const Point& b) {
    const WaveThreshold th = last_wave_threshold(spec, a, cfg, 4096);
    REQUIRE(th.m_hat);
    const ArrivalField lw = wave_arrival(spec, a, *th.m_hat, Window::centered(a, 40));
    return cluster_arrival(lw, cache, {b})[0];
  };
  int checked = 0;
  for (int k = 0; k < 50; ++k) {
    const Point a = pick(), b = pick(), c = pick();
    const auto ac = tilde(a, c), ab = tilde(a, b), bc = tilde(b, c);
    if (ab == kUnreached || bc == kUnreached) continue;
    REQUIRE(ac != kUnreached);
    CHECK(ac <= ab + bc);
    ++checked;
  }
  CHECK(checked >= 45);
}

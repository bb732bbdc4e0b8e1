#include <doctest.h>

#include <cmath>
#include <random>

#include "xsand/shapes.hpp"
#include "xsand/stats.hpp"

using namespace xsand;

TEST_CASE("linear fit recovers an exact line") {
  const LinearFit f = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(f.slope == doctest::Approx(2));
  CHECK(f.intercept == doctest::Approx(1));
  CHECK(f.r2 == doctest::Approx(1));
  const LinearFit p = power_law_fit({1, 4, 16, 64}, {2, 4, 8, 16});
  CHECK(p.slope == doctest::Approx(0.5));
}

TEST_CASE("saturation fit recovers its parameters") {
  std::vector<double> n = {8, 16, 32, 64}, p;
  for (double x : n) p.push_back(1 - 1.3 * std::exp(-0.06 * x));
  const SaturationFit f = saturation_fit(n, p);
  CHECK(f.c == doctest::Approx(1.3).epsilon(1e-4));
  CHECK(f.rate == doctest::Approx(0.06).epsilon(1e-4));
  CHECK(f.r2 > 0.9999);
}

TEST_CASE("permutation test separates shifted samples") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> a, b, c;
  for (int i = 0; i < 40; ++i) {
    a.push_back(g(rng));
    b.push_back(g(rng) + 2);
    c.push_back(g(rng));
  }
  CHECK(mean_difference_pvalue(a, b, 499, 3) < 0.01);
  CHECK(mean_difference_pvalue(a, c, 499, 3) > 0.01);
}

TEST_CASE("direction fans") {
  CHECK(direction_fan(2, 8).size() == 8);
  CHECK(direction_fan(2, 9).size() == 16);
  CHECK(direction_fan(3, 26).size() == 26);
  const auto fan = direction_fan(2, 16);
  for (const Point& x : fan) CHECK(std::find(fan.begin(), fan.end(), x * -1) != fan.end());
}

TEST_CASE("ball rasters") {
  const BallRaster l1 = BallRaster::l1_ball(50);
  CHECK(l1.area() == doctest::Approx(2.0).epsilon(0.05));
  CHECK(l1.contains(0.49, 0.49));
  CHECK_FALSE(l1.contains(0.6, 0.6));
  const BallRaster disk = BallRaster::from_norm([](double a, double b) { return std::hypot(a, b); }, 50, 60);
  CHECK(disk.area() == doctest::Approx(M_PI).epsilon(0.02));
  const Image img = l1.image();
  CHECK(img.width == 2 * l1.half + 1);
}

TEST_CASE("constant 3: arrival speeds are exactly the l1 norm") {
  ShapeConfig cfg;
  cfg.permutation_rounds = 19;
  const ShapeEstimate est = estimate_limit_shape(BackgroundSpec::constant(2, 3), 8, {32, 64}, {1, 2}, cfg);
  for (std::size_t i = 0; i < est.directions.size(); ++i)
    CHECK(est.n_hat[i] == doctest::Approx(est.directions[i].l1() + 1.0 / 64));
  CHECK(est.symmetry_score < 1e-12);
  CHECK(est.convexity_score < 1e-12);
  CHECK(est.converged);
  CHECK(est.norm(Point{2, 0}) == doctest::Approx(2 * est.n_hat[0]));
}

TEST_CASE("rescaled support of constant 3 converges to the l1 ball") {
  const auto m = shape_convergence_metric(BackgroundSpec::constant(2, 3), {64, 128, 256}, BallRaster::l1_ball(100));
  CHECK(m[0] > m[1]);
  CHECK(m[1] > m[2]);
  CHECK(m[2] < 0.05);
}

TEST_CASE("symmetric difference counts lattice sites") {
  // Support = the l1 ball itself: only rasterisation error remains.
  const Window w = Window::centered(2, 40);
  const double diff = support_ball_difference([](const Point& x) { return x.l1() <= 32; }, w, 32,
                                              BallRaster::l1_ball(200));
  CHECK(diff < 0.02);
  const double none = support_ball_difference([](const Point&) { return false; }, w, 32, BallRaster::l1_ball(200));
  CHECK(none == doctest::Approx(1.0));
}

TEST_CASE("counterexample verification passes at small size") {
  CounterexampleConfig cfg;
  cfg.n_max = 41;
  cfg.cylinder_periods = 10;
  cfg.stacked_radius = 8;
  const CounterexampleReport rep = verify_counterexample(cfg);
  CHECK_MESSAGE(rep.arrival_bounds.ok, rep.arrival_bounds.first_failure);
  CHECK_MESSAGE(rep.cylinder.ok, rep.cylinder.first_failure);
  CHECK_MESSAGE(rep.stacked.ok, rep.stacked.first_failure);
  CHECK_MESSAGE(rep.explosive.ok, rep.explosive.first_failure);
}

TEST_CASE("cylinder ratios are 12n / (3 + 8n)") {
  const auto r = cylinder_lower_bound_ratios(20);
  REQUIRE(r.size() == 20);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    REQUIRE(r[i].ratio);
    CHECK(*r[i].ratio == doctest::Approx(12 * n / (3 + 8 * n)));
  }
}

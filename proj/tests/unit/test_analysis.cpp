#include <doctest.h>

#include <random>

#include "reference.hpp"
#include "xsand/analysis.hpp"

using namespace xsand;

namespace {

// d-neighbour bootstrap percolation by repeated sweeps: a site with threshold
// 2d starts infected, a site with threshold d needs d infected neighbours.
bool sweep_bootstrap(const Grid<int>& th) {
  const Window& w = th.window();
  const int d = w.dim();
  Grid<std::uint8_t> inf(w, 0);
  for_each_point(w, [&](const Point& x) { inf[x] = th[x] >= 2 * d; });
  for (bool changed = true; changed;) {
    changed = false;
    for_each_point(w, [&](const Point& x) {
      if (inf[x]) return;
      int k = 0;
      for (const Point& y : ref::neighbours(x)) k += inf.get_or(y, 0);
      if (k >= d) {
        inf[x] = 1;
        changed = true;
      }
    });
  }
  return std::all_of(inf.data().begin(), inf.data().end(), [](std::uint8_t v) { return v != 0; });
}

Grid<int> random_box(std::mt19937_64& rng, const Window& w, int lo, int hi) {
  Grid<int> g(w);
  for_each_point(w, [&](const Point& x) { g[x] = lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); });
  return g;
}

}  // namespace

TEST_CASE("crossing time on constant backgrounds") {
  const Window cube = Window::cube(Point{0, 0}, 4);  // {1..4}^2
  const auto bases = line_bases(cube, 0);
  REQUIRE(!bases.empty());
  // The line along column x_1 = 1 of an all-3 cube: columns 2, 3, 4 fire in succession.
  Point z{0, 2};
  CHECK(crossing_time(field_of(BackgroundSpec::constant(2, 3)), cube, 1, Point{1, 0}, 17) == 3);
  CHECK(crossing_time(field_of(BackgroundSpec::constant(2, 3)), cube, 1, Point{2, 0}, 17) == 2);
  CHECK_FALSE(crossing_time(field_of(BackgroundSpec::constant(2, 2)), cube, 0, z, 17));
  const CrossingReport r3 = crossing_report(BackgroundSpec::constant(2, 3), 4, Point{0, 0});
  CHECK(r3.good);
  const CrossingReport r2 = crossing_report(BackgroundSpec::constant(2, 2), 4, Point{0, 0});
  CHECK_FALSE(r2.good);
}

TEST_CASE("raising one site never slows a crossing") {
  std::mt19937_64 rng(8);
  const Window cube = Window::cube(Point{0, 0}, 5);
  for (int pair = 0; pair < 60; ++pair) {
    Grid<int> lo = random_box(rng, cube.dilated(1), 2, 3);
    Grid<int> hi = lo;
    const Point bump = cube.point_at(rng() % cube.volume());
    hi[bump] = std::min(hi[bump] + 1, 3);
    const auto fl = field_of(lo), fh = field_of(hi);
    for (int axis = 0; axis < 2; ++axis)
      for (const Point& z : line_bases(cube, axis)) {
        const auto a = crossing_time(fl, cube, axis, z, 26), b = crossing_time(fh, cube, axis, z, 26);
        if (a) {
          REQUIRE(b);
          CHECK(*b <= *a);
        }
      }
  }
}

TEST_CASE("good cube maps at the extremes") {
  const Window macro = Window::centered(2, 3);
  const GoodCubeMap all = good_cube_map(BackgroundSpec::constant(2, 3), 4, macro, 16);
  CHECK(all.component_sizes.size() == 1);
  CHECK(all.largest_spans);
  for (const auto& dist : all.distances) CHECK(dist.chemical == dist.l1);
  const GoodCubeMap none = good_cube_map(BackgroundSpec::constant(2, 2), 4, macro, 16);
  CHECK(none.component_sizes.empty());
  const GoodCubeMap mixed = good_cube_map(BackgroundSpec::bernoulli(2, 2, 3, 0.6, 3), 6, Window::centered(2, 5), 32);
  for (const auto& dist : mixed.distances)
    if (dist.chemical >= 0) CHECK(dist.chemical >= dist.l1);
}

TEST_CASE("box crossing predicates") {
  const Window box(Point{0, 0}, Point{3, 3});
  CHECK(is_box_crossing_all(field_of(BackgroundSpec::constant(2, 3)), box));
  CHECK(is_strongly_box_crossing(field_of(BackgroundSpec::constant(2, 3)), box));
  for (int axis = 0; axis < 2; ++axis) CHECK_FALSE(is_box_crossing(field_of(BackgroundSpec::constant(2, 2)), box, axis));
  // The two modified counterexample tiles.
  for (const auto& rows : {std::vector<std::vector<int>>{{3, 2, 2, 3}, {2, 3, 3, 2}, {2, 3, 3, 2}, {3, 2, 2, 3}},
                           std::vector<std::vector<int>>{{3, 2, 2, 3}, {2, 2, 3, 2}, {2, 3, 3, 2}, {3, 2, 2, 3}}}) {
    Grid<int> g(box);
    g.data() = BackgroundSpec::tile_from_rows(rows).values;
    CHECK(is_strongly_box_crossing(field_of(g), box));
  }
  // Large boxes are subsampled and say so.
  const StrongCrossing big = strong_box_crossing(field_of(BackgroundSpec::constant(2, 3)),
                                                 Window(Point{0, 0}, Point{69, 9}), 64, 1);
  CHECK(big.holds);
  CHECK(big.subsampled);
  CHECK(big.lines_checked == 64);
}

TEST_CASE("recurrence on constant backgrounds") {
  for (int d : {2, 3})
    for (Coord n : {2, 4, 8}) {
      const Window q(Point::filled(d, 1), Point::filled(d, n));
      CHECK(is_recurrent_on(field_of(BackgroundSpec::constant(d, d)), q));
      CHECK(is_recurrent_on(field_of(BackgroundSpec::constant(d, 2 * d - 1)), q));
    }
  CHECK_FALSE(is_recurrent_on(field_of(BackgroundSpec::constant(2, 1)), Window(Point{1, 1}, Point{3, 3})));
}

TEST_CASE("recurrence restricts to sub-boxes and is monotone in the chips") {
  std::mt19937_64 rng(12);
  int recurrent = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const Window v(Point{1, 1}, Point{6, 5});
    const Grid<int> eta = random_box(rng, v, 1, 3);
    if (!is_recurrent_on(field_of(eta), v)) continue;
    ++recurrent;
    for (int k = 0; k < 6; ++k) {
      Point lo{1 + static_cast<Coord>(rng() % 6), 1 + static_cast<Coord>(rng() % 5)};
      Point hi{lo[0] + static_cast<Coord>(rng() % static_cast<std::uint64_t>(7 - lo[0])),
               lo[1] + static_cast<Coord>(rng() % static_cast<std::uint64_t>(6 - lo[1]))};
      CHECK(is_recurrent_on(field_of(eta), Window(lo, hi)));
    }
    Grid<int> more = eta;
    more[v.point_at(rng() % v.volume())] = 3;
    CHECK(is_recurrent_on(field_of(more), v));
  }
  CHECK(recurrent > 5);
}

TEST_CASE("bootstrap: toppling and infection agree on 500 instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 2 + trial % 2;
    const Coord n = d == 2 ? 2 + static_cast<Coord>(rng() % 31) : 2 + static_cast<Coord>(rng() % 11);
    const double p = 0.05 + 0.3 * static_cast<double>(rng() % 100) / 100.0;
    const Grid<int> th = bootstrap_field(d, n, p, rng());
    const bool a = spanned_by_toppling(th), b = spanned_by_infection(th);
    CHECK(a == b);
    CHECK(b == sweep_bootstrap(th));
    CHECK(bootstrap_internally_spanned(th) == a);
  }
}

TEST_CASE("bootstrap extremes") {
  CHECK(bootstrap_internally_spanned(bootstrap_field(2, 8, 1.0, 1)));
  CHECK_FALSE(bootstrap_internally_spanned(bootstrap_field(2, 8, 0.0, 1)));
  const auto curve = spanning_curve(2, 0.1, {8, 32}, 60, 3);
  CHECK(curve[1].fraction() >= curve[0].fraction());
}

TEST_CASE("dimensional reduction holds on random boxes") {
  for (int d : {2, 3})
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Coord n = d == 2 ? 8 : 6;
      const Grid<int> eta = fill_window(BackgroundSpec::bernoulli(d, d, 2 * d - 1, 0.5, seed),
                                        Window(Point::filled(d, 1), Point::filled(d, n)));
      for (int face = 0; face < 2 * d; ++face) {
        const ReductionCheck c = dimensional_reduction_check(eta, face);
        CHECK_MESSAGE(c.ok(), c.first_mismatch);
      }
    }
  const Grid<int> bad = fill_window(BackgroundSpec::constant(2, 1), Window(Point{1, 1}, Point{4, 4}));
  CHECK_THROWS_AS(dimensional_reduction_check(bad, 0), std::invalid_argument);
}

TEST_CASE("path filling fills the bounding rectangle on eta >= 2d-2") {
  std::vector<Point> path;
  for (Coord a = 0; a <= 6; ++a) path.push_back(Point{a, 0});
  for (Coord b = 1; b <= 5; ++b) path.push_back(Point{6, b});
  CHECK(path_fill_time(field_of(BackgroundSpec::constant(2, 2)), path, 200));
}

TEST_CASE("explosion thresholds") {
  ExplosionConfig cfg;
  cfg.radius = 32;
  cfg.n_budget = 1 << 12;
  const ExplosionThreshold ce = explosion_threshold(BackgroundSpec::counterexample(), cfg);
  REQUIRE(ce.m);
  CHECK(*ce.m == 3);
  CHECK(ce.minimal_certified);
  CHECK(explosion_threshold(BackgroundSpec::constant(2, 3), cfg).m == std::optional<std::uint64_t>(1));
  const ExplosionThreshold robust = explosion_threshold(BackgroundSpec::constant(2, 2), cfg);
  CHECK_FALSE(robust.upper_bound);
}

TEST_CASE("threshold agrees with direct runs at and below it") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.25, seed);
    ExplosionConfig cfg;
    cfg.radius = 40;
    cfg.n_budget = 1 << 14;
    const ExplosionThreshold th = explosion_threshold(spec, cfg);
    REQUIRE(th.m);
    REQUIRE(th.minimal_certified);
    const std::uint64_t m = *th.m;
    auto direct = [&](std::uint64_t n) {
      const Window w = Window::centered(2, explosion_radius(cfg, 2, n));
      Sandpile st(w, background_init(spec, Point{0, 0}, static_cast<std::int64_t>(n)));
      return st.run(std::numeric_limits<std::int64_t>::max()).kind;
    };
    CHECK(direct(m) == OutcomeKind::FrontierHit);
    if (m > 1) CHECK(direct(m - 1) == OutcomeKind::Stabilized);
  }
}

TEST_CASE("a certified explosion also reaches a frontier twice as far") {
  ExplosionConfig cfg;
  cfg.radius = 24;
  cfg.want_certificate = true;
  for (const BackgroundSpec& spec : {BackgroundSpec::counterexample(), BackgroundSpec::counterexample(0.5, 4)}) {
    const ExplosionThreshold th = explosion_threshold(spec, cfg);
    REQUIRE(th.m);
    REQUIRE(th.certificate);
    CHECK(th.certificate->valid());
    const Window far = Window::centered(2, 2 * explosion_radius(cfg, 2, *th.m));
    Sandpile st = Sandpile::growing(far, Window::centered(2, 8), background_init(spec, Point{0, 0}, static_cast<std::int64_t>(*th.m)));
    CHECK(st.run(std::numeric_limits<std::int64_t>::max()).kind == OutcomeKind::FrontierHit);
  }
}

TEST_CASE("modified counterexample: the origin box dominates its lower bound") {
  const Grid<int> mod = modified_counterexample(BackgroundSpec::counterexample(), Window::centered(2, 12));
  const Tile lb = BackgroundSpec::tile_from_rows({{3, 2, 2, 3}, {2, 2, 3, 2}, {3, 3, 3, 2}, {1, 3, 2, 3}});
  for (Coord a = 0; a < 4; ++a)
    for (Coord b = 0; b < 4; ++b) CHECK(mod[Point{a, b}] >= lb.values[static_cast<std::size_t>(b * 4 + a)]);
}

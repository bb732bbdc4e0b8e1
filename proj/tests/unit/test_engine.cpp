#include <doctest.h>

#include <random>
#include <string>

#include "reference.hpp"
#include "xsand/engine.hpp"
#include "xsand/shapes.hpp"

using namespace xsand;

namespace {

struct Instance {
  Window w;
  Grid<std::int64_t> chips;
  Grid<std::uint8_t> frozen;
  Grid<std::uint64_t> w0;
  Grid<std::uint64_t> cap;
};

Instance random_instance(std::mt19937_64& rng, int d, Coord r, bool with_frozen, bool with_caps) {
  const Window w = Window::centered(d, r);
  Instance in{w, Grid<std::int64_t>(w), Grid<std::uint8_t>(w, 0), Grid<std::uint64_t>(w, 0),
              Grid<std::uint64_t>(w, kNoCap)};
  for_each_point(w, [&](const Point& x) {
    in.chips[x] = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(2 * d));
    if (with_frozen && rng() % 10 == 0) {
      in.frozen[x] = 1;
      in.w0[x] = rng() % 3;
    }
    if (with_caps && rng() % 4 == 0) in.cap[x] = rng() % 3;
  });
  in.chips[Point::zeros(d)] += static_cast<std::int64_t>(rng() % 40);
  return in;
}

SiteInit init_of(const Instance& in) {
  return [&in](const Point& x) {
    SiteSetup s;
    s.chips = in.chips[x];
    s.frozen = in.frozen[x] != 0;
    s.w0 = in.w0[x];
    s.cap = in.cap[x];
    return s;
  };
}

std::string frame_string(const CylinderFrame& f, int row_x2) {
  std::string s;
  for (Coord x1 = 0; x1 < 12; ++x1) {
    const Point p{x1, row_x2};
    s += f.odometer[p] > 0 ? '*' : static_cast<char>('0' + f.chips[p]);
  }
  return s;
}

}  // namespace

TEST_CASE("parallel toppling matches a naive synchronous reference step by step") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 2 + trial % 2;
    const Instance in = random_instance(rng, d, d == 2 ? 6 : 3, trial % 3 == 1, trial % 3 == 2);
    EngineOptions opt;
    opt.track_arrival = true;
    opt.stop_on_frontier = false;
    Sandpile st(in.w, init_of(in), opt);
    ref::Parallel naive(in.w, in.chips, in.frozen, in.w0, in.cap);
    for (int t = 0; t < 40; ++t) {
      st.step();
      naive.step();
      bool same = true;
      for_each_point(in.w, [&](const Point& x) {
        same = same && st.odometer_at(x) == naive.v[x] && st.chips_at(x) == naive.s[x] &&
               st.arrival_at(x) == naive.arrival[x];
      });
      REQUIRE_MESSAGE(same, "trial " << trial << " step " << t + 1);
    }
  }
}

TEST_CASE("stabilized odometer equals the sequential (Abelian) odometer on 200 instances") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 2;
    const Instance in = random_instance(rng, d, d == 2 ? 5 : 2, false, false);
    EngineOptions opt;
    opt.stop_on_frontier = false;
    Sandpile st(in.w, init_of(in), opt);
    const auto out = st.run(1'000'000);
    REQUIRE(out.kind == OutcomeKind::Stabilized);
    const auto seq = ref::sequential_stabilize(in.w, in.chips, rng());
    REQUIRE(seq);
    const auto lib = sequential_oracle(in.w, init_of(in), rng());
    REQUIRE(lib);
    const Grid<std::uint64_t> v = st.odometer(in.w);
    CHECK(v.data() == seq->data());
    CHECK(lib->data() == seq->data());
  }
}

TEST_CASE("odometers are monotone in the initial chips") {
  std::mt19937_64 rng(21);
  for (int pair = 0; pair < 100; ++pair) {
    const int d = 2 + pair % 2;
    const Instance lo = random_instance(rng, d, d == 2 ? 6 : 3, false, false);
    Instance hi = lo;
    for_each_point(hi.w, [&](const Point& x) { hi.chips[x] += static_cast<std::int64_t>(rng() % 2); });
    EngineOptions opt;
    opt.stop_on_frontier = false;
    Sandpile a(lo.w, init_of(lo), opt), b(hi.w, init_of(hi), opt);
    for (int t = 0; t < 30; ++t) {
      a.step();
      b.step();
      bool ok = true;
      for_each_point(lo.w, [&](const Point& x) { ok = ok && a.odometer_at(x) <= b.odometer_at(x); });
      REQUIRE(ok);
    }
  }
}

TEST_CASE("chips are conserved between the window and the sink") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = random_instance(rng, 2, 5, false, false);
    std::int64_t total = 0;
    for (auto c : in.chips.data()) total += c;
    EngineOptions opt;
    opt.stop_on_frontier = false;
    Sandpile st(in.w, init_of(in), opt);
    for (int t = 0; t < 50; ++t) {
      st.step();
      REQUIRE(st.tracked_chips() + st.exported_chips() == total);
    }
  }
}

TEST_CASE("worker count does not change results") {
  const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.5, 9);
  const Window w = Window::centered(2, 48);
  EngineOptions one, many;
  one.track_arrival = many.track_arrival = true;
  many.workers = 4;
  Sandpile a(w, background_init(spec, Point{0, 0}, 40), one);
  Sandpile b(w, background_init(spec, Point{0, 0}, 40), many);
  const auto oa = a.run(10'000), ob = b.run(10'000);
  CHECK(oa.kind == ob.kind);
  CHECK(oa.time == ob.time);
  CHECK(a.odometer(w).data() == b.odometer(w).data());
  CHECK(a.arrival(w).data() == b.arrival(w).data());
}

TEST_CASE("a growing window agrees with a fully allocated one") {
  const BackgroundSpec spec = BackgroundSpec::bernoulli(2, 2, 3, 0.3, 4);
  const Window w = Window::centered(2, 60);
  EngineOptions opt;
  opt.track_arrival = true;
  Sandpile full(w, background_init(spec, Point{0, 0}, 500), opt);
  Sandpile grow = Sandpile::growing(w, Window::centered(2, 4), background_init(spec, Point{0, 0}, 500), opt);
  const auto a = full.run(100'000), b = grow.run(100'000);
  CHECK(a.kind == b.kind);
  CHECK(a.time == b.time);
  CHECK(full.odometer(w).data() == grow.odometer(w).data());
  CHECK(full.arrival(w).data() == grow.arrival(w).data());
}

TEST_CASE("empty seed on a stable background stabilizes at time zero") {
  Sandpile st(Window::centered(2, 4), background_init(BackgroundSpec::constant(2, 2), Point{0, 0}, 0));
  const auto out = st.run(10);
  CHECK(out.kind == OutcomeKind::Stabilized);
  CHECK(out.time == 0);
  CHECK(st.support_size() == 0);
}

TEST_CASE("constant 3 background: the front moves at speed one in l1") {
  EngineOptions opt;
  opt.track_arrival = true;
  Sandpile st(Window::centered(2, 30), background_init(BackgroundSpec::constant(2, 3), Point{0, 0}, 1), opt);
  st.run(1000);
  for (Coord a = -20; a <= 20; ++a)
    for (Coord b = -20; b <= 20; ++b) {
      const Point x{a, b};
      if (x.l1() <= 28) CHECK(st.arrival_at(x) == static_cast<std::uint32_t>(x.l1() + 1));
    }
}

TEST_CASE("counterexample cylinder matches the expected front states for t = 0..12") {
  // Rows from x_2 = 3 down to x_2 = 0; '*' marks toppled sites.
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
  const auto [z, w0] = counterexample_cylinder(40);
  const CylinderRun r = cylinder_run(z, w0, 40);
  REQUIRE(r.frames.size() >= 13);
  for (int t = 0; t <= 12; ++t)
    for (int row = 0; row < 4; ++row)
      CHECK_MESSAGE(frame_string(r.frames[static_cast<std::size_t>(t)], 3 - row) == expected[static_cast<std::size_t>(t)][static_cast<std::size_t>(row)],
                    "t=" << t << " row " << row);
  CHECK(front_period_holds(r.frames, 12, 8, 0));
  REQUIRE(r.period);
  CHECK(12 % *r.period == 0);
  CHECK(*r.advance * 12 == 8 * *r.period);
}

TEST_CASE("exact_window covers every site a speed-one front can reach") {
  const Window w = exact_window(Point{0, 0}, 10);
  CHECK(w.contains(Point{10, 0}));
  CHECK(w.contains(Point{-10, 10}));
}

#include "xsand/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "xsand/stats.hpp"
#include "xsand/waves.hpp"

namespace xsand {

namespace {

constexpr std::uint64_t kTagStackedSample = 0x57ac'6edULL;

nlohmann::json point_json(const Point& p) {
  std::vector<Coord> v;
  for (int i = 0; i < p.dim(); ++i) v.push_back(p[i]);
  return v;
}

std::string point_key(const Point& p) {
  std::string s;
  for (int i = 0; i < p.dim(); ++i) s += (i ? ";" : "") + std::to_string(p[i]);
  return s;
}

Coord gcd_of(const Point& x) {
  Coord g = 0;
  for (int i = 0; i < x.dim(); ++i) g = std::gcd(g, x[i] < 0 ? -x[i] : x[i]);
  return g;
}

double angle_of(double a, double b) {
  double t = std::atan2(b, a);
  if (t < 0) t += 2 * M_PI;
  return t;
}

std::vector<std::vector<int>> signed_permutations(int d) {
  std::vector<int> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> out;  // entries: axis * 2 + sign bit
  do {
    for (int mask = 0; mask < (1 << d); ++mask) {
      std::vector<int> g;
      for (int k = 0; k < d; ++k) g.push_back(perm[static_cast<std::size_t>(k)] * 2 + ((mask >> k) & 1));
      out.push_back(g);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

Point act(const std::vector<int>& g, const Point& x) {
  Point y(x.dim());
  for (int k = 0; k < x.dim(); ++k) {
    const int axis = g[static_cast<std::size_t>(k)] / 2;
    const bool flip = g[static_cast<std::size_t>(k)] & 1;
    y[axis] = flip ? -x[k] : x[k];
  }
  return y;
}

// Norm of the star-shaped polygon through `boundary` (sorted by angle).
double polygon_norm(const std::vector<std::pair<double, double>>& boundary, double y1, double y2) {
  const double r = std::hypot(y1, y2);
  if (r == 0) return 0.0;
  const double th = angle_of(y1, y2);
  const std::size_t n = boundary.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = boundary[k];
    const auto& b = boundary[(k + 1) % n];
    const double ta = angle_of(a.first, a.second);
    double tb = angle_of(b.first, b.second);
    double t = th;
    if (tb <= ta) tb += 2 * M_PI;
    if (t < ta) t += 2 * M_PI;
    if (t < ta || t > tb) continue;
    // Intersect the ray s * (y1, y2) / r with the chord a-b.
    const double ux = y1 / r, uy = y2 / r;
    const double ex = b.first - a.first, ey = b.second - a.second;
    const double den = ux * ey - uy * ex;
    if (std::abs(den) < 1e-15) return r / std::hypot(a.first, a.second);
    const double s = (a.first * ey - a.second * ex) / den;
    return r / s;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<Point> direction_fan(int dim, int min_count) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  for (Coord m = 1;; ++m) {
    std::vector<Point> fan;
    for_each_point(Window::centered(dim, m), [&](const Point& x) {
      if (gcd_of(x) == 1) fan.push_back(x);
    });
    if (static_cast<int>(fan.size()) < min_count) continue;
    if (dim == 2)
      std::sort(fan.begin(), fan.end(), [](const Point& a, const Point& b) {
        return angle_of(static_cast<double>(a[0]), static_cast<double>(a[1])) <
               angle_of(static_cast<double>(b[0]), static_cast<double>(b[1]));
      });
    else
      std::sort(fan.begin(), fan.end());
    return fan;
  }
}

std::optional<SeededArrival> seeded_arrival(const BackgroundSpec& spec, const std::vector<Point>& targets,
                                            const SpeedConfig& cfg) {
  const int d = spec.dim();
  const Point origin = Point::zeros(d);
  Coord reach = 0;
  for (const Point& x : targets) reach = std::max(reach, x.l1());
  Coord radius = reach + 4;
  for (;;) {
    ExplosionConfig ec;
    ec.radius = radius;
    ec.n_budget = cfg.n_budget;
    ec.scale_window_with_n = false;
    ec.workers = cfg.workers;
    const ExplosionThreshold th = explosion_threshold(spec, ec);
    if (!th.upper_bound) return std::nullopt;
    const std::uint64_t n = th.m.value_or(*th.upper_bound);
    ArrivalField af = explosion_arrival(spec, origin, n, Window::centered(origin, radius), cfg.workers);
    bool all = true;
    for (const Point& x : targets) all = all && af.at(x) != kUnreached;
    if (all || 2 * radius > cfg.max_radius) return SeededArrival{n, radius, std::move(af.t)};
    radius *= 2;
  }
}

DirectionSpeed estimate_direction_speed(const BackgroundSpec& spec, const Point& direction,
                                        const std::vector<Coord>& scales, const std::vector<std::uint64_t>& seeds,
                                        const SpeedConfig& cfg) {
  if (direction.dim() != spec.dim() || gcd_of(direction) == 0) throw std::invalid_argument("direction must be nonzero");
  if (!std::is_sorted(scales.begin(), scales.end()) || scales.empty() || scales.front() < 1)
    throw std::invalid_argument("scales must be positive and increasing");
  DirectionSpeed ds;
  ds.direction = direction;
  std::vector<Point> targets;
  for (Coord n : scales) targets.push_back(direction * n);
  for (std::uint64_t seed : seeds) {
    const auto sa = seeded_arrival(spec.with_seed(seed), targets, cfg);
    if (!sa) ++ds.skipped_seeds;
    for (Coord n : scales) {
      SpeedSample s{direction, n, seed, std::nullopt};
      if (sa) {
        const std::uint32_t t = sa->t.get_or(direction * n, kUnreached);
        if (t != kUnreached) s.ratio = static_cast<double>(t) / static_cast<double>(n);
      }
      ds.samples.push_back(s);
    }
  }
  return ds;
}

std::pair<Grid<int>, Grid<std::uint64_t>> counterexample_cylinder(Coord length) {
  if (length < 4) throw std::invalid_argument("cylinder needs at least one block");
  const Window w(Point{0, 0}, Point{length - 1, 3});
  const Tile zeta1m = BackgroundSpec::tile_from_rows({{3, 2, 2, 3}, {2, 3, 3, 2}, {2, 3, 3, 2}, {3, 2, 2, 3}});
  const Tile first = BackgroundSpec::tile_from_rows({{4, 2, 2, 3}, {2, 3, 3, 2}, {3, 3, 3, 2}, {3, 3, 2, 3}});
  const Tile seeded = BackgroundSpec::tile_from_rows({{1, 1, 1, 1}, {1, 1, 1, 0}, {1, 1, 1, 0}, {1, 1, 1, 1}});
  Grid<int> z(w);
  Grid<std::uint64_t> w0(w, 0);
  for_each_point(w, [&](const Point& x) {
    const auto off = static_cast<std::size_t>(x[1] * 4 + x[0] % 4);
    z[x] = x[0] < 4 ? first.values[off] : zeta1m.values[off];
    w0[x] = x[0] < 4 ? static_cast<std::uint64_t>(seeded.values[off]) : 0;
  });
  return {z, w0};
}

std::vector<SpeedSample> cylinder_lower_bound_ratios(int periods) {
  const auto [z, w0] = counterexample_cylinder(3 + 8 * periods + 16);
  const CylinderRun r = cylinder_run(z, w0, 12 * periods + 24, 1, false);
  std::vector<SpeedSample> out;
  for (int n = 1; n <= periods; ++n) {
    const Point x{3 + 8 * n, 0};
    const std::uint32_t t = r.state.arrival_at(x);
    SpeedSample s{Point{1, 0}, x[0], 0, std::nullopt};
    if (t != kUnreached) s.ratio = static_cast<double>(t) / static_cast<double>(x[0]);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------- ball rasters

bool BallRaster::at(Coord i, Coord j) const {
  if (i < -half || i > half || j < -half || j > half) return false;
  const Coord side = 2 * half + 1;
  return inside[static_cast<std::size_t>((j + half) * side + (i + half))] != 0;
}

bool BallRaster::contains(double y1, double y2) const {
  return at(static_cast<Coord>(std::llround(y1 * scale)), static_cast<Coord>(std::llround(y2 * scale)));
}

double BallRaster::area() const {
  const auto n = std::count(inside.begin(), inside.end(), std::uint8_t{1});
  return static_cast<double>(n) / (scale * scale);
}

Image BallRaster::image() const {
  Image img;
  img.width = img.height = static_cast<int>(2 * half + 1);
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 255);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      if (at(c - half, half - r)) img.pixels[static_cast<std::size_t>(r) * img.width + c] = 0;
  return img;
}

BallRaster BallRaster::from_norm(const std::function<double(double, double)>& norm, double scale, Coord half) {
  BallRaster b;
  b.scale = scale;
  b.half = half;
  const Coord side = 2 * half + 1;
  b.inside.assign(static_cast<std::size_t>(side * side), 0);
  for (Coord j = -half; j <= half; ++j)
    for (Coord i = -half; i <= half; ++i)
      if (norm(static_cast<double>(i) / scale, static_cast<double>(j) / scale) <= 1.0 + 1e-12)
        b.inside[static_cast<std::size_t>((j + half) * side + (i + half))] = 1;
  return b;
}

BallRaster BallRaster::l1_ball(double scale) {
  return from_norm([](double a, double b) { return std::abs(a) + std::abs(b); }, scale,
                   static_cast<Coord>(std::ceil(scale)) + 1);
}

BallRaster BallRaster::from_mean_arrival(const std::vector<Grid<std::uint32_t>>& ts, double scale) {
  if (ts.empty()) throw std::invalid_argument("no arrival grids");
  Coord half = std::numeric_limits<Coord>::max();
  for (const auto& t : ts)
    for (int a = 0; a < 2; ++a) half = std::min({half, -t.window().lower()[a], t.window().upper()[a]});
  if (half < 0) throw std::invalid_argument("arrival window does not contain the origin");
  const int d = ts[0].window().dim();
  BallRaster b;
  b.scale = scale;
  b.half = half;
  const Coord side = 2 * half + 1;
  b.inside.assign(static_cast<std::size_t>(side * side), 0);
  for (Coord j = -half; j <= half; ++j)
    for (Coord i = -half; i <= half; ++i) {
      Point x(d);
      x[0] = i;
      x[1] = j;
      double sum = 0;
      bool reached = true;
      for (const auto& t : ts) {
        const std::uint32_t v = t[x];
        if (v == kUnreached) reached = false;
        sum += v;
      }
      if (reached && sum / static_cast<double>(ts.size()) <= scale)
        b.inside[static_cast<std::size_t>((j + half) * side + (i + half))] = 1;
    }
  return b;
}

BallRaster BallRaster::from_arrival(const Grid<std::uint32_t>& t, double scale) { return from_mean_arrival({t}, scale); }

// ---------------------------------------------------------------- limit shape

std::optional<double> ShapeEstimate::norm(const Point& x) const {
  const Coord g = gcd_of(x);
  if (g == 0) return 0.0;
  Point p = x;
  for (int k = 0; k < p.dim(); ++k) p[k] /= g;
  for (std::size_t i = 0; i < directions.size(); ++i)
    if (directions[i] == p) return static_cast<double>(g) * n_hat[i];
  return std::nullopt;
}

nlohmann::json ShapeEstimate::to_json() const {
  nlohmann::json j;
  j["background"] = spec.to_json();
  j["scales"] = scales;
  nlohmann::json dirs = nlohmann::json::array();
  for (std::size_t i = 0; i < directions.size(); ++i)
    dirs.push_back({{"direction", point_json(directions[i])},
                    {"n_hat", n_hat[i]},
                    {"se", n_hat_se[i]},
                    {"successes", successes[i]}});
  j["directions"] = dirs;
  j["skipped_seeds"] = skipped_seeds;
  j["ball_area"] = ball.area();
  j["convexity_score"] = convexity_score;
  j["symmetry_score"] = symmetry_score;
  j["symmetry_pvalue"] = symmetry_pvalue ? nlohmann::json(*symmetry_pvalue) : nlohmann::json(nullptr);
  j["scale_spread"] = scale_spread;
  j["converged"] = converged;
  j["flags"] = flags;
  return j;
}

void ShapeEstimate::write_speed_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "direction,n,seed,ratio\n";
  for (const auto& s : samples) {
    os << point_key(s.direction) << ',' << s.scale << ',' << s.seed << ',';
    if (s.ratio) os << *s.ratio;
    os << '\n';
  }
}

void write_gnuplot_script(const std::string& path, const std::string& csv_name, const std::string& title) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "set datafile separator ','\n"
     << "set key off\n"
     << "set title '" << title << "'\n"
     << "set xlabel 'n'\n"
     << "set ylabel 'T(n x) / n'\n"
     << "set logscale x 2\n"
     << "plot '" << csv_name << "' every ::1 using 2:4 with points pt 7 ps 0.5\n";
}

ShapeEstimate estimate_limit_shape(const BackgroundSpec& spec, int direction_count, const std::vector<Coord>& scales,
                                   const std::vector<std::uint64_t>& seeds, const ShapeConfig& cfg) {
  const int d = spec.dim();
  const int need = d == 2 ? 8 : (d == 3 ? 26 : 2 * d);
  if (direction_count < need) throw std::invalid_argument("direction fan too small for this dimension");
  if (scales.empty() || !std::is_sorted(scales.begin(), scales.end()) || scales.front() < 1)
    throw std::invalid_argument("scales must be positive and increasing");
  ShapeEstimate est;
  est.spec = spec;
  est.scales = scales;
  est.directions = direction_fan(d, direction_count);
  const std::size_t nd = est.directions.size();
  std::vector<Point> targets;
  for (const Point& x : est.directions)
    for (Coord n : scales) targets.push_back(x * n);

  // ratio[seed][dir][scale]
  std::vector<std::vector<std::vector<std::optional<double>>>> ratio;
  for (std::uint64_t seed : seeds) {
    const auto sa = seeded_arrival(spec.with_seed(seed), targets, cfg.speed);
    if (!sa) ++est.skipped_seeds;
    auto& per_seed = ratio.emplace_back(nd, std::vector<std::optional<double>>(scales.size()));
    for (std::size_t i = 0; i < nd; ++i)
      for (std::size_t k = 0; k < scales.size(); ++k) {
        SpeedSample s{est.directions[i], scales[k], seed, std::nullopt};
        if (sa) {
          const std::uint32_t t = sa->t.get_or(est.directions[i] * scales[k], kUnreached);
          if (t != kUnreached) s.ratio = static_cast<double>(t) / static_cast<double>(scales[k]);
        }
        per_seed[i][k] = s.ratio;
        est.samples.push_back(s);
      }
  }

  auto column = [&](std::size_t i, std::size_t k) {
    std::vector<double> v;
    for (const auto& ps : ratio)
      if (ps[i][k]) v.push_back(*ps[i][k]);
    return v;
  };
  const std::size_t last = scales.size() - 1;
  est.converged = scales.size() >= 2;
  for (std::size_t i = 0; i < nd; ++i) {
    const auto v = column(i, last);
    est.n_hat.push_back(v.empty() ? std::numeric_limits<double>::infinity() : mean(v));
    est.n_hat_se.push_back(standard_error(v));
    est.successes.push_back(static_cast<int>(v.size()));
    if (v.size() < 2 && seeds.size() >= 2) est.flags.push_back("insufficient_seeds:" + point_key(est.directions[i]));
    if (!(est.n_hat.back() > 0) || !std::isfinite(est.n_hat.back()))
      est.flags.push_back("origin_not_interior:" + point_key(est.directions[i]));
    if (scales.size() >= 2) {
      const auto u = column(i, last - 1);
      const double tol = 2 * std::hypot(standard_error(u), standard_error(v)) + 1.0 / static_cast<double>(scales[last - 1]);
      if (u.empty() || v.empty() || std::abs(mean(u) - mean(v)) > tol) est.converged = false;
    }
    // Spread of the per-scale means over the upper half of the scales.
    const std::size_t from = std::min(scales.size() / 2, scales.size() >= 2 ? scales.size() - 2 : 0);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (std::size_t k = from; k < scales.size(); ++k) {
      const auto c = column(i, k);
      if (c.empty()) continue;
      lo = std::min(lo, mean(c));
      hi = std::max(hi, mean(c));
    }
    if (hi > 0 && std::isfinite(lo)) est.scale_spread = std::max(est.scale_spread, (hi - lo) / lo);
  }
  if (!est.converged) est.flags.push_back("unconverged");
  if (est.scale_spread > 0.2) est.flags.push_back("scale_dependent");

  // Ball through the fan directions lying in the (x_1, x_2) plane.
  std::vector<std::pair<double, double>> boundary;
  double rmax = 0;
  for (std::size_t i = 0; i < nd; ++i) {
    const Point& x = est.directions[i];
    bool planar = true;
    for (int k = 2; k < d; ++k) planar = planar && x[k] == 0;
    if (!planar || !std::isfinite(est.n_hat[i]) || est.n_hat[i] <= 0) continue;
    boundary.emplace_back(x[0] / est.n_hat[i], x[1] / est.n_hat[i]);
    rmax = std::max(rmax, std::hypot(boundary.back().first, boundary.back().second));
  }
  std::sort(boundary.begin(), boundary.end(), [](const auto& a, const auto& b) {
    return angle_of(a.first, a.second) < angle_of(b.first, b.second);
  });
  if (boundary.size() >= 3) {
    est.ball = BallRaster::from_norm([&boundary](double a, double b) { return polygon_norm(boundary, a, b); },
                                     cfg.raster_scale, static_cast<Coord>(std::ceil(1.05 * rmax * cfg.raster_scale)) + 1);
  }

  // Midpoint (subadditivity) violations over pairs whose sum lies on the fan.
  for (std::size_t a = 0; a < nd; ++a)
    for (std::size_t b = a + 1; b < nd; ++b) {
      const Point s = est.directions[a] + est.directions[b];
      if (gcd_of(s) == 0) continue;
      const auto ns = est.norm(s);
      if (!ns || !std::isfinite(*ns)) continue;
      const double sum = est.n_hat[a] + est.n_hat[b];
      if (std::isfinite(sum) && sum > 0) est.convexity_score = std::max(est.convexity_score, (*ns - sum) / sum);
    }
  est.convexity_score = std::max(0.0, est.convexity_score);

  // Lattice symmetries: each fan direction is mapped into the fan.
  const auto group = signed_permutations(d);
  std::vector<std::vector<std::size_t>> image(group.size(), std::vector<std::size_t>(nd));
  for (std::size_t g = 0; g < group.size(); ++g)
    for (std::size_t i = 0; i < nd; ++i) {
      const Point y = act(group[g], est.directions[i]);
      image[g][i] = static_cast<std::size_t>(std::find(est.directions.begin(), est.directions.end(), y) -
                                             est.directions.begin());
    }
  auto score_of = [&](const std::vector<double>& nh) {
    double s = 0;
    for (std::size_t g = 0; g < group.size(); ++g)
      for (std::size_t i = 0; i < nd; ++i) {
        const double a = nh[i], b = nh[image[g][i]];
        if (std::isfinite(a) && std::isfinite(b) && a > 0) s = std::max(s, std::abs(b - a) / a);
      }
    return s;
  };
  est.symmetry_score = score_of(est.n_hat);

  // Permutation test: under lattice symmetry the directions of one orbit are
  // exchangeable within each seed.
  std::vector<std::size_t> complete;
  for (std::size_t s = 0; s < ratio.size(); ++s) {
    bool ok = true;
    for (std::size_t i = 0; i < nd; ++i) ok = ok && ratio[s][i][last].has_value();
    if (ok) complete.push_back(s);
  }
  if (complete.size() >= 2) {
    std::vector<int> orbit(nd, -1);
    int n_orbits = 0;
    for (std::size_t i = 0; i < nd; ++i) {
      if (orbit[i] >= 0) continue;
      for (std::size_t g = 0; g < group.size(); ++g) orbit[image[g][i]] = n_orbits;
      ++n_orbits;
    }
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_orbits));
    for (std::size_t i = 0; i < nd; ++i) members[static_cast<std::size_t>(orbit[i])].push_back(i);
    auto means = [&](const std::vector<std::vector<double>>& m) {
      std::vector<double> nh(nd, 0.0);
      for (const auto& row : m)
        for (std::size_t i = 0; i < nd; ++i) nh[i] += row[i] / static_cast<double>(m.size());
      return nh;
    };
    std::vector<std::vector<double>> m;
    for (std::size_t s : complete) {
      std::vector<double> row(nd);
      for (std::size_t i = 0; i < nd; ++i) row[i] = *ratio[s][i][last];
      m.push_back(row);
    }
    const double observed = score_of(means(m));
    std::mt19937_64 rng(cfg.permutation_seed);
    int at_least = 1;
    for (int r = 0; r < cfg.permutation_rounds; ++r) {
      auto pm = m;
      for (auto& row : pm)
        for (const auto& mem : members) {
          std::vector<double> vals;
          for (std::size_t i : mem) vals.push_back(row[i]);
          std::shuffle(vals.begin(), vals.end(), rng);
          for (std::size_t k = 0; k < mem.size(); ++k) row[mem[k]] = vals[k];
        }
      if (score_of(means(pm)) >= observed - 1e-12) ++at_least;
    }
    est.symmetry_pvalue = static_cast<double>(at_least) / (cfg.permutation_rounds + 1);
  }
  return est;
}

// ---------------------------------------------------------------- convergence metric

double support_ball_difference(const std::function<bool(const Point&)>& support, const Window& window,
                               std::int64_t t, const BallRaster& ball) {
  if (t < 1) throw std::invalid_argument("time must be positive");
  const int d = window.dim();
  Coord reach = static_cast<Coord>(std::ceil(static_cast<double>(t) * (ball.half + 1) / ball.scale));
  for (int a = 0; a < 2; ++a) reach = std::max({reach, -window.lower()[a], window.upper()[a]});
  std::uint64_t diff = 0, in_ball = 0;
  Point x(d);
  for (Coord j = -reach; j <= reach; ++j)
    for (Coord i = -reach; i <= reach; ++i) {
      x[0] = i;
      x[1] = j;
      const bool a = window.contains(x) && support(x);
      const bool b = ball.contains(static_cast<double>(i) / t, static_cast<double>(j) / t);
      in_ball += b;
      diff += a != b;
    }
  if (in_ball == 0) throw std::invalid_argument("ball is empty at this time");
  return static_cast<double>(diff) / static_cast<double>(in_ball);
}

double support_ball_difference(const Grid<std::uint32_t>& arrival, std::int64_t t, const BallRaster& ball) {
  return support_ball_difference(
      [&arrival, t](const Point& x) {
        const std::uint32_t v = arrival[x];
        return v != kUnreached && v <= t;
      },
      arrival.window(), t, ball);
}

std::vector<double> shape_convergence_metric(const BackgroundSpec& spec, const std::vector<std::int64_t>& times,
                                             const BallRaster& ball, const SpeedConfig& cfg) {
  if (times.empty()) return {};
  const std::int64_t tmax = *std::max_element(times.begin(), times.end());
  // A site at sup-distance r first fires at time r + 1 or later, so every
  // arrival up to tmax is recorded before the frontier of radius tmax + 1.
  const Point origin = Point::zeros(spec.dim());
  ExplosionConfig ec;
  ec.radius = tmax + 1;
  ec.n_budget = cfg.n_budget;
  ec.scale_window_with_n = false;
  ec.workers = cfg.workers;
  const ExplosionThreshold th = explosion_threshold(spec, ec);
  if (!th.upper_bound) throw std::runtime_error("no explosion within the chip budget");
  const ArrivalField af = explosion_arrival(spec, origin, th.m.value_or(*th.upper_bound),
                                            Window::centered(origin, tmax + 1), cfg.workers);
  std::vector<double> out;
  for (std::int64_t t : times) out.push_back(support_ball_difference(af.t, t, ball));
  return out;
}

// ---------------------------------------------------------------- counterexample

nlohmann::json CounterexampleReport::to_json() const {
  auto part = [](const CheckResult& c) {
    nlohmann::json j = c.detail;
    j["ok"] = c.ok;
    if (!c.ok) j["first_failure"] = c.first_failure;
    return j;
  };
  return {{"arrival_bounds", part(arrival_bounds)},
          {"cylinder", part(cylinder)},
          {"stacked", part(stacked)},
          {"explosive", part(explosive)},
          {"ok", ok()}};
}

namespace {

void fail(CheckResult& c, const std::string& why) {
  if (c.ok) c.first_failure = why;
  c.ok = false;
}

CheckResult check_arrival_bounds(Coord n_max) {
  CheckResult c;
  const BackgroundSpec spec = BackgroundSpec::counterexample();
  const Point origin{0, 0};
  EngineOptions opt;
  opt.track_arrival = true;
  Sandpile st = Sandpile::growing(Window::centered(origin, n_max + 8), Window::centered(origin, 8),
                                  background_init(spec, origin, 3), opt);
  st.run(std::numeric_limits<std::int64_t>::max());
  double lo_ratio = std::numeric_limits<double>::infinity(), hi_ratio = 0;
  int checked = 0;
  for (Coord n = 0; 4 * n + 1 <= n_max; ++n) {
    const Coord x = 4 * n + 1;
    const std::uint32_t t = st.arrival_at(Point{x, 0});
    ++checked;
    if (t == kUnreached || t < x || t > x + 3) {
      fail(c, "T(" + std::to_string(x) + ") = " + (t == kUnreached ? std::string("unreached") : std::to_string(t)));
      continue;
    }
    const double r = static_cast<double>(t) / static_cast<double>(x);
    if (n >= 1) {
      lo_ratio = std::min(lo_ratio, r);
      hi_ratio = std::max(hi_ratio, r);
    }
    c.detail["last_ratio"] = r;
  }
  c.detail["checked"] = checked;
  c.detail["min_ratio"] = lo_ratio;
  c.detail["max_ratio"] = hi_ratio;
  return c;
}

CheckResult check_cylinder(int periods) {
  CheckResult c;
  const auto [z, w0] = counterexample_cylinder(3 + 8 * periods + 16);
  const CylinderRun r = cylinder_run(z, w0, 12 * periods + 24, 1, true);
  double best = 0;
  for (int n = 1; n <= periods; ++n) {
    const Point x{3 + 8 * n, 0};
    const std::uint32_t t = r.state.arrival_at(x);
    if (t != static_cast<std::uint32_t>(12 * n)) {
      fail(c, "T_hat(" + std::to_string(x[0]) + ") = " + std::to_string(t) + ", expected " + std::to_string(12 * n));
      continue;
    }
    best = std::max(best, static_cast<double>(t) / static_cast<double>(x[0]));
  }
  c.detail["periods"] = periods;
  c.detail["max_ratio"] = best;
  const bool twelve = front_period_holds(r.frames, 12, 8, 0);
  c.detail["period_12_advance_8"] = twelve;
  if (r.period) {
    c.detail["minimal_period"] = *r.period;
    c.detail["minimal_advance"] = *r.advance;
  }
  if (!twelve) fail(c, "front does not repeat after 12 steps shifted by 8");
  if (!r.period || 12 % *r.period != 0 || *r.advance * 12 != 8 * *r.period)
    fail(c, "minimal front period is not a divisor of 12 with speed 2/3");
  return c;
}

CheckResult check_stacked(int d, Coord radius, int samples, std::uint64_t seed) {
  CheckResult c;
  const BackgroundSpec hi = BackgroundSpec::counterexample_stacked(d);
  const BackgroundSpec lo = BackgroundSpec::counterexample();
  EngineOptions opt;
  opt.stop_on_frontier = false;
  Sandpile a(Window::centered(d, radius + 1), background_init(hi, Point::zeros(d), 3), opt);
  Sandpile b(Window::centered(2, radius + 1), background_init(lo, Point{0, 0}, 3), opt);
  std::uint64_t pairs = 0;
  nlohmann::json picked = nlohmann::json::array();
  std::mt19937_64 rng(seed);
  const Window w = Window::centered(d, radius);
  for (Coord t = 1; t <= radius && c.ok; ++t) {
    a.step();
    b.step();
    for_each_point(w, [&](const Point& x) {
      const std::uint64_t va = a.odometer_at(x), vb = b.odometer_at(Point{x[0], x[1]});
      ++pairs;
      if (va > vb) fail(c, "t=" + std::to_string(t) + " x=" + x.str() + ": " + std::to_string(va) + " > " + std::to_string(vb));
    });
  }
  // Report a few random (x, t) pairs from a fresh pair of runs.
  Sandpile a2(Window::centered(d, radius + 1), background_init(hi, Point::zeros(d), 3), opt);
  Sandpile b2(Window::centered(2, radius + 1), background_init(lo, Point{0, 0}, 3), opt);
  std::vector<Coord> ts;
  for (int s = 0; s < samples; ++s) ts.push_back(1 + static_cast<Coord>(rng() % static_cast<std::uint64_t>(radius)));
  std::sort(ts.begin(), ts.end());
  std::size_t next = 0;
  for (Coord t = 1; t <= radius && next < ts.size(); ++t) {
    a2.step();
    b2.step();
    while (next < ts.size() && ts[next] == t) {
      const Coord r = std::min<Coord>(t, radius);
      Point x(d);
      for (int k = 0; k < d; ++k) x[k] = static_cast<Coord>(rng() % static_cast<std::uint64_t>(2 * r + 1)) - r;
      picked.push_back({{"t", t}, {"x", point_json(x)}, {"v", a2.odometer_at(x)}, {"v2d", b2.odometer_at(Point{x[0], x[1]})}});
      ++next;
    }
  }
  c.detail["dimension"] = d;
  c.detail["pairs_checked"] = pairs;
  c.detail["samples"] = picked;
  return c;
}

CheckResult check_explosive(std::uint64_t seed) {
  CheckResult c;
  // Mixed zeta_1 / zeta_2 tiling.
  const BackgroundSpec spec = BackgroundSpec::counterexample(0.5, seed);
  const Coord r = 24;
  const Window w = Window::centered(2, r);
  Grid<std::int64_t> s(w);
  Grid<int> todo(w, 0);
  for_each_point(w, [&](const Point& x) {
    s[x] = spec.at(x) + (x == Point{0, 0} ? 3 : 0);
    todo[x] = spec.at(x) >= 2 ? 1 : 0;
    if ((x[0] == 0 || x[0] == -1) && (x[1] == 0 || x[1] == -1)) todo[x] += 1;
  });
  // Legal sequential topplings restricted to the planned multiset.
  std::deque<Point> q;
  for_each_point(w, [&](const Point& x) {
    if (todo[x] > 0) q.push_back(x);
  });
  std::uint64_t topplings = 0;
  bool progress = true;
  while (progress) {
    progress = false;
    const std::size_t n = q.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Point x = q.front();
      q.pop_front();
      if (todo[x] > 0 && s[x] >= 4) {
        s[x] -= 4;
        --todo[x];
        ++topplings;
        progress = true;
        for (int a = 0; a < 2; ++a)
          for (int sg : {-1, 1}) {
            const Point y = x + Point::unit(2, a, sg);
            if (w.contains(y)) s[y] += 1;
          }
      }
      if (todo[x] > 0) q.push_back(x);
    }
  }
  const Window inner = Window::centered(2, r - 6);
  for_each_point(inner, [&](const Point& x) {
    if (todo[x] > 0) fail(c, "planned toppling at " + x.str() + " is never legal");
  });
  const Grid<int> mod = modified_counterexample(spec, inner);
  for_each_point(Window::centered(2, r - 7), [&](const Point& x) {
    if (s[x] - (x == Point{0, 0} ? 3 : 0) != mod[x]) fail(c, "transcript differs from the modified background at " + x.str());
  });
  // Tiles away from the origin are zeta_1' or zeta_2'.
  const Tile z1m = BackgroundSpec::tile_from_rows({{3, 2, 2, 3}, {2, 3, 3, 2}, {2, 3, 3, 2}, {3, 2, 2, 3}});
  const Tile z2m = BackgroundSpec::tile_from_rows({{3, 2, 2, 3}, {2, 2, 3, 2}, {2, 3, 3, 2}, {3, 2, 2, 3}});
  int tiles = 0;
  for (Coord j1 = -3; j1 <= 2; ++j1)
    for (Coord j2 = -3; j2 <= 2; ++j2) {
      if (j1 >= -1 && j1 <= 0 && j2 >= -1 && j2 <= 0) continue;
      const Point base{4 * j1, 4 * j2};
      bool is_z1 = true;
      for (Coord a = 0; a < 4; ++a)
        for (Coord b = 0; b < 4; ++b)
          is_z1 = is_z1 && spec.at(base + Point{a, b}) == BackgroundSpec::zeta1().values[static_cast<std::size_t>(b * 4 + a)];
      const Tile& want = is_z1 ? z1m : z2m;
      for (Coord a = 0; a < 4; ++a)
        for (Coord b = 0; b < 4; ++b)
          if (mod[base + Point{a, b}] != want.values[static_cast<std::size_t>(b * 4 + a)])
            fail(c, "modified tile at " + base.str() + " differs from the expected pattern");
      ++tiles;
    }
  // Lower bound on the box at the origin.
  const Tile origin_lb = BackgroundSpec::tile_from_rows({{3, 2, 2, 3}, {2, 2, 3, 2}, {3, 3, 3, 2}, {1, 3, 2, 3}});
  for (Coord a = 0; a < 4; ++a)
    for (Coord b = 0; b < 4; ++b)
      if (mod[Point{a, b}] < origin_lb.values[static_cast<std::size_t>(b * 4 + a)])
        fail(c, "origin box below the stated lower bound at " + Point{a, b}.str());
  const auto cert = explosion_certificate(BackgroundSpec::counterexample(), 3);
  const auto cert_mixed = explosion_certificate(spec, 3);
  if (!cert || !cert->valid()) fail(c, "criteria certificate failed on the zeta_1 tiling");
  if (!cert_mixed || !cert_mixed->valid()) fail(c, "criteria certificate failed on the mixed tiling");
  // Both modified tiles are strongly box-crossing on their own.
  for (const Tile* t : {&z1m, &z2m}) {
    Grid<int> g(Window(Point{0, 0}, Point{3, 3}));
    g.data() = t->values;
    if (!is_strongly_box_crossing(field_of(g), g.window())) fail(c, "a modified tile is not strongly box-crossing");
  }
  c.detail["topplings"] = topplings;
  c.detail["tiles_checked"] = tiles;
  if (cert) c.detail["certificate"] = cert->to_json();
  return c;
}

}  // namespace

CounterexampleReport verify_counterexample(const CounterexampleConfig& cfg) {
  if (cfg.n_max < 3) throw std::invalid_argument("n_max must be at least 3");
  CounterexampleReport rep;
  rep.arrival_bounds = check_arrival_bounds(cfg.n_max);
  rep.cylinder = check_cylinder(cfg.cylinder_periods);
  bool any = false;
  for (int d : cfg.dimensions)
    if (d >= 3) {
      CheckResult c = check_stacked(d, cfg.stacked_radius, cfg.stacked_samples, cfg.seed);
      if (!any) {
        rep.stacked = c;
        rep.stacked.detail = {{"runs", nlohmann::json::array({c.detail})}};
      } else {
        rep.stacked.detail["runs"].push_back(c.detail);
        if (!c.ok) fail(rep.stacked, c.first_failure);
      }
      any = true;
    }
  if (!any) rep.stacked.detail = {{"skipped", "no dimension >= 3 requested"}};
  rep.explosive = check_explosive(cfg.seed);
  return rep;
}

}  // namespace xsand

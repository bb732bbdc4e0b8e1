// xsand: command-line front end for the exploding sandpile toolkit.
//
// Every subcommand reads its parameters from flags and/or a JSON config file
// (flags win), writes its artifacts to --out and records the resolved config
// in manifest.json. Re-running `xsand --config <out>/manifest.json` reproduces
// the artifacts byte for byte.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xsand/analysis.hpp"
#include "xsand/background.hpp"
#include "xsand/engine.hpp"
#include "xsand/shapes.hpp"
#include "xsand/snapshot.hpp"
#include "xsand/stats.hpp"
#include "xsand/waves.hpp"

#ifndef XSAND_VERSION
#define XSAND_VERSION "dev"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xsand;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kDefaultSeed = 1;

// Keys of the manifest that are not run parameters.
const std::set<std::string> kMetaKeys = {"tool", "version", "resolved", "outputs"};

// ---------------------------------------------------------------- config access

class Config {
 public:
  explicit Config(json j) : j_(std::move(j)) {}
  const json& raw() const { return j_; }
  json& raw() { return j_; }
  bool has(const std::string& k) const { return j_.contains(k) && !j_[k].is_null(); }

  std::string str(const std::string& k, const std::string& def) const {
    if (!has(k)) return def;
    const json& v = j_[k];
    return v.is_string() ? v.get<std::string>() : v.dump();
  }

  std::int64_t integer(const std::string& k, std::int64_t def) const {
    if (!has(k)) return def;
    const json& v = j_[k];
    if (v.is_number_integer()) return v.get<std::int64_t>();
    return parse_int(k, str(k, ""));
  }

  double real(const std::string& k, double def) const {
    if (!has(k)) return def;
    const json& v = j_[k];
    if (v.is_number()) return v.get<double>();
    const std::string s = str(k, "");
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + k + ": expected a number, got '" + s + "'");
  }

  /// Comma list of integers; "a-b" expands to a range.
  std::vector<std::int64_t> ints(const std::string& k, std::vector<std::int64_t> def) const {
    if (!has(k)) return def;
    const json& v = j_[k];
    std::vector<std::int64_t> out;
    if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_number_integer()) throw UsageError("--" + k + ": expected integers");
        out.push_back(e.get<std::int64_t>());
      }
      return out;
    }
    if (v.is_number_integer()) return {v.get<std::int64_t>()};
    static const std::regex range(R"((\d+)-(\d+))");
    std::stringstream ss(str(k, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::smatch m;
      if (std::regex_match(item, m, range)) {
        const auto a = std::stoll(m[1]), b = std::stoll(m[2]);
        if (b < a || b - a > 10'000'000) throw UsageError("--" + k + ": bad range '" + item + "'");
        for (auto i = a; i <= b; ++i) out.push_back(i);
      } else {
        out.push_back(parse_int(k, item));
      }
    }
    if (out.empty()) throw UsageError("--" + k + ": empty list");
    return out;
  }

  Point point(const std::string& k, int dim) const {
    if (!has(k)) return Point::zeros(dim);
    const auto v = ints(k, {});
    if (static_cast<int>(v.size()) != dim)
      throw UsageError("--" + k + ": expected " + std::to_string(dim) + " coordinates");
    Point p(dim);
    for (int i = 0; i < dim; ++i) p[i] = v[static_cast<std::size_t>(i)];
    return p;
  }

 private:
  static std::int64_t parse_int(const std::string& k, const std::string& s) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("--" + k + ": expected an integer, got '" + s + "'");
  }

  json j_;
};

std::vector<std::uint64_t> as_seeds(const std::vector<std::int64_t>& v) {
  std::vector<std::uint64_t> out;
  for (auto s : v) {
    if (s < 0) throw UsageError("seeds must be nonnegative");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

// ---------------------------------------------------------------- backgrounds

Tile rows_tile(const std::string& rows, Point& box) {
  // "3,2/2,3": rows top-down separated by '/', entries by ','
  std::vector<std::vector<int>> m;
  std::stringstream ss(rows);
  std::string row;
  while (std::getline(ss, row, '/')) {
    std::vector<int> r;
    std::stringstream rs(row);
    std::string e;
    while (std::getline(rs, e, ',')) r.push_back(std::stoi(e));
    m.push_back(r);
  }
  if (m.empty() || m[0].empty()) throw UsageError("empty tile");
  for (const auto& r : m)
    if (r.size() != m[0].size()) throw UsageError("tile rows differ in length");
  box = Point{static_cast<Coord>(m[0].size()), static_cast<Coord>(m.size())};
  return BackgroundSpec::tile_from_rows(m);
}

BackgroundSpec parse_background(const json& bg, int dim, std::optional<std::uint64_t> seed) {
  if (bg.is_object()) {
    BackgroundSpec s = BackgroundSpec::from_json(bg);
    return seed ? s.with_seed(*seed) : s;
  }
  if (!bg.is_string()) throw UsageError("--background: expected a string or an object");
  const std::string text = bg.get<std::string>();
  if (!text.empty() && text[0] == '@') {
    std::ifstream is(text.substr(1));
    if (!is) throw UsageError("cannot read background file " + text.substr(1));
    json j;
    try {
      is >> j;
    } catch (const json::exception& e) {
      throw UsageError("malformed background file " + text.substr(1) + ": " + e.what());
    }
    return parse_background(j, dim, seed);
  }
  const auto colon = text.find(':');
  const std::string family = text.substr(0, colon);
  const std::string params = colon == std::string::npos ? "" : text.substr(colon + 1);
  std::vector<std::string> parts;
  {
    std::stringstream ss(params);
    std::string p;
    while (std::getline(ss, p, ',')) parts.push_back(p);
  }
  const std::uint64_t sd = seed.value_or(kDefaultSeed);
  try {
    if (family == "constant" && parts.size() == 1) return BackgroundSpec::constant(dim, std::stoi(parts[0]));
    if (family == "bernoulli" && parts.size() == 3)
      return BackgroundSpec::bernoulli(dim, std::stoi(parts[0]), std::stoi(parts[1]), std::stod(parts[2]), sd);
    if (family == "counterexample" && parts.size() <= 1)
      return BackgroundSpec::counterexample(parts.empty() ? 0.0 : std::stod(parts[0]), sd);
    if (family == "stacked" && parts.size() <= 1)
      return BackgroundSpec::counterexample_stacked(dim, parts.empty() ? 0.0 : std::stod(parts[0]), sd);
    if (family == "periodic" && !params.empty()) {
      Point box;
      Tile t = rows_tile(params, box);
      return BackgroundSpec::periodic(box, t);
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--background: ") + e.what());
  } catch (const std::out_of_range&) {
    throw UsageError("--background: number out of range");
  }
  throw UsageError("--background: cannot parse '" + text +
                   "' (constant:V, bernoulli:a,b,p, counterexample[:q], stacked[:q], periodic:rows, @file)");
}

// ---------------------------------------------------------------- run context

struct Run {
  std::string command;
  Config cfg;
  fs::path out;
  int workers = 1;
  std::set<std::string> formats;
  json resolved = json::object();
  std::vector<std::string> outputs;

  bool want(const std::string& f) const { return formats.count(f) > 0; }
  std::string path(const std::string& name) {
    outputs.push_back(name);
    return (out / name).string();
  }
  void write_json(const std::string& name, const json& j) {
    std::ofstream os(path(name), std::ios::binary);
    os << j.dump(2) << '\n';
  }
  int dim(int def = 2) const { return static_cast<int>(cfg.integer("dim", def)); }
  std::optional<std::uint64_t> seed() const {
    if (!cfg.has("seed")) return std::nullopt;
    return static_cast<std::uint64_t>(cfg.integer("seed", 0));
  }
  BackgroundSpec background(const std::string& def) const {
    const json bg = cfg.has("background") ? cfg.raw()["background"] : json(def);
    return parse_background(bg, dim(), seed());
  }
};

/// Run fn(i) for i in [0, n) on up to `workers` threads; results must be written by index.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (k <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < k; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- subcommands

std::vector<Point> polyline(const std::vector<std::int64_t>& v, int dim) {
  if (dim != 2 || v.size() < 2 || v.size() % 2) throw UsageError("--frozen: expected x,y pairs in 2D");
  std::vector<Point> path{Point{v[0], v[1]}};
  for (std::size_t i = 2; i < v.size(); i += 2) {
    const Point to{v[i], v[i + 1]};
    for (int a = 0; a < 2; ++a)
      while (path.back()[a] != to[a]) {
        Point p = path.back();
        p[a] += to[a] > p[a] ? 1 : -1;
        path.push_back(p);
      }
  }
  return path;
}

Coord support_radius(const Sandpile& st) {
  const auto box = st.support_box();
  if (!box) return 0;
  Coord r = 0;
  for (int a = 0; a < st.dim(); ++a) r = std::max({r, -box->lower()[a], box->upper()[a]});
  return r;
}

Image render_support(const Sandpile& st, const Window& w) {
  return render_mask(w, [&st](const Point& x) { return st.odometer_at(x) > 0; });
}

int cmd_simulate(Run& run) {
  const BackgroundSpec spec = run.background("constant:2");
  const int d = spec.dim();
  const Coord window = run.cfg.integer("window", d == 2 ? 2048 : 256);
  const std::int64_t steps = run.cfg.integer("steps", std::numeric_limits<std::int64_t>::max());
  const std::string mode = run.cfg.str("render", "chips");
  if (mode != "chips" && mode != "support") throw UsageError("--render must be chips or support");
  if (window < 1) throw UsageError("--window must be positive");
  const Point origin = Point::zeros(d);

  std::uint64_t chips = 0;
  const std::string chips_text = run.cfg.str("chips", "1");
  if (chips_text == "auto") {
    ExplosionConfig ec;
    ec.radius = window;
    ec.scale_window_with_n = false;
    ec.n_budget = static_cast<std::uint64_t>(run.cfg.integer("budget", 1 << 20));
    ec.workers = run.workers;
    const ExplosionThreshold th = explosion_threshold(spec, ec);
    if (!th.upper_bound) throw std::runtime_error("no explosion found within the chip budget");
    chips = th.m.value_or(*th.upper_bound);
    run.resolved["threshold"] = th.to_json();
  } else {
    const auto c = run.cfg.integer("chips", 1);
    if (c < 0) throw UsageError("--chips must be nonnegative");
    chips = static_cast<std::uint64_t>(c);
  }
  run.resolved["chips"] = chips;
  run.resolved["background"] = spec.to_json();

  json result;
  result["background"] = spec.to_json();
  result["chips"] = chips;

  if (run.cfg.has("frozen")) {
    // Terminal A-frozen odometer for a lattice path A with w_0 = 1 on A.
    const auto path = polyline(run.cfg.ints("frozen", {}), d);
    std::set<Point> a(path.begin(), path.end());
    const Window w = Window::centered(d, window);
    const FrozenRun fr = frozen_run(
        spec, [&a](const Point& x) { return a.count(x) > 0; },
        [&a](const Point& x) { return a.count(x) ? 1u : 0u; }, w, steps);
    result["outcome"] = to_string(fr.outcome.kind);
    result["time"] = fr.outcome.time;
    result["path_sites"] = path.size();
    const auto box = fr.state.support_box();
    result["support_box"] = box ? json{{"lower", box->lower().str()}, {"upper", box->upper().str()}} : json(nullptr);
    if (run.want("pgm")) {
      const Window view = box ? box->dilated(2).intersect(w) : Window::centered(d, 2);
      Image img;
      img.width = static_cast<int>(view.extent(0));
      img.height = static_cast<int>(view.extent(1));
      img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 255);
      for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
          const Point x{view.lower()[0] + c, view.upper()[1] - r};
          auto& px = img.pixels[static_cast<std::size_t>(r) * img.width + c];
          if (a.count(x)) px = 128;
          else if (fr.state.odometer_at(x) > 0) px = 0;
        }
      write_pgm(run.path("frozen.pgm"), img);
    }
    run.write_json("result.json", result);
    return 0;
  }

  std::set<std::int64_t> snaps;
  for (auto t : run.cfg.ints("snapshots", {})) snaps.insert(t);
  EngineOptions opt;
  opt.workers = run.workers;
  opt.track_arrival = run.want("csv");
  Sandpile st = Sandpile::growing(Window::centered(origin, window), Window::centered(origin, std::min<Coord>(8, window)),
                                  background_init(spec, origin, static_cast<std::int64_t>(chips)), opt);
  auto view_of = [&](const Sandpile& s) {
    const Coord r = run.cfg.has("render_radius") ? run.cfg.integer("render_radius", 0) : support_radius(s) + 2;
    return Window::centered(origin, std::min(r, window));
  };
  auto snapshot = [&](const std::string& name) {
    const Window v = view_of(st);
    write_pgm(run.path(name), mode == "support" ? render_support(st, v) : render_sandpile(st, v));
  };
  std::string outcome = "Stabilized";
  if (!st.is_stable_scan()) {
    outcome = "BudgetExceeded";
    while (st.t() < steps) {
      const StepStats s = st.step();
      if (run.want("pgm") && snaps.count(st.t())) snapshot("snapshot_t" + std::to_string(st.t()) + ".pgm");
      if (s.frontier) {
        outcome = "FrontierHit";
        result["frontier_witness"] = s.witness.str();
        break;
      }
      if (s.fired_sites == 0) {
        outcome = "Stabilized";
        break;
      }
    }
  }
  const auto box = st.support_box();
  Coord diameter = 0;
  if (box)
    for (int a = 0; a < d; ++a) diameter = std::max(diameter, box->extent(a));
  result["outcome"] = outcome;
  result["time"] = st.t();
  result["topplings"] = st.total_topplings();
  result["support_size"] = st.support_size();
  result["diameter"] = diameter;
  result["support_box"] = box ? json{{"lower", box->lower().str()}, {"upper", box->upper().str()}} : json(nullptr);
  if (run.want("pgm")) snapshot("snapshot.pgm");
  if (run.want("csv")) {
    const Window v = view_of(st);
    write_grid_csv(run.path("odometer.csv"), st.odometer(v.intersect(st.allocated())));
    write_arrival_csv(run.path("arrival.csv"), st.arrival(v.intersect(st.allocated())));
  }
  run.write_json("result.json", result);
  return 0;
}

int cmd_explode(Run& run) {
  const BackgroundSpec spec = run.background("bernoulli:2,3,0.25");
  const auto seeds = as_seeds(run.cfg.ints("seeds", {static_cast<std::int64_t>(run.seed().value_or(kDefaultSeed))}));
  ExplosionConfig ec;
  ec.radius = run.cfg.integer("window", 512);
  ec.n_budget = static_cast<std::uint64_t>(run.cfg.integer("budget", 1 << 20));
  ec.want_certificate = run.cfg.str("certificate", "false") == "true";
  ec.use_probe = run.cfg.str("probe", "true") != "false";
  ec.workers = 1;  // the pool runs seeds in parallel
  std::vector<ExplosionThreshold> res(seeds.size());
  parallel_for(seeds.size(), run.workers, [&](std::size_t i) { res[i] = explosion_threshold(spec.with_seed(seeds[i]), ec); });
  json arr = json::array();
  int found = 0, minimal = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    json j = res[i].to_json();
    j["seed"] = seeds[i];
    arr.push_back(j);
    found += res[i].upper_bound.has_value();
    minimal += res[i].minimal_certified;
  }
  run.write_json("explode.json", {{"background", spec.to_json()},
                                  {"radius", ec.radius},
                                  {"seeds", seeds.size()},
                                  {"found", found},
                                  {"minimal_certified", minimal},
                                  {"results", arr}});
  if (run.want("csv")) {
    std::ofstream os(run.path("explode.csv"), std::ios::binary);
    os << "seed,m,upper_bound,minimal_certified,exact_runs,probe_runs\n";
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const auto& r = res[i];
      os << seeds[i] << ',' << (r.m ? std::to_string(*r.m) : "") << ','
         << (r.upper_bound ? std::to_string(*r.upper_bound) : "") << ',' << (r.minimal_certified ? 1 : 0) << ','
         << r.exact_runs << ',' << r.probe_runs << '\n';
    }
  }
  return 0;
}

int cmd_wave(Run& run) {
  const BackgroundSpec spec = run.background("bernoulli:2,3,0.5");
  const int d = spec.dim();
  const Point z = run.cfg.point("source", d);
  WaveConfig wc;
  wc.radius = run.cfg.integer("window", 64);
  wc.workers = run.workers;
  const auto budget = static_cast<std::uint64_t>(run.cfg.integer("budget", 1 << 16));
  json result{{"background", spec.to_json()}, {"source", z.str()}};
  std::uint64_t n = 0;
  if (run.cfg.has("n")) {
    const auto v = run.cfg.integer("n", 0);
    if (v < 0) throw UsageError("--n must be nonnegative");
    n = static_cast<std::uint64_t>(v);
  } else {
    const WaveThreshold th = last_wave_threshold(spec, z, wc, budget);
    result["m_hat"] = th.m_hat ? json(*th.m_hat) : json(nullptr);
    result["verified"] = th.verified;
    result["warnings"] = th.warnings;
    if (!th.m_hat) {
      run.write_json("wave.json", result);
      return 0;
    }
    n = *th.m_hat - 1;  // the penultimate wave
    if (const auto pc = penultimate_cluster(spec, z, wc, budget)) {
      result["cluster"] = {{"sites", pc->sites.size()},
                           {"bbox", {{"lower", pc->bbox.lower().str()}, {"upper", pc->bbox.upper().str()}}},
                           {"rectangle_dilation", pc->is_rectangle_dilation()}};
    }
  }
  const WaveRun wr = run_n_wave(spec, z, n, wc);
  result["wave"] = wr.summary();
  if (run.want("pgm")) {
    const Coord r = support_radius(wr.state) + 2;
    write_pgm(run.path("wave.pgm"), render_sandpile(wr.state, Window::centered(z, r).intersect(wr.state.allocated())));
  }
  run.write_json("wave.json", result);
  return 0;
}

int cmd_crossing(Run& run) {
  const BackgroundSpec spec = run.background("constant:3");
  const int d = spec.dim();
  const Coord k = run.cfg.integer("k", 4);
  if (k < 1) throw UsageError("--k must be positive");
  json result;
  result["report"] = crossing_report(spec, k, run.cfg.point("offset", d)).to_json();
  if (run.cfg.has("macro")) {
    const Coord m = run.cfg.integer("macro", 4);
    const GoodCubeMap map = good_cube_map(spec, k, Window::centered(d, m), 64, run.seed().value_or(kDefaultSeed));
    result["good_cubes"] = map.to_json();
    if (run.want("pgm") && d >= 2) {
      Window slice = map.macro;
      write_pgm(run.path("good_cubes.pgm"),
                render_mask(slice, [&map, d](const Point& x) {
                  Point y = x;
                  for (int a = 2; a < d; ++a) y[a] = 0;
                  return map.good[y] != 0;
                }));
    }
  }
  run.write_json("crossing.json", result);
  return 0;
}

int cmd_limit_shape(Run& run) {
  const BackgroundSpec spec = run.background("bernoulli:2,3,0.5");
  const int d = spec.dim();
  const int count = static_cast<int>(run.cfg.integer("directions", d == 2 ? 8 : 26));
  std::vector<Coord> scales;
  for (auto s : run.cfg.ints("scales", {16, 32, 64})) scales.push_back(s);
  const auto seeds = as_seeds(run.cfg.ints("seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  ShapeConfig sc;
  sc.speed.workers = run.workers;
  sc.speed.n_budget = static_cast<std::uint64_t>(run.cfg.integer("budget", 1 << 16));
  sc.raster_scale = run.cfg.real("raster_scale", 100.0);
  sc.permutation_rounds = static_cast<int>(run.cfg.integer("permutations", 999));
  const ShapeEstimate est = estimate_limit_shape(spec, count, scales, seeds, sc);
  json result = est.to_json();
  if (run.cfg.has("times")) {
    std::vector<std::int64_t> times = run.cfg.ints("times", {});
    json metric = json::array();
    std::vector<std::vector<double>> per_seed;
    for (auto s : seeds) {
      try {
        per_seed.push_back(shape_convergence_metric(spec.with_seed(s), times, est.ball, sc.speed));
      } catch (const std::runtime_error&) {
        // no explosion for this seed within the budget
      }
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      std::vector<double> v;
      for (const auto& ps : per_seed) v.push_back(ps[i]);
      metric.push_back({{"t", times[i]}, {"mean", mean(v)}, {"se", standard_error(v)}, {"seeds", v.size()}});
    }
    result["support_vs_ball"] = metric;
  }
  run.write_json("shape.json", result);
  if (run.want("csv")) {
    est.write_speed_csv(run.path("speeds.csv"));
    write_gnuplot_script(run.path("speeds.gp"), "speeds.csv", "directional speeds");
  }
  if (run.want("pgm") && est.ball.half > 0) write_pgm(run.path("ball.pgm"), est.ball.image());
  return 0;
}

int cmd_counterexample(Run& run) {
  CounterexampleConfig cc;
  cc.n_max = run.cfg.integer("nmax", 99);
  cc.cylinder_periods = static_cast<int>(run.cfg.integer("periods", 50));
  cc.stacked_radius = run.cfg.integer("window", 14);
  cc.seed = run.seed().value_or(kDefaultSeed);
  cc.dimensions.clear();
  for (auto d : run.cfg.ints("dims", {2, 3})) cc.dimensions.push_back(static_cast<int>(d));
  if (cc.n_max < 3 || cc.cylinder_periods < 1) throw UsageError("--nmax must be >= 3 and --periods >= 1");
  const CounterexampleReport rep = verify_counterexample(cc);
  run.write_json("counterexample.json", rep.to_json());
  if (run.want("csv")) {
    std::ofstream os(run.path("cylinder_ratios.csv"), std::ios::binary);
    os << "x,ratio\n";
    for (const auto& s : cylinder_lower_bound_ratios(cc.cylinder_periods))
      os << s.scale << ',' << (s.ratio ? std::to_string(*s.ratio) : "") << '\n';
  }
  if (!rep.ok()) {
    std::cerr << "counterexample verification failed\n";
    return 1;
  }
  return 0;
}

int cmd_recurrence(Run& run) {
  const int d = run.dim();
  const BackgroundSpec spec = run.background("constant:" + std::to_string(d));
  const Coord n = run.cfg.integer("n", 8);
  if (n < 1) throw UsageError("--n must be positive");
  const Window box(Point::filled(spec.dim(), 1), Point::filled(spec.dim(), n));
  const bool rec = is_recurrent_on(field_of(spec), box);
  run.write_json("recurrence.json", {{"background", spec.to_json()}, {"n", n}, {"recurrent", rec}});
  return 0;
}

int cmd_bootstrap(Run& run) {
  const int d = run.dim();
  const double p = run.cfg.real("p", 0.1);
  std::vector<Coord> sizes;
  for (auto s : run.cfg.ints("scales", {8, 16, 32, 64})) sizes.push_back(s);
  const int trials = static_cast<int>(run.cfg.integer("trials", 200));
  if (p < 0 || p > 1 || trials < 1) throw UsageError("--p must lie in [0, 1] and --trials be positive");
  const auto curve = spanning_curve(d, p, sizes, trials, run.seed().value_or(kDefaultSeed));
  json pts = json::array();
  std::vector<double> n, frac;
  bool monotone = true;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    pts.push_back({{"n", curve[i].n}, {"trials", curve[i].trials}, {"successes", curve[i].successes}});
    n.push_back(static_cast<double>(curve[i].n));
    frac.push_back(curve[i].fraction());
    if (i && frac[i] < frac[i - 1]) monotone = false;
  }
  json result{{"dim", d}, {"p", p}, {"curve", pts}, {"nondecreasing", monotone}};
  if (curve.size() >= 2) {
    const SaturationFit f = saturation_fit(n, frac);
    result["fit"] = {{"c", f.c}, {"C", f.rate}, {"r2", f.r2}, {"r2_log", f.r2_log}};
  }
  run.write_json("bootstrap.json", result);
  if (run.want("csv")) write_spanning_csv(run.path("spanning.csv"), curve);
  return 0;
}

int cmd_reduce_dim(Run& run) {
  const int d = run.dim();
  const Coord n = run.cfg.integer("n", 6);
  const double p = run.cfg.real("p", 0.5);
  const auto seeds = as_seeds(run.cfg.ints("seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  if (d < 2 || n < 1) throw UsageError("--dim must be >= 2 and --n positive");
  json arr = json::array();
  bool all = true;
  for (auto s : seeds) {
    const BackgroundSpec spec = BackgroundSpec::bernoulli(d, d, 2 * d - 1, p, s);
    const Grid<int> eta = fill_window(spec, Window(Point::filled(d, 1), Point::filled(d, n)));
    for (int face = 0; face < 2 * d; ++face) {
      const ReductionCheck c = dimensional_reduction_check(eta, face);
      all = all && c.ok();
      json j{{"seed", s}, {"face", face}, {"steps", c.steps}, {"odometers_equal", c.odometers_equal},
             {"chips_relation", c.chips_relation}};
      if (!c.ok()) j["first_mismatch"] = c.first_mismatch;
      arr.push_back(j);
    }
  }
  run.write_json("reduce_dim.json", {{"dim", d}, {"n", n}, {"p", p}, {"ok", all}, {"checks", arr}});
  if (!all) {
    std::cerr << "dimensional reduction mismatch\n";
    return 1;
  }
  return 0;
}

int cmd_recipes(Run& run) {
  // Configs for the figure and table runs; run each with `xsand --config <file>`.
  auto recipe = [&](const std::string& name, json cfg) {
    cfg["out"] = (run.out / name).string();
    run.write_json(name + ".json", cfg);
  };
  for (int t : {50, 100, 250, 500})
    recipe("fig1_t" + std::to_string(t), {{"command", "simulate"},
                                          {"background", "bernoulli:2,3,0.5"},
                                          {"seed", 1},
                                          {"chips", "auto"},
                                          {"window", 520},
                                          {"steps", t},
                                          {"render_radius", 510},
                                          {"format", "pgm,json"}});
  for (int d : {2, 3})
    for (const char* p : {"0.25", "0.5", "0.75"}) {
      const Coord half = d == 2 ? 250 : 100;
      recipe("fig2_d" + std::to_string(d) + "_p" + std::string(p).substr(2),
             {{"command", "simulate"},
              {"background", "bernoulli:" + std::to_string(2 * d - 2) + "," + std::to_string(2 * d - 1) + "," + p},
              {"dim", d},
              {"seed", 1},
              {"chips", "auto"},
              {"window", half},
              {"render", "support"},
              {"render_radius", half},
              {"format", "pgm,json"}});
    }
  recipe("fig3_path_fill", {{"command", "simulate"},
                            {"background", "constant:2"},
                            {"frozen", "0,0,12,0,12,9,25,9,25,-6"},
                            {"window", 40},
                            {"format", "pgm,json"}});
  const std::vector<std::string> table = {"3", "2,3/3,2", "3,2,3/2,3,3/3,2,3", "2,2,3,3/3,2,3,2/2,3,2,2/2,2,3,2",
                                          "3,2,3,3,3/2,2,3,3,3/2,2,3,2,2/3,3,2,2,2/3,3,3,2,3"};
  for (std::size_t i = 0; i < table.size(); ++i)
    recipe("table1_" + std::to_string(i + 1), {{"command", "simulate"},
                                               {"background", "periodic:" + table[i]},
                                               {"chips", "auto"},
                                               {"window", 260},
                                               {"steps", 250},
                                               {"render", "support"},
                                               {"render_radius", 255},
                                               {"format", "pgm,json"}});
  return 0;
}

// ---------------------------------------------------------------- wiring

struct Command {
  std::string name;
  std::string help;
  std::vector<std::pair<std::string, std::string>> flags;  // specific flags: name, help
  std::function<int(Run&)> fn;
};

const std::vector<std::pair<std::string, std::string>> kCommonFlags = {
    {"background", "background spec family:params or @file.json"},
    {"dim", "lattice dimension"},
    {"seed", "background seed, or 'random'"},
    {"out", "output directory"},
    {"workers", "worker threads (default: available parallelism)"},
    {"format", "comma list of artifact formats among pgm,csv,json"},
};

std::vector<Command> commands() {
  return {
      {"simulate", "parallel toppling of eta + n delta_0; PGM snapshot and toppled-set diameter",
       {{"chips", "chips at the origin, or 'auto' for the explosion threshold"},
        {"window", "frontier radius"},
        {"steps", "step budget"},
        {"snapshots", "comma list of times to snapshot"},
        {"render", "chips or support"},
        {"render_radius", "radius of the rendered view"},
        {"frozen", "2D path vertices x0,y0,x1,y1,...: A-frozen run with w_0 = 1 on the path"},
        {"budget", "chip budget for --chips auto"}},
       cmd_simulate},
      {"explode", "least exploding chip count per seed",
       {{"seeds", "seed list, e.g. 1-100 or 1,5,9"},
        {"window", "frontier radius"},
        {"budget", "largest chip count tried"},
        {"certificate", "true to attach a criteria certificate"},
        {"probe", "false to disable capped continuation probes"}},
       cmd_explode},
      {"wave", "last wave threshold, penultimate cluster, or a given n-wave",
       {{"n", "wave size (default: the penultimate wave)"},
        {"source", "source site"},
        {"window", "frontier radius"},
        {"budget", "largest wave size tried"}},
       cmd_wave},
      {"crossing", "crossing times of a cube and the good-cube map",
       {{"k", "cube side"}, {"offset", "cube offset"}, {"macro", "radius of the macroscopic window"}},
       cmd_crossing},
      {"limit-shape", "directional speeds, limit-shape estimate and support-vs-ball metric",
       {{"directions", "size of the direction fan"},
        {"scales", "comma list of scales n"},
        {"seeds", "seed list"},
        {"times", "times for the support-vs-ball metric"},
        {"budget", "chip budget of the threshold search"},
        {"raster_scale", "pixels per unit of the ball raster"},
        {"permutations", "rounds of the symmetry permutation test"}},
       cmd_limit_shape},
      {"counterexample", "verify the non-convex counterexample",
       {{"nmax", "largest x with T(x) checked"},
        {"periods", "cylinder periods"},
        {"dims", "dimensions; >= 3 runs the stacked comparison"},
        {"window", "radius of the stacked comparison"}},
       cmd_counterexample},
      {"recurrence", "is eta recurrent on Q_n", {{"n", "box side"}}, cmd_recurrence},
      {"bootstrap", "internal spanning probability of bootstrap cubes",
       {{"p", "probability of threshold d"}, {"scales", "cube sides"}, {"trials", "trials per side"}},
       cmd_bootstrap},
      {"reduce-dim", "face odometer equals the lower-dimensional odometer",
       {{"n", "box side"}, {"p", "probability of 2d-1"}, {"seeds", "seed list"}},
       cmd_reduce_dim},
      {"recipes", "write JSON configs for the figure and table runs", {}, cmd_recipes},
  };
}

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw UsageError("malformed config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& k : kMetaKeys) j.erase(k);
  return j;
}

int dispatch(const Command& c, json merged) {
  std::set<std::string> known = {"command", "config"};
  for (const auto& [k, h] : kCommonFlags) known.insert(k);
  for (const auto& [k, h] : c.flags) known.insert(k);
  for (const auto& [k, v] : merged.items())
    if (!known.count(k)) throw UsageError("unknown setting '" + k + "' for " + c.name);
  merged["command"] = c.name;
  merged.erase("config");

  Run run{c.name, Config(json::object()), {}, 1, {}, json::object(), {}};
  if (merged.contains("seed") && merged["seed"] == "random") {
    std::random_device rd;
    merged["seed"] = (static_cast<std::uint64_t>(rd()) << 32 | rd()) >> 1;
    run.resolved["seed_was_random"] = true;
  }
  run.cfg = Config(merged);
  const std::string formats = run.cfg.str("format", "pgm,csv,json");
  std::stringstream ss(formats);
  std::string f;
  while (std::getline(ss, f, ',')) {
    if (f != "pgm" && f != "csv" && f != "json") throw UsageError("--format: unknown format '" + f + "'");
    run.formats.insert(f);
  }
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  run.workers = static_cast<int>(run.cfg.integer("workers", hw));
  if (run.workers < 1) throw UsageError("--workers must be positive");
  run.out = run.cfg.str("out", "xsand_out");
  fs::create_directories(run.out);

  const int code = c.fn(run);

  json manifest = merged;
  manifest.erase("workers");  // never affects outputs
  manifest["tool"] = "xsand";
  manifest["version"] = XSAND_VERSION;
  manifest["resolved"] = run.resolved;
  std::vector<std::string> outs = run.outputs;
  outs.push_back("manifest.json");
  manifest["outputs"] = outs;
  std::ofstream os(run.out / "manifest.json", std::ios::binary);
  os << manifest.dump(2) << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xsand: exploding sandpile simulator and analysis toolkit"};
  app.set_version_flag("--version", XSAND_VERSION);
  std::string top_config;
  app.add_option("--config", top_config, "run a JSON config or manifest");
  app.require_subcommand(0, 1);

  const auto cmds = commands();
  std::vector<std::map<std::string, std::string>> values(cmds.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    CLI::App* sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    sub->add_option("--config", values[i]["config"], "JSON config file; flags win on conflict");
    for (const auto& [k, h] : kCommonFlags) sub->add_option("--" + k, values[i][k], h);
    for (const auto& [k, h] : cmds[i].flags) {
      std::string flag = "--" + k;
      std::replace(flag.begin(), flag.end(), '_', '-');
      sub->add_option(flag, values[i][k], h);
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      json merged = json::object();
      if (subs[i]->count("--config")) merged = load_config(values[i]["config"]);
      for (const auto& [k, v] : values[i]) {
        std::string flag = "--" + k;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (k != "config" && subs[i]->count(flag)) merged[k] = v;
      }
      return dispatch(cmds[i], merged);
    }
    if (top_config.empty()) {
      std::cerr << app.help();
      return 2;
    }
    json merged = load_config(top_config);
    const std::string name = merged.value("command", "");
    for (const auto& c : cmds)
      if (c.name == name) return dispatch(c, merged);
    throw UsageError("config names no known command: '" + name + "'");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

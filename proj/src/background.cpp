#include "xsand/background.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace xsand {

namespace {

constexpr std::uint64_t kTagBernoulli = 0x42e7a1ULL;
constexpr std::uint64_t kTagCloud = 0xc10d5ULL;
constexpr std::uint64_t kTagCheckerboard = 0xc4ec4ULL;
constexpr std::uint64_t kTagCounterexample = 0x2e7a2ULL;

const char* const kFamilyNames[] = {"constant",   "bernoulli", "cloud", "checkerboard",
                                    "periodic",   "counterexample", "counterexample_stacked"};

std::size_t tile_volume(const Point& box) {
  std::size_t v = 1;
  for (int i = 0; i < box.dim(); ++i) v *= static_cast<std::size_t>(box[i]);
  return v;
}

std::size_t tile_offset(const Point& x, const Point& box, Point* tile_index) {
  std::size_t off = 0, stride = 1;
  for (int i = 0; i < box.dim(); ++i) {
    (*tile_index)[i] = floor_div(x[i], box[i]);
    off += static_cast<std::size_t>(floor_mod(x[i], box[i])) * stride;
    stride *= static_cast<std::size_t>(box[i]);
  }
  return off;
}

Point point_from_json(const nlohmann::json& j) {
  Point p(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) p[static_cast<int>(i)] = j[i].get<Coord>();
  return p;
}

nlohmann::json point_to_json(const Point& p) {
  auto a = nlohmann::json::array();
  for (int i = 0; i < p.dim(); ++i) a.push_back(p[i]);
  return a;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_point(std::uint64_t seed, std::uint64_t tag, const Point& x) {
  std::uint64_t h = mix64(seed ^ mix64(tag));
  for (int i = 0; i < x.dim(); ++i) h = mix64(h ^ static_cast<std::uint64_t>(x[i]));
  return h;
}

double to_unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

std::string to_string(Family f) { return kFamilyNames[static_cast<int>(f)]; }

Family family_from_string(const std::string& name) {
  for (int i = 0; i < 7; ++i)
    if (name == kFamilyNames[i]) return static_cast<Family>(i);
  throw std::invalid_argument("unknown background family: " + name);
}

Tile BackgroundSpec::tile_from_rows(const std::vector<std::vector<int>>& rows) {
  const std::size_t h = rows.size();
  if (h == 0) throw std::invalid_argument("empty tile");
  const std::size_t w = rows[0].size();
  Tile t;
  t.values.resize(w * h);
  for (std::size_t r = 0; r < h; ++r) {
    if (rows[r].size() != w) throw std::invalid_argument("ragged tile rows");
    const std::size_t x2 = h - 1 - r;
    for (std::size_t x1 = 0; x1 < w; ++x1) t.values[x2 * w + x1] = rows[r][x1];
  }
  return t;
}

const Tile& BackgroundSpec::zeta1() {
  static const Tile t = tile_from_rows({{1, 3, 3, 1}, {3, 3, 3, 3}, {3, 3, 3, 3}, {1, 3, 3, 1}});
  return t;
}

const Tile& BackgroundSpec::zeta2() {
  static const Tile t = tile_from_rows({{1, 3, 3, 1}, {3, 2, 3, 3}, {3, 3, 3, 3}, {1, 3, 3, 1}});
  return t;
}

BackgroundSpec BackgroundSpec::constant(int dim, int value) {
  BackgroundSpec s;
  s.family_ = Family::Constant;
  s.dim_ = dim;
  s.params_.constant = value;
  s.finalize();
  return s;
}

BackgroundSpec BackgroundSpec::bernoulli(int dim, int a, int b, double p, std::uint64_t seed) {
  BackgroundSpec s;
  s.family_ = Family::BernoulliTwoPoint;
  s.dim_ = dim;
  s.seed_ = seed;
  s.params_.a = a;
  s.params_.b = b;
  s.params_.p = p;
  s.finalize();
  return s;
}

BackgroundSpec BackgroundSpec::cloud(int dim, std::vector<Point> points, double p, std::uint64_t seed) {
  BackgroundSpec s;
  s.family_ = Family::BernoulliCloud;
  s.dim_ = dim;
  s.seed_ = seed;
  s.params_.cloud = std::move(points);
  s.params_.p = p;
  s.finalize();
  return s;
}

BackgroundSpec BackgroundSpec::checkerboard(Point box, std::vector<Tile> tiles, std::vector<double> probs,
                                            std::uint64_t seed) {
  BackgroundSpec s;
  s.family_ = Family::RandomCheckerboard;
  s.dim_ = box.dim();
  s.seed_ = seed;
  s.params_.box = box;
  s.params_.tiles = std::move(tiles);
  s.params_.tile_probs = std::move(probs);
  s.finalize();
  return s;
}

BackgroundSpec BackgroundSpec::periodic(Point box, Tile tile) {
  BackgroundSpec s;
  s.family_ = Family::PeriodicTiling;
  s.dim_ = box.dim();
  s.params_.box = box;
  s.params_.tiles = {std::move(tile)};
  s.finalize();
  return s;
}

BackgroundSpec BackgroundSpec::counterexample(double zeta2_prob, std::uint64_t seed) {
  BackgroundSpec s;
  s.family_ = Family::Counterexample2D;
  s.dim_ = 2;
  s.seed_ = seed;
  s.params_.zeta2_prob = zeta2_prob;
  s.finalize();
  return s;
}

BackgroundSpec BackgroundSpec::counterexample_stacked(int dim, double zeta2_prob, std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("stacked counterexample needs d >= 2");
  BackgroundSpec s;
  s.family_ = Family::CounterexampleStacked;
  s.dim_ = dim;
  s.seed_ = seed;
  s.params_.zeta2_prob = zeta2_prob;
  s.finalize();
  return s;
}

BackgroundSpec BackgroundSpec::with_seed(std::uint64_t seed) const {
  BackgroundSpec s = *this;
  s.seed_ = seed;
  return s;
}

void BackgroundSpec::finalize() {
  if (dim_ < 1 || dim_ > kMaxDim) throw std::invalid_argument("background dimension out of range");
  const int top = 2 * dim_ - 1;
  auto check_p = [](double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0,1]");
  };
  switch (family_) {
    case Family::Constant:
      eta_min_ = eta_max_ = params_.constant;
      break;
    case Family::BernoulliTwoPoint:
      check_p(params_.p);
      eta_min_ = params_.p >= 1.0 ? params_.b : params_.p <= 0.0 ? params_.a : std::min(params_.a, params_.b);
      eta_max_ = params_.p >= 1.0 ? params_.b : params_.p <= 0.0 ? params_.a : std::max(params_.a, params_.b);
      break;
    case Family::BernoulliCloud:
      check_p(params_.p);
      if (params_.cloud.empty()) throw std::invalid_argument("cloud point set is empty");
      for (const auto& q : params_.cloud)
        if (q.dim() != dim_) throw std::invalid_argument("cloud point dimension mismatch");
      eta_min_ = params_.p >= 1.0 ? top : top - 1;
      eta_max_ = params_.p <= 0.0 ? top - 1 : top;
      break;
    case Family::RandomCheckerboard:
    case Family::PeriodicTiling: {
      const auto& box = params_.box;
      for (int i = 0; i < box.dim(); ++i)
        if (box[i] < 1) throw std::invalid_argument("tile box sides must be positive");
      if (params_.tiles.empty()) throw std::invalid_argument("no tiles given");
      const std::size_t vol = tile_volume(box);
      for (const auto& t : params_.tiles)
        if (t.values.size() != vol) throw std::invalid_argument("tile size does not match box");
      if (family_ == Family::RandomCheckerboard) {
        if (params_.tile_probs.size() != params_.tiles.size())
          throw std::invalid_argument("need one probability per tile");
        double sum = 0;
        for (double q : params_.tile_probs) {
          check_p(q);
          sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("tile probabilities must sum to 1");
      } else {
        params_.tiles.resize(1);
      }
      eta_min_ = std::numeric_limits<int>::max();
      eta_max_ = std::numeric_limits<int>::min();
      for (std::size_t k = 0; k < params_.tiles.size(); ++k) {
        if (family_ == Family::RandomCheckerboard && params_.tile_probs[k] == 0.0) continue;
        for (int v : params_.tiles[k].values) {
          eta_min_ = std::min(eta_min_, v);
          eta_max_ = std::max(eta_max_, v);
        }
      }
      break;
    }
    case Family::Counterexample2D:
    case Family::CounterexampleStacked:
      check_p(params_.zeta2_prob);
      params_.box = Point{4, 4};
      eta_min_ = 1 + 2 * (dim_ - 2);
      eta_max_ = 3 + 2 * (dim_ - 2);
      break;
  }
  if (eta_max_ > top)
    throw std::invalid_argument("background values exceed 2d-1 = " + std::to_string(top));
}

int BackgroundSpec::checkerboard_at(const Point& x, std::uint64_t tag) const {
  Point j(dim_);
  const std::size_t off = tile_offset(x, params_.box, &j);
  if (family_ == Family::PeriodicTiling) return params_.tiles[0].values[off];
  const double u = to_unit(hash_point(seed_, tag, j));
  double acc = 0;
  std::size_t k = 0;
  for (; k + 1 < params_.tile_probs.size(); ++k) {
    acc += params_.tile_probs[k];
    if (u < acc) break;
  }
  return params_.tiles[k].values[off];
}

int BackgroundSpec::counterexample2d_at(Coord x1, Coord x2) const {
  const Point j{floor_div(x1, 4), floor_div(x2, 4)};
  const std::size_t off = static_cast<std::size_t>(floor_mod(x2, 4) * 4 + floor_mod(x1, 4));
  const double q = params_.zeta2_prob;
  bool two = false;
  if (q >= 1.0)
    two = true;
  else if (q > 0.0)
    two = to_unit(hash_point(seed_, kTagCounterexample, j)) < q;
  return (two ? zeta2() : zeta1()).values[off];
}

int BackgroundSpec::at(const Point& x) const {
  if (x.dim() != dim_)
    throw std::invalid_argument("coordinate has dimension " + std::to_string(x.dim()) + ", background has " +
                                std::to_string(dim_));
  switch (family_) {
    case Family::Constant:
      return params_.constant;
    case Family::BernoulliTwoPoint:
      return to_unit(hash_point(seed_, kTagBernoulli, x)) < params_.p ? params_.b : params_.a;
    case Family::BernoulliCloud: {
      const int top = 2 * dim_ - 1;
      for (const auto& q : params_.cloud)
        if (to_unit(hash_point(seed_, kTagCloud, x - q)) < params_.p) return top;
      return top - 1;
    }
    case Family::RandomCheckerboard:
    case Family::PeriodicTiling:
      return checkerboard_at(x, kTagCheckerboard);
    case Family::Counterexample2D:
      return counterexample2d_at(x[0], x[1]);
    case Family::CounterexampleStacked:
      return 2 * (dim_ - 2) + counterexample2d_at(x[0], x[1]);
  }
  return 0;
}

Coord BackgroundSpec::dependence_range() const {
  switch (family_) {
    case Family::Constant:
    case Family::BernoulliTwoPoint:
    case Family::PeriodicTiling:
      return 0;
    case Family::BernoulliCloud: {
      Coord k = 0;
      for (const auto& a : params_.cloud)
        for (const auto& b : params_.cloud) k = std::max(k, (a - b).l1());
      return k;
    }
    case Family::RandomCheckerboard: {
      Coord k = 0;
      for (int i = 0; i < dim_; ++i) k += params_.box[i] - 1;
      return k;
    }
    case Family::Counterexample2D:
    case Family::CounterexampleStacked:
      return 6;
  }
  return 0;
}

Coord BackgroundSpec::period() const {
  switch (family_) {
    case Family::Constant:
      return 1;
    case Family::PeriodicTiling: {
      Coord k = 1;
      for (int i = 0; i < dim_; ++i) k = std::lcm(k, params_.box[i]);
      return k;
    }
    case Family::RandomCheckerboard:
      return params_.tiles.size() == 1 ? period_of_box(params_.box) : 0;
    case Family::Counterexample2D:
    case Family::CounterexampleStacked:
      return (params_.zeta2_prob <= 0.0 || params_.zeta2_prob >= 1.0) ? 4 : 0;
    default:
      return 0;
  }
}

Coord BackgroundSpec::period_of_box(const Point& box) {
  Coord k = 1;
  for (int i = 0; i < box.dim(); ++i) k = std::lcm(k, box[i]);
  return k;
}

nlohmann::json BackgroundSpec::to_json() const {
  nlohmann::json p = nlohmann::json::object();
  switch (family_) {
    case Family::Constant:
      p["c"] = params_.constant;
      break;
    case Family::BernoulliTwoPoint:
      p["a"] = params_.a;
      p["b"] = params_.b;
      p["p"] = params_.p;
      break;
    case Family::BernoulliCloud: {
      p["p"] = params_.p;
      auto pts = nlohmann::json::array();
      for (const auto& q : params_.cloud) pts.push_back(point_to_json(q));
      p["points"] = pts;
      break;
    }
    case Family::RandomCheckerboard:
    case Family::PeriodicTiling: {
      p["box"] = point_to_json(params_.box);
      auto tiles = nlohmann::json::array();
      for (const auto& t : params_.tiles) tiles.push_back(t.values);
      p["tiles"] = tiles;
      if (family_ == Family::RandomCheckerboard) p["probs"] = params_.tile_probs;
      break;
    }
    case Family::Counterexample2D:
    case Family::CounterexampleStacked:
      p["zeta2_prob"] = params_.zeta2_prob;
      break;
  }
  return {{"family", to_string(family_)}, {"dimension", dim_}, {"params", p}, {"seed", seed_}};
}

BackgroundSpec BackgroundSpec::from_json(const nlohmann::json& j) {
  try {
    const Family f = family_from_string(j.at("family").get<std::string>());
    const int d = j.at("dimension").get<int>();
    const auto& p = j.contains("params") ? j.at("params") : nlohmann::json::object();
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    switch (f) {
      case Family::Constant:
        return constant(d, p.at("c").get<int>());
      case Family::BernoulliTwoPoint:
        return bernoulli(d, p.at("a").get<int>(), p.at("b").get<int>(), p.at("p").get<double>(), seed);
      case Family::BernoulliCloud: {
        std::vector<Point> pts;
        for (const auto& q : p.at("points")) pts.push_back(point_from_json(q));
        return cloud(d, std::move(pts), p.at("p").get<double>(), seed);
      }
      case Family::RandomCheckerboard:
      case Family::PeriodicTiling: {
        const Point box = point_from_json(p.at("box"));
        if (box.dim() != d) throw std::invalid_argument("tile box dimension mismatch");
        std::vector<Tile> tiles;
        for (const auto& t : p.at("tiles")) tiles.push_back(Tile{t.get<std::vector<int>>()});
        if (f == Family::PeriodicTiling) return periodic(box, tiles.at(0));
        return checkerboard(box, std::move(tiles), p.at("probs").get<std::vector<double>>(), seed);
      }
      case Family::Counterexample2D:
        return counterexample(p.value("zeta2_prob", 0.0), seed);
      case Family::CounterexampleStacked:
        return counterexample_stacked(d, p.value("zeta2_prob", 0.0), seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed background document: ") + e.what());
  }
  throw std::invalid_argument("malformed background document");
}

int background_at(const BackgroundSpec& spec, const Point& x) { return spec.at(x); }

Grid<int> fill_window(const BackgroundSpec& spec, const Window& w) {
  if (w.dim() != spec.dim()) throw std::invalid_argument("window dimension does not match background");
  Grid<int> g(w);
  std::size_t i = 0;
  for_each_point(w, [&](const Point& x) { g.at_offset(i++) = spec.at(x); });
  return g;
}

}  // namespace xsand

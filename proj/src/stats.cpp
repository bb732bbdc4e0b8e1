#include "xsand/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace xsand {

double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double standard_error(const std::vector<double>& x) {
  return x.empty() ? 0.0 : sample_sd(x) / std::sqrt(static_cast<double>(x.size()));
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear fit needs two or more paired points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

LinearFit power_law_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0 || y[i] <= 0) throw std::invalid_argument("power law fit needs positive data");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return linear_fit(lx, ly);
}

namespace {

double saturation_sse(const std::vector<double>& n, const std::vector<double>& p, double c, double rate) {
  double s = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double r = p[i] - (1.0 - c * std::exp(-rate * n[i]));
    s += r * r;
  }
  return s;
}

}  // namespace

SaturationFit saturation_fit(const std::vector<double>& n, const std::vector<double>& p) {
  if (n.size() != p.size() || n.size() < 2) throw std::invalid_argument("saturation fit needs two or more points");
  SaturationFit f;
  // Linearized start: log(1 - P) = log c - C n, with P clipped away from 1.
  std::vector<double> ly;
  for (double v : p) ly.push_back(std::log(std::max(1.0 - v, 1e-4)));
  const LinearFit lf = linear_fit(n, ly);
  f.r2_log = lf.r2;
  double c = std::exp(lf.intercept), rate = -lf.slope;
  // Gauss-Newton on the probabilities, with step halving.
  double sse = saturation_sse(n, p, c, rate);
  for (int it = 0; it < 200; ++it) {
    double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double e = std::exp(-rate * n[i]);
      const double r = p[i] - (1.0 - c * e);
      const double jc = -e;                // d model / d c
      const double jr = c * n[i] * e;      // d model / d rate
      a11 += jc * jc;
      a12 += jc * jr;
      a22 += jr * jr;
      b1 += jc * r;
      b2 += jr * r;
    }
    const double det = a11 * a22 - a12 * a12;
    if (std::abs(det) < 1e-300) break;
    const double dc = (a22 * b1 - a12 * b2) / det;
    const double dr = (a11 * b2 - a12 * b1) / det;
    double step = 1.0;
    bool improved = false;
    for (int h = 0; h < 30; ++h, step /= 2) {
      const double s2 = saturation_sse(n, p, c + step * dc, rate + step * dr);
      if (s2 < sse) {
        c += step * dc;
        rate += step * dr;
        improved = sse - s2 > 1e-15 * (1 + sse);
        sse = s2;
        break;
      }
    }
    if (!improved) break;
  }
  f.c = c;
  f.rate = rate;
  const double mp = mean(p);
  double sst = 0;
  for (double v : p) sst += (v - mp) * (v - mp);
  f.r2 = sst > 0 ? 1.0 - sse / sst : 1.0;
  return f;
}

double permutation_pvalue(const std::function<double(const std::vector<int>&)>& stat, std::vector<int> labels,
                          int rounds, std::uint64_t seed) {
  const double observed = stat(labels);
  std::mt19937_64 rng(seed);
  int at_least = 1;
  for (int r = 0; r < rounds; ++r) {
    std::shuffle(labels.begin(), labels.end(), rng);
    if (stat(labels) >= observed - 1e-12) ++at_least;
  }
  return static_cast<double>(at_least) / (rounds + 1);
}

double mean_difference_pvalue(const std::vector<double>& a, const std::vector<double>& b, int rounds,
                              std::uint64_t seed) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<int> labels(pooled.size(), 0);
  std::fill(labels.begin() + static_cast<std::ptrdiff_t>(a.size()), labels.end(), 1);
  auto stat = [&pooled](const std::vector<int>& lab) {
    double s0 = 0, s1 = 0;
    int n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      if (lab[i] == 0) {
        s0 += pooled[i];
        ++n0;
      } else {
        s1 += pooled[i];
        ++n1;
      }
    }
    if (n0 == 0 || n1 == 0) return 0.0;
    return std::abs(s0 / n0 - s1 / n1);
  };
  return permutation_pvalue(stat, labels, rounds, seed);
}

}  // namespace xsand

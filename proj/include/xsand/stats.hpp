#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace xsand {

double mean(const std::vector<double>& x);
double sample_sd(const std::vector<double>& x);  // 0 for fewer than two values
double standard_error(const std::vector<double>& x);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
/// Ordinary least squares y = intercept + slope * x.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);
/// log y = log a + k log x; slope is the exponent k.
LinearFit power_law_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Least squares fit of P(n) = 1 - c exp(-C n).
struct SaturationFit {
  double c = 0.0;
  double rate = 0.0;    // C
  double r2 = 0.0;      // on the probabilities
  double r2_log = 0.0;  // of the linearized fit log(1 - P)
};
SaturationFit saturation_fit(const std::vector<double>& n, const std::vector<double>& p);

/// Two-sided permutation p-value for a statistic of a labelled sample: `stat`
/// receives a relabelling and returns the statistic; p = share of relabellings
/// whose statistic is at least the observed one (observed counted once).
double permutation_pvalue(const std::function<double(const std::vector<int>&)>& stat, std::vector<int> labels,
                          int rounds, std::uint64_t seed);

/// Two-sample permutation test for a difference of means.
double mean_difference_pvalue(const std::vector<double>& a, const std::vector<double>& b, int rounds,
                              std::uint64_t seed);

}  // namespace xsand

#pragma once

#include <vector>

namespace mfg {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean; 0 for fewer than 2 samples
};
MeanSe mean_se(const std::vector<double>& values);

struct LinearFit {
  double slope = 0.0, intercept = 0.0;
  double slope_se = 0.0;
};
// Ordinary least squares y = intercept + slope x; needs two distinct x.
LinearFit ols(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mfg

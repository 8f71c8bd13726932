#pragma once

#include "mfg/model.hpp"
#include "mfg/types.hpp"

namespace testing {

// Scalar quadratic instance used throughout: sigma 0.5, sigma0 0.2,
// X0 ~ N(2, 0.25), q = f = rho = g = 1.
inline mfg::LQParams default_lq(double T = 1.0) {
  mfg::LQParams p;
  p.n = 1;
  p.d = 1;
  p.Sigma = mfg::Mat::Constant(1, 1, 0.5);
  p.Sigma0 = mfg::Mat::Constant(1, 1, 0.2);
  p.q = 1.0;
  p.f_cost = 1.0;
  p.rho = 1.0;
  p.g_cost = 1.0;
  p.T = T;
  p.mu0 = mfg::Vec::Constant(1, 2.0);
  p.Lambda0 = mfg::Mat::Constant(1, 1, 0.25);
  return p;
}

inline mfg::Vec vec1(double v) { return mfg::Vec::Constant(1, v); }
inline mfg::Vec vec(std::initializer_list<double> v) {
  mfg::Vec out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace testing

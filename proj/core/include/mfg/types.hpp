#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mfg {

// Small dense types used on every hot path. Capacity is fixed so that no
// evaluation of a coefficient allocates; state, noise and control dimensions
// are limited to kMaxDim.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
// n x 2d volatility acting on the stacked increment (dW, dW0).
using WideMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, 2 * kMaxDim>;
using WideVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 2 * kMaxDim, 1>;

enum class ErrorCode {
  InvalidParams,
  WrongFamily,
  NonConvexMinimization,
  SizeMismatch,
  IndexOutOfRange,
  NonFiniteState,
  SingularRegression,
  NoConvergence,
  HomotopyStall,
  FlowNoConvergence,
  StreamExhausted,
  BlowUp,
  ConditionFailed,
  StudyAborted,
  SchemaError,
};

const char* to_string(ErrorCode code);

class MfgError : public std::runtime_error {
 public:
  MfgError(ErrorCode code, const std::string& what, double residual = 0.0)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        residual_(residual) {}

  ErrorCode code() const noexcept { return code_; }
  // Last residual for iterative failures (NoConvergence, HomotopyStall, ...).
  double residual() const noexcept { return residual_; }

 private:
  ErrorCode code_;
  double residual_;
};

struct Dimensions {
  int n = 1;  // state
  int d = 1;  // Brownian, per noise source
  int k = 1;  // control

  void validate() const;
};

// Frobenius inner product used for all matrix pairings.
template <typename A, typename B>
double frob(const A& a, const B& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace mfg

#pragma once

#include "mfg/ensemble.hpp"
#include "mfg/types.hpp"

#include <vector>

namespace mfg {

// Uniformly weighted point cloud on R^n. Atoms are the columns of an n x N
// matrix; the mean is cached because nearly every coefficient evaluation
// needs it.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(Eigen::MatrixXd atoms);
  // Single atom.
  explicit EmpiricalMeasure(const Vec& point);

  int dim() const { return static_cast<int>(atoms_.rows()); }
  int size() const { return static_cast<int>(atoms_.cols()); }
  const Eigen::MatrixXd& atoms() const { return atoms_; }
  Vec atom(int i) const { return atoms_.col(i); }
  const Vec& mean() const { return mean_; }

  EmpiricalMeasure with_atom(int i, const Vec& x) const;

 private:
  Eigen::MatrixXd atoms_;
  Vec mean_;
};

// One measure per (node, path), node-major.
class MeasureFlow {
 public:
  MeasureFlow() = default;
  MeasureFlow(TimeGrid grid, int paths, std::vector<EmpiricalMeasure> measures);

  static MeasureFlow from_ensemble(const PathEnsemble& e);

  const TimeGrid& grid() const { return grid_; }
  int paths() const { return paths_; }
  const EmpiricalMeasure& at(int node, int path) const;
  const std::vector<EmpiricalMeasure>& measures() const { return measures_; }

 private:
  TimeGrid grid_;
  int paths_ = 0;
  std::vector<EmpiricalMeasure> measures_;
};

// Exact W2 between equal-size clouds: sorting in 1D, optimal assignment on
// squared distances otherwise.
double w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);
// Always uses the assignment solver; exposed for cross-checks.
double w2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
// paths with potentials). Returns the column assigned to each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

double moment(const EmpiricalMeasure& mu, double q);

EmpiricalMeasure conditional_law(const PathEnsemble& e, int t_index, int noise_path);

// Mean over trials of (1/k) sum_{i<k} |a_i - b_i|^2. Each trial is an n x N
// matrix of particle states at a fixed time.
double chaos_wasserstein(const std::vector<Eigen::MatrixXd>& copies,
                         const std::vector<Eigen::MatrixXd>& nplayer, int k);

}  // namespace mfg

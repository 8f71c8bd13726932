#include "mfg/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mfg {

EmpiricalMeasure::EmpiricalMeasure(Eigen::MatrixXd atoms) : atoms_(std::move(atoms)) {
  if (atoms_.cols() < 1) throw MfgError(ErrorCode::InvalidParams, "empirical measure needs an atom");
  if (atoms_.rows() < 1 || atoms_.rows() > kMaxDim) {
    throw MfgError(ErrorCode::InvalidParams, "unsupported atom dimension");
  }
  if (!atoms_.allFinite()) throw MfgError(ErrorCode::NonFiniteState, "non-finite atom");
  mean_ = atoms_.rowwise().mean();
}

EmpiricalMeasure::EmpiricalMeasure(const Vec& point) : EmpiricalMeasure(Eigen::MatrixXd(point)) {}

EmpiricalMeasure EmpiricalMeasure::with_atom(int i, const Vec& x) const {
  if (i < 0 || i >= size()) throw MfgError(ErrorCode::IndexOutOfRange, "atom index");
  Eigen::MatrixXd atoms = atoms_;
  atoms.col(i) = x;
  return EmpiricalMeasure(std::move(atoms));
}

MeasureFlow::MeasureFlow(TimeGrid grid, int paths, std::vector<EmpiricalMeasure> measures)
    : grid_(grid), paths_(paths), measures_(std::move(measures)) {
  if (static_cast<int>(measures_.size()) != grid.nodes() * paths) {
    throw MfgError(ErrorCode::SizeMismatch, "flow needs one measure per node and path");
  }
}

MeasureFlow MeasureFlow::from_ensemble(const PathEnsemble& e) {
  std::vector<EmpiricalMeasure> ms;
  ms.reserve(static_cast<std::size_t>(e.nodes()) * e.paths());
  for (int j = 0; j < e.nodes(); ++j)
    for (int p = 0; p < e.paths(); ++p) ms.emplace_back(e.slice(j, p));
  return MeasureFlow(e.grid(), e.paths(), std::move(ms));
}

const EmpiricalMeasure& MeasureFlow::at(int node, int path) const {
  if (node < 0 || node >= grid_.nodes() || path < 0 || path >= paths_) {
    throw MfgError(ErrorCode::IndexOutOfRange, "flow index out of range");
  }
  return measures_[static_cast<std::size_t>(node) * paths_ + path];
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw MfgError(ErrorCode::SizeMismatch, "assignment needs a square cost");
  // 1-based potentials u (rows), v (cols); way[] stores the augmenting tree.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int row = 1; row <= n; ++row) {
    match[0] = row;
    int col0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const int r0 = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = cost(r0 - 1, c - 1) - u[r0] - v[c];
        if (reduced < minv[c]) {
          minv[c] = reduced;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (int c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(n);
  for (int c = 1; c <= n; ++c) assignment[match[c] - 1] = c - 1;
  return assignment;
}

namespace {

void check_pair(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() != nu.size() || mu.dim() != nu.dim()) {
    throw MfgError(ErrorCode::SizeMismatch, "w2 compares clouds of equal size and dimension");
  }
}

}  // namespace

double w2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  check_pair(mu, nu);
  const int N = mu.size();
  Eigen::MatrixXd cost(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) cost(i, j) = (mu.atoms().col(i) - nu.atoms().col(j)).squaredNorm();
  const auto match = solve_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < N; ++i) total += cost(i, match[i]);
  return std::sqrt(std::max(0.0, total / N));
}

double w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  check_pair(mu, nu);
  if (mu.dim() > 1) return w2_assignment(mu, nu);
  std::vector<double> a(mu.atoms().data(), mu.atoms().data() + mu.size());
  std::vector<double> b(nu.atoms().data(), nu.atoms().data() + nu.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(total / static_cast<double>(a.size()));
}

double moment(const EmpiricalMeasure& mu, double q) {
  if (!(q >= 1.0)) throw MfgError(ErrorCode::InvalidParams, "moment order must be at least 1");
  double total = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    const double r2 = mu.atoms().col(i).squaredNorm();
    total += q == 2.0 ? r2 : std::pow(std::sqrt(r2), q);
  }
  return total / mu.size();
}

EmpiricalMeasure conditional_law(const PathEnsemble& e, int t_index, int noise_path) {
  return EmpiricalMeasure(e.slice(t_index, noise_path));
}

double chaos_wasserstein(const std::vector<Eigen::MatrixXd>& copies,
                         const std::vector<Eigen::MatrixXd>& nplayer, int k) {
  if (copies.size() != nplayer.size() || copies.empty()) {
    throw MfgError(ErrorCode::SizeMismatch, "trial counts differ");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < copies.size(); ++t) {
    const auto& a = copies[t];
    const auto& b = nplayer[t];
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      throw MfgError(ErrorCode::SizeMismatch, "particle clouds differ in shape");
    }
    if (k < 1 || k > a.cols()) throw MfgError(ErrorCode::SizeMismatch, "k must lie in [1, N]");
    total += (a.leftCols(k) - b.leftCols(k)).colwise().squaredNorm().sum() / k;
  }
  return total / static_cast<double>(copies.size());
}

}  // namespace mfg

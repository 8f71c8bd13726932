#pragma once

#include "mfg/random.hpp"
#include "mfg/types.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace mfg {

struct TimeGrid {
  double T = 1.0;
  int steps = 100;

  double dt() const { return T / steps; }
  double t(int j) const { return j * dt(); }
  int nodes() const { return steps + 1; }
  void validate() const;
};

struct EnsembleLayout {
  int paths = 1;      // common-noise paths
  int particles = 1;  // particles per path
};

// Draws one initial state from m0 using a dedicated normal stream.
using InitialSampler = std::function<Vec(NormalStream&)>;

// Time-gridded (X, Y, Z, Z0) for paths x particles, node-major:
// entry (j, p, i) lives at (j * paths + p) * particles + i. X and Y hold n
// values per entry; Z and Z0 hold an n x d matrix stored row-major. dW holds
// d values per entry for j < steps; dW0 holds d values per (j, p).
class PathEnsemble {
 public:
  PathEnsemble() = default;
  PathEnsemble(Dimensions dims, TimeGrid grid, EnsembleLayout layout);

  // Fills xi, dW and dW0 from the keyed streams. particle_ids maps local
  // particle index to its stream coordinate (identity when empty).
  static PathEnsemble sample(Dimensions dims, TimeGrid grid, EnsembleLayout layout,
                             const NoiseStreams& streams, const InitialSampler& m0,
                             const std::vector<std::uint32_t>& particle_ids = {});

  const Dimensions& dims() const { return dims_; }
  const TimeGrid& grid() const { return grid_; }
  const EnsembleLayout& layout() const { return layout_; }
  int paths() const { return layout_.paths; }
  int particles() const { return layout_.particles; }
  int nodes() const { return grid_.nodes(); }

  std::size_t entry(int node, int path, int particle) const {
    return (static_cast<std::size_t>(node) * layout_.paths + path) * layout_.particles + particle;
  }

  Vec x(int node, int path, int particle) const;
  Vec y(int node, int path, int particle) const;
  Mat z(int node, int path, int particle) const;
  Mat z0(int node, int path, int particle) const;
  // Stacked increment (dW, dW0) over [t_j, t_{j+1}].
  WideVec increment(int node, int path, int particle) const;

  void set_x(int node, int path, int particle, const Vec& v);
  void set_y(int node, int path, int particle, const Vec& v);
  void set_z(int node, int path, int particle, const Mat& v);
  void set_z0(int node, int path, int particle, const Mat& v);

  double* x_data(int node, int path, int particle) { return &X[entry(node, path, particle) * dims_.n]; }
  const double* x_data(int node, int path, int particle) const {
    return &X[entry(node, path, particle) * dims_.n];
  }
  const double* dw_data(int node, int path, int particle) const {
    return &dW[entry(node, path, particle) * dims_.d];
  }
  const double* dw0_data(int node, int path) const {
    return &dW0[(static_cast<std::size_t>(node) * layout_.paths + path) * dims_.d];
  }

  // Atoms of one (node, path) slice as an n x particles matrix.
  Eigen::MatrixXd slice(int node, int path) const;

  // Raw storage; sizes follow the layout described above.
  std::vector<double> X, Y, Z, Z0, dW, dW0;

  void write(std::ostream& out) const;
  static PathEnsemble read(std::istream& in);

 private:
  Dimensions dims_;
  TimeGrid grid_;
  EnsembleLayout layout_;
};

// Little-endian f64 array helpers shared by the serialization code.
void write_f64(std::ostream& out, const std::vector<double>& values);
std::vector<double> read_f64(std::istream& in, std::size_t count);
void write_u64(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64(std::istream& in);

}  // namespace mfg

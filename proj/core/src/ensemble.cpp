#include "mfg/ensemble.hpp"

#include "mfg/parallel.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace mfg {

namespace {

constexpr char kMagic[8] = {'M', 'F', 'G', 'E', 'N', 'S', '0', '1'};

void check_entry(const PathEnsemble& e, int node, int path, int particle) {
  if (node < 0 || node >= e.nodes() || path < 0 || path >= e.paths() || particle < 0 ||
      particle >= e.particles()) {
    throw MfgError(ErrorCode::IndexOutOfRange, "ensemble index out of range");
  }
}

void write_f64_raw(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

}  // namespace

void TimeGrid::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw MfgError(ErrorCode::InvalidParams, "horizon must be positive");
  if (steps < 1) throw MfgError(ErrorCode::InvalidParams, "grid needs at least one step");
}

PathEnsemble::PathEnsemble(Dimensions dims, TimeGrid grid, EnsembleLayout layout)
    : dims_(dims), grid_(grid), layout_(layout) {
  dims.validate();
  grid.validate();
  if (layout.paths < 1 || layout.particles < 1) {
    throw MfgError(ErrorCode::InvalidParams, "ensemble layout must be positive");
  }
  const std::size_t entries = static_cast<std::size_t>(grid.nodes()) * layout.paths * layout.particles;
  const std::size_t steps_entries = static_cast<std::size_t>(grid.steps) * layout.paths * layout.particles;
  X.assign(entries * dims.n, 0.0);
  Y.assign(entries * dims.n, 0.0);
  Z.assign(entries * dims.n * dims.d, 0.0);
  Z0.assign(entries * dims.n * dims.d, 0.0);
  dW.assign(steps_entries * dims.d, 0.0);
  dW0.assign(static_cast<std::size_t>(grid.steps) * layout.paths * dims.d, 0.0);
}

PathEnsemble PathEnsemble::sample(Dimensions dims, TimeGrid grid, EnsembleLayout layout,
                                  const NoiseStreams& streams, const InitialSampler& m0,
                                  const std::vector<std::uint32_t>& particle_ids) {
  PathEnsemble e(dims, grid, layout);
  if (!particle_ids.empty() && static_cast<int>(particle_ids.size()) != layout.particles) {
    throw MfgError(ErrorCode::SizeMismatch, "particle id map does not match the layout");
  }
  const double scale = std::sqrt(grid.dt());
  const int d = dims.d;
  parallel_for(layout.paths, [&](int p) {
    const auto path = static_cast<std::uint32_t>(p);
    for (int j = 0; j < grid.steps; ++j) {
      double* w0 = &e.dW0[(static_cast<std::size_t>(j) * layout.paths + p) * d];
      streams.common(path, static_cast<std::uint32_t>(j), {w0, static_cast<std::size_t>(d)});
      for (int c = 0; c < d; ++c) w0[c] *= scale;
    }
    for (int i = 0; i < layout.particles; ++i) {
      const std::uint32_t id = particle_ids.empty() ? static_cast<std::uint32_t>(i) : particle_ids[i];
      auto init = streams.initial(path, id);
      const Vec xi = m0(init);
      if (xi.size() != dims.n) throw MfgError(ErrorCode::SizeMismatch, "initial sampler dimension");
      e.set_x(0, p, i, xi);
      for (int j = 0; j < grid.steps; ++j) {
        double* w = &e.dW[e.entry(j, p, i) * d];
        streams.idiosyncratic(path, id, static_cast<std::uint32_t>(j), {w, static_cast<std::size_t>(d)});
        for (int c = 0; c < d; ++c) w[c] *= scale;
      }
    }
  });
  return e;
}

Vec PathEnsemble::x(int node, int path, int particle) const {
  check_entry(*this, node, path, particle);
  return Eigen::Map<const Eigen::VectorXd>(&X[entry(node, path, particle) * dims_.n], dims_.n);
}

Vec PathEnsemble::y(int node, int path, int particle) const {
  check_entry(*this, node, path, particle);
  return Eigen::Map<const Eigen::VectorXd>(&Y[entry(node, path, particle) * dims_.n], dims_.n);
}

Mat PathEnsemble::z(int node, int path, int particle) const {
  check_entry(*this, node, path, particle);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(&Z[entry(node, path, particle) * dims_.n * dims_.d], dims_.n, dims_.d);
}

Mat PathEnsemble::z0(int node, int path, int particle) const {
  check_entry(*this, node, path, particle);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(&Z0[entry(node, path, particle) * dims_.n * dims_.d], dims_.n, dims_.d);
}

WideVec PathEnsemble::increment(int node, int path, int particle) const {
  check_entry(*this, node, path, particle);
  if (node >= grid_.steps) throw MfgError(ErrorCode::IndexOutOfRange, "no increment after the last node");
  WideVec w(2 * dims_.d);
  const double* a = dw_data(node, path, particle);
  const double* b = dw0_data(node, path);
  for (int c = 0; c < dims_.d; ++c) {
    w[c] = a[c];
    w[dims_.d + c] = b[c];
  }
  return w;
}

void PathEnsemble::set_x(int node, int path, int particle, const Vec& v) {
  check_entry(*this, node, path, particle);
  std::memcpy(&X[entry(node, path, particle) * dims_.n], v.data(), sizeof(double) * dims_.n);
}

void PathEnsemble::set_y(int node, int path, int particle, const Vec& v) {
  check_entry(*this, node, path, particle);
  std::memcpy(&Y[entry(node, path, particle) * dims_.n], v.data(), sizeof(double) * dims_.n);
}

void PathEnsemble::set_z(int node, int path, int particle, const Mat& v) {
  check_entry(*this, node, path, particle);
  double* out = &Z[entry(node, path, particle) * dims_.n * dims_.d];
  for (int r = 0; r < dims_.n; ++r)
    for (int c = 0; c < dims_.d; ++c) out[r * dims_.d + c] = v(r, c);
}

void PathEnsemble::set_z0(int node, int path, int particle, const Mat& v) {
  check_entry(*this, node, path, particle);
  double* out = &Z0[entry(node, path, particle) * dims_.n * dims_.d];
  for (int r = 0; r < dims_.n; ++r)
    for (int c = 0; c < dims_.d; ++c) out[r * dims_.d + c] = v(r, c);
}

Eigen::MatrixXd PathEnsemble::slice(int node, int path) const {
  if (node < 0 || node >= nodes() || path < 0 || path >= paths()) {
    throw MfgError(ErrorCode::IndexOutOfRange, "slice index out of range");
  }
  return Eigen::Map<const Eigen::MatrixXd>(x_data(node, path, 0), dims_.n, layout_.particles);
}

void write_f64(std::ostream& out, const std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) write_f64_raw(out, v);
  }
}

std::vector<double> read_f64(std::istream& in, std::size_t count) {
  std::vector<double> values(count);
  std::vector<unsigned char> buf(count * 8);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw MfgError(ErrorCode::SchemaError, "truncated binary array");
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[i * 8 + b]) << (8 * b);
    values[i] = std::bit_cast<double>(bits);
  }
  return values;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(v >> (8 * b));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw MfgError(ErrorCode::SchemaError, "truncated binary header");
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  return v;
}

void PathEnsemble::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, 1);  // format version
  write_u64(out, static_cast<std::uint64_t>(dims_.n));
  write_u64(out, static_cast<std::uint64_t>(dims_.d));
  write_u64(out, static_cast<std::uint64_t>(dims_.k));
  write_f64(out, {grid_.T});
  write_u64(out, static_cast<std::uint64_t>(grid_.steps));
  write_u64(out, static_cast<std::uint64_t>(layout_.paths));
  write_u64(out, static_cast<std::uint64_t>(layout_.particles));
  write_f64(out, X);
  write_f64(out, Y);
  write_f64(out, Z);
  write_f64(out, Z0);
  write_f64(out, dW);
  write_f64(out, dW0);
}

PathEnsemble PathEnsemble::read(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw MfgError(ErrorCode::SchemaError, "not an ensemble file");
  }
  if (read_u64(in) != 1) throw MfgError(ErrorCode::SchemaError, "unsupported ensemble version");
  Dimensions dims;
  dims.n = static_cast<int>(read_u64(in));
  dims.d = static_cast<int>(read_u64(in));
  dims.k = static_cast<int>(read_u64(in));
  TimeGrid grid;
  grid.T = read_f64(in, 1)[0];
  grid.steps = static_cast<int>(read_u64(in));
  EnsembleLayout layout;
  layout.paths = static_cast<int>(read_u64(in));
  layout.particles = static_cast<int>(read_u64(in));
  PathEnsemble e(dims, grid, layout);
  e.X = read_f64(in, e.X.size());
  e.Y = read_f64(in, e.Y.size());
  e.Z = read_f64(in, e.Z.size());
  e.Z0 = read_f64(in, e.Z0.size());
  e.dW = read_f64(in, e.dW.size());
  e.dW0 = read_f64(in, e.dW0.size());
  return e;
}

}  // namespace mfg

#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mfg {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Pure function
// of (key, counter); used so that every noise draw is addressable by its
// coordinates instead of by its position in a sequential stream.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key);
};

// Stream of standard normals attached to one coordinate of the noise key
// space. Draws are produced in pairs from consecutive counter blocks.
class NormalStream {
 public:
  NormalStream(Philox4x32::Key key, Philox4x32::Counter base);

  double next();
  void fill(std::span<double> out);

 private:
  Philox4x32::Key key_;
  Philox4x32::Counter base_;
  std::uint32_t block_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Noise for an ensemble, keyed by (seed, path, particle, node). Enlarging the
// number of particles or paths never changes draws at existing coordinates,
// which is what the synchronous coupling between N-player systems and
// mean-field copies relies on.
class NoiseStreams {
 public:
  static constexpr std::uint32_t kMaxParticle = 0xFFFFFFFEu;

  explicit NoiseStreams(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  // Standard normals for the idiosyncratic increment of (path, particle) over
  // grid interval `node`.
  void idiosyncratic(std::uint32_t path, std::uint32_t particle, std::uint32_t node,
                     std::span<double> out) const;
  // Standard normals for the common increment of `path` over interval `node`.
  void common(std::uint32_t path, std::uint32_t node, std::span<double> out) const;
  // Sequential normals reserved for the initial draw xi of (path, particle).
  NormalStream initial(std::uint32_t path, std::uint32_t particle) const;
  // Auxiliary stream for samplers that are not part of the dynamics
  // (monotonicity trials, perturbation directions, ...).
  NormalStream auxiliary(std::uint32_t a, std::uint32_t b) const;

 private:
  NormalStream stream(std::uint32_t path, std::uint32_t particle, std::uint32_t node,
                      std::uint32_t kind) const;

  std::uint64_t seed_;
  Philox4x32::Key key_;
};

// Uniform in (0, 1) from 32 random bits pairs; never returns 0 or 1.
double uniform_from_bits(std::uint32_t hi, std::uint32_t lo);

}  // namespace mfg

#include "mfg/random.hpp"

#include "mfg/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mfg {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

// Stream kinds occupy the top two bits of the last counter word.
constexpr std::uint32_t kKindIdiosyncratic = 0u;
constexpr std::uint32_t kKindCommon = 1u;
constexpr std::uint32_t kKindInitial = 2u;
constexpr std::uint32_t kKindAux = 3u;
constexpr std::uint32_t kCommonParticle = 0xFFFFFFFFu;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

double uniform_from_bits(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  // 53 significant bits, shifted off zero. The top value rounds to 1, so it
  // is pulled back to the largest double below 1.
  return std::min((static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53, 0x1.fffffffffffffp-1);
}

NormalStream::NormalStream(Philox4x32::Key key, Philox4x32::Counter base)
    : key_(key), base_(base) {}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  if (block_ >= (1u << 30)) {
    throw MfgError(ErrorCode::StreamExhausted, "normal stream block counter overflow");
  }
  Philox4x32::Counter ctr = base_;
  ctr[3] |= block_++;
  const auto r = Philox4x32::generate(ctr, key_);
  const double u1 = uniform_from_bits(r[0], r[1]);
  const double u2 = uniform_from_bits(r[2], r[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void NormalStream::fill(std::span<double> out) {
  for (double& v : out) v = next();
}

NoiseStreams::NoiseStreams(std::uint64_t seed)
    : seed_(seed),
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

NormalStream NoiseStreams::stream(std::uint32_t path, std::uint32_t particle, std::uint32_t node,
                                  std::uint32_t kind) const {
  return NormalStream(key_, {path, particle, node, kind << 30});
}

void NoiseStreams::idiosyncratic(std::uint32_t path, std::uint32_t particle, std::uint32_t node,
                                 std::span<double> out) const {
  if (particle > kMaxParticle) {
    throw MfgError(ErrorCode::StreamExhausted, "particle index outside the noise key space");
  }
  auto s = stream(path, particle, node, kKindIdiosyncratic);
  s.fill(out);
}

void NoiseStreams::common(std::uint32_t path, std::uint32_t node, std::span<double> out) const {
  auto s = stream(path, kCommonParticle, node, kKindCommon);
  s.fill(out);
}

NormalStream NoiseStreams::initial(std::uint32_t path, std::uint32_t particle) const {
  if (particle > kMaxParticle) {
    throw MfgError(ErrorCode::StreamExhausted, "particle index outside the noise key space");
  }
  return stream(path, particle, 0, kKindInitial);
}

NormalStream NoiseStreams::auxiliary(std::uint32_t a, std::uint32_t b) const {
  return stream(a, b, 0xA5A5A5A5u, kKindAux);
}

}  // namespace mfg

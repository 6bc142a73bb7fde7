#include "ckm/rng.hpp"

#include <cmath>

#include "ckm/error.hpp"
#include "ckm/numerics.hpp"

namespace ckm {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

Substream::Substream(std::uint64_t seed, std::uint32_t replication, std::uint32_t purpose,
                     std::uint32_t index)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0u, index, replication, purpose} {}

std::uint64_t Substream::next_u64() {
  if (used_ >= 4) {
    block_ = philox4x32(counter_, key_);
    ++counter_[0];
    used_ = 0;
  }
  const std::uint64_t hi = block_[used_];
  const std::uint64_t lo = block_[used_ + 1];
  used_ += 2;
  return (hi << 32) | lo;
}

double Substream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Substream::exponential(double rate) {
  return -std::log(uniform()) / rate;
}

double Substream::normal(double mean, double sd) {
  return mean + sd * normal_quantile(uniform());
}

int Substream::poisson(double mean) {
  if (!(mean >= 0.0)) throw Error(ErrorCode::InvalidArgument, "poisson mean must be >= 0");
  const double u = uniform();
  double pmf = std::exp(-mean);
  double cdf = pmf;
  int k = 0;
  while (u > cdf && pmf > 0.0) {
    ++k;
    pmf *= mean / k;
    cdf += pmf;
  }
  return k;
}

bool Substream::bernoulli(double p) { return uniform() < p; }

}  // namespace ckm

#pragma once

#include <array>
#include <cstdint>

namespace ckm {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Independent draw stream addressed by (seed, replication, purpose, index).
///
/// Every draw is a pure function of its address and position, so streams can
/// be consumed in any order or on any thread with identical results.
class Substream {
public:
  Substream(std::uint64_t seed, std::uint32_t replication, std::uint32_t purpose,
            std::uint32_t index);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  double exponential(double rate);
  double normal(double mean, double sd);
  /// Inversion sampler; intended for small means.
  int poisson(double mean);
  bool bernoulli(double p);

private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

/// Purpose tags keep unrelated draws on disjoint streams.
enum StreamPurpose : std::uint32_t {
  kPortfolioStream = 1,
  kExpertStream = 2,
  kLoanStream = 3,
};

}  // namespace ckm

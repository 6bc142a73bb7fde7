#include "ckm/kernels.hpp"

#include <cmath>
#include <string>
#include <thread>

#include "ckm/error.hpp"
#include "ckm/numerics.hpp"

namespace ckm {

namespace {

// 1 / (Phi(2) - Phi(-2)) = 1 / erf(sqrt 2)
const double kTruncGaussNorm = 1.0 / std::erf(std::sqrt(2.0));

constexpr double kMomentTolerance = 1e-6;
constexpr double kQuadratureTolerance = 1e-8;

void check_dims(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected dimension " +
                    std::to_string(expected) + ", got " + std::to_string(got));
  }
}

}  // namespace

double univariate_truncated_gaussian(double u) {
  if (u < -2.0 || u > 2.0) return 0.0;
  return normal_pdf(u) * kTruncGaussNorm;
}

Kernel Kernel::truncated_gaussian() {
  return Kernel("truncated_gaussian", &univariate_truncated_gaussian, 2.0);
}

Kernel Kernel::box() {
  return Kernel(
      "box", [](double u) { return (u >= -1.0 && u <= 1.0) ? 0.5 : 0.0; }, 1.0);
}

Kernel Kernel::custom(std::string name, Function fn, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw Error(ErrorCode::InvalidArgument, "kernel support radius must be > 0");
  }
  return Kernel(std::move(name), std::move(fn), radius);
}

KernelSpec::KernelSpec(std::size_t dimension, Kernel kernel)
    : dimension_(dimension), kernel_(std::move(kernel)) {
  if (dimension_ == 0) {
    throw Error(ErrorCode::DimensionMismatch, "kernel dimension must be >= 1");
  }
  const double r = kernel_.radius();
  const auto& k = kernel_;
  const double mass =
      adaptive_simpson([&](double u) { return k(u); }, -r, r, kQuadratureTolerance).value;
  const double first =
      adaptive_simpson([&](double u) { return u * k(u); }, -r, r, kQuadratureTolerance).value;
  if (std::abs(mass - 1.0) > kMomentTolerance || std::abs(first) > kMomentTolerance) {
    throw Error(ErrorCode::InvalidArgument,
                "kernel '" + kernel_.name() + "' is not a normalized symmetric kernel");
  }
}

double KernelSpec::operator()(std::span<const double> u) const {
  check_dims(dimension_, u.size(), "product kernel");
  double v = 1.0;
  for (double ui : u) {
    v *= kernel_(ui);
    if (v == 0.0) break;
  }
  return v;
}

double KernelSpec::self_value() const {
  // Same multiplication sequence as raw_weight at a zero offset.
  const double k0 = kernel_(0.0);
  double v = 1.0;
  for (std::size_t i = 0; i < dimension_; ++i) v *= k0;
  return v;
}

double product_kernel(const KernelSpec& spec, std::span<const double> u) {
  return spec(u);
}

double kernel_l2_norm(const KernelSpec& spec) {
  const auto& k = spec.univariate();
  const double r = k.radius();
  const double one_d =
      integrate([&](double u) { const double v = k(u); return v * v; }, -r, r,
                kQuadratureTolerance);
  return std::pow(one_d, static_cast<double>(spec.dimension()));
}

BandwidthMatrix::BandwidthMatrix(std::vector<double> diagonal)
    : diag_(std::move(diagonal)), det_(1.0) {
  if (diag_.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "bandwidth matrix must be nonempty");
  }
  for (double b : diag_) {
    if (!(b > 0.0) || !std::isfinite(b)) {
      throw Error(ErrorCode::NonPositiveBandwidth,
                  "bandwidth entries must be finite and > 0");
    }
    det_ *= b;
  }
}

BandwidthMatrix BandwidthMatrix::uniform(std::size_t k, double b) {
  return BandwidthMatrix(std::vector<double>(k, b));
}

BandwidthMatrix BandwidthMatrix::schedule(std::size_t n, std::size_t k, double rho) {
  if (n < 2 || k == 0) {
    throw Error(ErrorCode::InvalidArgument, "bandwidth schedule needs n >= 2, k >= 1");
  }
  if (!(rho > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "bandwidth schedule needs rho > 0");
  }
  const double nd = static_cast<double>(n);
  const double b = std::pow(std::log(nd) / std::pow(nd, rho), 1.0 / static_cast<double>(k));
  return uniform(k, b);
}

double raw_weight(const KernelSpec& spec, const BandwidthMatrix& bw,
                  std::span<const double> z_i, std::span<const double> z) {
  const std::size_t k = spec.dimension();
  check_dims(k, bw.dimension(), "bandwidth");
  check_dims(k, z_i.size(), "covariate");
  check_dims(k, z.size(), "query point");
  const auto& kern = spec.univariate();
  double v = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    v *= kern((z_i[i] - z[i]) / bw[i]);
    if (v == 0.0) break;
  }
  return v;
}

double scaled_weight(const KernelSpec& spec, const BandwidthMatrix& bw,
                     std::span<const double> z_i, std::span<const double> z) {
  return raw_weight(spec, bw, z_i, z) / bw.determinant();
}

WeightCache::WeightCache(std::span<const Observation> data, const KernelSpec& spec,
                         const BandwidthMatrix& bw, unsigned threads)
    : n_(data.size()), bw_(bw), self_(spec.self_value()), evaluations_(1) {
  if (data.empty()) {
    throw Error(ErrorCode::InvalidArgument, "weight cache needs nonempty data");
  }
  check_dims(spec.dimension(), bw.dimension(), "bandwidth");
  for (const auto& o : data) check_dims(spec.dimension(), o.z.size(), "covariate");

  upper_.assign(n_ * (n_ - 1) / 2, 0.0);
  auto fill_rows = [&](std::size_t first, std::size_t step) {
    for (std::size_t j = first; j < n_; j += step) {
      for (std::size_t m = j + 1; m < n_; ++m) {
        upper_[index(j, m)] = raw_weight(spec, bw_, data[j].z, data[m].z);
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n_));
  if (workers == 1) {
    fill_rows(0, 1);
  } else {
    // Rows are interleaved across workers; every entry is written exactly once.
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w, workers);
  }
  evaluations_ += upper_.size();
}

std::size_t WeightCache::index(std::size_t j, std::size_t m) const noexcept {
  // j < m; row j of the strict upper triangle starts after j rows of
  // decreasing length.
  return j * n_ - j * (j + 1) / 2 + (m - j - 1);
}

double WeightCache::operator()(std::size_t j, std::size_t m) const {
  if (j == m) return self_;
  return j < m ? upper_[index(j, m)] : upper_[index(m, j)];
}

void WeightCache::row(std::size_t m, std::span<double> out) const {
  check_dims(n_, out.size(), "weight cache row");
  for (std::size_t j = 0; j < n_; ++j) out[j] = (*this)(j, m);
}

}  // namespace ckm

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ckm/observation.hpp"

namespace ckm {

/// Gaussian density restricted to [-2, 2] and renormalized to unit mass.
double univariate_truncated_gaussian(double u);

/// Symmetric univariate kernel with support [-radius, radius].
class Kernel {
public:
  using Function = std::function<double(double)>;

  static Kernel truncated_gaussian();
  /// 1/2 on [-1, 1]; mostly useful as a test kernel with analytic moments.
  static Kernel box();
  /// Arbitrary symmetric kernel; normalization is checked by KernelSpec.
  static Kernel custom(std::string name, Function fn, double radius);

  double operator()(double u) const { return fn_(u); }
  double radius() const noexcept { return radius_; }
  const std::string& name() const noexcept { return name_; }

private:
  Kernel(std::string name, Function fn, double radius)
      : name_(std::move(name)), fn_(std::move(fn)), radius_(radius) {}

  std::string name_;
  Function fn_;
  double radius_;
};

/// Product kernel K(u) = prod_i k(u_i) in `dimension` coordinates.
///
/// Construction checks by quadrature that the univariate factor integrates to
/// one and has zero first moment (tolerance 1e-6); the product then inherits
/// both properties.
class KernelSpec {
public:
  explicit KernelSpec(std::size_t dimension,
                      Kernel kernel = Kernel::truncated_gaussian());

  std::size_t dimension() const noexcept { return dimension_; }
  const Kernel& univariate() const noexcept { return kernel_; }

  /// Product of univariate values; DimensionMismatch on a wrong length.
  double operator()(std::span<const double> u) const;

  /// K(0), the value every observation assigns to itself.
  double self_value() const;

private:
  std::size_t dimension_;
  Kernel kernel_;
};

double product_kernel(const KernelSpec& spec, std::span<const double> u);

/// Integral of K^2 over the support box, by quadrature on the univariate
/// factor raised to the dimension.
double kernel_l2_norm(const KernelSpec& spec);

/// Diagonal bandwidth matrix diag(b_1, ..., b_k), all b_i > 0.
class BandwidthMatrix {
public:
  explicit BandwidthMatrix(std::vector<double> diagonal);
  /// The same bandwidth b in each of k coordinates.
  static BandwidthMatrix uniform(std::size_t k, double b);
  /// b_n = (log n / n^rho)^(1/k).
  static BandwidthMatrix schedule(std::size_t n, std::size_t k, double rho);

  std::size_t dimension() const noexcept { return diag_.size(); }
  const std::vector<double>& diagonal() const noexcept { return diag_; }
  double operator[](std::size_t i) const { return diag_[i]; }
  /// |B| = prod b_i.
  double determinant() const noexcept { return det_; }

private:
  std::vector<double> diag_;
  double det_;
};

/// K(B^{-1}(z_i - z)), without the 1/|B| factor.
double raw_weight(const KernelSpec& spec, const BandwidthMatrix& bw,
                  std::span<const double> z_i, std::span<const double> z);

/// (1/|B|) K(B^{-1}(z_i - z)). The 1/n of a density estimate is left to the
/// caller since it cancels in every ratio estimator.
double scaled_weight(const KernelSpec& spec, const BandwidthMatrix& bw,
                     std::span<const double> z_i, std::span<const double> z);

/// Pairwise raw kernel values K(B^{-1}(Z_j - Z_m)) over one data set, stored
/// as a packed strict upper triangle plus the shared diagonal value K(0).
class WeightCache {
public:
  WeightCache(std::span<const Observation> data, const KernelSpec& spec,
              const BandwidthMatrix& bw, unsigned threads = 1);

  std::size_t size() const noexcept { return n_; }
  const BandwidthMatrix& bandwidth() const noexcept { return bw_; }
  double self_value() const noexcept { return self_; }
  /// Number of kernel evaluations performed: n(n-1)/2 + 1.
  std::size_t evaluations() const noexcept { return evaluations_; }

  double operator()(std::size_t j, std::size_t m) const;
  /// Writes row m (including the diagonal entry) into `out`.
  void row(std::size_t m, std::span<double> out) const;

private:
  std::size_t index(std::size_t j, std::size_t m) const noexcept;

  std::size_t n_;
  BandwidthMatrix bw_;
  double self_;
  std::vector<double> upper_;
  std::size_t evaluations_;
};

}  // namespace ckm

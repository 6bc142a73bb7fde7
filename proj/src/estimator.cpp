#include "ckm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ckm/error.hpp"

namespace ckm {

namespace {

void check_weights(std::span<const Observation> data, std::span<const double> weights) {
  if (data.size() != weights.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one weight per observation required");
  }
}

double judgment(const Observation& o, Judgments j) {
  if (j == Judgments::Naive) return static_cast<double>(o.delta);
  return static_cast<double>(*o.eta);
}

void require_judgments(std::span<const Observation> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].eta) {
      throw Error(ErrorCode::MissingJudgments,
                  "observation " + std::to_string(i) + " has no expert judgment");
    }
  }
}

// Indices of positive-weight observations ordered by time; ties keep input
// order so per-time sums are reproducible.
std::vector<std::size_t> support_order(std::span<const Observation> data,
                                       std::span<const double> weights) {
  std::vector<std::size_t> idx;
  idx.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (weights[i] > 0.0) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].w < data[b].w; });
  return idx;
}

double total_weight(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw Error(ErrorCode::InvalidArgument, "kernel weights must be finite and >= 0");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::ZeroDensity, "no observation has positive kernel weight");
  }
  return total;
}

// Jumps at distinct times with mass sum(weight * response) / total, dropping
// times whose mass is zero.
template <class Response>
StepCurve accumulate(std::span<const Observation> data, std::span<const double> weights,
                     Response&& response) {
  const double total = total_weight(weights);
  const auto idx = support_order(data, weights);
  std::vector<double> times;
  std::vector<double> sizes;
  for (std::size_t k = 0; k < idx.size();) {
    const double t = data[idx[k]].w;
    double mass = 0.0;
    for (; k < idx.size() && data[idx[k]].w == t; ++k) {
      mass += weights[idx[k]] * response(data[idx[k]]);
    }
    if (mass > 0.0) {
      times.push_back(t);
      sizes.push_back(mass / total);
    }
  }
  return StepCurve::from_jumps(std::move(times), std::move(sizes), 0.0, true);
}

}  // namespace

std::vector<double> kernel_weights(std::span<const Observation> data,
                                   const KernelSpec& spec, const BandwidthMatrix& bw,
                                   std::span<const double> z0) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = raw_weight(spec, bw, data[i].z, z0);
  return out;
}

double density_estimate(std::span<const Observation> data, const KernelSpec& spec,
                        const BandwidthMatrix& bw, std::span<const double> z0) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "density estimate needs data");
  const auto w = kernel_weights(data, spec, bw, z0);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  return sum / (static_cast<double>(data.size()) * bw.determinant());
}

StepCurve weighted_distribution(std::span<const Observation> data,
                                std::span<const double> weights) {
  check_weights(data, weights);
  return accumulate(data, weights, [](const Observation&) { return 1.0; });
}

StepCurve weighted_subdistribution(std::span<const Observation> data,
                                   std::span<const double> weights, Judgments judgments) {
  check_weights(data, weights);
  if (judgments == Judgments::Expert) require_judgments(data);
  return accumulate(data, weights,
                    [judgments](const Observation& o) { return judgment(o, judgments); });
}

StepCurve h_estimate(std::span<const Observation> data, const KernelSpec& spec,
                     const BandwidthMatrix& bw, std::span<const double> z0) {
  const auto w = kernel_weights(data, spec, bw, z0);
  return weighted_distribution(data, w);
}

StepCurve h1_expert_estimate(std::span<const Observation> data, const KernelSpec& spec,
                             const BandwidthMatrix& bw, std::span<const double> z0) {
  require_judgments(data);
  const auto w = kernel_weights(data, spec, bw, z0);
  return weighted_subdistribution(data, w, Judgments::Expert);
}

NelsonAalenResult nelson_aalen_expert(const StepCurve& H, const StepCurve& H1,
                                      double t_max) {
  const auto h_times = H.jump_times();
  const auto h_sizes = H.jump_sizes();

  // 1 - H(s-) as the residual mass plus the suffix sum of jumps at times >= s.
  // Summing the tail directly keeps dH(s) <= 1 - H(s-) exact in floating point.
  double residual = 1.0 - H.final_value();
  if (std::abs(residual) <= kDenominatorGuard) residual = 0.0;
  std::vector<double> tail(h_sizes.size() + 1, residual);
  for (std::size_t i = h_sizes.size(); i-- > 0;) tail[i] = h_sizes[i] + tail[i + 1];

  NelsonAalenResult out;
  std::vector<double> times;
  std::vector<double> sizes;
  const auto h1_times = H1.jump_times();
  const auto h1_sizes = H1.jump_sizes();
  std::size_t hi = 0;
  for (std::size_t i = 0; i < h1_times.size() && h1_times[i] <= t_max; ++i) {
    const double s = h1_times[i];
    while (hi < h_times.size() && h_times[hi] < s) ++hi;
    const double denom = tail[hi];
    if (denom < kDenominatorGuard) {
      out.truncated_at = s;
      break;
    }
    const double step = h1_sizes[i] / denom;
    if (!(step >= 0.0 && step <= 1.0)) {
      throw Error(ErrorCode::JumpOutOfRange,
                  "hazard increment " + std::to_string(step) + " at t=" +
                      std::to_string(s) + " outside [0,1]");
    }
    times.push_back(s);
    sizes.push_back(step);
  }
  out.hazard = StepCurve::from_jumps(std::move(times), std::move(sizes), 0.0, true);
  return out;
}

StepCurve product_integral(const StepCurve& Lambda, double t_max) {
  const auto times = Lambda.jump_times();
  const auto sizes = Lambda.jump_sizes();
  std::vector<double> out_times;
  std::vector<double> values;
  double survival = 1.0;
  for (std::size_t i = 0; i < times.size() && times[i] <= t_max; ++i) {
    if (!(sizes[i] >= 0.0 && sizes[i] <= 1.0)) {
      throw Error(ErrorCode::JumpOutOfRange,
                  "product integral needs hazard jumps in [0,1], got " +
                      std::to_string(sizes[i]));
    }
    survival *= 1.0 - sizes[i];
    out_times.push_back(times[i]);
    values.push_back(1.0 - survival);
  }
  return StepCurve::from_values(std::move(out_times), std::move(values), 0.0, true);
}

ConditionalFit fit_from_weights(std::span<const Observation> data,
                                std::span<const double> weights, Judgments judgments,
                                double bw_det, std::span<const double> z0, double t_max) {
  ConditionalFit fit;
  fit.z0.assign(z0.begin(), z0.end());
  fit.n = data.size();
  fit.H = weighted_distribution(data, weights);
  fit.H1 = weighted_subdistribution(data, weights, judgments);
  auto na = nelson_aalen_expert(fit.H, fit.H1, t_max);
  fit.Lambda = std::move(na.hazard);
  fit.truncated_at = na.truncated_at;
  fit.F = product_integral(fit.Lambda);
  fit.n_effective = std::accumulate(weights.begin(), weights.end(), 0.0);
  fit.g_hat = fit.n_effective / (static_cast<double>(data.size()) * bw_det);
  return fit;
}

ConditionalFit fit_conditional_km(std::span<const Observation> data, bool expert_judged,
                                  const KernelSpec& spec, const BandwidthMatrix& bw,
                                  std::span<const double> z0, double t_max) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "fit needs data");
  const auto w = kernel_weights(data, spec, bw, z0);
  return fit_from_weights(data, w, expert_judged ? Judgments::Expert : Judgments::Naive,
                          bw.determinant(), z0, t_max);
}

}  // namespace ckm

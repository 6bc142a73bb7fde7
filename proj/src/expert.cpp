#include "ckm/expert.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ckm/error.hpp"

namespace ckm {

namespace {

double checked_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::InvalidProbability,
                std::string(what) + " = " + std::to_string(p) + " outside [0,1]");
  }
  return p;
}

// (1 - p0) times the hazard of the rejected-event sub-distribution.
BiasFunctional scaled_bias(const NelsonAalenResult& na, double p0) {
  BiasFunctional out;
  out.p0 = p0;
  out.truncated_at = na.truncated_at;
  const auto hz = na.hazard.jump_sizes();
  std::vector<double> scaled(hz.size());
  for (std::size_t i = 0; i < hz.size(); ++i) scaled[i] = (1.0 - p0) * hz[i];
  const auto ht = na.hazard.jump_times();
  out.gamma = StepCurve::from_jumps(std::vector<double>(ht.begin(), ht.end()),
                                    std::move(scaled), 0.0, true);
  return out;
}

}  // namespace

ExpertModel ExpertModel::perfect(ProbabilityFn p) {
  return ExpertModel(Kind::Perfect, 1.0, 1.0, std::move(p), {});
}

ExpertModel ExpertModel::naive() { return ExpertModel(Kind::Naive, 0.0, 1.0, {}, {}); }

ExpertModel ExpertModel::partial(double p0, ProbabilityFn p) {
  checked_probability(p0, "information parameter p0");
  return ExpertModel(Kind::Partial, p0, 1.0, std::move(p), {});
}

ExpertModel ExpertModel::uniform_censor(double c) {
  checked_probability(c, "acceptance probability c");
  return ExpertModel(Kind::UniformCensor, 0.0, c, {}, {});
}

ExpertModel ExpertModel::threshold_censor(double c, CovariatePredicate predicate) {
  checked_probability(c, "acceptance probability c");
  return ExpertModel(Kind::ThresholdCensor, 0.0, c, {}, std::move(predicate));
}

double ExpertModel::acceptance_probability(double w, std::span<const double> z) const {
  switch (kind_) {
    case Kind::Perfect:
      return checked_probability(p_(w, z), "p(w,z)");
    case Kind::Naive:
      return 1.0;
    case Kind::Partial:
      return (1.0 - p0_) + p0_ * checked_probability(p_(w, z), "p(w,z)");
    case Kind::UniformCensor:
      return c_;
    case Kind::ThresholdCensor:
      return predicate_(z) ? c_ : 1.0;
  }
  return 1.0;
}

int judge(const ExpertModel& model, const Observation& obs, Substream& rng) {
  if (obs.delta != 1) return 0;
  const double p = model.acceptance_probability(obs.w, obs.z);
  return rng.uniform() < p ? 1 : 0;
}

void judge_all(const ExpertModel& model, std::span<Observation> data, std::uint64_t seed,
               std::uint32_t replication) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    Substream rng(seed, replication, kExpertStream, static_cast<std::uint32_t>(i));
    data[i].eta = judge(model, data[i], rng);
  }
}

int thin_to_partial(int perfect_eta, int delta, double p0, Substream& rng) {
  if (delta != 1) return 0;
  if (perfect_eta == 1) return 1;
  return rng.uniform() < 1.0 - p0 ? 1 : 0;
}

ProbabilityFn p_from_densities(DensityFn f_event, DensityFn f_contam) {
  return [f_event = std::move(f_event), f_contam = std::move(f_contam)](
             double w, std::span<const double> z) {
    const double fe = f_event(w, z);
    const double fc = f_contam(w, z);
    if (fe < 0.0 || fc < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "densities must be nonnegative");
    }
    if (fe + fc == 0.0) {
      throw Error(ErrorCode::BothDensitiesZero,
                  "event and contamination densities both vanish at w=" + std::to_string(w));
    }
    return fe / (fe + fc);
  };
}

BiasFunctional gamma_functional(const std::function<double(double)>& p_hat, double p0,
                                const StepCurve& H, const StepCurve& H1_naive,
                                double t_max) {
  checked_probability(p0, "information parameter p0");
  const auto times = H1_naive.jump_times();
  const auto sizes = H1_naive.jump_sizes();
  std::vector<double> g_times;
  std::vector<double> g_sizes;
  for (std::size_t i = 0; i < times.size() && times[i] <= t_max; ++i) {
    const double p = checked_probability(p_hat(times[i]), "p_hat");
    g_times.push_back(times[i]);
    g_sizes.push_back((1.0 - p) * sizes[i]);
  }
  const auto rejected = StepCurve::from_jumps(std::move(g_times), std::move(g_sizes), 0.0, true);
  auto na = nelson_aalen_expert(H, rejected, t_max);

  return scaled_bias(na, p0);
}

BiasFunctional gamma_plugin(std::span<const Observation> data,
                            std::span<const double> weights, const ProbabilityFn& p_hat,
                            double p0, double t_max) {
  checked_probability(p0, "information parameter p0");
  if (data.size() != weights.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one weight per observation required");
  }
  const auto H = weighted_distribution(data, weights);
  std::vector<double> rejection_weights(weights.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].delta == 1 && weights[i] > 0.0) {
      const double p = checked_probability(p_hat(data[i].w, data[i].z), "p_hat");
      rejection_weights[i] = weights[i] * (1.0 - p);
    }
  }
  // Normalize by the full weight total, not the rejection total.
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<double> times;
  std::vector<double> sizes;
  {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (rejection_weights[i] > 0.0) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return data[a].w < data[b].w; });
    for (std::size_t k = 0; k < idx.size();) {
      const double t = data[idx[k]].w;
      double mass = 0.0;
      for (; k < idx.size() && data[idx[k]].w == t; ++k) mass += rejection_weights[idx[k]];
      times.push_back(t);
      sizes.push_back(mass / total);
    }
  }
  const auto rejected = StepCurve::from_jumps(std::move(times), std::move(sizes), 0.0, true);
  auto na = nelson_aalen_expert(H, rejected, t_max);

  return scaled_bias(na, p0);
}

StepCurve biased_limit(const StepCurve& Lambda, const StepCurve& gamma) {
  const auto lt = Lambda.jump_times();
  const auto ls = Lambda.jump_sizes();
  const auto gt = gamma.jump_times();
  const auto gs = gamma.jump_sizes();
  std::vector<double> times;
  std::vector<double> sizes;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < lt.size() || j < gt.size()) {
    if (j == gt.size() || (i < lt.size() && lt[i] < gt[j])) {
      times.push_back(lt[i]);
      sizes.push_back(ls[i]);
      ++i;
    } else if (i == lt.size() || gt[j] < lt[i]) {
      if (gs[j] != 0.0) {
        times.push_back(gt[j]);
        sizes.push_back(gs[j]);
      }
      ++j;
    } else {
      times.push_back(lt[i]);
      sizes.push_back(ls[i] + gs[j]);
      ++i;
      ++j;
    }
  }
  const auto combined = StepCurve::from_jumps(std::move(times), std::move(sizes));
  return product_integral(combined);
}

double biased_survival_continuous(double survival, double gamma) {
  return survival * std::exp(-gamma);
}

}  // namespace ckm

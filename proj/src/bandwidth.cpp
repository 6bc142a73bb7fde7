#include "ckm/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "ckm/error.hpp"
#include "ckm/parallel.hpp"

namespace ckm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double response_weight(const Observation& o, CvTarget target, Judgments judgments) {
  if (target == CvTarget::H) return 1.0;
  if (judgments == Judgments::Naive) return static_cast<double>(o.delta);
  if (!o.eta) throw Error(ErrorCode::MissingJudgments, "CV on H1 needs expert judgments");
  return static_cast<double>(*o.eta);
}

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "CV time grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw Error(ErrorCode::InvalidArgument, "CV time grid must be finite and increasing");
    }
  }
}

// Sums of squared leave-one-out residuals per grid time, for both targets.
struct CvAccumulator {
  std::vector<double> sq_h;
  std::vector<double> sq_h1;
  std::size_t included = 0;
  std::size_t excluded = 0;
};

// `row(m, out)` fills the raw kernel values K(B^-1(Z_j - Z_m)) for all j.
// Both the cached and the uncached path go through here, so their results
// agree bit for bit.
template <class RowFn>
CvAccumulator accumulate_cv(std::span<const Observation> data, double self_value,
                            std::span<const double> grid, bool want_h, bool want_h1,
                            Judgments judgments, RowFn&& row) {
  const std::size_t n = data.size();
  const std::size_t g = grid.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].w < data[b].w; });
  std::vector<double> eta(n, 0.0);
  if (want_h1) {
    for (std::size_t i = 0; i < n; ++i) eta[i] = response_weight(data[i], CvTarget::H1, judgments);
  }

  CvAccumulator acc;
  acc.sq_h.assign(want_h ? g : 0, 0.0);
  acc.sq_h1.assign(want_h1 ? g : 0, 0.0);
  std::vector<double> k(n);
  for (std::size_t m = 0; m < n; ++m) {
    row(m, std::span<double>(k));
    double neighbours = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != m) neighbours += k[j];
    }
    if (neighbours == 0.0) {
      ++acc.excluded;
      continue;
    }
    ++acc.included;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += k[j];
    const double ratio = 1.0 - self_value / total;

    double cum = 0.0;
    double cum1 = 0.0;
    std::size_t pos = 0;
    for (std::size_t gi = 0; gi < g; ++gi) {
      const double t = grid[gi];
      while (pos < n && data[order[pos]].w <= t) {
        const std::size_t j = order[pos];
        cum += k[j];
        cum1 += k[j] * eta[j];
        ++pos;
      }
      const double ind = data[m].w <= t ? 1.0 : 0.0;
      if (want_h) {
        const double r = (ind - cum / total) / ratio;
        acc.sq_h[gi] += r * r;
      }
      if (want_h1) {
        const double r = (ind * eta[m] - cum1 / total) / ratio;
        acc.sq_h1[gi] += r * r;
      }
    }
  }
  return acc;
}

std::vector<double> mean_or_nan(const std::vector<double>& sums, std::size_t included) {
  std::vector<double> out(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out[i] = included > 0 ? sums[i] / static_cast<double>(included) : kNaN;
  }
  return out;
}

CvEvaluation finish(const CvAccumulator& acc, const BandwidthMatrix& bw, const CvConfig& cfg) {
  CvEvaluation ev;
  ev.bandwidth = bw.diagonal();
  ev.excluded_terms = acc.excluded;
  ev.cv_h = mean_or_nan(acc.sq_h, acc.included);
  ev.cv_h1 = mean_or_nan(acc.sq_h1, acc.included);
  ev.defined = acc.included > 0;
  if (!ev.defined) {
    ev.score = kNaN;
    return ev;
  }
  const auto& grid = cfg.t_grid;
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = cfg.weight_fn ? cfg.weight_fn(grid[i]) : 1.0;
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "CV weight must be >= 0");
    double norm2 = 0.0;
    if (cfg.score_h) norm2 += ev.cv_h[i] * ev.cv_h[i];
    if (cfg.score_h1) norm2 += ev.cv_h1[i] * ev.cv_h1[i];
    f[i] = w * norm2;
  }
  if (grid.size() == 1) {
    ev.score = f[0];
  } else {
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      s += 0.5 * (grid[i] - grid[i - 1]) * (f[i] + f[i - 1]);
    }
    ev.score = s;
  }
  return ev;
}

void validate_config(const CvConfig& cfg) {
  check_grid(cfg.t_grid);
  if (!cfg.score_h && !cfg.score_h1) {
    throw Error(ErrorCode::ConfigError, "CV needs at least one target curve");
  }
}

bool better(const CvEvaluation& a, const CvEvaluation& b) {
  // Strict preference of a over b: lower score, then larger |B|, then the
  // lexicographically larger diagonal.
  if (!a.defined) return false;
  if (!b.defined) return true;
  if (a.score != b.score) return a.score < b.score;
  const double da = std::accumulate(a.bandwidth.begin(), a.bandwidth.end(), 1.0,
                                    std::multiplies<>());
  const double db = std::accumulate(b.bandwidth.begin(), b.bandwidth.end(), 1.0,
                                    std::multiplies<>());
  if (da != db) return da > db;
  return std::lexicographical_compare(b.bandwidth.begin(), b.bandwidth.end(),
                                      a.bandwidth.begin(), a.bandwidth.end());
}

std::vector<std::vector<double>> cartesian(const std::vector<std::vector<double>>& axes) {
  std::vector<std::vector<double>> out{{}};
  for (const auto& axis : axes) {
    if (axis.empty()) throw Error(ErrorCode::ConfigError, "empty bandwidth candidate list");
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (double b : axis) {
        auto v = prefix;
        v.push_back(b);
        next.push_back(std::move(v));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

CvPoint cv_score_at_t(double t, const WeightCache& cache, std::span<const Observation> data,
                      CvTarget target, Judgments judgments) {
  if (cache.size() != data.size()) {
    throw Error(ErrorCode::DimensionMismatch, "weight cache built on different data");
  }
  const double grid[] = {t};
  const bool h = target == CvTarget::H;
  const auto acc = accumulate_cv(data, cache.self_value(), grid, h, !h, judgments,
                                 [&](std::size_t m, std::span<double> out) { cache.row(m, out); });
  CvPoint p;
  p.included = acc.included;
  p.excluded = acc.excluded;
  const auto& sums = h ? acc.sq_h : acc.sq_h1;
  p.score = acc.included > 0 ? sums[0] / static_cast<double>(acc.included) : kNaN;
  return p;
}

CvPoint direct_loo_cv_score_at_t(double t, std::span<const Observation> data,
                                 const KernelSpec& spec, const BandwidthMatrix& bw,
                                 CvTarget target, Judgments judgments) {
  CvPoint p;
  double sum = 0.0;
  for (std::size_t m = 0; m < data.size(); ++m) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (j == m) continue;
      const double k = raw_weight(spec, bw, data[j].z, data[m].z);
      den += k;
      if (data[j].w <= t) num += k * response_weight(data[j], target, judgments);
    }
    if (den == 0.0) {
      ++p.excluded;
      continue;
    }
    ++p.included;
    const double y = data[m].w <= t ? response_weight(data[m], target, judgments) : 0.0;
    const double r = y - num / den;
    sum += r * r;
  }
  p.score = p.included > 0 ? sum / static_cast<double>(p.included) : kNaN;
  return p;
}

CvEvaluation functional_cv(const WeightCache& cache, std::span<const Observation> data,
                           const CvConfig& config) {
  validate_config(config);
  if (cache.size() != data.size()) {
    throw Error(ErrorCode::DimensionMismatch, "weight cache built on different data");
  }
  const auto acc =
      accumulate_cv(data, cache.self_value(), config.t_grid, config.score_h, config.score_h1,
                    config.judgments,
                    [&](std::size_t m, std::span<double> out) { cache.row(m, out); });
  return finish(acc, cache.bandwidth(), config);
}

CvEvaluation functional_cv(const BandwidthMatrix& bw, std::span<const Observation> data,
                           const KernelSpec& spec, const CvConfig& config) {
  validate_config(config);
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "CV needs data");
  const double self = spec.self_value();
  const auto acc = accumulate_cv(
      data, self, config.t_grid, config.score_h, config.score_h1, config.judgments,
      [&](std::size_t m, std::span<double> out) {
        for (std::size_t j = 0; j < data.size(); ++j) {
          out[j] = j == m ? self : raw_weight(spec, bw, data[j].z, data[m].z);
        }
      });
  return finish(acc, bw, config);
}

BandwidthSelection select_bandwidth(std::span<const Observation> data, const KernelSpec& spec,
                                    const CvConfig& config) {
  validate_config(config);
  std::vector<CvEvaluation> report;
  std::map<std::vector<double>, CvEvaluation> seen;

  auto evaluate = [&](const std::vector<double>& diag) {
    const BandwidthMatrix bw(diag);
    if (data.size() <= config.cache_limit) {
      const WeightCache cache(data, spec, bw);
      return functional_cv(cache, data, config);
    }
    return functional_cv(bw, data, spec, config);
  };
  auto evaluate_batch = [&](const std::vector<std::vector<double>>& batch) {
    std::vector<std::vector<double>> fresh;
    for (const auto& d : batch) {
      if (!seen.count(d) &&
          std::find(fresh.begin(), fresh.end(), d) == fresh.end()) {
        fresh.push_back(d);
      }
    }
    std::vector<CvEvaluation> results(fresh.size());
    parallel_for(fresh.size(), config.threads,
                 [&](std::size_t i) { results[i] = evaluate(fresh[i]); });
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      seen.emplace(fresh[i], results[i]);
      report.push_back(results[i]);
    }
  };
  auto best_of = [&]() -> const CvEvaluation* {
    const CvEvaluation* best = nullptr;
    for (const auto& ev : report) {
      if (ev.defined && (!best || better(ev, *best))) best = &ev;
    }
    return best;
  };

  auto descend = [&](const CoordinateDescent& cd, std::vector<double> current) {
    if (current.size() != spec.dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "coordinate descent start has wrong dimension");
    }
    if (!(cd.shrink > 0.0 && cd.shrink < 1.0 && cd.grow > 1.0)) {
      throw Error(ErrorCode::ConfigError, "coordinate descent needs 0 < shrink < 1 < grow");
    }
    evaluate_batch({current});
    CvEvaluation best = seen.at(current);
    for (int it = 0; it < cd.max_iterations; ++it) {
      std::vector<std::vector<double>> moves;
      for (std::size_t c = 0; c < current.size(); ++c) {
        for (double f : {cd.shrink, cd.grow}) {
          auto m = current;
          m[c] *= f;
          moves.push_back(std::move(m));
        }
      }
      evaluate_batch(moves);
      const CvEvaluation* step = nullptr;
      for (const auto& m : moves) {
        const auto& ev = seen.at(m);
        if (better(ev, step ? *step : best)) step = &ev;
      }
      if (!step) break;
      const bool small = best.defined &&
                         best.score - step->score <= cd.tolerance * std::abs(best.score);
      best = *step;
      current = best.bandwidth;
      if (small) break;
    }
  };

  if (const auto* grid = std::get_if<GridSearch>(&config.search)) {
    if (grid->candidates.size() != spec.dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "one candidate list per covariate required");
    }
    for (const auto& axis : grid->candidates) {
      for (double b : axis) {
        if (!(b > 0.0)) throw Error(ErrorCode::NonPositiveBandwidth, "candidate bandwidth <= 0");
      }
    }
    evaluate_batch(cartesian(grid->candidates));
    if (config.refine) {
      if (const auto* best = best_of()) descend(*config.refine, best->bandwidth);
    }
  } else {
    const auto& cd = std::get<CoordinateDescent>(config.search);
    descend(cd, cd.initial);
  }

  const auto* best = best_of();
  if (!best) {
    throw Error(ErrorCode::AllCandidatesDegenerate,
                "every candidate bandwidth isolates all observations");
  }
  return BandwidthSelection{BandwidthMatrix(best->bandwidth), best->score, report};
}

std::vector<double> default_cv_grid(std::span<const Observation> data, double t_max) {
  std::vector<double> t;
  for (const auto& o : data) {
    if (o.w <= t_max) t.push_back(o.w);
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  if (t.empty()) throw Error(ErrorCode::InvalidArgument, "no observed time within t_max");
  return t;
}

}  // namespace ckm

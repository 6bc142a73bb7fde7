#include "ckm/app/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ckm/app/config.hpp"
#include "ckm/app/dataset.hpp"
#include "ckm/app/format.hpp"
#include "ckm/asymptotics.hpp"
#include "ckm/bandwidth.hpp"
#include "ckm/error.hpp"
#include "ckm/estimator.hpp"
#include "ckm/expert.hpp"
#include "ckm/kernels.hpp"
#include "ckm/simulation.hpp"

namespace ckm::app {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMaxVerifyLoo = 200;
constexpr double kLooTolerance = 1e-10;
constexpr int kMaxAxes = 4;

const std::set<std::string> kRunKeys{"run.seed", "run.out"};
const std::set<std::string> kDataKeys{"data.path", "data.covariates", "kernel.name"};
const std::set<std::string> kExpertKeys{"expert.mode", "expert.c", "expert.column",
                                        "expert.threshold"};
const std::set<std::string> kBandwidthKeys{
    "bandwidth.mode",       "bandwidth.values",     "bandwidth.rho",
    "bandwidth.candidates", "bandwidth.search",     "bandwidth.initial",
    "bandwidth.shrink",     "bandwidth.grow",       "bandwidth.max_iterations",
    "bandwidth.tolerance",  "bandwidth.refine",     "bandwidth.t_grid",
    "bandwidth.t_max",      "bandwidth.weight",     "bandwidth.targets",
    "bandwidth.cache_limit"};
const std::set<std::string> kScenarioKeys{
    "scenario.n",  "scenario.age_mean", "scenario.age_var", "scenario.reportings_rate",
    "scenario.censor_upper", "scenario.a", "scenario.b", "scenario.c0", "scenario.c1"};

std::set<std::string> join(std::initializer_list<const std::set<std::string>*> parts,
                           std::initializer_list<std::string> extra = {}) {
  std::set<std::string> out(extra);
  for (const auto* p : parts) out.insert(p->begin(), p->end());
  return out;
}

struct Context {
  const RunOptions& options;
  const Config& cfg;
  fs::path base;
  std::uint64_t seed;
  std::ostream& log;
  std::string header;
  std::vector<std::pair<std::string, std::string>> files;
  json manifest = json::object();
  json warnings = json::array();

  void csv(const std::string& name, const std::string& body) {
    files.emplace_back(name, header + "\n" + body);
  }
  void warn(const std::string& text) { warnings.push_back(text); }
};

std::string join_numbers(std::span<const double> v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += format_double(v[i]);
  }
  return s;
}

fs::path resolve(const Context& ctx, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : ctx.base / path;
}

KernelSpec kernel_spec(const Context& ctx, std::size_t k) {
  const auto name = ctx.cfg.text("kernel.name", "truncated_gaussian");
  if (name == "truncated_gaussian") return KernelSpec(k, Kernel::truncated_gaussian());
  if (name == "box") return KernelSpec(k, Kernel::box());
  throw Error(ErrorCode::ConfigError, "unknown kernel '" + name + "'");
}

Dataset load_dataset(Context& ctx, bool require_eta) {
  IngestOptions opt;
  if (ctx.cfg.has("data.covariates")) opt.covariates = ctx.cfg.words("data.covariates");
  opt.require_eta = require_eta;
  opt.skip_bad = ctx.options.skip_bad;
  auto ds = ingest_csv(resolve(ctx, ctx.cfg.text("data.path")), opt);
  ctx.manifest["data"] = {{"path", ctx.cfg.text("data.path")},
                          {"rows", ds.rows.size()},
                          {"rejected", ds.rejected.size()},
                          {"covariates", ds.covariate_names}};
  if (!ds.rejected.empty()) {
    std::ostringstream os;
    os << "line,error,reason\n";
    for (const auto& r : ds.rejected) {
      std::string reason = r.reason;
      std::replace(reason.begin(), reason.end(), ',', ';');
      os << r.line << ',' << error_name(r.code) << ',' << reason << '\n';
    }
    ctx.csv("rejected_rows.csv", os.str());
    ctx.warn(std::to_string(ds.rejected.size()) + " rows rejected; see rejected_rows.csv");
  }
  ctx.log << "loaded " << ds.rows.size() << " rows from " << ds.source << '\n';
  return ds;
}

// Fills eta according to [expert] and reports which indicator the estimator
// should count.
Judgments apply_expert(Context& ctx, Dataset& ds) {
  const auto mode = ctx.cfg.text("expert.mode", "precomputed");
  ctx.manifest["expert"] = {{"mode", mode}};
  if (mode == "naive") return Judgments::Naive;
  if (mode == "precomputed") {
    if (!ds.has_eta) throw Error(ErrorCode::MissingColumn, "expert mode 'precomputed' needs eta");
    return Judgments::Expert;
  }
  const double c = ctx.cfg.number("expert.c");
  ctx.manifest["expert"]["c"] = c;
  std::optional<ExpertModel> model;
  if (mode == "uniform") {
    model = ExpertModel::uniform_censor(c);
  } else if (mode == "threshold") {
    const auto column = ctx.cfg.text("expert.column");
    const auto it = std::find(ds.covariate_names.begin(), ds.covariate_names.end(), column);
    if (it == ds.covariate_names.end()) {
      throw Error(ErrorCode::MissingColumn, "threshold column '" + column + "' is not a covariate");
    }
    const auto idx = static_cast<std::size_t>(it - ds.covariate_names.begin());
    const double threshold = ctx.cfg.number("expert.threshold");
    ctx.manifest["expert"]["column"] = column;
    ctx.manifest["expert"]["threshold"] = threshold;
    model = ExpertModel::threshold_censor(
        c, [idx, threshold](std::span<const double> z) { return z[idx] <= threshold; });
  } else {
    throw Error(ErrorCode::ConfigError, "unknown expert mode '" + mode + "'");
  }
  judge_all(*model, ds.rows, ctx.seed, 0);
  ds.has_eta = true;
  return Judgments::Expert;
}

CvConfig cv_config(const Context& ctx, const Dataset& ds, Judgments judgments) {
  const auto& cfg = ctx.cfg;
  const std::size_t k = ds.covariate_names.size();
  CvConfig c;
  c.judgments = judgments;
  c.threads = ctx.options.threads;
  const double t_max = cfg.number("bandwidth.t_max", kNoTimeLimit);
  c.t_grid = cfg.has("bandwidth.t_grid") ? cfg.numbers("bandwidth.t_grid")
                                         : default_cv_grid(ds.rows, t_max);
  const auto weight = cfg.text("bandwidth.weight", "uniform");
  if (weight.rfind("exp:", 0) == 0) {
    const double rate = parse_numbers(weight.substr(4), "bandwidth.weight").at(0);
    c.weight_fn = [rate](double t) { return std::exp(-rate * t); };
  } else if (weight != "uniform") {
    throw Error(ErrorCode::ConfigError, "bandwidth.weight must be 'uniform' or 'exp:<rate>'");
  }
  if (cfg.has("bandwidth.targets")) {
    c.score_h = c.score_h1 = false;
    for (const auto& t : cfg.words("bandwidth.targets")) {
      if (t == "H") c.score_h = true;
      else if (t == "H1") c.score_h1 = true;
      else throw Error(ErrorCode::ConfigError, "bandwidth.targets accepts H and H1");
    }
  }
  c.cache_limit = static_cast<std::size_t>(cfg.integer("bandwidth.cache_limit", 6000));

  auto descent = [&](std::vector<double> initial) {
    CoordinateDescent d;
    d.initial = std::move(initial);
    d.shrink = cfg.number("bandwidth.shrink", d.shrink);
    d.grow = cfg.number("bandwidth.grow", d.grow);
    d.max_iterations = static_cast<int>(cfg.integer("bandwidth.max_iterations", d.max_iterations));
    d.tolerance = cfg.number("bandwidth.tolerance", d.tolerance);
    return d;
  };
  const auto search = cfg.text("bandwidth.search", "grid");
  if (search == "grid") {
    auto axes = cfg.points("bandwidth.candidates");
    if (axes.size() == 1 && k > 1) axes.assign(k, axes.front());
    if (axes.size() != k) {
      throw Error(ErrorCode::DimensionMismatch, "bandwidth.candidates needs one list per covariate");
    }
    c.search = GridSearch{std::move(axes)};
    if (cfg.flag("bandwidth.refine", false)) c.refine = descent({});
  } else if (search == "descent") {
    auto initial = cfg.numbers("bandwidth.initial");
    if (initial.size() == 1 && k > 1) initial.assign(k, initial.front());
    c.search = descent(std::move(initial));
  } else {
    throw Error(ErrorCode::ConfigError, "bandwidth.search must be 'grid' or 'descent'");
  }
  return c;
}

std::string cv_report_csv(const BandwidthSelection& sel, std::size_t k) {
  std::ostringstream os;
  for (std::size_t i = 0; i < k; ++i) os << "b_" << i + 1 << ',';
  os << "score,defined,excluded_terms,selected\n";
  const auto chosen = sel.selected.diagonal();
  bool flagged = false;
  for (const auto& r : sel.report) {
    for (double b : r.bandwidth) os << format_double(b) << ',';
    const bool is_sel = !flagged && r.defined && r.bandwidth == chosen;
    flagged = flagged || is_sel;
    os << format_double(r.score) << ',' << (r.defined ? 1 : 0) << ',' << r.excluded_terms << ','
       << (is_sel ? 1 : 0) << '\n';
  }
  return os.str();
}

void verify_loo(Context& ctx, const Dataset& ds, const KernelSpec& spec, const CvConfig& cv,
                const BandwidthSelection& sel) {
  if (ds.rows.size() > kMaxVerifyLoo) {
    throw Error(ErrorCode::InvalidArgument,
                "--verify-loo is limited to n <= " + std::to_string(kMaxVerifyLoo));
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < spec.dimension(); ++i) os << "b_" << i + 1 << ',';
  os << "t,target,shortcut,direct,abs_diff,excluded_shortcut,excluded_direct\n";
  double worst = 0.0;
  bool parity = true;
  for (const auto& r : sel.report) {
    const BandwidthMatrix bw(r.bandwidth);
    const WeightCache cache(ds.rows, spec, bw);
    for (double t : cv.t_grid) {
      for (auto target : {CvTarget::H, CvTarget::H1}) {
        if (target == CvTarget::H && !cv.score_h) continue;
        if (target == CvTarget::H1 && !cv.score_h1) continue;
        const auto fast = cv_score_at_t(t, cache, ds.rows, target, cv.judgments);
        const auto slow = direct_loo_cv_score_at_t(t, ds.rows, spec, bw, target, cv.judgments);
        const double diff = fast.defined() && slow.defined() ? std::abs(fast.score - slow.score)
                                                              : 0.0;
        parity = parity && fast.excluded == slow.excluded;
        worst = std::max(worst, diff);
        for (double b : r.bandwidth) os << format_double(b) << ',';
        os << format_double(t) << ',' << (target == CvTarget::H ? "H" : "H1") << ','
           << format_double(fast.score) << ',' << format_double(slow.score) << ','
           << format_double(diff) << ',' << fast.excluded << ',' << slow.excluded << '\n';
      }
    }
  }
  ctx.csv("loo_verification.csv", os.str());
  const bool passed = parity && worst <= kLooTolerance;
  ctx.manifest["loo_verification"] = {{"max_abs_diff", worst},
                                      {"excluded_parity", parity},
                                      {"tolerance", kLooTolerance},
                                      {"passed", passed}};
  if (!passed) ctx.warn("leave-one-out verification exceeded tolerance");
}

// Resolves [bandwidth]; for cv mode also runs the selection and records it.
BandwidthMatrix choose_bandwidth(Context& ctx, const Dataset& ds, const KernelSpec& spec,
                                 Judgments judgments) {
  const std::size_t k = ds.covariate_names.size();
  const auto mode = ctx.cfg.text("bandwidth.mode", "schedule");
  json info = {{"mode", mode}};
  std::optional<BandwidthMatrix> bw;
  if (mode == "explicit") {
    auto v = ctx.cfg.numbers("bandwidth.values");
    if (v.size() == 1 && k > 1) v.assign(k, v.front());
    if (v.size() != k) throw Error(ErrorCode::DimensionMismatch, "bandwidth.values needs k entries");
    bw = BandwidthMatrix(v);
  } else if (mode == "schedule") {
    const double rho = ctx.cfg.number("bandwidth.rho", 0.3);
    info["rho"] = rho;
    bw = BandwidthMatrix::schedule(ds.rows.size(), k, rho);
  } else if (mode == "cv") {
    const auto cv = cv_config(ctx, ds, judgments);
    const auto sel = select_bandwidth(ds.rows, spec, cv);
    ctx.csv("cv_report.csv", cv_report_csv(sel, k));
    info["cv_score"] = sel.score;
    info["candidates_evaluated"] = sel.report.size();
    info["t_grid_points"] = cv.t_grid.size();
    if (ctx.options.verify_loo) verify_loo(ctx, ds, spec, cv, sel);
    bw = sel.selected;
  } else {
    throw Error(ErrorCode::ConfigError, "bandwidth.mode must be explicit, schedule or cv");
  }
  if (ctx.options.verify_loo && mode != "cv") {
    throw Error(ErrorCode::ConfigError, "--verify-loo needs bandwidth.mode = cv");
  }
  info["diagonal"] = bw->diagonal();
  info["determinant"] = bw->determinant();
  ctx.manifest["bandwidth"] = info;
  ctx.log << "bandwidth " << join_numbers(bw->diagonal(), ' ') << '\n';
  return *bw;
}

double integrate_survival(const StepCurve& F, double upper) {
  const auto times = F.jump_times();
  const auto values = F.values();
  double acc = 0.0;
  double prev = 0.0;
  double surv = 1.0 - F.baseline();
  for (std::size_t i = 0; i < times.size() && times[i] <= upper; ++i) {
    acc += surv * (times[i] - prev);
    prev = times[i];
    surv = 1.0 - values[i];
  }
  return acc + surv * (upper - prev);
}

std::vector<double> default_time_grid(const Dataset& ds, double t_max) {
  std::vector<double> t{0.0};
  for (const auto& o : ds.rows) {
    if (o.w <= t_max) t.push_back(o.w);
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

void check_point(const std::vector<double>& z, std::size_t k) {
  if (z.size() != k) {
    throw Error(ErrorCode::DimensionMismatch, "query point has " + std::to_string(z.size()) +
                                                  " coordinates, data has " + std::to_string(k));
  }
}

void cmd_fit(Context& ctx) {
  const auto& cfg = ctx.cfg;
  std::set<std::string> keys = join({&kRunKeys, &kDataKeys, &kExpertKeys, &kBandwidthKeys},
                                    {"fit.points", "fit.t_grid", "fit.t_max", "fit.level",
                                     "fit.compare_naive", "integral.upper"});
  for (int i = 1; i <= kMaxAxes; ++i) keys.insert("integral.axis_" + std::to_string(i));
  cfg.check_keys(keys);

  auto ds = load_dataset(ctx, cfg.text("expert.mode", "precomputed") == "precomputed");
  const auto judgments = apply_expert(ctx, ds);
  const std::size_t k = ds.covariate_names.size();
  const auto spec = kernel_spec(ctx, k);
  const auto bw = choose_bandwidth(ctx, ds, spec, judgments);
  const double det = bw.determinant();
  const double scale = static_cast<double>(ds.rows.size()) * det;
  const double l2 = kernel_l2_norm(spec);
  const double t_max = cfg.number("fit.t_max", kNoTimeLimit);
  if (!(t_max > 0.0)) throw Error(ErrorCode::ConfigError, "fit.t_max must be > 0");
  const double level = cfg.number("fit.level", 0.95);
  const bool compare = cfg.flag("fit.compare_naive", false);
  const auto grid = cfg.has("fit.t_grid") ? cfg.numbers("fit.t_grid") : default_time_grid(ds, t_max);

  json points = json::array();
  const auto zs = cfg.points("fit.points");
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const auto& z = zs[i];
    check_point(z, k);
    const auto w = kernel_weights(ds.rows, spec, bw, z);
    const auto fit = fit_from_weights(ds.rows, w, judgments, det, z, t_max);
    std::optional<ConditionalFit> naive;
    if (compare) naive = fit_from_weights(ds.rows, w, Judgments::Naive, det, z, t_max);

    std::ostringstream os;
    os << "t,F,survival,Lambda,lower,upper" << (compare ? ",naive_survival" : "") << '\n';
    std::size_t ci_gaps = 0;
    for (double t : grid) {
      double lo = kNaN, hi = kNaN;
      try {
        const double one[] = {t};
        const auto row = pointwise_ci(fit, one, level, scale, l2).front();
        lo = row.lower;
        hi = row.upper;
      } catch (const Error&) {
        ++ci_gaps;
      }
      os << format_double(t) << ',' << format_double(fit.F.value(t)) << ','
         << format_double(fit.survival(t)) << ',' << format_double(fit.Lambda.value(t)) << ','
         << format_double(lo) << ',' << format_double(hi);
      if (compare) os << ',' << format_double(naive->survival(t));
      os << '\n';
    }
    const std::string name = "fit_z" + std::to_string(i + 1) + ".csv";
    ctx.csv(name, os.str());
    json p = {{"z", z}, {"file", name}, {"g_hat", fit.g_hat}, {"n_effective", fit.n_effective}};
    if (fit.truncated_at) {
      p["truncated_at"] = *fit.truncated_at;
      ctx.warn("fit at point " + std::to_string(i + 1) + " truncated at t=" +
               format_double(*fit.truncated_at));
    }
    if (ci_gaps > 0) {
      p["ci_undefined_rows"] = ci_gaps;
      ctx.warn("confidence bounds undefined at " + std::to_string(ci_gaps) +
               " grid times of point " + std::to_string(i + 1) + " (saturated hazard)");
    }
    points.push_back(p);
  }
  ctx.manifest["points"] = points;
  ctx.manifest["confidence_level"] = level;

  if (cfg.has("integral.axis_1")) {
    std::vector<std::vector<double>> axes;
    for (std::size_t a = 1; a <= k; ++a) axes.push_back(cfg.numbers("integral.axis_" + std::to_string(a)));
    const double upper = cfg.number("integral.upper", 50.0);
    std::ostringstream os;
    for (const auto& n : ds.covariate_names) os << n << ',';
    os << "difference\n";
    std::vector<double> z(k);
    std::vector<std::size_t> idx(k, 0);
    std::size_t undefined = 0;
    while (true) {
      for (std::size_t a = 0; a < k; ++a) z[a] = axes[a][idx[a]];
      double diff = kNaN;
      try {
        const auto w = kernel_weights(ds.rows, spec, bw, z);
        const auto e = fit_from_weights(ds.rows, w, judgments, det, z);
        const auto n = fit_from_weights(ds.rows, w, Judgments::Naive, det, z);
        diff = integrate_survival(e.F, upper) - integrate_survival(n.F, upper);
      } catch (const Error&) {
        ++undefined;
      }
      os << join_numbers(z) << ',' << format_double(diff) << '\n';
      std::size_t a = k;
      while (a > 0 && ++idx[a - 1] == axes[a - 1].size()) idx[--a] = 0;
      if (a == 0) break;
    }
    ctx.csv("integral_difference.csv", os.str());
    ctx.manifest["integral_difference"] = {{"upper", upper}, {"undefined_points", undefined}};
    if (undefined) ctx.warn(std::to_string(undefined) + " integral grid points have no data weight");
  }
}

void cmd_cv(Context& ctx) {
  ctx.cfg.check_keys(join({&kRunKeys, &kDataKeys, &kExpertKeys, &kBandwidthKeys}));
  if (ctx.cfg.text("bandwidth.mode", "") != "cv") {
    throw Error(ErrorCode::ConfigError, "the cv command needs bandwidth.mode = cv");
  }
  auto ds = load_dataset(ctx, ctx.cfg.text("expert.mode", "precomputed") == "precomputed");
  const auto judgments = apply_expert(ctx, ds);
  const auto spec = kernel_spec(ctx, ds.covariate_names.size());
  choose_bandwidth(ctx, ds, spec, judgments);
}

DisabilityScenario read_scenario(const Context& ctx) {
  const auto& c = ctx.cfg;
  DisabilityScenario s;
  s.n = static_cast<std::size_t>(c.integer("scenario.n", static_cast<std::int64_t>(s.n)));
  s.age_mean = c.number("scenario.age_mean", s.age_mean);
  s.age_var = c.number("scenario.age_var", s.age_var);
  s.reportings_rate = c.number("scenario.reportings_rate", s.reportings_rate);
  s.censor_upper = c.number("scenario.censor_upper", s.censor_upper);
  s.a = c.number("scenario.a", s.a);
  s.b = c.number("scenario.b", s.b);
  s.c0 = c.number("scenario.c0", s.c0);
  s.c1 = c.number("scenario.c1", s.c1);
  s.seed = ctx.seed;
  s.validate();
  return s;
}

json scenario_json(const DisabilityScenario& s) {
  return {{"n", s.n},       {"age_mean", s.age_mean}, {"age_var", s.age_var},
          {"reportings_rate", s.reportings_rate},   {"censor_upper", s.censor_upper},
          {"a", s.a},       {"b", s.b},               {"c0", s.c0},
          {"c1", s.c1}};
}

ExpertModel expert_for_p0(double p0, const DisabilityScenario& s) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw Error(ErrorCode::InvalidProbability, "p0 outside [0,1]");
  if (p0 == 0.0) return ExpertModel::naive();
  if (p0 == 1.0) return ExpertModel::perfect(true_p_function(s));
  return ExpertModel::partial(p0, true_p_function(s));
}

void cmd_simulate(Context& ctx) {
  const auto& cfg = ctx.cfg;
  cfg.check_keys(join({&kRunKeys, &kScenarioKeys},
                      {"simulate.kind", "simulate.expert_p0", "simulate.replication"}));
  const auto kind = cfg.text("simulate.kind", "disability");
  ctx.manifest["kind"] = kind;
  if (kind == "loans") {
    LoanScenario ls;
    ls.n = static_cast<std::size_t>(cfg.integer("scenario.n", static_cast<std::int64_t>(ls.n)));
    ls.seed = ctx.seed;
    const auto loans = generate_synthetic_loans(ls);
    std::ostringstream os;
    write_loans_csv(os, loans);
    ctx.csv("loans.csv", os.str());
    ctx.manifest["rows"] = loans.size();
    ctx.manifest["note"] =
        "synthetic loan book; ranges and quadrant default shares only, not real data";
    return;
  }
  if (kind != "disability") throw Error(ErrorCode::ConfigError, "simulate.kind must be disability or loans");
  const auto s = read_scenario(ctx);
  const auto rep = static_cast<std::uint32_t>(cfg.integer("simulate.replication", 0));
  auto p = simulate_portfolio(s, rep);
  if (cfg.has("simulate.expert_p0")) {
    const double p0 = cfg.number("simulate.expert_p0");
    judge_all(expert_for_p0(p0, s), p.observations, s.seed, rep);
    ctx.manifest["expert_p0"] = p0;
  }
  const bool eta = p.observations.front().eta.has_value();
  std::ostringstream os;
  os << "w,delta" << (eta ? ",eta" : "") << ",z_1,z_2"
     << (ctx.options.keep_latents ? ",x,y,c" : "") << '\n';
  for (std::size_t i = 0; i < p.observations.size(); ++i) {
    const auto& o = p.observations[i];
    os << format_double(o.w) << ',' << o.delta;
    if (eta) os << ',' << *o.eta;
    os << ',' << format_double(o.z[0]) << ',' << format_double(o.z[1]);
    if (ctx.options.keep_latents) {
      const auto& l = p.latents[i];
      os << ',' << format_double(l.x) << ',' << format_double(l.y) << ',' << format_double(l.c);
    }
    os << '\n';
  }
  ctx.csv("portfolio.csv", os.str());
  ctx.manifest["scenario"] = scenario_json(s);
  ctx.manifest["replication"] = rep;
  ctx.manifest["columns"] = {{"z_1", "age"}, {"z_2", "reportings"}};
}

std::vector<McExpert> parse_experts(const Config& cfg) {
  std::vector<McExpert> out;
  const auto items = cfg.has("study.experts") ? cfg.words("study.experts")
                                              : std::vector<std::string>{"partial:0.85", "perfect:1"};
  for (const auto& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "study.experts entries look like name:p0");
    }
    McExpert e;
    e.name = item.substr(0, colon);
    e.p0 = parse_numbers(item.substr(colon + 1), "study.experts").at(0);
    out.push_back(e);
  }
  return out;
}

std::string grid_csv(const SurvivalGrid& g) {
  std::ostringstream os;
  os << "z_age,t,value\n";
  for (std::size_t zi = 0; zi < g.z_grid.size(); ++zi) {
    for (std::size_t ti = 0; ti < g.t_grid.size(); ++ti) {
      os << format_double(g.z_grid[zi]) << ',' << format_double(g.t_grid[ti]) << ','
         << format_double(g.at(zi, ti)) << '\n';
    }
  }
  return os.str();
}

void cmd_mc_study(Context& ctx) {
  const auto& cfg = ctx.cfg;
  cfg.check_keys(join({&kRunKeys, &kScenarioKeys},
                      {"study.replications", "study.experts", "study.z_points", "study.t_points",
                       "study.rho", "study.bandwidth", "study.heatmap", "study.heatmap_t",
                       "study.heatmap_z", "study.heatmap_experts", "study.failure_share"}));
  McStudyConfig c;
  c.scenario = read_scenario(ctx);
  c.replications = static_cast<std::size_t>(cfg.integer("study.replications", 100));
  if (ctx.options.full_scale) {
    c.scenario.n = 10000;
    c.replications = 300;
  }
  c.experts = parse_experts(cfg);
  c.z_points = cfg.has("study.z_points") ? cfg.numbers("study.z_points")
                                         : std::vector<double>{45.0, 50.0, 55.0};
  c.t_points = cfg.has("study.t_points") ? cfg.numbers("study.t_points")
                                         : std::vector<double>{2.0, 5.0, 10.0};
  c.rho = cfg.number("study.rho", 0.3);
  if (cfg.has("study.bandwidth")) c.bandwidth = cfg.number("study.bandwidth");
  c.failure_flag_share = cfg.number("study.failure_share", 0.05);
  c.threads = ctx.options.threads;
  if (cfg.flag("study.heatmap", false)) {
    HeatmapSpec h;
    h.t_grid = cfg.has("study.heatmap_t") ? cfg.numbers("study.heatmap_t")
                                          : parse_numbers("0:1:30", "study.heatmap_t");
    h.z_grid = cfg.has("study.heatmap_z") ? cfg.numbers("study.heatmap_z")
                                          : parse_numbers("40:1:60", "study.heatmap_z");
    if (cfg.has("study.heatmap_experts")) {
      h.experts = cfg.words("study.heatmap_experts");
    } else {
      for (const auto& e : c.experts) h.experts.push_back(e.name);
    }
    c.heatmap = std::move(h);
  }
  ctx.log << "running " << c.replications << " replications of n=" << c.scenario.n << '\n';
  const auto r = run_mc_study(c);

  std::ostringstream os;
  os << "z_age,expert,p0,t,replications,failures,flagged,true_unbiased,true_center,"
        "simulated_mean,error_mean,true_sd,simulated_sd,error_sd\n";
  json flagged = json::array();
  for (const auto& cell : r.cells) {
    os << format_double(cell.z_age) << ',' << cell.expert << ',' << format_double(cell.p0) << ','
       << format_double(cell.t) << ',' << cell.replications << ',' << cell.failures << ','
       << (cell.flagged ? 1 : 0) << ',' << format_double(cell.true_unbiased) << ','
       << format_double(cell.true_center) << ',' << format_double(cell.mean) << ','
       << format_double(cell.mean - cell.true_center) << ',' << format_double(cell.true_sd)
       << ',' << format_double(cell.sd) << ',' << format_double(cell.sd - cell.true_sd) << '\n';
    if (cell.flagged) {
      flagged.push_back({{"z_age", cell.z_age}, {"expert", cell.expert}, {"t", cell.t},
                         {"failures", cell.failures}});
    }
  }
  ctx.csv("mc_cells.csv", os.str());
  if (r.truth) {
    ctx.csv("heatmap_truth.csv", grid_csv(*r.truth));
    for (const auto& h : r.heatmaps) {
      ctx.csv("heatmap_mean_" + h.expert + ".csv", grid_csv(h.mean));
      ctx.csv("heatmap_diff_" + h.expert + ".csv", grid_csv(heatmap_difference(h.mean, *r.truth)));
      if (h.failures) ctx.warn("heatmap for " + h.expert + " has " + std::to_string(h.failures) + " failed fits");
    }
  }
  ctx.manifest["scenario"] = scenario_json(c.scenario);
  ctx.manifest["replications"] = c.replications;
  ctx.manifest["bandwidth"] = r.bandwidth;
  ctx.manifest["rho"] = c.bandwidth ? json(nullptr) : json(c.rho);
  ctx.manifest["flagged_cells"] = flagged;
  if (!flagged.empty()) ctx.warn(std::to_string(flagged.size()) + " cells exceed the failure share");
}

void cmd_bias(Context& ctx) {
  const auto& cfg = ctx.cfg;
  cfg.check_keys(join({&kRunKeys, &kDataKeys, &kBandwidthKeys, &kScenarioKeys},
                      {"bias.p_hat", "bias.p_covariates", "bias.p0", "bias.points", "bias.t_grid",
                       "bias.t_max"}));
  const auto p_spec = cfg.text("bias.p_hat");
  auto ds = load_dataset(ctx, false);
  const std::size_t k = ds.covariate_names.size();

  // p_hat(W_i, Z_i) for every row, evaluated once.
  std::vector<double> p(ds.rows.size());
  if (p_spec == "column") {
    if (!ds.has_p_hat) throw Error(ErrorCode::MissingColumn, "bias.p_hat = column needs p_hat");
    p = ds.p_hat;
  } else if (p_spec.rfind("constant:", 0) == 0) {
    const double v = parse_numbers(p_spec.substr(9), "bias.p_hat").at(0);
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidProbability, "constant p_hat outside [0,1]");
    std::fill(p.begin(), p.end(), v);
  } else if (p_spec == "disability") {
    const auto names = cfg.has("bias.p_covariates") ? cfg.words("bias.p_covariates")
                                                    : std::vector<std::string>{"z_1", "z_2"};
    IngestOptions opt;
    opt.covariates = names;
    opt.skip_bad = ctx.options.skip_bad;
    const auto full = ingest_csv(resolve(ctx, cfg.text("data.path")), opt);
    const auto s = read_scenario(ctx);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = true_p(full.rows[i].w, full.rows[i].z, s);
  } else {
    throw Error(ErrorCode::ConfigError, "bias.p_hat must be column, constant:<p> or disability");
  }

  const auto spec = kernel_spec(ctx, k);
  const auto bw = choose_bandwidth(ctx, ds, spec, Judgments::Naive);
  const auto p0s = cfg.has("bias.p0") ? cfg.numbers("bias.p0") : std::vector<double>{1.0};
  const double t_max = cfg.number("bias.t_max", kNoTimeLimit);
  const auto grid = cfg.has("bias.t_grid") ? cfg.numbers("bias.t_grid") : default_time_grid(ds, t_max);

  // Rows carrying p_hat as their only coordinate; regression weights are
  // computed from the real covariates and passed in separately.
  std::vector<Observation> tagged(ds.rows.size());
  for (std::size_t i = 0; i < tagged.size(); ++i) tagged[i] = {ds.rows[i].w, ds.rows[i].delta, {p[i]}, {}};
  const ProbabilityFn p_of_row = [](double, std::span<const double> z) { return z[0]; };
  const ProbabilityFn q_of_row = [](double, std::span<const double> z) { return 1.0 - z[0]; };

  json entries = json::array();
  const auto zs = cfg.points("bias.points");
  for (std::size_t i = 0; i < zs.size(); ++i) {
    check_point(zs[i], k);
    const auto w = kernel_weights(ds.rows, spec, bw, zs[i]);
    const auto naive = fit_from_weights(ds.rows, w, Judgments::Naive, bw.determinant(), zs[i], t_max);
    // sum p_hat dH1x / (1 - H): the hazard a perfect expert would estimate.
    const auto accepted = gamma_plugin(tagged, w, q_of_row, 0.0, t_max);
    const auto unbiased = product_integral(accepted.gamma);
    for (std::size_t j = 0; j < p0s.size(); ++j) {
      const auto g = gamma_plugin(tagged, w, p_of_row, p0s[j], t_max);
      const auto center = biased_limit(accepted.gamma, g.gamma);
      std::ostringstream os;
      os << "t,gamma,factor,naive_survival,unbiased_survival,biased_survival\n";
      for (double t : grid) {
        const double gt = g.gamma.value(t);
        os << format_double(t) << ',' << format_double(gt) << ',' << format_double(std::exp(-gt))
           << ',' << format_double(naive.survival(t)) << ','
           << format_double(1.0 - unbiased.value(t)) << ',' << format_double(1.0 - center.value(t))
           << '\n';
      }
      const std::string name = "bias_z" + std::to_string(i + 1) + "_p" + std::to_string(j + 1) + ".csv";
      ctx.csv(name, os.str());
      json e = {{"z", zs[i]}, {"p0", p0s[j]}, {"file", name}};
      if (g.truncated_at) e["truncated_at"] = *g.truncated_at;
      entries.push_back(e);
    }
  }
  ctx.manifest["p_hat"] = p_spec;
  ctx.manifest["curves"] = entries;
}

void cmd_convert_loans(Context& ctx) {
  ctx.cfg.check_keys(join({&kRunKeys}, {"convert.input"}));
  const auto path = resolve(ctx, ctx.cfg.text("convert.input"));
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open loan file '" + path.string() + "'");
  const auto loans = read_loans_csv(in);
  const auto obs = loans_to_observations(loans);
  std::ostringstream os;
  write_observations_csv(os, obs, {"z_1", "z_2"});
  ctx.csv("loans_converted.csv", os.str());
  std::size_t defaults = 0;
  for (const auto& o : obs) defaults += o.delta;
  ctx.manifest["rows"] = obs.size();
  ctx.manifest["defaults"] = defaults;
  ctx.manifest["columns"] = {{"w", "months active (days / 30.4375)"},
                             {"delta", "default on or before the cutoff"},
                             {"z_1", "debt-to-income, percent"},
                             {"z_2", "interest rate, percent"}};
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << body;
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

}  // namespace

fs::path resolve_out_dir(const std::optional<fs::path>& flag,
                         const std::optional<std::string>& configured) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CKM_OUT_DIR"); env && *env) return fs::path(env);
  if (configured) return fs::path(*configured);
  return fs::path("ckm_out");
}

RunResult run(const RunOptions& options, std::ostream& log) {
  RunResult result;
  std::optional<std::string> configured_out;
  std::optional<Config> cfg;
  try {
    cfg = Config::from_file(options.config);
    if (cfg->has("run.out")) configured_out = cfg->text("run.out");
  } catch (...) {
  }
  result.out_dir = resolve_out_dir(options.out_dir, configured_out);

  try {
    if (!cfg) cfg = Config::from_file(options.config);
    const auto seed = options.seed ? *options.seed
                                   : static_cast<std::uint64_t>(cfg->integer("run.seed", 1));
    Context ctx{options, *cfg, fs::absolute(options.config).parent_path(), seed, log, {}, {}};
    ctx.header = "# config_sha256=" + cfg->sha256() + ", seed=" + std::to_string(seed);
    ctx.manifest["command"] = options.command;
    ctx.manifest["version"] = kVersion;
    ctx.manifest["config_sha256"] = cfg->sha256();
    ctx.manifest["seed"] = seed;

    static const std::map<std::string, void (*)(Context&)> commands{
        {"fit", cmd_fit},       {"cv", cmd_cv},     {"simulate", cmd_simulate},
        {"mc-study", cmd_mc_study}, {"bias", cmd_bias}, {"convert-loans", cmd_convert_loans}};
    const auto it = commands.find(options.command);
    if (it == commands.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown command '" + options.command + "'");
    }
    it->second(ctx);

    json outputs = json::array();
    for (const auto& [name, body] : ctx.files) outputs.push_back(name);
    ctx.manifest["outputs"] = outputs;
    ctx.manifest["warnings"] = ctx.warnings;
    ctx.files.emplace_back("manifest.json", ctx.manifest.dump(2) + "\n");

    fs::create_directories(result.out_dir);
    fs::remove(result.out_dir / "error.json");
    for (const auto& [name, body] : ctx.files) {
      write_file(result.out_dir / name, body);
      result.files.push_back(name);
    }
    for (const auto& w : ctx.warnings) log << "warning: " << w.get<std::string>() << '\n';
    log << "wrote " << result.files.size() << " files to " << result.out_dir.string() << '\n';
    return result;
  } catch (const Error& e) {
    result.exit_code = is_numerical(e.code()) ? kExitNumerical : kExitValidation;
    result.message = std::string(error_name(e.code())) + ": " + e.what();
    json err = {{"command", options.command},
                {"error", std::string(error_name(e.code()))},
                {"category", is_numerical(e.code()) ? "numerical" : "validation"},
                {"message", e.what()},
                {"exit_code", result.exit_code}};
    try {
      fs::create_directories(result.out_dir);
      write_file(result.out_dir / "error.json", err.dump(2) + "\n");
      result.files = {"error.json"};
    } catch (...) {
    }
  } catch (const std::exception& e) {
    result.exit_code = kExitValidation;
    result.message = e.what();
    json err = {{"command", options.command},
                {"error", "IoError"},
                {"category", "validation"},
                {"message", e.what()},
                {"exit_code", result.exit_code}};
    try {
      fs::create_directories(result.out_dir);
      write_file(result.out_dir / "error.json", err.dump(2) + "\n");
      result.files = {"error.json"};
    } catch (...) {
    }
  }
  log << "error: " << result.message << '\n';
  return result;
}

}  // namespace ckm::app

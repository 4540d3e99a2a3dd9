#include "debias/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "debias/errors.hpp"
#include "debias/rejection.hpp"
#include "debias/rng.hpp"

#ifndef DEBIAS_VERSION
#define DEBIAS_VERSION "0.0.0"
#endif

namespace debias {

using nlohmann::json;

std::string library_version() { return DEBIAS_VERSION; }

// ---- config ----------------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::binary_exact: return "binary_exact";
    case ExperimentKind::mixture_mc: return "mixture_mc";
    case ExperimentKind::identity_check: return "identity_check";
    case ExperimentKind::rejection_demo: return "rejection_demo";
  }
  return "unknown";
}

ExperimentKind parse_experiment(const std::string& name) {
  std::string key = name;
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto kind : {ExperimentKind::binary_exact, ExperimentKind::mixture_mc,
                    ExperimentKind::identity_check, ExperimentKind::rejection_demo}) {
    if (to_string(kind) == key) return kind;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

NRule parse_n_rule(const std::string& text) {
  if (text == "auto") return {NRuleKind::automatic, 0};
  if (text == "n_pow3") return {NRuleKind::n_pow3, 0};
  if (text == "n_pow4") return {NRuleKind::n_pow4, 0};
  const std::string prefix = "fixed:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string digits = text.substr(prefix.size());
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("N_rule: bad fixed count in '" + text + "'");
    }
    const auto value = std::stoull(digits);
    if (value < 1) throw ConfigError("N_rule: fixed N must be >= 1");
    return {NRuleKind::fixed, value};
  }
  throw ConfigError("N_rule must be auto, n_pow3, n_pow4 or fixed:<N>, got '" + text + "'");
}

std::string to_string(const NRule& rule) {
  switch (rule.kind) {
    case NRuleKind::automatic: return "auto";
    case NRuleKind::n_pow3: return "n_pow3";
    case NRuleKind::n_pow4: return "n_pow4";
    case NRuleKind::fixed: return "fixed:" + std::to_string(rule.fixed_N);
  }
  return "auto";
}

std::uint64_t replications_for(const NRule& rule, std::uint32_t n, int k) {
  const std::uint64_t nn = n;
  switch (rule.kind) {
    case NRuleKind::automatic: return k == 1 ? nn * nn * nn : nn * nn * nn * nn;
    case NRuleKind::n_pow3: return nn * nn * nn;
    case NRuleKind::n_pow4: return nn * nn * nn * nn;
    case NRuleKind::fixed: return rule.fixed_N;
  }
  return 1;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  switch (kind) {
    case ExperimentKind::binary_exact:
      cfg.n_grid = {16, 32, 64, 128, 256, 512, 1024};
      cfg.k_values = {1, 2, 3, 4};
      break;
    case ExperimentKind::mixture_mc:
      cfg.n_grid = {8, 12, 16, 24, 32, 48, 64};
      cfg.k_values = {1};
      cfg.y_star = 0.8;
      cfg.noise_var = 1.0 / 16.0;
      break;
    case ExperimentKind::identity_check:
      cfg.n_grid = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
      cfg.k_values = {1, 2, 3, 4};
      break;
    case ExperimentKind::rejection_demo:
      cfg.n_grid = {64};
      cfg.k_values = {2};
      break;
  }
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.n_grid.empty()) throw ConfigError("n_grid must not be empty");
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (cfg.n_grid[i] < 1) throw ConfigError("n_grid entries must be >= 1");
    if (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1]) throw ConfigError("n_grid must be strictly increasing");
  }
  if (cfg.k_values.empty() && cfg.weights_override.empty()) throw ConfigError("k_values must not be empty");
  for (int k : cfg.k_values) {
    if (k < 1 || k > kMaxDebiasOrder) throw ConfigError("k values must lie in [1, 20]");
  }
  if (!(cfg.q > 0.0 && cfg.q < 1.0)) throw ConfigError("q must lie in (0, 1)");
  if (!(cfg.noise_var > 0.0)) throw ConfigError("noise_var must be positive");
  if (cfg.inner_reps < 1) throw ConfigError("inner_reps must be >= 1");
  if (cfg.N_cap < 1) throw ConfigError("N_cap must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.mixture.empty()) throw ConfigError("mixture needs at least one component");
  if (!cfg.prior.empty() && !cfg.ell.empty() && cfg.prior.size() != cfg.ell.size()) {
    throw ConfigError("prior and ell must have the same length");
  }
  if (cfg.experiment == ExperimentKind::identity_check) {
    if (cfg.n_grid.back() > 12) throw ConfigError("identity_check supports n <= 12");
    for (auto m : cfg.m_values) {
      if (m < 1 || m > 3) throw ConfigError("identity_check supports m in [1, 3]");
    }
  }
}

namespace {

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown config key '" + section + (section.empty() ? "" : ".") + item.key() + "'");
    }
  }
}

}  // namespace

void apply_json(ExperimentConfig& cfg, const json& j) {
  check_keys(j, {"experiment", "n_grid", "k_values", "root_seed", "output_path", "threads", "setting",
                 "mc", "identity", "rejection", "fit", "limits"},
             "");
  if (j.contains("experiment")) cfg.experiment = parse_experiment(get_as<std::string>(j, "experiment"));
  if (j.contains("n_grid")) cfg.n_grid = get_as<std::vector<std::uint32_t>>(j, "n_grid");
  if (j.contains("k_values")) cfg.k_values = get_as<std::vector<int>>(j, "k_values");
  if (j.contains("root_seed")) cfg.root_seed = get_as<std::uint64_t>(j, "root_seed");
  if (j.contains("output_path")) cfg.output_path = get_as<std::string>(j, "output_path");
  if (j.contains("threads")) cfg.threads = get_as<unsigned>(j, "threads");

  if (j.contains("setting")) {
    const auto& s = j.at("setting");
    check_keys(s, {"q", "y_star", "noise_var", "threshold", "map", "mixture", "m_values", "prior", "ell"},
               "setting");
    if (s.contains("q")) cfg.q = get_as<double>(s, "q");
    if (s.contains("y_star")) cfg.y_star = get_as<double>(s, "y_star");
    if (s.contains("noise_var")) cfg.noise_var = get_as<double>(s, "noise_var");
    if (s.contains("threshold")) cfg.threshold = get_as<double>(s, "threshold");
    if (s.contains("map")) {
      const auto name = get_as<std::string>(s, "map");
      if (name == "bayes") cfg.map = MapKind::bayes;
      else if (name == "linear") cfg.map = MapKind::linear;
      else throw ConfigError("setting.map must be bayes or linear");
    }
    if (s.contains("mixture")) {
      cfg.mixture.clear();
      for (const auto& c : s.at("mixture")) {
        check_keys(c, {"weight", "mean", "variance"}, "setting.mixture[]");
        cfg.mixture.push_back({get_as<double>(c, "weight"), get_as<double>(c, "mean"),
                               get_as<double>(c, "variance")});
      }
    }
    if (s.contains("m_values")) cfg.m_values = get_as<std::vector<std::size_t>>(s, "m_values");
    if (s.contains("prior")) cfg.prior = get_as<std::vector<double>>(s, "prior");
    if (s.contains("ell")) cfg.ell = get_as<std::vector<double>>(s, "ell");
  }
  if (j.contains("mc")) {
    const auto& s = j.at("mc");
    check_keys(s, {"N_rule", "N_cap", "inner_reps", "guard"}, "mc");
    if (s.contains("N_rule")) cfg.N_rule = parse_n_rule(get_as<std::string>(s, "N_rule"));
    if (s.contains("N_cap")) cfg.N_cap = get_as<std::uint64_t>(s, "N_cap");
    if (s.contains("inner_reps")) cfg.inner_reps = get_as<unsigned>(s, "inner_reps");
    if (s.contains("guard")) {
      const auto mode = get_as<std::string>(s, "guard");
      if (mode == "abort") cfg.guard = GuardMode::abort;
      else if (mode == "warn") cfg.guard = GuardMode::warn;
      else throw ConfigError("mc.guard must be abort or warn");
    }
  }
  if (j.contains("identity")) {
    const auto& s = j.at("identity");
    check_keys(s, {"cases", "chain_cases", "chain_node_budget", "weights_override"}, "identity");
    if (s.contains("cases")) cfg.identity_cases = get_as<std::size_t>(s, "cases");
    if (s.contains("chain_cases")) cfg.chain_cases = get_as<std::size_t>(s, "chain_cases");
    if (s.contains("chain_node_budget")) cfg.chain_node_budget = get_as<std::uint64_t>(s, "chain_node_budget");
    if (s.contains("weights_override")) cfg.weights_override = get_as<std::vector<double>>(s, "weights_override");
  }
  if (j.contains("rejection")) {
    const auto& s = j.at("rejection");
    check_keys(s, {"samples", "max_attempts"}, "rejection");
    if (s.contains("samples")) cfg.rejection_samples = get_as<std::uint64_t>(s, "samples");
    if (s.contains("max_attempts")) cfg.max_attempts = get_as<std::uint64_t>(s, "max_attempts");
  }
  if (j.contains("fit")) {
    const auto& s = j.at("fit");
    check_keys(s, {"drop_smallest", "min_n"}, "fit");
    if (s.contains("drop_smallest")) cfg.drop_smallest = get_as<bool>(s, "drop_smallest");
    if (s.contains("min_n")) cfg.fit_min_n = get_as<std::uint32_t>(s, "min_n");
  }
  if (j.contains("limits")) {
    const auto& s = j.at("limits");
    check_keys(s, {"lattice_cap", "matrix_entry_cap"}, "limits");
    if (s.contains("lattice_cap")) cfg.limits.lattice_cap = get_as<std::size_t>(s, "lattice_cap");
    if (s.contains("matrix_entry_cap")) cfg.limits.matrix_entry_cap = get_as<std::size_t>(s, "matrix_entry_cap");
  }
}

ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  ExperimentKind kind = expected.value_or(ExperimentKind::binary_exact);
  if (j.contains("experiment")) {
    const auto named = parse_experiment(get_as<std::string>(j, "experiment"));
    if (expected && named != *expected) {
      throw ConfigError("config file is for '" + to_string(named) + "', not '" + to_string(*expected) + "'");
    }
    kind = named;
  }
  auto cfg = default_config(kind);
  apply_json(cfg, j);
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json mixture = json::array();
  for (const auto& c : cfg.mixture) mixture.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
  return {
      {"experiment", to_string(cfg.experiment)},
      {"n_grid", cfg.n_grid},
      {"k_values", cfg.k_values},
      {"root_seed", cfg.root_seed},
      {"output_path", cfg.output_path},
      {"threads", cfg.threads},
      {"setting",
       {{"q", cfg.q},
        {"y_star", cfg.y_star},
        {"noise_var", cfg.noise_var},
        {"threshold", cfg.threshold},
        {"map", cfg.map == MapKind::bayes ? "bayes" : "linear"},
        {"mixture", mixture},
        {"m_values", cfg.m_values},
        {"prior", cfg.prior},
        {"ell", cfg.ell}}},
      {"mc",
       {{"N_rule", to_string(cfg.N_rule)},
        {"N_cap", cfg.N_cap},
        {"inner_reps", cfg.inner_reps},
        {"guard", cfg.guard == GuardMode::abort ? "abort" : "warn"}}},
      {"identity",
       {{"cases", cfg.identity_cases},
        {"chain_cases", cfg.chain_cases},
        {"chain_node_budget", cfg.chain_node_budget},
        {"weights_override", cfg.weights_override}}},
      {"rejection", {{"samples", cfg.rejection_samples}, {"max_attempts", cfg.max_attempts}}},
      {"fit", {{"drop_smallest", cfg.drop_smallest}, {"min_n", cfg.fit_min_n}}},
      {"limits", {{"lattice_cap", cfg.limits.lattice_cap}, {"matrix_entry_cap", cfg.limits.matrix_entry_cap}}},
  };
}

// ---- slope fit ---------------------------------------------------------------------

SlopeFit fit_slope(std::span<const std::pair<double, double>> points, bool drop_smallest) {
  std::vector<std::pair<double, double>> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end());
  if (drop_smallest && !pts.empty()) pts.erase(pts.begin());
  if (pts.size() < 2) throw DomainError("fit_slope: need at least two points");
  std::vector<double> x, y;
  for (const auto& [n, v] : pts) {
    if (!(n > 0.0) || !(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("fit_slope: values must be positive, got " + format_real(v) + " at n=" + format_real(n));
    }
    x.push_back(std::log(n));
    y.push_back(std::log(v));
  }
  const double count = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("fit_slope: all n identical");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.points_used = x.size();
  return fit;
}

// ---- binary exact --------------------------------------------------------------------

double binary_likelihood_ratio(double y_star, double noise_var) {
  const auto ell = gaussian_likelihood(y_star, noise_var);
  return std::exp(ell.log_eval(1.0) - ell.log_eval(0.0));
}

std::vector<BinaryExactRow> run_binary_exact(const ExperimentConfig& cfg) {
  validate(cfg);
  const double alpha = binary_likelihood_ratio(cfg.y_star, cfg.noise_var);
  // Support (u_1, u_2) = (1, 0); q_1 = P(X = 1).
  const ProbVector q({cfg.q, 1.0 - cfg.q});
  SimplexFunction g;
  if (cfg.map == MapKind::bayes) {
    g = DiscreteBayesMap({alpha, 1.0}).component_function(0);
  } else {
    g = [](std::span<const double> x) { return x[0]; };
  }
  const double g_q = g(q.values());

  std::vector<BinaryExactRow> rows;
  for (auto n : cfg.n_grid) {
    const BernsteinOperator op(n, 2, cfg.limits);
    const auto g_lattice = op.sample(g);
    for (int k : cfg.k_values) {
      rows.push_back({n, k, std::abs(op.bias(g_lattice, g_q, q, k)),
                      op.variance(g_lattice, q, debias_weights(k))});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.k < b.k; });
  return rows;
}

// ---- mixture MC ---------------------------------------------------------------------------

PriorSampler mixture_prior_sampler(const GaussianMixture& prior) {
  std::vector<double> cumulative;
  std::vector<double> means, sds;
  double running = 0.0;
  for (const auto& c : prior.components()) {
    running += c.weight;
    cumulative.push_back(running);
    means.push_back(c.mean);
    sds.push_back(std::sqrt(c.variance));
  }
  cumulative.back() = 1.0;
  return [cumulative, means, sds](std::uint32_t n, SplitMix64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> points(n);
    for (auto& x : points) {
      const double u = unit(rng);
      std::size_t c = 0;
      while (c + 1 < cumulative.size() && u >= cumulative[c]) ++c;
      x = means[c] + sds[c] * normal(rng);
    }
    return WeightedSampleSet(std::move(points));
  };
}

MixtureReport run_mixture_mc(const ExperimentConfig& cfg) {
  validate(cfg);
  const GaussianMixture prior(cfg.mixture);
  const auto ell = gaussian_likelihood(cfg.y_star, cfg.noise_var);
  const double threshold = cfg.threshold;
  const double truth = mixture_true_posterior_prob(prior, cfg.noise_var, cfg.y_star, threshold);
  const auto sampler = mixture_prior_sampler(prior);
  const SampleFunctional functional = [&ell, threshold](const WeightedSampleSet& s) {
    return plugin_posterior_prob(s, ell, [threshold](double x) { return x >= threshold; });
  };

  MixtureReport report;
  for (int k : cfg.k_values) {
    for (auto n : cfg.n_grid) {
      const std::uint64_t wanted = replications_for(cfg.N_rule, n, k);
      MCConfig mc;
      mc.n = n;
      mc.k = k;
      mc.N = std::min(wanted, cfg.N_cap);
      mc.inner_reps = cfg.inner_reps;
      // Each grid point gets its own root so adding points never shifts others.
      mc.root_seed = derive_seed(cfg.root_seed, (static_cast<std::uint64_t>(k) << 32) | n);
      const auto result = outer_mc(sampler, functional, mc, cfg.threads);

      MixtureRow row;
      row.n = n;
      row.k = k;
      row.N = mc.N;
      row.inner_reps = mc.inner_reps;
      row.est_mean = result.mean;
      row.true_value = truth;
      row.est_bias = result.mean - truth;
      row.est_variance = result.variance;
      row.std_error = result.std_error;
      row.capped = wanted > cfg.N_cap;
      row.wall_time = result.wall_time;
      report.rows.push_back(row);

      if (row.std_error > std::abs(row.est_bias) / 3.0) {
        report.guard_violations.push_back("n=" + std::to_string(n) + ", k=" + std::to_string(k) +
                                          ": std_error " + format_real(row.std_error) +
                                          " exceeds |bias|/3 = " + format_real(std::abs(row.est_bias) / 3.0) +
                                          " with N=" + std::to_string(mc.N));
        if (cfg.guard == GuardMode::abort) {
          report.aborted = true;
          return report;
        }
      }
    }
  }
  return report;
}

// ---- identity check ---------------------------------------------------------------------

namespace {

struct RandomDiscreteCase {
  ProbVector q;
  DiscreteBayesMap map;
  std::size_t component;
};

RandomDiscreteCase random_case(std::uint64_t seed, std::size_t m) {
  SplitMix64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> log_ell(-1.5, 1.5);
  std::vector<double> q(m), ell(m);
  double total = 0.0;
  for (auto& v : q) {
    v = expo(rng) + 1e-3;
    total += v;
  }
  for (auto& v : q) v /= total;
  total = 0.0;
  for (double v : q) total += v;
  q.back() += 1.0 - total;
  for (auto& v : ell) v = std::exp(log_ell(rng));
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  return {ProbVector(std::move(q)), DiscreteBayesMap(std::move(ell)), pick(rng)};
}

double power_at_most(double base, int exponent, double limit) {
  double result = 1.0;
  for (int i = 0; i < exponent && result <= limit; ++i) result *= base;
  return result;
}

}  // namespace

IdentityReport run_identity_check(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<DebiasWeights> schemes;
  if (!cfg.weights_override.empty()) {
    schemes.push_back({static_cast<int>(cfg.weights_override.size()), cfg.weights_override});
  } else {
    for (int k : cfg.k_values) schemes.push_back(debias_weights(k));
  }

  IdentityReport report;
  for (auto m : cfg.m_values) {
    for (auto n : cfg.n_grid) {
      const BernsteinOperator op(n, m, cfg.limits);
      const double lattice_points = static_cast<double>(op.lattice().size());
      for (std::size_t c = 0; c < cfg.identity_cases; ++c) {
        const auto rc = random_case(derive_seed(cfg.root_seed, (m << 40) | (static_cast<std::uint64_t>(n) << 20) | c), m);
        const auto g = rc.map.component_function(rc.component);
        const auto g_lattice = op.sample(g);
        const auto data_pmf = op.pmf(rc.q);
        for (const auto& scheme : schemes) {
          // C_{n,k} with the correct weights is the reference, whatever
          // weights the estimator under test uses.
          const double expected = op.apply_C(g_lattice, rc.q, debias_weights(scheme.k));

          const auto dg = op.debias(g_lattice, scheme);
          double enumerated = 0.0;
          for (std::size_t t = 0; t < data_pmf.size(); ++t) enumerated += data_pmf[t] * dg[t];
          report.cases.push_back({n, m, scheme.k, c, "lattice", expected, enumerated,
                                  std::abs(enumerated - expected)});

          const double nodes = power_at_most(lattice_points, scheme.k, 1e18);
          if (c < cfg.chain_cases && nodes <= static_cast<double>(cfg.chain_node_budget)) {
            const double chained = exact_chain_expectation(
                rc.q, n, scheme,
                [&](const CountsVector& t) { return g(t.frequencies().values()); },
                cfg.limits.lattice_cap);
            report.cases.push_back({n, m, scheme.k, c, "chain", expected, chained,
                                    std::abs(chained - expected)});
          }
        }
      }
    }
  }
  for (const auto& ic : report.cases) report.max_discrepancy = std::max(report.max_discrepancy, ic.discrepancy);
  report.pass = !report.cases.empty() && report.max_discrepancy < kIdentityTolerance;
  return report;
}

// ---- rejection demo ------------------------------------------------------------------------

std::vector<RejectionRow> run_rejection_demo(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<double> prior = cfg.prior.empty() ? std::vector<double>{cfg.q, 1.0 - cfg.q} : cfg.prior;
  std::vector<double> ell = cfg.ell;
  if (ell.empty()) {
    if (prior.size() != 2) throw ConfigError("rejection_demo: ell is required when the prior is not binary");
    ell = {binary_likelihood_ratio(cfg.y_star, cfg.noise_var), 1.0};
  }
  if (ell.size() != prior.size()) throw ConfigError("rejection_demo: prior and ell lengths differ");
  const ProbVector q(prior);
  const DiscreteBayesMap map(ell);
  const std::size_t m = q.size();

  std::vector<RejectionRow> rows;
  for (auto n : cfg.n_grid) {
    const BernsteinOperator op(n, m, cfg.limits);
    std::vector<LatticeFunction> components;
    for (std::size_t s = 0; s < m; ++s) components.push_back(op.sample(map.component_function(s)));

    for (int k : cfg.k_values) {
      SplitMix64 rng(derive_seed(cfg.root_seed, (static_cast<std::uint64_t>(k) << 32) | n));
      std::discrete_distribution<std::size_t> draw(prior.begin(), prior.end());
      std::vector<std::uint32_t> counts(m, 0);
      for (std::uint32_t i = 0; i < n; ++i) ++counts[draw(rng)];
      const CountsVector t(counts);

      const auto proposal = map(t.frequencies());
      const auto w = debias_weights(k);
      std::vector<double> debiased(m);
      for (std::size_t s = 0; s < m; ++s) debiased[s] = op.debias(components[s], w).at(t);
      const auto spec = make_rejection_spec(proposal, SignedProbVector(debiased));

      std::vector<std::uint64_t> hits(m, 0);
      std::uint64_t attempts = 0;
      for (std::uint64_t i = 0; i < cfg.rejection_samples; ++i) {
        const auto d = rejection_draw(spec, rng, cfg.max_attempts);
        ++hits[d.index];
        attempts += d.attempts;
      }
      for (std::size_t s = 0; s < m; ++s) {
        RejectionRow row;
        row.n = n;
        row.k = k;
        row.index = s;
        row.count = counts[s];
        row.proposal = proposal[s];
        row.target = debiased[s];
        row.clamped_target = spec.target[s];
        row.empirical = cfg.rejection_samples ? static_cast<double>(hits[s]) / cfg.rejection_samples : 0.0;
        row.M = spec.M;
        row.expected_acceptance = expected_acceptance_rate(spec);
        row.observed_acceptance = attempts ? static_cast<double>(cfg.rejection_samples) / attempts : 0.0;
        row.clamped_mass = spec.clamped_mass;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

// ---- output ----------------------------------------------------------------------------------

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvTable binary_exact_table(const std::vector<BinaryExactRow>& rows) {
  CsvTable t{{"n", "k", "abs_bias", "variance"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.n), std::to_string(r.k), format_real(r.abs_bias), format_real(r.variance)});
  }
  return t;
}

CsvTable mixture_table(const std::vector<MixtureRow>& rows) {
  CsvTable t{{"n", "k", "N", "inner_reps", "est_mean", "true_value", "est_bias", "est_variance", "std_error"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.n), std::to_string(r.k), std::to_string(r.N), std::to_string(r.inner_reps),
                      format_real(r.est_mean), format_real(r.true_value), format_real(r.est_bias),
                      format_real(r.est_variance), format_real(r.std_error)});
  }
  return t;
}

CsvTable identity_table(const IdentityReport& report) {
  CsvTable t{{"n", "m", "k", "case", "route", "expected", "enumerated", "discrepancy"}, {}};
  for (const auto& c : report.cases) {
    t.rows.push_back({std::to_string(c.n), std::to_string(c.m), std::to_string(c.k), std::to_string(c.case_index),
                      c.route, format_real(c.expected), format_real(c.enumerated), format_real(c.discrepancy)});
  }
  return t;
}

CsvTable rejection_table(const std::vector<RejectionRow>& rows) {
  CsvTable t{{"n", "k", "index", "count", "proposal", "target", "clamped_target", "empirical", "M",
              "expected_acceptance", "observed_acceptance", "clamped_mass"},
             {}};
  for (const auto& r : rows) {
    t.rows.push_back({std::to_string(r.n), std::to_string(r.k), std::to_string(r.index), std::to_string(r.count),
                      format_real(r.proposal), format_real(r.target), format_real(r.clamped_target),
                      format_real(r.empirical), format_real(r.M), format_real(r.expected_acceptance),
                      format_real(r.observed_acceptance), format_real(r.clamped_mass)});
  }
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!text.empty() && text.back() == ',') cells.emplace_back();
    return cells;
  };
  CsvTable table;
  std::string text;
  if (!std::getline(in, text)) throw ConfigError("'" + path + "' is empty");
  if (!text.empty() && text.back() == '\r') text.pop_back();
  table.header = split(text);
  while (std::getline(in, text)) {
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    auto cells = split(text);
    if (cells.size() != table.header.size()) throw ConfigError("'" + path + "': ragged row");
    table.rows.push_back(std::move(cells));
  }
  return table;
}

json slope_fits(const CsvTable& table, const std::string& value_column, bool drop_smallest, std::uint32_t min_n,
                bool absolute) {
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const auto n_col = column("n");
  const auto v_col = column(value_column);
  if (!n_col || !v_col) throw ConfigError("table lacks column 'n' or '" + value_column + "'");
  const auto k_col = column("k");

  std::map<std::string, std::vector<std::pair<double, double>>> groups;
  for (const auto& row : table.rows) {
    const double n = std::strtod(row[*n_col].c_str(), nullptr);
    if (n < min_n) continue;
    double v = std::strtod(row[*v_col].c_str(), nullptr);
    if (absolute) v = std::abs(v);
    groups[k_col ? row[*k_col] : std::string("all")].emplace_back(n, v);
  }
  json out = json::array();
  for (const auto& [k, pts] : groups) {
    json entry = {{"column", value_column}, {"k", k}};
    try {
      const auto fit = fit_slope(pts, drop_smallest);
      entry["slope"] = fit.slope;
      entry["intercept"] = fit.intercept;
      entry["r_squared"] = fit.r_squared;
      entry["points_used"] = fit.points_used;
    } catch (const DomainError& e) {
      entry["slope"] = nullptr;
      entry["error"] = e.what();
    }
    out.push_back(entry);
  }
  return out;
}

}  // namespace debias

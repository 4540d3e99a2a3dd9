// Command-line harness for the debiasing experiments.
//
//   debias binary-exact   exact bias/variance of the debiased binary posterior
//   debias mixture-mc     Monte Carlo bias/variance for the Gaussian mixture prior
//   debias identity-check exhaustive check of E[D_{n,k} g(T/n)] = C_{n,k} g(q)
//   debias rejection-demo rejection sampling from the debiased discrete posterior
//   debias fit-slope      log-log slope fit of a CSV column
//
// Exit codes: 0 ok, 1 other failure, 2 config error, 3 cap/budget violation,
// 4 acceptance-guard failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "debias/errors.hpp"
#include "debias/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCap = 3;
constexpr int kExitGuard = 4;

// Flag values; each is applied only when given on the command line.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::vector<std::uint32_t> n_grid;
  std::vector<int> k_values;
  std::optional<double> q, y_star, noise_var, threshold;
  std::optional<std::string> map;
  std::vector<std::size_t> m_values;
  std::vector<double> prior, ell, weights;
  std::optional<std::string> n_rule, guard;
  std::optional<std::uint64_t> n_cap, samples;
  std::optional<unsigned> inner_reps;
  std::optional<std::size_t> cases, chain_cases;
  std::optional<std::size_t> lattice_cap;
  bool drop_smallest = false;
  std::optional<std::uint32_t> fit_min_n;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its values");
  cmd->add_option("--seed", o.seed, "Root seed (u64)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--n-grid", o.n_grid, "Sample sizes, e.g. 16,32,64")->delimiter(',');
  cmd->add_option("--k", o.k_values, "Debias orders, e.g. 1,2")->delimiter(',');
  cmd->add_option("--fit-min-n", o.fit_min_n, "Ignore n below this in slope fits");
  cmd->add_flag("--drop-smallest", o.drop_smallest, "Drop the smallest n from slope fits");
  cmd->add_option("--lattice-cap", o.lattice_cap, "Maximum lattice size for exact computations");
}

void add_discrete_setting(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--q", o.q, "Prior probability P(X = 1)");
  cmd->add_option("--y-star", o.y_star, "Observation y*");
  cmd->add_option("--noise-var", o.noise_var, "Gaussian channel variance");
}

debias::ExperimentConfig build_config(debias::ExperimentKind kind, const Overrides& o) {
  auto cfg = o.config_path.empty() ? debias::default_config(kind) : debias::load_config(o.config_path, kind);
  if (o.seed) cfg.root_seed = *o.seed;
  if (o.out) cfg.output_path = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.n_grid.empty()) cfg.n_grid = o.n_grid;
  if (!o.k_values.empty()) cfg.k_values = o.k_values;
  if (o.q) cfg.q = *o.q;
  if (o.y_star) cfg.y_star = *o.y_star;
  if (o.noise_var) cfg.noise_var = *o.noise_var;
  if (o.threshold) cfg.threshold = *o.threshold;
  if (o.map) {
    if (*o.map == "bayes") cfg.map = debias::MapKind::bayes;
    else if (*o.map == "linear") cfg.map = debias::MapKind::linear;
    else throw debias::ConfigError("--map must be bayes or linear");
  }
  if (!o.m_values.empty()) cfg.m_values = o.m_values;
  if (!o.prior.empty()) cfg.prior = o.prior;
  if (!o.ell.empty()) cfg.ell = o.ell;
  if (!o.weights.empty()) cfg.weights_override = o.weights;
  if (o.n_rule) cfg.N_rule = debias::parse_n_rule(*o.n_rule);
  if (o.guard) {
    if (*o.guard == "abort") cfg.guard = debias::GuardMode::abort;
    else if (*o.guard == "warn") cfg.guard = debias::GuardMode::warn;
    else throw debias::ConfigError("--guard must be abort or warn");
  }
  if (o.n_cap) cfg.N_cap = *o.n_cap;
  if (o.samples) cfg.rejection_samples = *o.samples;
  if (o.inner_reps) cfg.inner_reps = *o.inner_reps;
  if (o.cases) cfg.identity_cases = *o.cases;
  if (o.chain_cases) cfg.chain_cases = *o.chain_cases;
  if (o.lattice_cap) cfg.limits.lattice_cap = *o.lattice_cap;
  if (o.drop_smallest) cfg.drop_smallest = true;
  if (o.fit_min_n) cfg.fit_min_n = *o.fit_min_n;
  cfg.experiment = kind;
  debias::validate(cfg);
  return cfg;
}

fs::path prepare_output(const debias::ExperimentConfig& cfg) {
  fs::path dir(cfg.output_path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw debias::ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_manifest(const fs::path& path, const debias::ExperimentConfig& cfg, double wall_time, json extra) {
  json manifest = {
      {"tool", "debias"},
      {"version", debias::library_version()},
      {"experiment", debias::to_string(cfg.experiment)},
      {"seed", cfg.root_seed},
      {"wall_time_s", wall_time},
      {"config", debias::to_json(cfg)},
  };
  for (auto& [key, value] : extra.items()) manifest[key] = value;
  std::ofstream out(path);
  if (!out) throw debias::ConfigError("cannot write '" + path.string() + "'");
  out << manifest.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void print_fits(const json& fits) {
  for (const auto& f : fits) {
    std::cout << "  " << f["column"].get<std::string>() << " k=" << f["k"].get<std::string>() << ": ";
    if (f["slope"].is_null()) std::cout << "no fit (" << f["error"].get<std::string>() << ")\n";
    else std::cout << "slope " << f["slope"].get<double>() << " (r^2 " << f["r_squared"].get<double>() << ")\n";
  }
}

int run_binary_exact(const Overrides& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = build_config(debias::ExperimentKind::binary_exact, o);
  const auto rows = debias::run_binary_exact(cfg);
  const auto table = debias::binary_exact_table(rows);
  const auto dir = prepare_output(cfg);
  debias::write_csv((dir / "binary_exact.csv").string(), table);

  json fits = debias::slope_fits(table, "abs_bias", cfg.drop_smallest, cfg.fit_min_n);
  for (auto& f : debias::slope_fits(table, "variance", cfg.drop_smallest, cfg.fit_min_n)) fits.push_back(f);
  write_manifest(dir / "binary_exact_manifest.json", cfg, seconds_since(start),
                 {{"status", "ok"},
                  {"likelihood_ratio", debias::binary_likelihood_ratio(cfg.y_star, cfg.noise_var)},
                  {"slope_fits", fits}});
  std::cout << "binary-exact: " << rows.size() << " rows -> " << (dir / "binary_exact.csv").string() << "\n";
  print_fits(fits);
  return kExitOk;
}

int run_mixture_mc(const Overrides& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = build_config(debias::ExperimentKind::mixture_mc, o);
  const auto dir = prepare_output(cfg);
  const auto report = debias::run_mixture_mc(cfg);
  const auto table = debias::mixture_table(report.rows);
  debias::write_csv((dir / "mixture_mc.csv").string(), table);

  json fits = debias::slope_fits(table, "est_bias", cfg.drop_smallest, cfg.fit_min_n, true);
  for (auto& f : debias::slope_fits(table, "est_variance", cfg.drop_smallest, cfg.fit_min_n)) fits.push_back(f);
  json capped = json::array();
  for (const auto& r : report.rows) {
    if (r.capped) {
      capped.push_back({{"n", r.n}, {"k", r.k}, {"effective_N", r.N},
                        {"requested_N", debias::replications_for(cfg.N_rule, r.n, r.k)}});
    }
  }
  const std::string variance_mode =
      cfg.inner_reps == 1 ? "single-chain realization"
                          : "mean of " + std::to_string(cfg.inner_reps) + " chains per dataset";
  write_manifest(dir / "mixture_mc_manifest.json", cfg, seconds_since(start),
                 {{"status", report.aborted ? "guard_failure" : "ok"},
                  {"variance_mode", variance_mode},
                  {"N_cap_hits", capped},
                  {"guard_violations", report.guard_violations},
                  {"slope_fits", fits}});
  std::cout << "mixture-mc: " << report.rows.size() << " rows -> " << (dir / "mixture_mc.csv").string() << "\n";
  print_fits(fits);
  for (const auto& v : report.guard_violations) std::cerr << "guard: " << v << "\n";
  if (report.aborted) {
    std::cerr << "mixture-mc: aborted, Monte Carlo noise is not small relative to the bias (raise N)\n";
    return kExitGuard;
  }
  return kExitOk;
}

int run_identity_check(const Overrides& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = build_config(debias::ExperimentKind::identity_check, o);
  const auto report = debias::run_identity_check(cfg);
  const auto dir = prepare_output(cfg);
  debias::write_csv((dir / "identity_check.csv").string(), debias::identity_table(report));
  write_manifest(dir / "identity_check_manifest.json", cfg, seconds_since(start),
                 {{"status", report.pass ? "pass" : "fail"},
                  {"max_discrepancy", report.max_discrepancy},
                  {"tolerance", debias::kIdentityTolerance},
                  {"cases", report.cases.size()}});
  std::cout << "identity-check: " << (report.pass ? "PASS" : "FAIL") << " over " << report.cases.size()
            << " cases, max discrepancy " << debias::format_real(report.max_discrepancy) << "\n";
  return report.pass ? kExitOk : kExitGuard;
}

int run_rejection_demo(const Overrides& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = build_config(debias::ExperimentKind::rejection_demo, o);
  const auto rows = debias::run_rejection_demo(cfg);
  const auto dir = prepare_output(cfg);
  debias::write_csv((dir / "rejection_demo.csv").string(), debias::rejection_table(rows));
  write_manifest(dir / "rejection_demo_manifest.json", cfg, seconds_since(start),
                 {{"status", "ok"}, {"clamp_policy", "clamp_renormalize"}});
  for (const auto& r : rows) {
    if (r.index != 0) continue;
    std::cout << "rejection-demo n=" << r.n << " k=" << r.k << ": M=" << r.M
              << " expected acceptance " << r.expected_acceptance << ", observed " << r.observed_acceptance
              << ", clamped mass " << r.clamped_mass << "\n";
  }
  return kExitOk;
}

struct FitOptions {
  std::string csv;
  std::string column = "abs_bias";
  bool absolute = false;
};

int run_fit_slope(const FitOptions& f, const Overrides& o) {
  const auto table = debias::read_csv(f.csv);
  const auto fits = debias::slope_fits(table, f.column, o.drop_smallest, o.fit_min_n.value_or(0), f.absolute);
  std::cout << fits.dump(2) << "\n";
  if (o.out) {
    fs::create_directories(*o.out);
    std::ofstream(fs::path(*o.out) / "fit_slope.json") << fits.dump(2) << '\n';
  }
  for (const auto& fit : fits) {
    if (fit["slope"].is_null()) return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Debiased posterior approximation experiments"};
  app.require_subcommand(1);

  Overrides o;
  FitOptions fit;

  auto* binary = app.add_subcommand("binary-exact", "Exact bias and variance, binary prior");
  add_common(binary, o);
  add_discrete_setting(binary, o);
  binary->add_option("--map", o.map, "bayes or linear");

  auto* mixture = app.add_subcommand("mixture-mc", "Monte Carlo bias and variance, Gaussian mixture prior");
  add_common(mixture, o);
  mixture->add_option("--y-star", o.y_star, "Observation y*");
  mixture->add_option("--noise-var", o.noise_var, "Gaussian channel variance");
  mixture->add_option("--threshold", o.threshold, "Set A = {x >= threshold}");
  mixture->add_option("--N-rule", o.n_rule, "auto, n_pow3, n_pow4 or fixed:<N>");
  mixture->add_option("--N-cap", o.n_cap, "Upper bound on replications per grid point");
  mixture->add_option("--inner-reps", o.inner_reps, "Chains averaged per dataset");
  mixture->add_option("--guard", o.guard, "abort or warn when std_error > |bias|/3");

  auto* identity = app.add_subcommand("identity-check", "Exhaustive check of the expectation identity");
  add_common(identity, o);
  identity->add_option("--m", o.m_values, "Support sizes, e.g. 2,3")->delimiter(',');
  identity->add_option("--cases", o.cases, "Random (g, q) per (n, m)");
  identity->add_option("--chain-cases", o.chain_cases, "Cases also checked by chain enumeration");
  identity->add_option("--weights", o.weights, "Override debias weights (negative control)")->delimiter(',');

  auto* rejection = app.add_subcommand("rejection-demo", "Rejection sampling from the debiased posterior");
  add_common(rejection, o);
  add_discrete_setting(rejection, o);
  rejection->add_option("--prior", o.prior, "Discrete prior vector")->delimiter(',');
  rejection->add_option("--ell", o.ell, "Discrete likelihood vector")->delimiter(',');
  rejection->add_option("--samples", o.samples, "Accepted draws per (n, k)");

  auto* fitcmd = app.add_subcommand("fit-slope", "Fit log-log slopes of a CSV column against n");
  fitcmd->add_option("csv", fit.csv, "Input CSV with an 'n' column")->required()->check(CLI::ExistingFile);
  fitcmd->add_option("--column", fit.column, "Value column");
  fitcmd->add_flag("--abs", fit.absolute, "Fit |value|");
  fitcmd->add_option("--config", o.config_path, "Unused; accepted for uniformity");
  fitcmd->add_option("--seed", o.seed, "Unused; accepted for uniformity");
  fitcmd->add_option("--threads", o.threads, "Unused; accepted for uniformity");
  fitcmd->add_option("--out", o.out, "Also write fit_slope.json here");
  fitcmd->add_option("--fit-min-n", o.fit_min_n, "Ignore n below this");
  fitcmd->add_flag("--drop-smallest", o.drop_smallest, "Drop the smallest n");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*binary) return run_binary_exact(o);
    if (*mixture) return run_mixture_mc(o);
    if (*identity) return run_identity_check(o);
    if (*rejection) return run_rejection_demo(o);
    if (*fitcmd) return run_fit_slope(fit, o);
  } catch (const debias::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const debias::CapExceeded& e) {
    std::cerr << "cap exceeded: " << e.what() << "\n";
    return kExitCap;
  } catch (const debias::GuardFailure& e) {
    std::cerr << "guard failure: " << e.what() << "\n";
    return kExitGuard;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

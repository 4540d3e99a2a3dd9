#pragma once

// Experiment harness: configuration, the four experiment runners, log-log
// slope fitting, and CSV / JSON emission.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "debias/bayes_maps.hpp"
#include "debias/bernstein.hpp"
#include "debias/rejection.hpp"
#include "debias/resample_mc.hpp"

namespace debias {

enum class ExperimentKind { binary_exact, mixture_mc, identity_check, rejection_demo };
enum class NRuleKind { automatic, n_pow3, n_pow4, fixed };
enum class GuardMode { abort, warn };
enum class MapKind { bayes, linear };

struct NRule {
  NRuleKind kind = NRuleKind::automatic;
  std::uint64_t fixed_N = 0;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::binary_exact;
  std::vector<std::uint32_t> n_grid;
  std::vector<int> k_values;
  std::uint64_t root_seed = 20250101;
  std::string output_path = "results";
  unsigned threads = 1;

  // setting
  double q = 0.4;
  double y_star = 2.0;
  double noise_var = 1.0;
  double threshold = 0.5;
  MapKind map = MapKind::bayes;
  std::vector<GaussianComponent> mixture{{0.5, 0.0, 1.0}, {0.5, 1.0, 1.0}};
  std::vector<std::size_t> m_values{2, 3};
  std::vector<double> prior;  // discrete prior for rejection_demo; empty = binary from q
  std::vector<double> ell;    // discrete likelihoods; empty = binary Gaussian from y_star

  // mc
  NRule N_rule;
  std::uint64_t N_cap = 10'000'000;
  unsigned inner_reps = 1;
  GuardMode guard = GuardMode::abort;

  // identity
  std::size_t identity_cases = 50;
  std::size_t chain_cases = 5;
  std::uint64_t chain_node_budget = 2'000'000;
  std::vector<double> weights_override;

  // rejection
  std::uint64_t rejection_samples = 100'000;
  std::uint64_t max_attempts = kDefaultMaxAttempts;

  // fit
  bool drop_smallest = false;
  std::uint32_t fit_min_n = 0;

  OperatorLimits limits;
};

/// Defaults for each experiment (grids, settings, N rule).
ExperimentConfig default_config(ExperimentKind kind);

/// Throws ConfigError describing the first violated constraint.
void validate(const ExperimentConfig& cfg);

/// Applies the keys present in `j` on top of `cfg`. Unknown keys are errors.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> expected = {});
nlohmann::json to_json(const ExperimentConfig& cfg);

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment(const std::string& name);
NRule parse_n_rule(const std::string& text);
std::string to_string(const NRule& rule);

/// Number of outer replications for (n, k) before the cap.
std::uint64_t replications_for(const NRule& rule, std::uint32_t n, int k);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points_used = 0;
};

/// OLS of log(value) on log(n). Throws DomainError for a non-positive value
/// or fewer than two points (after the optional drop of the smallest n).
SlopeFit fit_slope(std::span<const std::pair<double, double>> points, bool drop_smallest = false);

// ---- binary exact ------------------------------------------------------------

struct BinaryExactRow {
  std::uint32_t n = 0;
  int k = 0;
  double abs_bias = 0.0;
  double variance = 0.0;
};

/// Likelihood ratio ell(1) / ell(0) of the Gaussian channel at y*.
double binary_likelihood_ratio(double y_star, double noise_var);

/// Exact |bias| and variance of the debiased binary posterior for each (n, k).
std::vector<BinaryExactRow> run_binary_exact(const ExperimentConfig& cfg);

// ---- mixture Monte Carlo -------------------------------------------------------

struct MixtureRow {
  std::uint32_t n = 0;
  int k = 0;
  std::uint64_t N = 0;
  unsigned inner_reps = 1;
  double est_mean = 0.0;
  double true_value = 0.0;
  double est_bias = 0.0;
  double est_variance = 0.0;
  double std_error = 0.0;
  bool capped = false;
  double wall_time = 0.0;
};

struct MixtureReport {
  std::vector<MixtureRow> rows;
  std::vector<std::string> guard_violations;
  bool aborted = false;
};

PriorSampler mixture_prior_sampler(const GaussianMixture& prior);

/// Runs outer_mc at every (k, n). In GuardMode::abort the run stops at the
/// first point whose std_error exceeds |bias| / 3 and sets `aborted`.
MixtureReport run_mixture_mc(const ExperimentConfig& cfg);

// ---- identity check ------------------------------------------------------------

struct IdentityCase {
  std::uint32_t n = 0;
  std::size_t m = 0;
  int k = 0;
  std::size_t case_index = 0;
  std::string route;  // "lattice" or "chain"
  double expected = 0.0;
  double enumerated = 0.0;
  double discrepancy = 0.0;
};

struct IdentityReport {
  std::vector<IdentityCase> cases;
  double max_discrepancy = 0.0;
  bool pass = false;
};

inline constexpr double kIdentityTolerance = 1e-10;

/// Enumerates datasets (and resampling chains, when small enough) and
/// compares the expectation of the debiased estimator with C_{n,k} g(q).
IdentityReport run_identity_check(const ExperimentConfig& cfg);

// ---- rejection demo ------------------------------------------------------------

struct RejectionRow {
  std::uint32_t n = 0;
  int k = 0;
  std::size_t index = 0;
  std::uint32_t count = 0;
  double proposal = 0.0;
  double target = 0.0;
  double clamped_target = 0.0;
  double empirical = 0.0;
  double M = 0.0;
  double expected_acceptance = 0.0;
  double observed_acceptance = 0.0;
  double clamped_mass = 0.0;
};

std::vector<RejectionRow> run_rejection_demo(const ExperimentConfig& cfg);

// ---- output --------------------------------------------------------------------

/// 17 significant digits, enough to re-parse to the same double.
std::string format_real(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable binary_exact_table(const std::vector<BinaryExactRow>& rows);
CsvTable mixture_table(const std::vector<MixtureRow>& rows);
CsvTable identity_table(const IdentityReport& report);
CsvTable rejection_table(const std::vector<RejectionRow>& rows);

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

/// Slope fits of `value_column` against n, one per distinct k.
nlohmann::json slope_fits(const CsvTable& table, const std::string& value_column, bool drop_smallest,
                          std::uint32_t min_n, bool absolute = false);

std::string library_version();

}  // namespace debias

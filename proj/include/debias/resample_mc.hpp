#pragma once

// Recursive resampling chains for black-box posterior maps, single-draw
// debiased estimators built on them, and the outer Monte Carlo loop that
// averages those estimators over fresh datasets.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "debias/bayes_maps.hpp"
#include "debias/bernstein.hpp"
#include "debias/rng.hpp"
#include "debias/simplex.hpp"

namespace debias {

struct SeedLineage {
  std::uint64_t root = 0;
  /// stage_seeds[i] drives the draw of stage i + 2.
  std::vector<std::uint64_t> stage_seeds;
};

/// stages[0] is the data; stages[l] holds n draws with replacement from stages[l-1].
struct ResampleChain {
  std::vector<WeightedSampleSet> stages;
  SeedLineage lineage;
};

ResampleChain build_chain(const WeightedSampleSet& data, int k, std::uint64_t seed);

/// Maps an empirical prior to a real number, e.g. a plug-in posterior probability.
/// Must be pure and thread-safe.
using SampleFunctional = std::function<double(const WeightedSampleSet&)>;

/// sum_{j<k} w_j * functional(stages[j]).
double debiased_realization(const ResampleChain& chain, const SampleFunctional& functional, int k);

/// Signed-mixture estimate of E[h(X) | y*]: sum_j w_j * plugin_expectation(stages[j]).
double debiased_expectation(const WeightedSampleSet& data, const BoundedLikelihood& ell,
                            const PointFunction& h, int k, std::uint64_t seed);

struct MCConfig {
  std::uint32_t n = 1;
  int k = 1;
  std::uint64_t N = 1;
  std::uint64_t root_seed = 0;
  unsigned inner_reps = 1;
};

struct MCResult {
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  std::uint64_t N = 0;
  double wall_time = 0.0;  // seconds
};

/// Draws a dataset of size n. Must only consume randomness from `rng`.
using PriorSampler = std::function<WeightedSampleSet(std::uint32_t n, SplitMix64& rng)>;

/// Replicates this many draws per work unit; fixed so the reduction order
/// never depends on the thread count.
inline constexpr std::uint64_t kReplicateBlock = 1024;

/// N independent datasets, one debiased realization each (averaged over
/// inner_reps chains). Replicate r uses stream derive_seed(root_seed, r), so
/// results are bit-identical for any thread count. Throws DomainError on
/// the first non-finite realization.
MCResult outer_mc(const PriorSampler& prior_sampler, const SampleFunctional& functional,
                  const MCConfig& cfg, unsigned threads = 1);

/// Counts-level functional: value of the map at the empirical prior T/n on a
/// finite support.
using CountsFunctional = std::function<double(const CountsVector&)>;

/// Exact expectation of the debiased realization over data T ~ Mult(n, q) and
/// every chain outcome, by enumerating the resampling tree (cost ~ L^k for L
/// lattice points). Independent of the transfer-matrix route.
double exact_chain_expectation(const ProbVector& q, std::uint32_t n, const DebiasWeights& weights,
                               const CountsFunctional& functional,
                               std::size_t lattice_cap = kDefaultLatticeCap);

}  // namespace debias

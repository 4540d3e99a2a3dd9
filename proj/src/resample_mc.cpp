#include "debias/resample_mc.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "debias/errors.hpp"
#include "parallel.hpp"

namespace debias {

namespace {

struct RunningStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  // Chan et al. pairwise update.
  void merge(const RunningStats& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double total = static_cast<double>(count + other.count);
    const double delta = other.mean - mean;
    mean += delta * static_cast<double>(other.count) / total;
    m2 += other.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(other.count) / total;
    count += other.count;
  }
};

WeightedSampleSet resample(const WeightedSampleSet& from, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, from.size() - 1);
  std::vector<double> points(from.size());
  for (auto& x : points) x = from[pick(rng)];
  return WeightedSampleSet(std::move(points));
}

void require_k(int k) {
  if (k < 1 || k > kMaxDebiasOrder) throw RangeError("debias order k=" + std::to_string(k) + " out of range");
}

}  // namespace

ResampleChain build_chain(const WeightedSampleSet& data, int k, std::uint64_t seed) {
  require_k(k);
  ResampleChain chain;
  chain.lineage.root = seed;
  chain.stages.reserve(k);
  chain.stages.push_back(data);
  for (int stage = 2; stage <= k; ++stage) {
    const std::uint64_t stage_seed = derive_seed(seed, static_cast<std::uint64_t>(stage));
    chain.lineage.stage_seeds.push_back(stage_seed);
    chain.stages.push_back(resample(chain.stages.back(), stage_seed));
  }
  return chain;
}

double debiased_realization(const ResampleChain& chain, const SampleFunctional& functional, int k) {
  const auto w = debias_weights(k);
  if (chain.stages.size() < static_cast<std::size_t>(k)) {
    throw DomainError("debiased_realization: chain has fewer than k stages");
  }
  double total = 0.0;
  for (int j = 0; j < k; ++j) total += w.weights[j] * functional(chain.stages[j]);
  return total;
}

double debiased_expectation(const WeightedSampleSet& data, const BoundedLikelihood& ell,
                            const PointFunction& h, int k, std::uint64_t seed) {
  const auto chain = build_chain(data, k, seed);
  return debiased_realization(
      chain, [&](const WeightedSampleSet& s) { return plugin_expectation(s, ell, h); }, k);
}

MCResult outer_mc(const PriorSampler& prior_sampler, const SampleFunctional& functional,
                  const MCConfig& cfg, unsigned threads) {
  if (cfg.N < 1 || cfg.n < 1) throw DomainError("outer_mc: need N >= 1 and n >= 1");
  require_k(cfg.k);
  if (cfg.inner_reps < 1) throw DomainError("outer_mc: inner_reps must be >= 1");
  const auto weights = debias_weights(cfg.k);

  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t blocks = (cfg.N + kReplicateBlock - 1) / kReplicateBlock;
  std::vector<RunningStats> block_stats(blocks);

  detail::parallel_for(blocks, threads, [&](std::size_t b) {
    RunningStats stats;
    const std::uint64_t first = b * kReplicateBlock;
    const std::uint64_t last = std::min(cfg.N, first + kReplicateBlock);
    for (std::uint64_t r = first; r < last; ++r) {
      SplitMix64 rng(derive_seed(cfg.root_seed, r));
      const auto data = prior_sampler(cfg.n, rng);
      if (data.size() != cfg.n) throw DomainError("outer_mc: prior sampler returned wrong size");
      double realization = 0.0;
      for (unsigned i = 0; i < cfg.inner_reps; ++i) {
        const auto chain = build_chain(data, cfg.k, rng());
        double value = 0.0;
        for (int j = 0; j < cfg.k; ++j) value += weights.weights[j] * functional(chain.stages[j]);
        realization += value;
      }
      realization /= cfg.inner_reps;
      if (!std::isfinite(realization)) {
        throw DomainError("outer_mc: non-finite realization at replicate " + std::to_string(r));
      }
      stats.push(realization);
    }
    block_stats[b] = stats;
  });

  RunningStats total;
  for (const auto& s : block_stats) total.merge(s);

  MCResult result;
  result.N = cfg.N;
  result.mean = total.mean;
  result.variance = cfg.N > 1 ? std::max(0.0, total.m2 / static_cast<double>(cfg.N - 1)) : 0.0;
  result.std_error = std::sqrt(result.variance / static_cast<double>(cfg.N));
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double exact_chain_expectation(const ProbVector& q, std::uint32_t n, const DebiasWeights& weights,
                               const CountsFunctional& functional, std::size_t lattice_cap) {
  if (weights.weights.empty()) throw RangeError("exact_chain_expectation: empty weights");
  const auto lattice = enumerate_lattice(n, q.size(), lattice_cap);
  const MultinomialPmf pmf(n);
  const std::size_t size = lattice.size();
  const std::size_t depth = weights.weights.size();

  std::vector<double> value(size);
  for (std::size_t i = 0; i < size; ++i) value[i] = functional(lattice.counts(i));

  // Children of a stage with counts T are Mult(n, T/n); rows built on demand.
  std::vector<std::optional<std::vector<double>>> children(size);
  auto child_pmf = [&](std::size_t parent) -> const std::vector<double>& {
    if (!children[parent]) {
      auto mu = lattice.point(parent);
      std::vector<double> prior(mu.size());
      for (std::size_t j = 0; j < mu.size(); ++j) prior[j] = static_cast<double>(mu[j]) / n;
      children[parent] = pmf.over_lattice(lattice, prior);
    }
    return *children[parent];
  };

  // Depth-first walk; prob is the probability of the path down to `node`.
  std::function<double(std::size_t, std::size_t, double)> visit =
      [&](std::size_t level, std::size_t node, double prob) -> double {
    double total = prob * weights.weights[level] * value[node];
    if (level + 1 < depth) {
      const auto& next = child_pmf(node);
      for (std::size_t c = 0; c < size; ++c) {
        if (next[c] != 0.0) total += visit(level + 1, c, prob * next[c]);
      }
    }
    return total;
  };

  const auto data_pmf = pmf.over_lattice(lattice, q.values());
  double expectation = 0.0;
  for (std::size_t t = 0; t < size; ++t) {
    if (data_pmf[t] != 0.0) expectation += visit(0, t, data_pmf[t]);
  }
  return expectation;
}

}  // namespace debias

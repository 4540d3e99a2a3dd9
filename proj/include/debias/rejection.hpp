#pragma once

// Rejection sampling from the debiased discrete posterior with the plug-in
// posterior as proposal.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "debias/errors.hpp"
#include "debias/simplex.hpp"

namespace debias {

inline constexpr std::uint64_t kDefaultMaxAttempts = 1'000'000;

enum class ClampPolicy { clamp_renormalize };

struct RejectionSpec {
  ProbVector proposal;
  SignedProbVector raw_target;
  ProbVector target;             // raw_target clamped at 0 and renormalized
  ClampPolicy clamp_policy = ClampPolicy::clamp_renormalize;
  double clamped_mass = 0.0;     // total negative mass removed by clamping
  double M = 1.0;                // max_j target_j / proposal_j
  std::vector<double> proposal_cdf;
};

/// Throws SupportError if the clamped target has mass where the proposal has none.
RejectionSpec make_rejection_spec(const ProbVector& proposal, const SignedProbVector& target);

struct RejectionDraw {
  std::size_t index = 0;
  std::uint64_t attempts = 0;
};

/// One accepted draw using the caller's generator.
template <class URBG>
RejectionDraw rejection_draw(const RejectionSpec& spec, URBG& rng,
                             std::uint64_t max_attempts = kDefaultMaxAttempts) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> height(0.0, spec.M);
  const auto& cdf = spec.proposal_cdf;
  for (std::uint64_t attempt = 1; attempt <= max_attempts; ++attempt) {
    const double u0 = unit(rng);
    std::size_t x = 0;
    while (x + 1 < cdf.size() && u0 >= cdf[x]) ++x;
    if (spec.proposal[x] == 0.0) continue;  // rounding at the top of the cdf
    const double u = height(rng);
    if (u < spec.target[x] / spec.proposal[x]) return {x, attempt};
  }
  throw IterationCap("rejection sampler exceeded " + std::to_string(max_attempts) + " attempts");
}

/// Deterministic in `seed`.
std::size_t rejection_sample(const RejectionSpec& spec, std::uint64_t seed,
                             std::uint64_t max_attempts = kDefaultMaxAttempts);

/// 1 / M.
double expected_acceptance_rate(const RejectionSpec& spec);

}  // namespace debias

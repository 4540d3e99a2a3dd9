#include "debias/rejection.hpp"

#include <algorithm>

#include "debias/rng.hpp"

namespace debias {

namespace {

ProbVector clamp_renormalize(const SignedProbVector& raw, double& removed) {
  std::vector<double> clamped(raw.size());
  double kept = 0.0;
  removed = 0.0;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    if (raw[j] > 0.0) {
      clamped[j] = raw[j];
      kept += raw[j];
    } else {
      removed -= raw[j];
    }
  }
  for (double& v : clamped) v /= kept;
  return ProbVector(std::move(clamped));
}

}  // namespace

RejectionSpec make_rejection_spec(const ProbVector& proposal, const SignedProbVector& target) {
  if (proposal.size() != target.size()) throw DomainError("make_rejection_spec: dimension mismatch");
  double removed = 0.0;
  ProbVector clamped = clamp_renormalize(target, removed);

  double bound = 0.0;
  for (std::size_t j = 0; j < proposal.size(); ++j) {
    if (clamped[j] == 0.0) continue;
    if (proposal[j] == 0.0) {
      throw SupportError("make_rejection_spec: target has mass at index " + std::to_string(j) +
                         " where the proposal has none");
    }
    bound = std::max(bound, clamped[j] / proposal[j]);
  }

  std::vector<double> cdf(proposal.size());
  double running = 0.0;
  for (std::size_t j = 0; j < proposal.size(); ++j) {
    running += proposal[j];
    cdf[j] = running;
  }
  cdf.back() = 1.0;

  return RejectionSpec{proposal, target, std::move(clamped), ClampPolicy::clamp_renormalize,
                       removed, bound, std::move(cdf)};
}

std::size_t rejection_sample(const RejectionSpec& spec, std::uint64_t seed, std::uint64_t max_attempts) {
  SplitMix64 rng(seed);
  return rejection_draw(spec, rng, max_attempts).index;
}

double expected_acceptance_rate(const RejectionSpec& spec) { return 1.0 / spec.M; }

}  // namespace debias

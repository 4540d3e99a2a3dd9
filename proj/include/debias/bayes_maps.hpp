#pragma once

// Likelihoods, the Bayes prior-to-posterior maps, and closed-form posteriors
// used as ground truth by the experiments.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "debias/bernstein.hpp"
#include "debias/simplex.hpp"

namespace debias {

struct LikelihoodBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// x -> density of the fixed observation y* given x, held in log space.
/// The callable must be thread-safe.
class BoundedLikelihood {
 public:
  using LogDensity = std::function<double(double)>;

  explicit BoundedLikelihood(LogDensity log_density, std::optional<LikelihoodBounds> bounds = {});

  /// Throws DomainError if bounds are set and the value falls outside them.
  double log_eval(double x) const;
  double eval(double x) const;

  const std::optional<LikelihoodBounds>& bounds() const { return bounds_; }

 private:
  LogDensity log_density_;
  std::optional<LikelihoodBounds> bounds_;
  double log_lower_ = 0.0;
  double log_upper_ = 0.0;
};

/// Normal density of y* with mean x. No bounds: the density tends to zero
/// for |x| -> infinity.
BoundedLikelihood gaussian_likelihood(double y_star, double variance);

/// g(q)_s = ell_s q_s / sum_j ell_j q_j on a finite support.
class DiscreteBayesMap {
 public:
  explicit DiscreteBayesMap(std::vector<double> ell);

  std::size_t size() const { return ell_.size(); }
  std::span<const double> likelihoods() const { return ell_; }

  /// Throws DegenerateError if the normalizer is not positive and finite.
  double component(std::size_t s, std::span<const double> q) const;
  ProbVector operator()(const ProbVector& q) const;

  /// The map's s-th coordinate as a SimplexFunction (copies ell).
  SimplexFunction component_function(std::size_t s) const;

 private:
  std::vector<double> ell_;
};

ProbVector discrete_bayes(const DiscreteBayesMap& map, const ProbVector& q);

/// Sample locations of an empirical prior; n >= 1, all finite.
class WeightedSampleSet {
 public:
  explicit WeightedSampleSet(std::vector<double> points);

  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  std::span<const double> points() const { return points_; }

 private:
  std::vector<double> points_;
};

using PointPredicate = std::function<bool(double)>;
using PointFunction = std::function<double(double)>;

/// sum_i ell(X_i) 1[X_i in A] / sum_i ell(X_i).
double plugin_posterior_prob(const WeightedSampleSet& samples, const BoundedLikelihood& ell,
                             const PointPredicate& in_set);

/// sum_i ell(X_i) h(X_i) / sum_i ell(X_i).
double plugin_expectation(const WeightedSampleSet& samples, const BoundedLikelihood& ell,
                          const PointFunction& h);

struct GaussianComponent {
  double weight = 1.0;
  double mean = 0.0;
  double variance = 1.0;
};

/// Finite Gaussian mixture prior; weights are normalized on construction.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<GaussianComponent> components);

  std::span<const GaussianComponent> components() const { return components_; }
  double density(double x) const;

 private:
  std::vector<GaussianComponent> components_;
};

/// P(X >= threshold | Y = y*) for X ~ mixture, Y = X + N(0, noise_var).
double mixture_true_posterior_prob(const GaussianMixture& prior, double noise_var, double y_star,
                                   double threshold);

}  // namespace debias

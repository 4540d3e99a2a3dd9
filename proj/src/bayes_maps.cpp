#include "debias/bayes_maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "debias/errors.hpp"

namespace debias {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

// Weights exp(log ell_i - max) for every sample; returns the shifted weights.
std::vector<double> shifted_weights(const WeightedSampleSet& samples, const BoundedLikelihood& ell) {
  std::vector<double> w(samples.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    w[i] = ell.log_eval(samples[i]);
    if (std::isnan(w[i])) throw DomainError("likelihood returned NaN");
    peak = std::max(peak, w[i]);
  }
  if (!std::isfinite(peak)) {
    throw DegenerateError("plug-in posterior: every likelihood value is zero or infinite");
  }
  for (double& v : w) v = std::exp(v - peak);
  return w;
}

double upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

}  // namespace

BoundedLikelihood::BoundedLikelihood(LogDensity log_density, std::optional<LikelihoodBounds> bounds)
    : log_density_(std::move(log_density)), bounds_(bounds) {
  if (!log_density_) throw DomainError("BoundedLikelihood: empty density");
  if (bounds_) {
    if (!(bounds_->lower > 0.0) || bounds_->lower > bounds_->upper) {
      throw DomainError("BoundedLikelihood: need 0 < L1 <= L2");
    }
    log_lower_ = std::log(bounds_->lower);
    log_upper_ = std::log(bounds_->upper);
  }
}

double BoundedLikelihood::log_eval(double x) const {
  const double v = log_density_(x);
  if (bounds_ && (v < log_lower_ || v > log_upper_)) {
    throw DomainError("likelihood value outside its declared bounds at x=" + std::to_string(x));
  }
  return v;
}

double BoundedLikelihood::eval(double x) const { return std::exp(log_eval(x)); }

BoundedLikelihood gaussian_likelihood(double y_star, double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw DomainError("gaussian_likelihood: variance must be positive");
  }
  const double log_norm = -0.5 * (kLogTwoPi + std::log(variance));
  return BoundedLikelihood([=](double x) {
    const double d = y_star - x;
    return log_norm - d * d / (2.0 * variance);
  });
}

DiscreteBayesMap::DiscreteBayesMap(std::vector<double> ell) : ell_(std::move(ell)) {
  if (ell_.empty()) throw DomainError("DiscreteBayesMap: empty support");
  for (double v : ell_) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("DiscreteBayesMap: ell must be positive");
  }
}

double DiscreteBayesMap::component(std::size_t s, std::span<const double> q) const {
  if (q.size() != ell_.size()) throw DomainError("DiscreteBayesMap: dimension mismatch");
  double denom = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) denom += ell_[j] * q[j];
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw DegenerateError("DiscreteBayesMap: normalizer is not positive");
  }
  return ell_[s] * q[s] / denom;
}

ProbVector DiscreteBayesMap::operator()(const ProbVector& q) const {
  if (q.size() != ell_.size()) throw DomainError("DiscreteBayesMap: dimension mismatch");
  double denom = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) denom += ell_[j] * q[j];
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw DegenerateError("DiscreteBayesMap: normalizer is not positive");
  }
  std::vector<double> out(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) out[j] = ell_[j] * q[j] / denom;
  // Re-normalize the rounding residue so the result passes ProbVector's check.
  double total = 0.0;
  for (double v : out) total += v;
  for (double& v : out) v /= total;
  return ProbVector(std::move(out));
}

SimplexFunction DiscreteBayesMap::component_function(std::size_t s) const {
  if (s >= ell_.size()) throw IndexError("DiscreteBayesMap: component out of range");
  return [map = *this, s](std::span<const double> q) { return map.component(s, q); };
}

ProbVector discrete_bayes(const DiscreteBayesMap& map, const ProbVector& q) { return map(q); }

WeightedSampleSet::WeightedSampleSet(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw DomainError("WeightedSampleSet: need at least one point");
  for (double x : points_) {
    if (!std::isfinite(x)) throw DomainError("WeightedSampleSet: non-finite point");
  }
}

double plugin_posterior_prob(const WeightedSampleSet& samples, const BoundedLikelihood& ell,
                             const PointPredicate& in_set) {
  const auto w = shifted_weights(samples, ell);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (in_set(samples[i])) num += w[i];
    den += w[i];
  }
  return num / den;
}

double plugin_expectation(const WeightedSampleSet& samples, const BoundedLikelihood& ell,
                          const PointFunction& h) {
  const auto w = shifted_weights(samples, ell);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    num += w[i] * h(samples[i]);
    den += w[i];
  }
  return num / den;
}

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw DomainError("GaussianMixture: no components");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0) || !(c.variance > 0.0) || !std::isfinite(c.mean)) {
      throw DomainError("GaussianMixture: weights and variances must be positive");
    }
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
}

double GaussianMixture::density(double x) const {
  double total = 0.0;
  for (const auto& c : components_) {
    const double d = x - c.mean;
    total += c.weight * std::exp(-0.5 * (kLogTwoPi + std::log(c.variance)) - d * d / (2.0 * c.variance));
  }
  return total;
}

double mixture_true_posterior_prob(const GaussianMixture& prior, double noise_var, double y_star,
                                   double threshold) {
  if (!(noise_var > 0.0)) throw DomainError("mixture_true_posterior_prob: noise_var must be positive");
  const auto comps = prior.components();
  // Component c: y* ~ N(mean_c, var_c + noise_var) marginally; conditional on
  // y*, X is normal with precision 1/var_c + 1/noise_var.
  std::vector<double> log_w(comps.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const double s2 = comps[c].variance + noise_var;
    const double d = y_star - comps[c].mean;
    log_w[c] = std::log(comps[c].weight) - 0.5 * std::log(s2) - d * d / (2.0 * s2);
    peak = std::max(peak, log_w[c]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const double w = std::exp(log_w[c] - peak);
    const double post_var = 1.0 / (1.0 / comps[c].variance + 1.0 / noise_var);
    const double post_mean = post_var * (comps[c].mean / comps[c].variance + y_star / noise_var);
    num += w * upper_tail((threshold - post_mean) / std::sqrt(post_var));
    den += w;
  }
  return num / den;
}

}  // namespace debias

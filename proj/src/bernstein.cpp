#include "debias/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "debias/errors.hpp"
#include "parallel.hpp"

namespace debias {

namespace {

void require_same_lattice(const LatticeIndex& a, const LatticeIndex& b, const char* where) {
  if (a.n() != b.n() || a.m() != b.m()) {
    throw DomainError(std::string(where) + ": lattice mismatch");
  }
}

void require_valid_k(int k) {
  if (k < 1 || k > kMaxDebiasOrder) {
    throw RangeError("debias order k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(kMaxDebiasOrder) + "]");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

LatticeFunction::LatticeFunction(LatticeIndex lattice, std::vector<double> values)
    : lattice_(std::move(lattice)), values_(std::move(values)) {
  if (values_.size() != lattice_.size()) {
    throw DomainError("LatticeFunction: one value per lattice point required");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("LatticeFunction: non-finite value");
  }
}

LatticeFunction sample_on_lattice(const SimplexFunction& g, const LatticeIndex& lattice) {
  std::vector<double> values(lattice.size());
  std::vector<double> x(lattice.m());
  const double n = lattice.n();
  for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
    auto nu = lattice.point(idx);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = nu[j] / n;
    values[idx] = g(x);
  }
  return LatticeFunction(lattice, std::move(values));
}

TransferMatrix::TransferMatrix(LatticeIndex lattice, const OperatorLimits& limits)
    : lattice_(std::move(lattice)) {
  const std::size_t size = lattice_.size();
  if (size > limits.matrix_entry_cap / size) {
    throw CapExceeded("transfer matrix for n=" + std::to_string(lattice_.n()) +
                      ", m=" + std::to_string(lattice_.m()) + " needs " + std::to_string(size) +
                      "^2 entries, cap is " + std::to_string(limits.matrix_entry_cap));
  }
  entries_.resize(size * size);
  const MultinomialPmf pmf(lattice_.n());
  const double n = lattice_.n();
  detail::parallel_for(size, limits.threads, [&](std::size_t r) {
    auto mu = lattice_.point(r);
    std::vector<double> prior(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) prior[j] = mu[j] / n;
    auto row_values = pmf.over_lattice(lattice_, prior);
    std::copy(row_values.begin(), row_values.end(), entries_.begin() + r * size);
  });
}

LatticeFunction TransferMatrix::apply(const LatticeFunction& h) const {
  require_same_lattice(lattice_, h.lattice(), "TransferMatrix::apply");
  std::vector<double> out(size());
  for (std::size_t r = 0; r < size(); ++r) out[r] = dot(row(r), h.values());
  return LatticeFunction(lattice_, std::move(out));
}

TransferMatrix transfer_matrix(std::uint32_t n, std::size_t m, const OperatorLimits& limits) {
  return TransferMatrix(enumerate_lattice(n, m, limits.lattice_cap), limits);
}

DebiasWeights debias_weights(int k) {
  require_valid_k(k);
  // Integer arithmetic first: C(20, 10) = 184756 keeps everything exact.
  std::vector<long long> binom(k + 1, 0);
  binom[0] = 1;
  for (int i = 1; i <= k; ++i) {
    for (int j = i; j >= 1; --j) binom[j] += binom[j - 1];
  }
  DebiasWeights w;
  w.k = k;
  w.weights.resize(k);
  long long total = 0;
  for (int j = 0; j < k; ++j) {
    const long long v = (j % 2 == 0 ? 1 : -1) * binom[j + 1];
    total += v;
    w.weights[j] = static_cast<double>(v);
  }
  if (total != 1) throw RangeError("debias_weights: coefficients do not sum to one");
  return w;
}

LatticeFunction iterate_operator(const LatticeFunction& g, const TransferMatrix& matrix, unsigned j) {
  LatticeFunction h = g;
  for (unsigned i = 0; i < j; ++i) h = matrix.apply(h);
  return h;
}

double bernstein_apply(const LatticeFunction& g, const ProbVector& q) {
  const auto& lattice = g.lattice();
  if (q.size() != lattice.m()) throw DomainError("bernstein_apply: dimension mismatch");
  auto weights = MultinomialPmf(lattice.n()).over_lattice(lattice, q.values());
  return dot(weights, g.values());
}

double bernstein_apply(const SimplexFunction& g, const ProbVector& q, std::uint32_t n,
                       std::size_t lattice_cap) {
  auto lattice = enumerate_lattice(n, q.size(), lattice_cap);
  return bernstein_apply(sample_on_lattice(g, lattice), q);
}

BernsteinOperator::BernsteinOperator(std::uint32_t n, std::size_t m, const OperatorLimits& limits)
    : lattice_(enumerate_lattice(n, m, limits.lattice_cap)),
      matrix_(lattice_, limits),
      pmf_(n) {}

LatticeFunction BernsteinOperator::debias(const LatticeFunction& g, const DebiasWeights& w) const {
  require_same_lattice(lattice_, g.lattice(), "debias");
  if (w.weights.empty()) throw RangeError("debias: empty weight vector");
  std::vector<double> acc(g.values().size(), 0.0);
  LatticeFunction h = g;
  for (std::size_t j = 0; j < w.weights.size(); ++j) {
    if (j > 0) h = matrix_.apply(h);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w.weights[j] * h[i];
  }
  return LatticeFunction(lattice_, std::move(acc));
}

std::vector<double> BernsteinOperator::pmf(const ProbVector& q) const {
  if (q.size() != m()) throw DomainError("pmf: dimension mismatch");
  return pmf_.over_lattice(lattice_, q.values());
}

double BernsteinOperator::apply_D(const LatticeFunction& g, const CountsVector& t,
                                  const DebiasWeights& w) const {
  if (t.n() != n() || t.size() != m()) throw DomainError("apply_D: counts do not match lattice");
  return debias(g, w).at(t);
}

double BernsteinOperator::apply_C(const LatticeFunction& g, const ProbVector& q,
                                  const DebiasWeights& w) const {
  require_same_lattice(lattice_, g.lattice(), "apply_C");
  const auto weights_q = pmf(q);
  // coefficient of B_n^j is C(k, j) (-1)^{j-1} = w[j-1]
  double result = 0.0;
  LatticeFunction h = g;
  for (std::size_t j = 1; j <= w.weights.size(); ++j) {
    if (j > 1) h = matrix_.apply(h);
    result += w.weights[j - 1] * dot(weights_q, h.values());
  }
  return result;
}

double BernsteinOperator::bias(const LatticeFunction& g, double g_at_q, const ProbVector& q,
                               int k) const {
  require_valid_k(k);
  require_same_lattice(lattice_, g.lattice(), "bias");
  const auto weights_q = pmf(q);
  // d_r = (B_n - I)^r g, tracked on the lattice and at q.
  std::vector<double> d(g.values().begin(), g.values().end());
  double d_at_q = g_at_q;
  std::vector<double> next(d.size());
  for (int r = 0; r < k; ++r) {
    for (std::size_t i = 0; i < d.size(); ++i) next[i] = dot(matrix_.row(i), d) - d[i];
    d_at_q = dot(weights_q, d) - d_at_q;
    d.swap(next);
  }
  // C g - g = -(I - B)^k g = -(-1)^k (B - I)^k g
  return (k % 2 == 0 ? -1.0 : 1.0) * d_at_q;
}

double BernsteinOperator::variance(const LatticeFunction& g, const ProbVector& q,
                                   const DebiasWeights& w) const {
  const auto dg = debias(g, w);
  const auto weights_q = pmf(q);
  const double mean = dot(weights_q, dg.values());
  double var = 0.0;
  for (std::size_t i = 0; i < weights_q.size(); ++i) {
    const double dev = dg[i] - mean;
    var += weights_q[i] * dev * dev;
  }
  return var;
}

double BernsteinOperator::contraction_norm(const LatticeFunction& g, unsigned r) const {
  require_same_lattice(lattice_, g.lattice(), "contraction_norm");
  if (r < 1) throw RangeError("contraction_norm: r must be >= 1");
  std::vector<double> d(g.values().begin(), g.values().end());
  std::vector<double> next(d.size());
  for (unsigned s = 0; s < r; ++s) {
    for (std::size_t i = 0; i < d.size(); ++i) next[i] = dot(matrix_.row(i), d) - d[i];
    d.swap(next);
  }
  double norm = 0.0;
  for (double v : d) norm = std::max(norm, std::abs(v));
  return norm;
}

double apply_D(const SimplexFunction& g, const CountsVector& t, int k, const OperatorLimits& limits) {
  const auto w = debias_weights(k);
  if (k == 1) return g(t.frequencies().values());
  BernsteinOperator op(t.n(), t.size(), limits);
  return op.apply_D(op.sample(g), t, w);
}

double apply_C(const SimplexFunction& g, const ProbVector& q, std::uint32_t n, int k,
               const OperatorLimits& limits) {
  const auto w = debias_weights(k);
  BernsteinOperator op(n, q.size(), limits);
  return op.apply_C(op.sample(g), q, w);
}

double exact_bias(const SimplexFunction& g, const ProbVector& q, std::uint32_t n, int k,
                  const OperatorLimits& limits) {
  require_valid_k(k);
  BernsteinOperator op(n, q.size(), limits);
  return op.bias(op.sample(g), g(q.values()), q, k);
}

double exact_variance(const SimplexFunction& g, const ProbVector& q, std::uint32_t n, int k,
                      const OperatorLimits& limits) {
  const auto w = debias_weights(k);
  BernsteinOperator op(n, q.size(), limits);
  return op.variance(op.sample(g), q, w);
}

double contraction_norm(const SimplexFunction& g, std::uint32_t n, std::size_t m, unsigned r,
                        const OperatorLimits& limits) {
  BernsteinOperator op(n, m, limits);
  return op.contraction_norm(op.sample(g), r);
}

double central_moment(std::uint32_t n, const ProbVector& q, std::span<const unsigned> alpha,
                      std::size_t lattice_cap) {
  if (alpha.size() != q.size()) throw DomainError("central_moment: alpha dimension mismatch");
  const unsigned order = std::accumulate(alpha.begin(), alpha.end(), 0u);
  if (order > 8) throw RangeError("central_moment: |alpha|_1 must be <= 8");
  const auto lattice = enumerate_lattice(n, q.size(), lattice_cap);
  const auto weights = MultinomialPmf(n).over_lattice(lattice, q.values());
  double result = 0.0;
  for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
    auto nu = lattice.point(idx);
    double term = weights[idx];
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      const double dev = static_cast<double>(nu[j]) / n - q[j];
      for (unsigned p = 0; p < alpha[j]; ++p) term *= dev;
    }
    result += term;
  }
  return result;
}

}  // namespace debias

#include "debias/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "debias/errors.hpp"

namespace debias {

namespace {

// C(a, b) for values known to stay below the lattice cap.
std::size_t small_binomial(std::size_t a, std::size_t b) {
  if (b > a) return 0;
  b = std::min(b, a - b);
  std::size_t result = 1;
  for (std::size_t i = 1; i <= b; ++i) {
    result = result * (a - b + i) / i;
  }
  return result;
}

}  // namespace

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw DomainError("ProbVector: support size must be >= 1");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) {
      throw DomainError("ProbVector: entries must be finite and non-negative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw DomainError("ProbVector: entries sum to " + std::to_string(sum));
  }
}

SignedProbVector::SignedProbVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw DomainError("SignedProbVector: support size must be >= 1");
  double sum = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("SignedProbVector: non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDerivedSumTolerance) {
    throw DomainError("SignedProbVector: entries sum to " + std::to_string(sum));
  }
}

CountsVector::CountsVector(std::vector<std::uint32_t> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw DomainError("CountsVector: support size must be >= 1");
  std::uint64_t total = 0;
  for (auto c : counts_) total += c;
  if (total == 0) throw DomainError("CountsVector: sample count n must be >= 1");
  if (total > std::numeric_limits<std::uint32_t>::max()) {
    throw RangeError("CountsVector: sample count overflows");
  }
  n_ = static_cast<std::uint32_t>(total);
}

ProbVector CountsVector::frequencies() const {
  std::vector<double> f(counts_.size());
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    f[j] = static_cast<double>(counts_[j]) / n_;
  }
  return ProbVector(std::move(f));
}

CountsVector LatticeIndex::counts(std::size_t index) const {
  auto p = point(index);
  return CountsVector(std::vector<std::uint32_t>(p.begin(), p.end()));
}

std::size_t LatticeIndex::index_of(std::span<const std::uint32_t> nu) const {
  if (nu.size() != m()) throw IndexError("index_of: dimension mismatch");
  std::uint64_t total = 0;
  for (auto v : nu) total += v;
  if (total != n()) throw IndexError("index_of: point does not sum to n");
  std::size_t rank = 0;
  std::size_t partial = 0;
  for (std::size_t j = 0; j + 1 < m(); ++j) {
    partial += nu[j];
    rank += small_binomial(partial + j, j + 1);
  }
  return rank;
}

std::size_t lattice_size(std::uint32_t n, std::size_t m) {
  if (m == 0) return 0;
  // C(n+m-1, m-1) built incrementally; each partial product is itself a
  // binomial coefficient, so overflow of one step means overflow of all later ones.
  const std::size_t r = m - 1;
  std::size_t result = 1;
  for (std::size_t i = 1; i <= r; ++i) {
    const std::size_t factor = n + i;
    if (result > std::numeric_limits<std::size_t>::max() / factor) {
      return std::numeric_limits<std::size_t>::max();
    }
    result = result * factor / i;
  }
  return result;
}

LatticeIndex enumerate_lattice(std::uint32_t n, std::size_t m, std::size_t cap) {
  if (n < 1) throw DomainError("enumerate_lattice: n must be >= 1");
  if (m < 1) throw DomainError("enumerate_lattice: m must be >= 1");
  const std::size_t size = lattice_size(n, m);
  if (size > cap) {
    throw CapExceeded("lattice for n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                      " has " + std::to_string(size) + " points, cap is " + std::to_string(cap));
  }

  auto data = std::make_shared<LatticeIndex::Data>();
  data->n = n;
  data->m = m;
  data->size = size;
  data->points.resize(size * m);

  // Walk (m-1)-subsets of {0..n+m-2} in colex order.
  const std::size_t bars = m - 1;
  const std::size_t top = n + m - 1;  // sentinel bar position
  std::vector<std::size_t> b(bars);
  std::iota(b.begin(), b.end(), std::size_t{0});
  for (std::size_t idx = 0; idx < size; ++idx) {
    std::uint32_t* out = data->points.data() + idx * m;
    std::size_t prev = 0;
    for (std::size_t j = 0; j < bars; ++j) {
      out[j] = static_cast<std::uint32_t>(j == 0 ? b[0] : b[j] - prev - 1);
      prev = b[j];
    }
    out[m - 1] = static_cast<std::uint32_t>(bars == 0 ? n : top - 1 - prev);

    std::size_t i = 0;
    while (i < bars && b[i] + 1 == (i + 1 < bars ? b[i + 1] : top)) ++i;
    if (i == bars) break;
    ++b[i];
    for (std::size_t j = 0; j < i; ++j) b[j] = j;
  }

  LatticeIndex lattice;
  lattice.data_ = std::move(data);
  return lattice;
}

MultinomialPmf::MultinomialPmf(std::uint32_t n) : n_(n), log_factorial_(n + 1) {
  for (std::uint32_t i = 0; i <= n; ++i) {
    log_factorial_[i] = std::lgamma(static_cast<double>(i) + 1.0);
  }
}

double MultinomialPmf::log_pmf(std::span<const std::uint32_t> nu, std::span<const double> q) const {
  if (nu.size() != q.size()) throw DomainError("log_pmf: dimension mismatch");
  double result = log_factorial_[n_];
  for (std::size_t j = 0; j < nu.size(); ++j) {
    if (std::isnan(q[j])) throw DomainError("log_pmf: NaN probability");
    if (nu[j] == 0) continue;
    if (q[j] <= 0.0) return -std::numeric_limits<double>::infinity();
    result += nu[j] * std::log(q[j]) - log_factorial_[nu[j]];
  }
  return result;
}

std::vector<double> MultinomialPmf::over_lattice(const LatticeIndex& lattice,
                                                 std::span<const double> q) const {
  if (lattice.n() != n_) throw DomainError("over_lattice: lattice built for a different n");
  if (lattice.m() != q.size()) throw DomainError("over_lattice: dimension mismatch");
  std::vector<double> log_q(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (std::isnan(q[j])) throw DomainError("over_lattice: NaN probability");
    log_q[j] = q[j] > 0.0 ? std::log(q[j]) : -std::numeric_limits<double>::infinity();
  }
  std::vector<double> out(lattice.size());
  for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
    auto nu = lattice.point(idx);
    double lp = log_factorial_[n_];
    bool zero = false;
    for (std::size_t j = 0; j < nu.size(); ++j) {
      if (nu[j] == 0) continue;
      if (q[j] <= 0.0) {
        zero = true;
        break;
      }
      lp += nu[j] * log_q[j] - log_factorial_[nu[j]];
    }
    out[idx] = zero ? 0.0 : std::exp(lp);
  }
  return out;
}

double log_multinomial_pmf(const CountsVector& nu, const ProbVector& q) {
  if (nu.size() != q.size()) throw DomainError("log_multinomial_pmf: dimension mismatch");
  return MultinomialPmf(nu.n()).log_pmf(nu.values(), q.values());
}

CountsVector counts_from_samples(std::span<const std::size_t> labels, std::size_t m) {
  if (labels.empty()) throw DomainError("counts_from_samples: need at least one sample");
  std::vector<std::uint32_t> counts(m, 0);
  for (auto label : labels) {
    if (label >= m) {
      throw IndexError("counts_from_samples: label " + std::to_string(label) +
                       " out of range for m=" + std::to_string(m));
    }
    ++counts[label];
  }
  return CountsVector(std::move(counts));
}

}  // namespace debias

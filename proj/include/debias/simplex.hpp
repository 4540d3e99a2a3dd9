#pragma once

// Core types for points on the probability simplex and the integer lattice
// of count vectors that a sample of size n can produce.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace debias {

inline constexpr double kProbSumTolerance = 1e-12;
inline constexpr double kDerivedSumTolerance = 1e-10;
inline constexpr std::size_t kDefaultLatticeCap = 5'000'000;

/// A probability vector: non-negative entries summing to one.
class ProbVector {
 public:
  explicit ProbVector(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t j) const { return probs_[j]; }
  std::span<const double> values() const { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Entries sum to one but may be negative (output of the debiasing operator).
class SignedProbVector {
 public:
  explicit SignedProbVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }
  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// Category counts of a sample of size n >= 1.
class CountsVector {
 public:
  explicit CountsVector(std::vector<std::uint32_t> counts);

  std::uint32_t n() const { return n_; }
  std::size_t size() const { return counts_.size(); }
  std::uint32_t operator[](std::size_t j) const { return counts_[j]; }
  std::span<const std::uint32_t> values() const { return counts_; }

  /// counts / n as a probability vector.
  ProbVector frequencies() const;

 private:
  std::vector<std::uint32_t> counts_;
  std::uint32_t n_ = 0;
};

/// Enumeration of {nu in N^m : sum nu = n}.
///
/// Points are ordered colexicographically by their stars-and-bars encoding:
/// bar positions b_j = nu_1 + ... + nu_j + j - 1 (j < m) form an increasing
/// (m-1)-subset of {0, ..., n+m-2}, and the index of a point is the
/// combinatorial-number-system rank sum_j C(b_j, j). For m = 2 this reduces
/// to index == nu_1.
///
/// Copies are cheap and share the immutable point table.
class LatticeIndex {
 public:
  std::uint32_t n() const { return data_->n; }
  std::size_t m() const { return data_->m; }
  std::size_t size() const { return data_->size; }

  std::span<const std::uint32_t> point(std::size_t index) const {
    return {data_->points.data() + index * data_->m, data_->m};
  }
  CountsVector counts(std::size_t index) const;

  /// Rank of a lattice point; throws IndexError if nu is not on this lattice.
  std::size_t index_of(std::span<const std::uint32_t> nu) const;

  bool same_as(const LatticeIndex& other) const { return data_ == other.data_; }

 private:
  friend LatticeIndex enumerate_lattice(std::uint32_t, std::size_t, std::size_t);

  struct Data {
    std::uint32_t n = 0;
    std::size_t m = 0;
    std::size_t size = 0;
    std::vector<std::uint32_t> points;  // row-major, size * m
  };
  std::shared_ptr<const Data> data_;
};

/// C(n+m-1, m-1), saturating at SIZE_MAX.
std::size_t lattice_size(std::uint32_t n, std::size_t m);

/// Throws CapExceeded when the lattice would have more than `cap` points.
LatticeIndex enumerate_lattice(std::uint32_t n, std::size_t m,
                               std::size_t cap = kDefaultLatticeCap);

/// log[ n!/(nu_1!...nu_m!) prod q_j^nu_j ] in nats. Returns -infinity when
/// some q_j = 0 has nu_j > 0; 0 log 0 is taken as 0.
double log_multinomial_pmf(const CountsVector& nu, const ProbVector& q);

/// Counts of each label in [0, m). Throws IndexError for an out-of-range
/// label and DomainError for an empty sequence.
CountsVector counts_from_samples(std::span<const std::size_t> labels, std::size_t m);

/// Multinomial pmf evaluator for a fixed n with cached log-factorials.
/// Safe to share between threads after construction.
class MultinomialPmf {
 public:
  explicit MultinomialPmf(std::uint32_t n);

  std::uint32_t n() const { return n_; }

  double log_pmf(std::span<const std::uint32_t> nu, std::span<const double> q) const;

  /// pmf of every lattice point under q, in lattice order.
  std::vector<double> over_lattice(const LatticeIndex& lattice, std::span<const double> q) const;

 private:
  std::uint32_t n_;
  std::vector<double> log_factorial_;
};

}  // namespace debias

#pragma once

// Exact resampling operator B_n on functions of the simplex, its iterates,
// and the debiasing combinations built from them:
//
//   (B_n g)(q)   = E g(T/n),  T ~ Multinomial(n, q)
//   D_{n,k}      = sum_{j=0}^{k-1} C(k, j+1) (-1)^j B_n^j
//   C_{n,k}      = B_n D_{n,k} = I - (I - B_n)^k
//
// Everything is computed by summation over the lattice {nu / n}; nothing
// here samples.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "debias/simplex.hpp"

namespace debias {

/// A deterministic real function on the simplex.
using SimplexFunction = std::function<double(std::span<const double>)>;

inline constexpr std::size_t kDefaultMatrixEntryCap = std::size_t{1} << 25;
inline constexpr int kMaxDebiasOrder = 20;

struct OperatorLimits {
  std::size_t lattice_cap = kDefaultLatticeCap;
  std::size_t matrix_entry_cap = kDefaultMatrixEntryCap;
  unsigned threads = 1;
};

/// Values of a function at every lattice point nu / n.
class LatticeFunction {
 public:
  LatticeFunction(LatticeIndex lattice, std::vector<double> values);

  const LatticeIndex& lattice() const { return lattice_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t idx) const { return values_[idx]; }
  double at(const CountsVector& nu) const { return values_[lattice_.index_of(nu.values())]; }

 private:
  LatticeIndex lattice_;
  std::vector<double> values_;
};

/// Evaluates g once at every lattice point.
LatticeFunction sample_on_lattice(const SimplexFunction& g, const LatticeIndex& lattice);

/// Row-stochastic matrix of B_n restricted to lattice arguments:
/// entry (mu, nu) is the multinomial pmf of nu under prior mu / n.
class TransferMatrix {
 public:
  TransferMatrix(LatticeIndex lattice, const OperatorLimits& limits = {});

  const LatticeIndex& lattice() const { return lattice_; }
  std::size_t size() const { return lattice_.size(); }
  double operator()(std::size_t row, std::size_t col) const { return entries_[row * size() + col]; }
  std::span<const double> row(std::size_t r) const { return {entries_.data() + r * size(), size()}; }

  /// (M h) on the lattice.
  LatticeFunction apply(const LatticeFunction& h) const;

 private:
  LatticeIndex lattice_;
  std::vector<double> entries_;
};

TransferMatrix transfer_matrix(std::uint32_t n, std::size_t m, const OperatorLimits& limits = {});

/// Coefficients of D_{n,k}: weights[j] = C(k, j+1) (-1)^j, j = 0..k-1.
struct DebiasWeights {
  int k = 1;
  std::vector<double> weights;
};

/// Throws RangeError for k outside [1, 20].
DebiasWeights debias_weights(int k);

/// B_n^j applied to g on the lattice; j = 0 returns g unchanged.
LatticeFunction iterate_operator(const LatticeFunction& g, const TransferMatrix& matrix, unsigned j);

/// B_n g evaluated at an arbitrary q (the Bernstein polynomial of g).
double bernstein_apply(const LatticeFunction& g, const ProbVector& q);
double bernstein_apply(const SimplexFunction& g, const ProbVector& q, std::uint32_t n,
                       std::size_t lattice_cap = kDefaultLatticeCap);

/// Exact operator algebra for one (n, m), reusing a single transfer matrix.
class BernsteinOperator {
 public:
  BernsteinOperator(std::uint32_t n, std::size_t m, const OperatorLimits& limits = {});

  std::uint32_t n() const { return lattice_.n(); }
  std::size_t m() const { return lattice_.m(); }
  const LatticeIndex& lattice() const { return lattice_; }
  const TransferMatrix& matrix() const { return matrix_; }

  LatticeFunction sample(const SimplexFunction& g) const { return sample_on_lattice(g, lattice_); }

  /// D_{n,k} g at every lattice point.
  LatticeFunction debias(const LatticeFunction& g, const DebiasWeights& w) const;

  /// multinomial pmf of every lattice point under q.
  std::vector<double> pmf(const ProbVector& q) const;

  double apply_D(const LatticeFunction& g, const CountsVector& t, const DebiasWeights& w) const;

  /// sum_{j=1}^k C(k,j) (-1)^{j-1} (B_n^j g)(q).
  double apply_C(const LatticeFunction& g, const ProbVector& q, const DebiasWeights& w) const;

  /// C_{n,k} g(q) - g(q), evaluated as -(I - B_n)^k g(q) so that the small
  /// result is never formed by cancelling O(1) terms.
  double bias(const LatticeFunction& g, double g_at_q, const ProbVector& q, int k) const;

  /// Var over T ~ Multinomial(n, q) of (D_{n,k} g)(T/n).
  double variance(const LatticeFunction& g, const ProbVector& q, const DebiasWeights& w) const;

  /// max over lattice points of |(B_n - I)^r g|.
  double contraction_norm(const LatticeFunction& g, unsigned r) const;

 private:
  LatticeIndex lattice_;
  TransferMatrix matrix_;
  MultinomialPmf pmf_;
};

// Single-shot forms. Each builds the lattice and, where needed, the transfer
// matrix; use BernsteinOperator directly to amortize over many calls.

double apply_D(const SimplexFunction& g, const CountsVector& t, int k, const OperatorLimits& limits = {});
double apply_C(const SimplexFunction& g, const ProbVector& q, std::uint32_t n, int k,
               const OperatorLimits& limits = {});
double exact_bias(const SimplexFunction& g, const ProbVector& q, std::uint32_t n, int k,
                  const OperatorLimits& limits = {});
double exact_variance(const SimplexFunction& g, const ProbVector& q, std::uint32_t n, int k,
                      const OperatorLimits& limits = {});
double contraction_norm(const SimplexFunction& g, std::uint32_t n, std::size_t m, unsigned r,
                        const OperatorLimits& limits = {});

/// sum_nu prod_j (nu_j/n - q_j)^alpha_j * pmf(nu; q) by direct summation.
/// Requires |alpha|_1 <= 8.
double central_moment(std::uint32_t n, const ProbVector& q, std::span<const unsigned> alpha,
                      std::size_t lattice_cap = kDefaultLatticeCap);

}  // namespace debias

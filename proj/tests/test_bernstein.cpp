#include <doctest.h>

#include <boost/math/distributions/binomial.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "debias/bayes_maps.hpp"
#include "debias/bernstein.hpp"
#include "debias/errors.hpp"

using namespace debias;

namespace {

double binom_pmf(std::uint32_t n, double p, std::uint32_t k) {
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  return boost::math::pdf(boost::math::binomial_distribution<double>(n, p), k);
}

// (B_n^j f)(x) for a function of the first coordinate on the binary simplex,
// by nested summation with boost's binomial pmf.
double nested_power(const std::function<double(double)>& f, std::uint32_t n, unsigned j, double x) {
  if (j == 0) return f(x);
  std::vector<double> level(n + 1);
  for (std::uint32_t v = 0; v <= n; ++v) level[v] = f(static_cast<double>(v) / n);
  for (unsigned step = 1; step < j; ++step) {
    std::vector<double> next(n + 1, 0.0);
    for (std::uint32_t mu = 0; mu <= n; ++mu)
      for (std::uint32_t v = 0; v <= n; ++v)
        next[mu] += binom_pmf(n, static_cast<double>(mu) / n, v) * level[v];
    level = std::move(next);
  }
  double total = 0.0;
  for (std::uint32_t v = 0; v <= n; ++v) total += binom_pmf(n, x, v) * level[v];
  return total;
}

std::function<double(double)> bayes1(double alpha) {
  return [alpha](double q) { return alpha * q / (alpha * q + 1.0 - q); };
}

SimplexFunction on_first(const std::function<double(double)>& f) {
  return [f](std::span<const double> x) { return f(x[0]); };
}

const SimplexFunction kFirstCoord = [](std::span<const double> x) { return x[0]; };
const SimplexFunction kSquare = [](std::span<const double> x) { return x[0] * x[0]; };

}  // namespace

TEST_CASE("debias_weights") {
  CHECK(debias_weights(1).weights == std::vector<double>{1});
  CHECK(debias_weights(2).weights == std::vector<double>{2, -1});
  CHECK(debias_weights(3).weights == std::vector<double>{3, -3, 1});
  CHECK(debias_weights(4).weights == std::vector<double>{4, -6, 4, -1});
  for (int k = 1; k <= kMaxDebiasOrder; ++k) {
    double total = 0.0;
    for (double w : debias_weights(k).weights) total += w;
    CHECK(total == 1.0);
  }
  CHECK_THROWS_AS(debias_weights(0), RangeError);
  CHECK_THROWS_AS(debias_weights(21), RangeError);
}

TEST_CASE("transfer matrix examples") {
  const auto one = transfer_matrix(1, 2);
  CHECK(one(0, 0) == 1.0);
  CHECK(one(0, 1) == 0.0);
  CHECK(one(1, 0) == 0.0);
  CHECK(one(1, 1) == 1.0);

  const auto two = transfer_matrix(2, 2);
  CHECK(two(1, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(two(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(two(1, 2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("transfer matrix is row-stochastic") {
  const std::vector<std::pair<std::uint32_t, std::size_t>> shapes{{8, 2}, {64, 2}, {10, 3}, {6, 4}, {5, 5}};
  for (auto [n, m] : shapes) {
    const auto mat = transfer_matrix(n, m);
    for (std::size_t r = 0; r < mat.size(); ++r) {
      double total = 0.0;
      for (double v : mat.row(r)) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) <= (n == 8 && m == 2 ? 1e-12 : 1e-10));
    }
  }
}

TEST_CASE("transfer matrix entries match boost binomial") {
  const auto mat = transfer_matrix(30, 2);
  for (std::uint32_t mu = 0; mu <= 30; ++mu)
    for (std::uint32_t v = 0; v <= 30; ++v)
      CHECK(mat(mu, v) == doctest::Approx(binom_pmf(30, mu / 30.0, v)).epsilon(1e-12).scale(1e-300));
}

TEST_CASE("transfer matrix cap") {
  OperatorLimits limits;
  limits.matrix_entry_cap = 100;
  CHECK_THROWS_AS(transfer_matrix(10, 2, limits), CapExceeded);
  CHECK_NOTHROW(transfer_matrix(9, 2, limits));
}

TEST_CASE("bernstein_apply") {
  const ProbVector q({0.37, 0.63});
  for (std::uint32_t n : {1u, 5u, 40u}) CHECK(bernstein_apply(kFirstCoord, q, n) == doctest::Approx(0.37).epsilon(1e-14));

  for (std::uint32_t n : {1u, 2u, 7u, 33u, 64u}) {
    double direct = 0.0;
    for (std::uint32_t v = 0; v <= n; ++v) direct += binom_pmf(n, 0.37, v) * (double(v) / n) * (double(v) / n);
    const double got = bernstein_apply(kSquare, q, n);
    CHECK(got == doctest::Approx(direct).epsilon(1e-13));
    CHECK(got == doctest::Approx(0.37 * 0.37 + 0.37 * 0.63 / n).epsilon(1e-13));
  }

  const SimplexFunction odd = [](std::span<const double> x) { return std::sin(3.0 * x[0]) + x[1] * x[1]; };
  const double g01 = odd(std::vector<double>{0.0, 1.0});
  const double g10 = odd(std::vector<double>{1.0, 0.0});
  CHECK(bernstein_apply(odd, q, 1) == doctest::Approx(g01 * 0.63 + g10 * 0.37).epsilon(1e-15));

  // three categories against a hand-rolled trinomial sum
  const ProbVector q3({0.2, 0.3, 0.5});
  const SimplexFunction prod = [](std::span<const double> x) { return x[0] * x[1] + std::exp(x[2]); };
  double direct = 0.0;
  const std::uint32_t n = 9;
  for (std::uint32_t a = 0; a <= n; ++a)
    for (std::uint32_t b = 0; a + b <= n; ++b) {
      const std::uint32_t c = n - a - b;
      const double w = binom_pmf(n, 0.2, a) * binom_pmf(n - a, 0.3 / 0.8, b);
      direct += w * prod(std::vector<double>{double(a) / n, double(b) / n, double(c) / n});
    }
  CHECK(bernstein_apply(prod, q3, n) == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("iterate_operator") {
  const BernsteinOperator op(4, 2);
  const auto g = op.sample(kSquare);
  const auto zero = iterate_operator(g, op.matrix(), 0);
  for (std::size_t i = 0; i < g.values().size(); ++i) CHECK(zero[i] == g[i]);

  const auto lin = op.sample(kFirstCoord);
  const auto lin3 = iterate_operator(lin, op.matrix(), 3);
  for (std::size_t i = 0; i < lin.values().size(); ++i) CHECK(lin3[i] == doctest::Approx(lin[i]).epsilon(1e-14));

  const auto sq2 = iterate_operator(g, op.matrix(), 2);
  for (std::uint32_t v = 0; v <= 4; ++v) {
    const double oracle = nested_power([](double x) { return x * x; }, 4, 2, v / 4.0);
    CHECK(sq2[v] == doctest::Approx(oracle).epsilon(1e-14));
  }
}

TEST_CASE("apply_D examples") {
  const double alpha = std::exp(1.5);
  const auto g = on_first(bayes1(alpha));
  const CountsVector t({2, 2});
  CHECK(apply_D(g, t, 1) == g(std::vector<double>{0.5, 0.5}));

  const double direct = 2.0 * bayes1(alpha)(0.5) - nested_power(bayes1(alpha), 4, 1, 0.5);
  CHECK(apply_D(g, t, 2) == doctest::Approx(direct).epsilon(1e-14));

  const double direct3 = 3.0 * bayes1(alpha)(0.5) - 3.0 * nested_power(bayes1(alpha), 4, 1, 0.5) +
                         nested_power(bayes1(alpha), 4, 2, 0.5);
  CHECK(apply_D(g, t, 3) == doctest::Approx(direct3).epsilon(1e-13));
}

TEST_CASE("D is exact on affine functions") {
  const SimplexFunction affine2 = [](std::span<const double> x) { return 0.7 - 2.0 * x[0] + 0.3 * x[1]; };
  const SimplexFunction affine3 = [](std::span<const double> x) { return 1.5 + x[0] - 4.0 * x[1] + 2.5 * x[2]; };
  for (std::uint32_t n : {1u, 3u, 10u}) {
    for (std::size_t m : {2u, 3u}) {
      const BernsteinOperator op(n, m);
      const auto& fn = m == 2 ? affine2 : affine3;
      const auto g = op.sample(fn);
      for (int k = 1; k <= 6; ++k) {
        const auto w = debias_weights(k);
        for (std::size_t i = 0; i < op.lattice().size(); ++i) {
          const auto t = op.lattice().counts(i);
          CHECK(std::abs(op.apply_D(g, t, w) - g[i]) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("debiased Bayes components sum to one") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> logu(-2.0, 2.0);
  for (std::uint32_t n = 1; n <= 10; ++n) {
    for (std::size_t m : {2u, 3u, 4u}) {
      std::vector<double> ell(m);
      for (auto& v : ell) v = std::exp(logu(rng));
      const DiscreteBayesMap map(ell);
      const BernsteinOperator op(n, m);
      for (int k = 1; k <= 4; ++k) {
        const auto w = debias_weights(k);
        std::vector<double> total(op.lattice().size(), 0.0);
        for (std::size_t s = 0; s < m; ++s) {
          const auto d = op.debias(op.sample(map.component_function(s)), w);
          for (std::size_t i = 0; i < total.size(); ++i) total[i] += d[i];
        }
        for (double t : total) CHECK(std::abs(t - 1.0) <= 1e-10);
      }
    }
  }
}

TEST_CASE("apply_C equals the exhaustive expectation of apply_D") {
  const double alpha = std::exp(1.5);
  const auto f = bayes1(alpha);
  const auto g = on_first(f);
  const ProbVector q({0.4, 0.6});

  CHECK(apply_C(g, q, 8, 1) == doctest::Approx(bernstein_apply(g, q, 8)).epsilon(1e-14));

  double expectation = 0.0;
  for (std::uint32_t t = 0; t <= 8; ++t) expectation += apply_D(g, CountsVector({t, 8 - t}), 2) * binom_pmf(8, 0.4, t);
  CHECK(std::abs(apply_C(g, q, 8, 2) - expectation) <= 1e-12);

  // C_{n,2} = 2B - B^2 through the nested oracle
  const double nested = 2.0 * nested_power(f, 8, 1, 0.4) - nested_power(f, 8, 2, 0.4);
  CHECK(apply_C(g, q, 8, 2) == doctest::Approx(nested).epsilon(1e-13));

  for (int k = 1; k <= 5; ++k) CHECK(apply_C(kFirstCoord, q, 12, k) == doctest::Approx(0.4).epsilon(1e-13));
}

TEST_CASE("exact_bias on a quadratic has closed form q(1-q)/n^k") {
  // (I - B_n) x^2 = -x(1-x)/n and (I - B_n) x(1-x) = x(1-x)/n.
  const double q1 = 0.3;
  const ProbVector q({q1, 1.0 - q1});
  for (std::uint32_t n : {4u, 16u, 64u}) {
    for (int k = 1; k <= 4; ++k) {
      const double expected = q1 * (1.0 - q1) / std::pow(double(n), k);
      CHECK(exact_bias(kSquare, q, n, k) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
  CHECK(std::abs(exact_bias(kFirstCoord, q, 50, 3)) <= 1e-14);
}

TEST_CASE("exact_bias agrees with the weighted-sum definition") {
  const auto f = bayes1(std::exp(1.5));
  const auto g = on_first(f);
  const ProbVector q({0.4, 0.6});
  for (std::uint32_t n : {6u, 20u}) {
    for (int k = 1; k <= 3; ++k) {
      double c = 0.0;
      const auto w = debias_weights(k);
      for (int j = 0; j < k; ++j) c += w.weights[j] * nested_power(f, n, j + 1, 0.4);
      CHECK(exact_bias(g, q, n, k) == doctest::Approx(c - f(0.4)).epsilon(1e-8));
    }
  }
}

TEST_CASE("bias and variance rates in the binary Bayes setting") {
  const auto g = on_first(bayes1(std::exp(1.5)));
  const ProbVector q({0.4, 0.6});
  for (std::uint32_t n : {64u, 128u}) {
    const double r1 = exact_bias(g, q, n, 1) / exact_bias(g, q, 2 * n, 1);
    CHECK(std::abs(r1) >= 1.6);
    CHECK(std::abs(r1) <= 2.4);
    const double r2 = exact_bias(g, q, n, 2) / exact_bias(g, q, 2 * n, 2);
    CHECK(std::abs(r2) >= 3.2);
    CHECK(std::abs(r2) <= 4.8);
    const double v = exact_variance(g, q, n, 2) / exact_variance(g, q, 2 * n, 2);
    CHECK(v >= 1.5);
    CHECK(v <= 2.5);
  }
}

TEST_CASE("exact_variance") {
  const ProbVector q({0.35, 0.65});
  const SimplexFunction constant = [](std::span<const double>) { return 2.5; };
  CHECK(std::abs(exact_variance(constant, q, 20, 3)) <= 1e-14);
  for (int k = 1; k <= 4; ++k)
    CHECK(exact_variance(kFirstCoord, q, 20, k) == doctest::Approx(0.35 * 0.65 / 20).epsilon(1e-11));

  // direct two-pass oracle
  const auto f = bayes1(std::exp(2.0));
  const auto g = on_first(f);
  const std::uint32_t n = 12;
  double mean = 0.0, second = 0.0;
  for (std::uint32_t t = 0; t <= n; ++t) {
    const double d = 2.0 * f(double(t) / n) - nested_power(f, n, 1, double(t) / n);
    const double p = binom_pmf(n, 0.35, t);
    mean += p * d;
    second += p * d * d;
  }
  CHECK(exact_variance(g, q, n, 2) == doctest::Approx(second - mean * mean).epsilon(1e-10));
}

TEST_CASE("central_moment") {
  const ProbVector q({0.3, 0.7});
  const ProbVector q3({0.2, 0.3, 0.5});
  const std::vector<unsigned> a10{1, 0}, a20{2, 0}, a11{1, 1}, a30{3, 0}, a40{4, 0}, a100{1, 0, 0};
  const std::uint32_t n = 25;
  CHECK(std::abs(central_moment(n, q, a10)) <= 1e-14);
  CHECK(std::abs(central_moment(n, q3, a100)) <= 1e-14);
  CHECK(central_moment(n, q, a20) == doctest::Approx(0.3 * 0.7 / n).epsilon(1e-12));
  CHECK(central_moment(n, q, a11) == doctest::Approx(-0.3 * 0.7 / n).epsilon(1e-12));
  CHECK(central_moment(n, q3, std::vector<unsigned>{0, 1, 1}) == doctest::Approx(-0.3 * 0.5 / n).epsilon(1e-12));
  CHECK(central_moment(n, q, a30) == doctest::Approx(0.3 * 0.7 * (1 - 0.6) / (n * n)).epsilon(1e-10));
  const double pq = 0.21;
  CHECK(central_moment(n, q, a40) ==
        doctest::Approx(3 * pq * pq / (n * n) + pq * (1 - 6 * pq) / (double(n) * n * n)).epsilon(1e-10));
  CHECK_THROWS_AS(central_moment(n, q, std::vector<unsigned>{5, 4}), RangeError);
}

TEST_CASE("contraction_norm") {
  const SimplexFunction constant = [](std::span<const double>) { return -1.0; };
  CHECK(contraction_norm(constant, 30, 2, 1) <= 1e-12);
  CHECK(contraction_norm(kFirstCoord, 30, 2, 2) <= 1e-12);
  CHECK(contraction_norm(kFirstCoord, 8, 3, 1) <= 1e-12);

  // (B_n - I) x^2 = x(1-x)/n, maximal at x = 1/2
  CHECK(contraction_norm(kSquare, 16, 2, 1) == doctest::Approx(0.25 / 16).epsilon(1e-12));

  const auto g = on_first(bayes1(std::exp(1.5)));
  const double base = contraction_norm(g, 16, 2, 1) * 16;
  for (std::uint32_t n : {32u, 64u, 128u, 256u}) CHECK(contraction_norm(g, n, 2, 1) * n <= 10.0 * base);
}

TEST_CASE("LatticeFunction validation and lookup") {
  const auto lattice = enumerate_lattice(3, 2);
  CHECK_THROWS_AS(LatticeFunction(lattice, {1.0, 2.0}), DomainError);
  CHECK_THROWS_AS(LatticeFunction(lattice, {1.0, 2.0, NAN, 0.0}), DomainError);
  const LatticeFunction f(lattice, {1.0, 2.0, 3.0, 4.0});
  CHECK(f.at(CountsVector({2, 1})) == 3.0);
}

TEST_CASE("threaded matrix build matches serial") {
  OperatorLimits serial, threaded;
  threaded.threads = 4;
  const auto a = transfer_matrix(40, 3, serial);
  const auto b = transfer_matrix(40, 3, threaded);
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a.size(); ++c) REQUIRE(a(r, c) == b(r, c));
}

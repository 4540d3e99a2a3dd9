#include <doctest.h>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "debias/errors.hpp"
#include "debias/simplex.hpp"

using namespace debias;
using Rational = boost::multiprecision::cpp_rational;

namespace {

using Point = std::vector<std::uint32_t>;

// Every nu in [0..n]^m with sum n, by nested counting.
std::vector<Point> brute_force_lattice(std::uint32_t n, std::size_t m) {
  std::vector<Point> out;
  Point cur(m, 0);
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t j, std::uint32_t left) {
    if (j + 1 == m) {
      cur[j] = left;
      out.push_back(cur);
      return;
    }
    for (std::uint32_t v = 0; v <= left; ++v) {
      cur[j] = v;
      rec(j + 1, left - v);
    }
  };
  rec(0, n);
  return out;
}

Point as_point(std::span<const std::uint32_t> s) { return Point(s.begin(), s.end()); }

ProbVector random_prob(std::mt19937_64& rng, std::size_t m) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> q(m);
  double total = 0.0;
  for (auto& v : q) total += (v = expo(rng));
  for (auto& v : q) v /= total;
  total = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) total += q[j];
  q.back() = 1.0 - total;
  return ProbVector(q);
}

Rational factorial(unsigned n) {
  Rational r = 1;
  for (unsigned i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

TEST_CASE("enumerate_lattice small cases") {
  auto a = enumerate_lattice(2, 2);
  REQUIRE(a.size() == 3);
  CHECK(as_point(a.point(0)) == Point{0, 2});
  CHECK(as_point(a.point(1)) == Point{1, 1});
  CHECK(as_point(a.point(2)) == Point{2, 0});

  auto b = enumerate_lattice(1, 3);
  REQUIRE(b.size() == 3);
  CHECK(as_point(b.point(0)) == Point{0, 0, 1});
  CHECK(as_point(b.point(1)) == Point{0, 1, 0});
  CHECK(as_point(b.point(2)) == Point{1, 0, 0});

  auto single = enumerate_lattice(5, 1);
  REQUIRE(single.size() == 1);
  CHECK(single.point(0)[0] == 5);
}

TEST_CASE("lattice size matches brute-force enumeration") {
  CHECK(enumerate_lattice(10, 3).size() == brute_force_lattice(10, 3).size());
  CHECK(brute_force_lattice(10, 3).size() == 66);
  for (std::uint32_t n : {1u, 3u, 7u, 12u}) {
    for (std::size_t m : {1u, 2u, 3u, 4u, 5u}) {
      CHECK(lattice_size(n, m) == brute_force_lattice(n, m).size());
    }
  }
}

TEST_CASE("lattice enumeration is a bijection with exact round trips") {
  for (std::uint32_t n : {1u, 2u, 6u, 11u}) {
    for (std::size_t m : {1u, 2u, 3u, 4u}) {
      const auto lattice = enumerate_lattice(n, m);
      std::set<Point> seen;
      for (std::size_t i = 0; i < lattice.size(); ++i) {
        const auto p = lattice.point(i);
        CHECK(lattice.index_of(p) == i);
        seen.insert(as_point(p));
      }
      CHECK(seen.size() == lattice.size());
      for (const auto& p : brute_force_lattice(n, m)) {
        const auto idx = lattice.index_of(p);
        REQUIRE(idx < lattice.size());
        CHECK(as_point(lattice.point(idx)) == p);
      }
    }
  }
}

TEST_CASE("binary lattice index equals first coordinate") {
  const auto lattice = enumerate_lattice(40, 2);
  for (std::size_t i = 0; i < lattice.size(); ++i) CHECK(lattice.point(i)[0] == i);
}

TEST_CASE("lattice cap") {
  CHECK_THROWS_AS(enumerate_lattice(100, 4, 1000), CapExceeded);
  CHECK_NOTHROW(enumerate_lattice(10, 3, 66));
  CHECK_THROWS_AS(enumerate_lattice(10, 3, 65), CapExceeded);
  CHECK(lattice_size(4'000'000'000u, 40) == SIZE_MAX);
}

TEST_CASE("index_of rejects foreign points") {
  const auto lattice = enumerate_lattice(4, 3);
  CHECK_THROWS_AS(lattice.index_of(Point{1, 1, 1}), IndexError);
  CHECK_THROWS_AS(lattice.index_of(Point{4, 0}), IndexError);
}

TEST_CASE("log_multinomial_pmf examples") {
  CHECK(log_multinomial_pmf(CountsVector({1, 1}), ProbVector({0.5, 0.5})) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(log_multinomial_pmf(CountsVector({2, 0}), ProbVector({0.3, 0.7})) ==
        doctest::Approx(std::log(0.09)).epsilon(1e-14));

  // 6!/(3!2!1!) * 0.2^3 * 0.3^2 * 0.5 in exact rationals.
  const std::vector<double> q{0.2, 0.3, 0.5};
  Rational exact = factorial(6) / (factorial(3) * factorial(2) * factorial(1));
  exact *= Rational(q[0]) * Rational(q[0]) * Rational(q[0]) * Rational(q[1]) * Rational(q[1]) * Rational(q[2]);
  const double value = std::exp(log_multinomial_pmf(CountsVector({3, 2, 1}), ProbVector(q)));
  CHECK(value == doctest::Approx(static_cast<double>(exact)).epsilon(1e-13));
  CHECK(value == doctest::Approx(0.0216).epsilon(1e-12));
}

TEST_CASE("log_multinomial_pmf zero-probability conventions") {
  CHECK(log_multinomial_pmf(CountsVector({0, 3}), ProbVector({0.0, 1.0})) == 0.0);
  CHECK(std::isinf(log_multinomial_pmf(CountsVector({1, 2}), ProbVector({0.0, 1.0}))));
  CHECK(log_multinomial_pmf(CountsVector({1, 2}), ProbVector({0.0, 1.0})) < 0.0);
}

TEST_CASE("log_multinomial_pmf matches exact rational arithmetic for n <= 12, m <= 4") {
  std::mt19937_64 rng(7);
  for (std::uint32_t n = 1; n <= 12; ++n) {
    for (std::size_t m = 1; m <= 4; ++m) {
      const auto q = random_prob(rng, m);
      const auto lattice = enumerate_lattice(n, m);
      for (std::size_t i = 0; i < lattice.size(); ++i) {
        const auto nu = lattice.counts(i);
        Rational exact = factorial(n);
        for (std::size_t j = 0; j < m; ++j) {
          exact /= factorial(nu[j]);
          for (std::uint32_t p = 0; p < nu[j]; ++p) exact *= Rational(q[j]);
        }
        const double expected = static_cast<double>(exact);
        const double got = std::exp(log_multinomial_pmf(nu, q));
        CHECK(std::abs(got - expected) <= 1e-12 * expected);
      }
    }
  }
}

TEST_CASE("multinomial pmf sums to one over the lattice") {
  std::mt19937_64 rng(11);
  const std::vector<std::pair<std::uint32_t, std::size_t>> shapes{{200, 2}, {60, 3}, {20, 4}, {9, 6}};
  for (auto [n, m] : shapes) {
    const auto lattice = enumerate_lattice(n, m);
    const MultinomialPmf pmf(n);
    for (int trial = 0; trial < 100; ++trial) {
      const auto q = random_prob(rng, m);
      const auto weights = pmf.over_lattice(lattice, q.values());
      double total = 0.0;
      for (double w : weights) total += w;
      CHECK(std::abs(total - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("counts_from_samples") {
  const std::vector<std::size_t> a{0, 0, 1};
  const auto ca = counts_from_samples(a, 2);
  CHECK(ca.n() == 3);
  CHECK(ca[0] == 2);
  CHECK(ca[1] == 1);

  const std::vector<std::size_t> b{2, 2, 2, 0};
  const auto cb = counts_from_samples(b, 3);
  CHECK(as_point(cb.values()) == Point{1, 0, 3});

  const std::vector<std::size_t> empty;
  CHECK_THROWS_AS(counts_from_samples(empty, 2), DomainError);
  const std::vector<std::size_t> bad{0, 3};
  CHECK_THROWS_AS(counts_from_samples(bad, 3), IndexError);
}

TEST_CASE("vector type invariants") {
  CHECK_THROWS_AS(ProbVector({0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(ProbVector({1.1, -0.1}), DomainError);
  CHECK_THROWS_AS(ProbVector(std::vector<double>{}), DomainError);
  CHECK_NOTHROW(ProbVector({0.5, 0.5 + 5e-13}));
  CHECK_NOTHROW(SignedProbVector({1.1, -0.1}));
  CHECK_THROWS_AS(SignedProbVector({1.1, 0.1}), DomainError);
  CHECK_THROWS_AS(CountsVector({0, 0}), DomainError);
  CHECK(CountsVector({1, 3}).frequencies()[1] == 0.75);
}

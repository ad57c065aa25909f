#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mspace/sym_tensor.hpp"

using namespace mspace;

namespace {

SymTensor random_symmetric(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  SymTensor t(n);
  for (double& e : t.packed()) e = u(rng);
  return t;
}

SymTensor random_spd(std::mt19937_64& rng, int n, double shift = 0.5) {
  SymTensor s = random_symmetric(rng, n);
  // s^2 + shift I is symmetric positive definite
  detail::Mat m = detail::Mat::from_sym(s);
  SymTensor out = detail::symmetrize(detail::mul(m, m));
  return out + SymTensor::identity(n) * shift;
}

// residual of the eigen decomposition: max |A v_k - w_k v_k|
double eig_residual(const SymTensor& a, const SymEig& e) {
  double worst = 0.0;
  for (int k = 0; k < e.n; ++k) {
    for (int i = 0; i < e.n; ++i) {
      double av = 0.0;
      for (int j = 0; j < e.n; ++j) av += a.at(i, j) * e.vec.at(j, k);
      worst = std::max(worst, std::abs(av - e.val[static_cast<std::size_t>(k)] * e.vec.at(i, k)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("packed storage indexes the upper triangle row-major") {
  SymTensor t(3);
  double v = 1.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) t.at(i, j) = v++;
  // packed layout: (0,0),(0,1),(0,2),(1,1),(1,2),(2,2)
  auto p = t.packed();
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 2.0);
  CHECK(p[2] == 3.0);
  CHECK(p[3] == 4.0);
  CHECK(p[4] == 5.0);
  CHECK(p[5] == 6.0);
  CHECK(t.at(2, 0) == 3.0);  // symmetric access
}

TEST_CASE("determinants match eigenvalue products") {
  std::mt19937_64 rng(7);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      SymTensor a = random_symmetric(rng, n, 2.0);
      SymEig e = eig_sym(a);
      double prod = 1.0;
      for (int i = 0; i < n; ++i) prod *= e.val[static_cast<std::size_t>(i)];
      CHECK(a.det() == Catch::Approx(prod).margin(1e-10 * std::pow(a.frobenius() + 1.0, n)));
    }
  }
}

TEST_CASE("jacobi eigensolver: residual and orthonormality") {
  std::mt19937_64 rng(11);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      SymTensor a = random_symmetric(rng, n, 3.0);
      SymEig e = eig_sym(a);
      CHECK(eig_residual(a, e) < 1e-12 * (a.frobenius() + 1.0));
      for (int c1 = 0; c1 < n; ++c1)
        for (int c2 = 0; c2 < n; ++c2) {
          double dot = 0.0;
          for (int r = 0; r < n; ++r) dot += e.vec.at(r, c1) * e.vec.at(r, c2);
          CHECK(dot == Catch::Approx(c1 == c2 ? 1.0 : 0.0).margin(1e-13));
        }
      for (int i = 0; i + 1 < n; ++i)
        CHECK(e.val[static_cast<std::size_t>(i)] <= e.val[static_cast<std::size_t>(i + 1)]);
    }
  }
}

TEST_CASE("jacobi handles graded spectra") {
  SymTensor g = SymTensor::diag({1e10, 1e-14});
  SymEig e = eig_sym(g);
  CHECK(e.val[0] == Catch::Approx(1e-14));
  CHECK(e.val[1] == Catch::Approx(1e10));
  CHECK(g.det() == Catch::Approx(1e-4));
}

TEST_CASE("spectral functions: sqrt, inverse, log, exp") {
  std::mt19937_64 rng(13);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 50; ++trial) {
      SymTensor g = random_spd(rng, n);
      SymTensor r = sqrt_pd(g);
      SymTensor rr = congruence(r, SymTensor::identity(n));
      CHECK((rr - g).max_abs() < 1e-12 * (g.max_abs() + 1.0));

      SymTensor inv = inverse_pd(g);
      SymTensor prod = congruence(sqrt_pd(inv), g);  // g^{-1/2} g g^{-1/2} = I
      CHECK((prod - SymTensor::identity(n)).max_abs() < 1e-12);

      SymTensor lg = log_pd(g);
      CHECK((exp_sym(lg) - g).max_abs() < 1e-11 * (g.max_abs() + 1.0));
    }
  }
}

TEST_CASE("dimension cap") {
  CHECK_THROWS_AS(SymTensor(5), invalid_input);
  CHECK_THROWS_AS(SymTensor(0), invalid_input);
  CHECK(SymTensor(4).dim() == 4);
}

TEST_CASE("positive definiteness probes") {
  CHECK(is_positive_definite(SymTensor::identity(3)));
  CHECK(!is_positive_definite(SymTensor::diag({1.0, 0.0})));
  CHECK(is_positive_semidefinite(SymTensor::diag({1.0, 0.0})));
  CHECK(!is_positive_semidefinite(SymTensor::diag({1.0, -1e-6})));
  SymTensor bad(2);
  bad.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(!is_positive_definite(bad));
}

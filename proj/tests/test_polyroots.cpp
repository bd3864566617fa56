#include <doctest.h>

#include <algorithm>
#include <complex>

#include "spanon/common.hpp"
#include "spanon/polyroots.hpp"

using namespace spanon;

namespace {

// multiset match: every expected root has a distinct found root within tol
bool roots_match(std::vector<std::complex<double>> found, const std::vector<std::complex<double>>& expected,
                 double tol) {
  if (found.size() != expected.size()) return false;
  for (const auto& e : expected) {
    auto best = found.end();
    double best_d = tol;
    for (auto it = found.begin(); it != found.end(); ++it) {
      double d = std::abs(*it - e);
      if (d < best_d) {
        best_d = d;
        best = it;
      }
    }
    if (best == found.end()) return false;
    found.erase(best);
  }
  return true;
}

}  // namespace

TEST_SUITE("polyroots") {

TEST_CASE("linear and quadratic roots are exact") {
  // x + 5 -> root -5
  auto r1 = monic_roots({5.0});
  REQUIRE(r1.size() == 1);
  CHECK(std::abs(r1[0] - std::complex<double>(-5.0, 0.0)) < 1e-12);

  // (x-2)(x+3) = x^2 + x - 6
  auto r2 = monic_roots({1.0, -6.0});
  CHECK(roots_match(r2, {{2.0, 0.0}, {-3.0, 0.0}}, 1e-10));
}

TEST_CASE("complex conjugate pair is recovered") {
  // (x - (0.5+0.5i))(x - (0.5-0.5i)) = x^2 - x + 0.5
  auto r = monic_roots({-1.0, 0.5});
  CHECK(roots_match(r, {{0.5, 0.5}, {0.5, -0.5}}, 1e-10));
}

TEST_CASE("repeated roots are located to reduced accuracy") {
  // (x-1)^2 = x^2 - 2x + 1; a double root limits attainable precision
  auto r = monic_roots({-2.0, 1.0});
  REQUIRE(r.size() == 2);
  for (const auto& z : r) CHECK(std::abs(z - std::complex<double>(1.0, 0.0)) < 1e-5);
}

TEST_CASE("random stable LPC-style polynomials round-trip through root finding") {
  Rng rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    int pairs = 1 + int(rng.below(10));  // degree 2..20
    std::vector<std::complex<double>> expected;
    std::vector<std::complex<double>> poly = {1.0};
    for (int p = 0; p < pairs; ++p) {
      double radius = 0.3 + 0.65 * rng.uniform();
      double angle = 0.05 + (M_PI - 0.1) * rng.uniform();
      std::complex<double> root = std::polar(radius, angle);
      for (const std::complex<double>& z : {root, std::conj(root)}) {
        expected.push_back(z);
        poly.push_back(0.0);
        for (size_t k = poly.size() - 1; k > 0; --k) poly[k] -= z * poly[k - 1];
      }
    }
    std::vector<double> coeffs;
    for (size_t k = 1; k < poly.size(); ++k) coeffs.push_back(poly[k].real());

    auto found = monic_roots(coeffs);
    REQUIRE(found.size() == expected.size());
    CHECK(root_residual(coeffs, found) < 1e-8);
    CHECK(roots_match(found, expected, 1e-6));
  }
}

TEST_CASE("residual measure is small for true roots and large for wrong ones") {
  std::vector<double> coeffs = {1.0, -6.0};  // (x-2)(x+3)
  CHECK(root_residual(coeffs, {{2.0, 0.0}, {-3.0, 0.0}}) < 1e-14);
  CHECK(root_residual(coeffs, {{1.0, 0.0}, {-1.0, 0.0}}) > 1e-1);
}

TEST_CASE("empty input has no roots") {
  CHECK(monic_roots({}).empty());
}

}  // TEST_SUITE

#include "spanon/polyroots.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace spanon {

namespace {

using cd = std::complex<double>;

cd eval_poly(const std::vector<double>& c, cd x) {
  cd acc(1.0, 0.0);
  for (double ck : c) acc = acc * x + ck;
  return acc;
}

cd eval_deriv(const std::vector<double>& c, cd x) {
  size_t n = c.size();
  cd acc(double(n), 0.0);
  for (size_t k = 0; k < n - 1 && n >= 1; ++k) acc = acc * x + double(n - 1 - k) * c[k];
  return n == 0 ? cd(0.0) : acc;
}

std::vector<cd> companion_roots(const std::vector<double>& c) {
  int n = int(c.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) m(0, i) = -c[i];
  for (int i = 1; i < n; ++i) m(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  std::vector<cd> roots(n);
  for (int i = 0; i < n; ++i) roots[i] = solver.eigenvalues()[i];
  return roots;
}

}  // namespace

double root_residual(const std::vector<double>& c, const std::vector<cd>& roots) {
  double worst = 0.0;
  size_t n = c.size();
  for (cd r : roots) {
    double scale = std::max(1.0, std::pow(std::abs(r), double(n)));
    worst = std::max(worst, std::abs(eval_poly(c, r)) / scale);
  }
  return worst;
}

std::vector<cd> monic_roots(const std::vector<double>& c) {
  for (double ck : c)
    if (!std::isfinite(ck)) throw DataError("non-finite polynomial coefficient");
  size_t n = c.size();
  if (n == 0) return {};
  if (n == 1) return {cd(-c[0], 0.0)};

  // Cauchy bound for the initial circle radius
  double bound = 0.0;
  for (double ck : c) bound = std::max(bound, std::abs(ck));
  double radius = 1.0 + bound;

  std::vector<cd> z(n);
  for (size_t k = 0; k < n; ++k) {
    double ang = 2.0 * M_PI * double(k) / double(n) + 0.4;
    z[k] = radius * cd(std::cos(ang), std::sin(ang));
  }

  // Durand-Kerner: z_k <- z_k - p(z_k) / prod_{j!=k} (z_k - z_j)
  const int max_iter = 400;
  for (int it = 0; it < max_iter; ++it) {
    double step = 0.0;
    for (size_t k = 0; k < n; ++k) {
      cd num = eval_poly(c, z[k]);
      cd den(1.0, 0.0);
      for (size_t j = 0; j < n; ++j)
        if (j != k) den *= (z[k] - z[j]);
      if (std::abs(den) < 1e-300) {
        den = cd(1e-300, 0.0);
      }
      cd d = num / den;
      z[k] -= d;
      step = std::max(step, std::abs(d));
    }
    if (step < 1e-14) break;
  }
  // Newton polish tightens each root independently
  for (size_t k = 0; k < n; ++k) {
    for (int it = 0; it < 4; ++it) {
      cd d = eval_deriv(c, z[k]);
      if (std::abs(d) < 1e-300) break;
      z[k] -= eval_poly(c, z[k]) / d;
    }
  }

  if (root_residual(c, z) < 1e-6) return z;

  std::vector<cd> fallback = companion_roots(c);
  double res = root_residual(c, fallback);
  if (res < 1e-6) return fallback;
  throw NumericError("root refinement did not converge; residual " + std::to_string(res));
}

}  // namespace spanon

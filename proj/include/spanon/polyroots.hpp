#pragma once

#include <complex>
#include <vector>

#include "spanon/common.hpp"

namespace spanon {

// All roots of the monic polynomial x^n + c[0]*x^(n-1) + ... + c[n-1].
// Iterative simultaneous refinement (Durand-Kerner) polished by Newton steps;
// falls back to an Eigen companion-matrix solve if the residual gate fails,
// and throws NumericError (with the residual) if both fail.
std::vector<std::complex<double>> monic_roots(const std::vector<double>& coeffs);

// max_i |p(root_i)| / max(1, |root_i|^n) -- the scaled residual used as the
// convergence gate.
double root_residual(const std::vector<double>& coeffs, const std::vector<std::complex<double>>& roots);

}  // namespace spanon

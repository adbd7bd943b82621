#pragma once

#include <array>
#include <vector>

namespace stainbench {

/// Dense symmetric matrix helpers used by the Fréchet distance and the
/// teacher parameter validation. Row-major square matrices of doubles.

struct EigenDecomposition {
    std::vector<double> values;   // ascending
    std::vector<double> vectors;  // column k of the row-major matrix is eigenvector k
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. The input is
/// symmetrized first; tolerance 1e-12 on off-diagonal mass relative to the
/// Frobenius norm.
EigenDecomposition symmetric_eigen(const std::vector<double>& mat, int dim);

/// Symmetric positive semidefinite square root; negative eigenvalues
/// (numerical noise) are clipped to zero.
std::vector<double> spd_sqrt(const std::vector<double>& mat, int dim);

std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b, int dim);

double trace(const std::vector<double>& mat, int dim);

double det3(const std::array<double, 9>& m);

std::array<double, 9> inverse3(const std::array<double, 9>& m);

/// Spectral condition number via the singular values of a 3x3 matrix.
double cond3(const std::array<double, 9>& m);

}  // namespace stainbench

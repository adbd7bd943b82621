#include "stainbench/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stainbench/errors.hpp"

namespace stainbench {

EigenDecomposition symmetric_eigen(const std::vector<double>& mat, int dim) {
    if (mat.size() != static_cast<std::size_t>(dim) * dim) {
        throw ShapeError("symmetric_eigen: matrix size does not match dim " + std::to_string(dim));
    }
    std::vector<double> a(mat.size());
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            a[i * dim + j] = 0.5 * (mat[i * dim + j] + mat[j * dim + i]);
        }
    }
    std::vector<double> v(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) v[i * dim + i] = 1.0;

    double frob = 0.0;
    for (const double x : a) frob += x * x;
    frob = std::sqrt(frob);
    const double tol = frob > 0 ? 1e-12 * frob : 1e-300;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < dim; ++p) {
            for (int q = p + 1; q < dim; ++q) off += a[p * dim + q] * a[p * dim + q];
        }
        if (std::sqrt(2.0 * off) <= tol) break;

        for (int p = 0; p < dim; ++p) {
            for (int q = p + 1; q < dim; ++q) {
                const double apq = a[p * dim + q];
                if (std::abs(apq) <= tol / dim) continue;
                const double app = a[p * dim + p];
                const double aqq = a[q * dim + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < dim; ++k) {
                    const double akp = a[k * dim + p];
                    const double akq = a[k * dim + q];
                    a[k * dim + p] = c * akp - s * akq;
                    a[k * dim + q] = s * akp + c * akq;
                }
                for (int k = 0; k < dim; ++k) {
                    const double apk = a[p * dim + k];
                    const double aqk = a[q * dim + k];
                    a[p * dim + k] = c * apk - s * aqk;
                    a[q * dim + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < dim; ++k) {
                    const double vkp = v[k * dim + p];
                    const double vkq = v[k * dim + q];
                    v[k * dim + p] = c * vkp - s * vkq;
                    v[k * dim + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenDecomposition r;
    r.values.resize(dim);
    for (int i = 0; i < dim; ++i) r.values[i] = a[i * dim + i];

    std::vector<int> order(dim);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return r.values[x] < r.values[y]; });

    EigenDecomposition sorted;
    sorted.values.resize(dim);
    sorted.vectors.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int k = 0; k < dim; ++k) {
        sorted.values[k] = r.values[order[k]];
        for (int i = 0; i < dim; ++i) sorted.vectors[i * dim + k] = v[i * dim + order[k]];
    }
    return sorted;
}

std::vector<double> spd_sqrt(const std::vector<double>& mat, int dim) {
    EigenDecomposition eig = symmetric_eigen(mat, dim);
    for (double& lambda : eig.values) lambda = lambda > 0 ? std::sqrt(lambda) : 0.0;
    // V * diag(sqrt(lambda)) * V^T
    std::vector<double> out(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k) {
                s += eig.vectors[i * dim + k] * eig.values[k] * eig.vectors[j * dim + k];
            }
            out[i * dim + j] = s;
        }
    }
    return out;
}

std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b, int dim) {
    std::vector<double> out(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) {
        for (int k = 0; k < dim; ++k) {
            const double aik = a[i * dim + k];
            if (aik == 0.0) continue;
            for (int j = 0; j < dim; ++j) out[i * dim + j] += aik * b[k * dim + j];
        }
    }
    return out;
}

double trace(const std::vector<double>& mat, int dim) {
    double t = 0.0;
    for (int i = 0; i < dim; ++i) t += mat[i * dim + i];
    return t;
}

double det3(const std::array<double, 9>& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

std::array<double, 9> inverse3(const std::array<double, 9>& m) {
    const double d = det3(m);
    if (d == 0.0) throw ConfigError("inverse3: singular matrix");
    const double inv = 1.0 / d;
    return {
        (m[4] * m[8] - m[5] * m[7]) * inv, (m[2] * m[7] - m[1] * m[8]) * inv,
        (m[1] * m[5] - m[2] * m[4]) * inv, (m[5] * m[6] - m[3] * m[8]) * inv,
        (m[0] * m[8] - m[2] * m[6]) * inv, (m[2] * m[3] - m[0] * m[5]) * inv,
        (m[3] * m[7] - m[4] * m[6]) * inv, (m[1] * m[6] - m[0] * m[7]) * inv,
        (m[0] * m[4] - m[1] * m[3]) * inv,
    };
}

double cond3(const std::array<double, 9>& m) {
    // singular values are sqrt of eigenvalues of M^T M
    std::vector<double> mtm(9, 0.0);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[k * 3 + i] * m[k * 3 + j];
            mtm[i * 3 + j] = s;
        }
    }
    const EigenDecomposition eig = symmetric_eigen(mtm, 3);
    const double lo = eig.values.front();
    const double hi = eig.values.back();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(hi / lo);
}

}  // namespace stainbench

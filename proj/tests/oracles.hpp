// Independent reference solvers used by unit and acceptance tests.
#ifndef VH_TESTS_ORACLES_HPP
#define VH_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "vh/common.hpp"

namespace vh::oracle {

/// Least squares with intercept via column-pivoted QR of [1 X].
/// Returns [intercept, w...].
inline Vector ols_qr(const Matrix& X, const Vector& y) {
    Matrix A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X;
    return A.colPivHouseholderQr().solve(y);
}

/// Projection of v onto {0 <= z <= C, a'z = 0} with a_t = +-1, by bisection
/// on the multiplier of the equality.
inline Vector project_box_hyperplane(const Vector& v, const Vector& a, double C) {
    const auto g = [&](double lambda) { return a.dot((v - lambda * a).cwiseMax(0.0).cwiseMin(C)); };
    double lo = -1.0, hi = 1.0;
    while (g(lo) < 0.0) lo *= 2.0;
    while (g(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return (v - 0.5 * (lo + hi) * a).cwiseMax(0.0).cwiseMin(C);
}

/// Accelerated projected gradient on the 2n-variable epsilon-SVR dual.
/// Returns beta = alpha - alpha*.
inline Vector svr_dual_pg(const Matrix& K, const Vector& y, double C, double eps, bool equality = true,
                          int iterations = 200000) {
    const Eigen::Index n = K.rows();
    Matrix Q(2 * n, 2 * n);
    Q << K, -K, -K, K;
    Vector p(2 * n);
    p << (eps - y.array()).matrix(), (eps + y.array()).matrix();
    Vector a(2 * n);
    a << Vector::Ones(n), -Vector::Ones(n);
    const double L = std::max(Eigen::SelfAdjointEigenSolver<Matrix>(Q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff(),
                              1e-12);
    const auto project = [&](const Vector& v) {
        return equality ? project_box_hyperplane(v, a, C) : Vector(v.cwiseMax(0.0).cwiseMin(C));
    };
    Vector z = Vector::Zero(2 * n), z_prev = z, w = z;
    double t = 1.0;
    for (int it = 0; it < iterations; ++it) {
        z_prev = z;
        z = project(w - (Q * w + p) / L);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        w = z + ((t - 1.0) / t_next) * (z - z_prev);
        t = t_next;
    }
    return z.head(n) - z.tail(n);
}

}  // namespace vh::oracle

#endif  // VH_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "detail.hpp"
#include "vh/models.hpp"

namespace vh {

double linear_svr_objective(const LinearParams& p, const Matrix& X, const Vector& y, const LinearSvrParams& params) {
    const double s = params.intercept_scaling;
    // The intercept is the weight of a constant column of value s.
    const double bias_weight = s != 0.0 ? p.intercept / s : 0.0;
    const Vector residual = (y - X * p.weights).array() - p.intercept;
    const double loss = (residual.array().abs() - params.epsilon).max(0.0).sum();
    return 0.5 * (p.weights.squaredNorm() + bias_weight * bias_weight) + params.C * loss;
}

FittedModel fit_svr_linear(const Matrix& X, const Vector& y, const LinearSvrParams& params, std::uint64_t seed) {
    detail::check_training_data(X, y, "fit_svr_linear", 1);
    if (params.C <= 0.0 || params.epsilon < 0.0 || params.max_iter < 0) {
        throw Error("bad_config", "fit_svr_linear: C must be positive, epsilon and max_iter nonnegative");
    }
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    const double s = params.intercept_scaling;

    // Augmented rows [x, s]; the last weight carries the intercept.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> A(n, d + 1);
    A.leftCols(d) = X;
    A.col(d).setConstant(s);
    const Vector diag = A.rowwise().squaredNorm();

    Vector beta = Vector::Zero(n);
    Vector w = Vector::Zero(d + 1);
    const auto to_params = [&](const Vector& wa) { return LinearParams{wa.head(d), wa(d) * s}; };

    FittedModel model;
    model.spec.family = Family::SVRLinear;
    model.spec.seed = seed;
    model.spec.linear_svr = params;
    model.n_features = d;
    model.info.converged = false;

    LinearParams best = to_params(w);
    double best_obj = linear_svr_objective(best, X, y, params);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(seed);

    const double upper = params.C;
    const double p_eps = params.epsilon;
    double initial_norm = 0.0;
    int iter = 0;
    while (iter < params.max_iter) {
        rng.shuffle(order.begin(), order.end());
        double violation_norm = 0.0;
        for (const auto i : order) {
            const double H = diag(i);
            if (H <= 0.0) continue;
            const double G = A.row(i).dot(w) - y(i);
            const double Gp = G + p_eps;
            const double Gn = G - p_eps;
            double violation = 0.0;
            if (beta(i) == 0.0) {
                if (Gp < 0.0) violation = -Gp;
                else if (Gn > 0.0) violation = Gn;
            } else if (beta(i) >= upper) {
                if (Gp > 0.0) violation = Gp;
            } else if (beta(i) <= -upper) {
                if (Gn < 0.0) violation = -Gn;
            } else if (beta(i) > 0.0) {
                violation = std::abs(Gp);
            } else {
                violation = std::abs(Gn);
            }
            violation_norm += violation;

            // Newton step on the one-variable piecewise quadratic.
            double step;
            if (Gp < H * beta(i)) step = -Gp / H;
            else if (Gn > H * beta(i)) step = -Gn / H;
            else step = -beta(i);
            if (std::abs(step) < 1e-12) continue;
            const double old = beta(i);
            beta(i) = std::clamp(beta(i) + step, -upper, upper);
            const double delta = beta(i) - old;
            if (delta != 0.0) w += delta * A.row(i).transpose();
        }
        if (iter == 0) initial_norm = violation_norm;
        ++iter;

        if (!w.allFinite()) throw Error("diverged", "fit_svr_linear: non-finite weights at iteration " + std::to_string(iter));
        const auto current = to_params(w);
        const double obj = linear_svr_objective(current, X, y, params);
        if (obj < best_obj) {
            best_obj = obj;
            best = current;
        }
        if (violation_norm <= params.tol * initial_norm) {
            model.info.converged = true;
            break;
        }
    }
    model.info.iterations = iter;
    model.info.objective = best_obj;
    model.params = std::move(best);
    return model;
}

}  // namespace vh

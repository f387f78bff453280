#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "detail.hpp"
#include "vh/models.hpp"

namespace vh {

FittedModel fit_sgd(const Matrix& X, const Vector& y, const SgdParams& params, std::uint64_t seed) {
    detail::check_training_data(X, y, "fit_sgd", 1);
    if (params.eta0 <= 0.0 || params.alpha < 0.0 || params.max_epochs < 0) {
        throw Error("bad_config", "fit_sgd: eta0 must be positive, alpha and max_epochs nonnegative");
    }
    constexpr double kMaxDloss = 1e12;

    const Eigen::Index n = X.rows();
    // Row access dominates the inner loop.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = X;

    Vector w = Vector::Zero(X.cols());
    double b = 0.0;
    double t = 1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    int no_improvement = 0;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(seed);

    FittedModel model;
    model.spec.family = Family::SGD;
    model.spec.seed = seed;
    model.spec.sgd = params;
    model.n_features = X.cols();
    model.info.converged = false;

    int epoch = 0;
    for (; epoch < params.max_epochs; ++epoch) {
        if (params.shuffle) rng.shuffle(order.begin(), order.end());
        double sum_loss = 0.0;
        for (const auto i : order) {
            const auto x = rows.row(i);
            const double p = x.dot(w) + b;
            const double eta = params.eta0 / std::pow(t, params.power_t);
            const double diff = p - y(i);
            sum_loss += 0.5 * diff * diff;
            const double update = -eta * std::clamp(diff, -kMaxDloss, kMaxDloss);
            w *= std::max(0.0, 1.0 - eta * params.alpha);
            if (update != 0.0) {
                w += update * x.transpose();
                b += update;
            }
            t += 1.0;
        }
        if (!w.allFinite() || !std::isfinite(b) || !std::isfinite(sum_loss)) {
            throw Error("diverged", "fit_sgd: non-finite weights at epoch " + std::to_string(epoch + 1));
        }
        model.info.objective = sum_loss / static_cast<double>(n);
        if (sum_loss > best_loss - params.tol * static_cast<double>(n)) ++no_improvement;
        else no_improvement = 0;
        best_loss = std::min(best_loss, sum_loss);
        if (no_improvement >= params.n_iter_no_change) {
            model.info.converged = true;
            ++epoch;
            break;
        }
    }
    model.info.iterations = epoch;
    model.params = LinearParams{std::move(w), b};
    return model;
}

}  // namespace vh

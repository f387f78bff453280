#ifndef VH_MODELS_HPP
#define VH_MODELS_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "vh/common.hpp"

namespace vh {

enum class Family { OLS, SGD, SVRLinear, SVRRBF };

std::string_view to_string(Family f);
Family parse_family(std::string_view s);

struct OlsParams {
    double ridge_fallback = 1e-8;
};

/// Squared loss, L2 penalty, inverse-scaling step eta0 / t^power_t where t
/// counts single-sample updates. Stops once the epoch-mean loss has failed
/// to beat the best seen by `tol` for `n_iter_no_change` epochs.
struct SgdParams {
    double alpha = 1e-4;
    double eta0 = 0.01;
    double power_t = 0.25;
    int max_epochs = 1000;
    double tol = 1e-3;
    int n_iter_no_change = 5;
    bool shuffle = true;
};

/// Epsilon-insensitive (L1) loss with an intercept column of value
/// `intercept_scaling` that is regularized like any other weight.
struct LinearSvrParams {
    double C = 1.0;
    double epsilon = 0.0;
    double tol = 1e-4;
    int max_iter = 4000;
    double intercept_scaling = 1.0;
};

struct SvrParams {
    double C = 1.0;
    double epsilon = 0.1;
    /// Fixed kernel width; nullopt selects 1 / (d * Var(X)).
    std::optional<double> gamma;
    double tol = 1e-3;
    /// Iteration cap is max_passes * 2n working-pair updates.
    long max_passes = 1000;
    double cache_mb = 256.0;
};

struct RegressorSpec {
    Family family = Family::OLS;
    std::uint64_t seed = 42;
    OlsParams ols;
    SgdParams sgd;
    LinearSvrParams linear_svr;
    SvrParams svr;
};

struct LinearParams {
    Vector weights;
    double intercept = 0.0;
};

struct KernelParams {
    Matrix support_vectors;  // one row per support vector
    Vector dual_coef;        // alpha - alpha*, in [-C, C]
    std::vector<Eigen::Index> support_indices;  // training-row index of each support vector
    double intercept = 0.0;
    double gamma = 1.0;
};

struct FitInfo {
    bool converged = true;
    long iterations = 0;
    /// SVR-RBF: maximal KKT violation (m - M gap) at exit.
    double max_kkt_violation = 0.0;
    /// SGD: epoch-mean loss; linear SVR: primal objective; RBF: dual objective.
    double objective = std::numeric_limits<double>::quiet_NaN();
    bool ridge_fallback = false;
};

struct FittedModel {
    RegressorSpec spec;
    std::variant<LinearParams, KernelParams> params;
    FitInfo info;
    Eigen::Index n_features = 0;
    std::vector<std::string> layout;

    Family family() const { return spec.family; }
};

/// Least squares with intercept. The centered Gram system is solved by
/// Cholesky; a ridge of `ridge_fallback` is added when it is singular.
FittedModel fit_ols(const Matrix& X, const Vector& y, const OlsParams& params = {});
FittedModel fit_sgd(const Matrix& X, const Vector& y, const SgdParams& params = {}, std::uint64_t seed = 42);
/// Dual coordinate descent in a seeded random order, capped at
/// params.max_iter outer passes. The best primal iterate is returned.
FittedModel fit_svr_linear(const Matrix& X, const Vector& y, const LinearSvrParams& params = {},
                           std::uint64_t seed = 42);
/// Epsilon-SVR with RBF kernel solved by SMO.
FittedModel fit_svr_rbf(const Matrix& X, const Vector& y, const SvrParams& params = {});

FittedModel fit(const RegressorSpec& spec, const Matrix& X, const Vector& y);

/// Raw (unclamped) predictions.
Vector predict(const FittedModel& model, const Eigen::Ref<const Matrix>& X);

/// 1 / (d * Var(X)) over all entries, or 1 when X is constant.
double scale_gamma(const Matrix& X);
double resolve_gamma(const SvrParams& params, const Matrix& X);

/// exp(-gamma * ||a_i - b_j||^2) for all row pairs.
Matrix rbf_kernel(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B, double gamma);

/// -1/2 b'Kb + y'b - eps * |b|_1 (maximized by the SVR dual).
double svr_dual_objective(const Matrix& K, const Vector& y, const Vector& beta, double epsilon);

/// 1/2 (|w|^2 + b^2) + C * sum max(0, |y - Xw - b| - eps) with the intercept scaled.
double linear_svr_objective(const LinearParams& p, const Matrix& X, const Vector& y, const LinearSvrParams& params);

struct KktReport {
    bool box_feasible = true;
    double coef_sum = 0.0;
    std::size_t violations = 0;
    double worst = 0.0;  // largest amount by which a condition is missed
    bool ok(double equality_tol = 1e-6) const {
        return box_feasible && std::abs(coef_sum) <= equality_tol && violations == 0;
    }
};

/// KKT conditions of an RBF model against its training data: box and
/// equality feasibility; coef 0 => |r| <= eps + tol; |coef| = C => |r| >= eps - tol;
/// free coef => ||r| - eps| <= tol.
KktReport check_kkt(const FittedModel& model, const Matrix& X, const Vector& y, double tol);

/// Dual coefficients over all training rows (zeros for non-support rows).
Vector full_dual_coef(const KernelParams& p, Eigen::Index n_train);

/// Self-describing JSON with family, hyperparameters, seed, layout and
/// parameters. Doubles are written in shortest round-trip form.
std::string serialize_model(const FittedModel& model);
/// Family, seed and hyperparameters only.
std::string serialize_spec(const RegressorSpec& spec);
FittedModel deserialize_model(std::string_view json);

}  // namespace vh

#endif  // VH_MODELS_HPP

#include <Eigen/Cholesky>

#include "detail.hpp"
#include "vh/models.hpp"

namespace vh {

FittedModel fit_ols(const Matrix& X, const Vector& y, const OlsParams& params) {
    detail::check_training_data(X, y, "fit_ols", 1);

    const RowVector x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Matrix Xc = X.rowwise() - x_mean;
    const Vector yc = y.array() - y_mean;

    Matrix gram = Xc.transpose() * Xc;
    const Vector rhs = Xc.transpose() * yc;

    FittedModel model;
    model.spec.family = Family::OLS;
    model.spec.ols = params;
    model.n_features = X.cols();

    Vector w;
    Eigen::LLT<Matrix> llt(gram);
    // rcond() of the LLT estimates the reciprocal condition number of the Gram matrix.
    const bool singular = gram.cols() > 0 && (llt.info() != Eigen::Success || llt.rcond() < 1e-13);
    if (!singular) {
        w = llt.solve(rhs);
    } else {
        gram.diagonal().array() += params.ridge_fallback;
        Eigen::LDLT<Matrix> ldlt(gram);
        w = ldlt.solve(rhs);
        model.info.ridge_fallback = true;
    }
    if (!w.allFinite()) throw Error("non_finite", "fit_ols: non-finite coefficients");

    LinearParams p;
    p.weights = w;
    p.intercept = y_mean - x_mean.dot(w);
    model.params = std::move(p);
    return model;
}

}  // namespace vh

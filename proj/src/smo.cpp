// Epsilon-SVR trained by sequential minimal optimization.
//
// The dual is written over 2n variables a_t in [0, C]: t < n are the alpha_i
// with label z_t = +1, t >= n the alpha*_i with z_t = -1. With
// Q_tu = z_t z_u K(t mod n, u mod n) and p_t = eps - y_i (t < n),
// eps + y_i (t >= n), SMO minimizes 1/2 a'Qa + p'a subject to z'a = 0.
//
// Working pair: i maximizes -z G over I_up, j maximizes z G over I_low
// (the maximal violating pair; lowest index wins ties). Stop when the
// violation m - M falls below tol.

#include <algorithm>
#include <cmath>
#include <limits>

#include "detail.hpp"
#include "kernel_cache.hpp"
#include "vh/models.hpp"

namespace vh {

namespace detail {

KernelCache::KernelCache(const Matrix& X, double gamma, std::size_t max_bytes)
    : X_(X), sq_norms_(X.rowwise().squaredNorm()), gamma_(gamma) {
    const std::size_t row_bytes = static_cast<std::size_t>(std::max<Eigen::Index>(X.rows(), 1)) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, max_bytes / row_bytes);
    slots_.resize(static_cast<std::size_t>(X.rows()));
}

std::span<const double> KernelCache::row(Eigen::Index i) {
    auto& slot = slots_[static_cast<std::size_t>(i)];
    if (slot.present) {
        ++hits_;
        lru_.splice(lru_.begin(), lru_, slot.position);
        return {slot.values.data(), static_cast<std::size_t>(slot.values.size())};
    }
    ++misses_;
    if (lru_.size() >= capacity_) {
        auto& victim = slots_[static_cast<std::size_t>(lru_.back())];
        victim.values = Vector();
        victim.present = false;
        lru_.pop_back();
    }
    Vector dist = (sq_norms_.array() + sq_norms_(i)).matrix() - 2.0 * (X_ * X_.row(i).transpose());
    slot.values = (-gamma_ * dist.array().max(0.0)).exp().matrix();
    slot.values(i) = 1.0;
    lru_.push_front(i);
    slot.position = lru_.begin();
    slot.present = true;
    return {slot.values.data(), static_cast<std::size_t>(slot.values.size())};
}

}  // namespace detail

double scale_gamma(const Matrix& X) {
    if (X.size() == 0) return 1.0;
    const double mean = X.mean();
    const double var = (X.array() - mean).square().mean();
    return var > 0.0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0;
}

double resolve_gamma(const SvrParams& params, const Matrix& X) {
    const double g = params.gamma ? *params.gamma : scale_gamma(X);
    if (!(g > 0.0) || !std::isfinite(g)) throw Error("bad_config", "SVR gamma must be positive");
    return g;
}

Matrix rbf_kernel(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B, double gamma) {
    if (A.cols() != B.cols()) throw Error("dim_mismatch", "rbf_kernel: column counts differ");
    Matrix dist = -2.0 * (A * B.transpose());
    dist.colwise() += A.rowwise().squaredNorm();
    dist.rowwise() += B.rowwise().squaredNorm().transpose();
    return (-gamma * dist.array().max(0.0)).exp().matrix();
}

double svr_dual_objective(const Matrix& K, const Vector& y, const Vector& beta, double epsilon) {
    return -0.5 * beta.dot(K * beta) + y.dot(beta) - epsilon * beta.lpNorm<1>();
}

FittedModel fit_svr_rbf(const Matrix& X, const Vector& y, const SvrParams& params) {
    detail::check_training_data(X, y, "fit_svr_rbf", 2);
    if (!(params.C > 0.0) || params.epsilon < 0.0 || !(params.tol > 0.0) || params.max_passes < 0) {
        throw Error("bad_config", "fit_svr_rbf: C and tol must be positive, epsilon and max_passes nonnegative");
    }
    const Eigen::Index n = X.rows();
    const Eigen::Index l = 2 * n;
    const double C = params.C;
    const double gamma = resolve_gamma(params, X);
    constexpr double kTau = 1e-12;

    detail::KernelCache cache(X, gamma, static_cast<std::size_t>(params.cache_mb * 1024.0 * 1024.0));

    const auto sign = [n](Eigen::Index t) { return t < n ? 1.0 : -1.0; };
    const auto point = [n](Eigen::Index t) { return t < n ? t : t - n; };

    Vector alpha = Vector::Zero(l);
    Vector grad(l);
    for (Eigen::Index i = 0; i < n; ++i) {
        grad(i) = params.epsilon - y(i);
        grad(i + n) = params.epsilon + y(i);
    }
    const auto in_up = [&](Eigen::Index t) { return sign(t) > 0 ? alpha(t) < C : alpha(t) > 0.0; };
    const auto in_low = [&](Eigen::Index t) { return sign(t) > 0 ? alpha(t) > 0.0 : alpha(t) < C; };

    const long max_iter = params.max_passes * static_cast<long>(l);
    long iter = 0;
    double gap = std::numeric_limits<double>::infinity();
    bool converged = false;

    while (true) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        Eigen::Index j = -1;
        for (Eigen::Index t = 0; t < l; ++t) {
            const double zg = sign(t) * grad(t);
            if (in_up(t) && -zg > gmax) {
                gmax = -zg;
                i = t;
            }
            if (in_low(t) && zg > gmax2) {
                gmax2 = zg;
                j = t;
            }
        }
        gap = gmax + gmax2;
        if (i < 0 || j < 0 || gap < params.tol) {
            converged = true;
            if (i < 0 || j < 0) gap = 0.0;
            break;
        }
        if (iter >= max_iter) break;
        ++iter;

        const auto Ki = cache.row(point(i));
        const auto Kj = cache.row(point(j));
        const double zi = sign(i);
        const double zj = sign(j);
        const double Kij = Ki[static_cast<std::size_t>(point(j))];
        const double Qij = zi * zj * Kij;
        const double old_i = alpha(i);
        const double old_j = alpha(j);

        if (zi != zj) {
            double quad = 2.0 + 2.0 * Qij;  // K_ii = K_jj = 1
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0.0) {
                if (alpha(j) < 0.0) {
                    alpha(j) = 0.0;
                    alpha(i) = diff;
                }
            } else if (alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = -diff;
            }
            if (diff > 0.0) {
                if (alpha(i) > C) {
                    alpha(i) = C;
                    alpha(j) = C - diff;
                }
            } else if (alpha(j) > C) {
                alpha(j) = C;
                alpha(i) = C + diff;
            }
        } else {
            double quad = 2.0 - 2.0 * Qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > C) {
                if (alpha(i) > C) {
                    alpha(i) = C;
                    alpha(j) = sum - C;
                }
            } else if (alpha(j) < 0.0) {
                alpha(j) = 0.0;
                alpha(i) = sum;
            }
            if (sum > C) {
                if (alpha(j) > C) {
                    alpha(j) = C;
                    alpha(i) = sum - C;
                }
            } else if (alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = sum;
            }
        }

        const double di = alpha(i) - old_i;
        const double dj = alpha(j) - old_j;
        // G_t += Q_ti di + Q_tj dj, with Q_ti = z_t z_i K(t mod n, i mod n).
        const double ci = zi * di;
        const double cj = zj * dj;
        for (Eigen::Index u = 0; u < n; ++u) {
            const double change = Ki[static_cast<std::size_t>(u)] * ci + Kj[static_cast<std::size_t>(u)] * cj;
            grad(u) += change;
            grad(u + n) -= change;
        }
    }

    // Intercept: average over free variables, else midpoint of the bounds.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    long n_free = 0;
    for (Eigen::Index t = 0; t < l; ++t) {
        const double zg = sign(t) * grad(t);
        const bool at_upper = alpha(t) >= C;
        const bool at_lower = alpha(t) <= 0.0;
        if (at_upper) {
            if (sign(t) < 0) ub = std::min(ub, zg);
            else lb = std::max(lb, zg);
        } else if (at_lower) {
            if (sign(t) > 0) ub = std::min(ub, zg);
            else lb = std::max(lb, zg);
        } else {
            ++n_free;
            sum_free += zg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

    KernelParams kp;
    kp.gamma = gamma;
    kp.intercept = -rho;
    const Vector beta = alpha.head(n) - alpha.tail(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (beta(i) != 0.0) kp.support_indices.push_back(i);
    }
    const auto n_sv = static_cast<Eigen::Index>(kp.support_indices.size());
    kp.support_vectors.resize(n_sv, X.cols());
    kp.dual_coef.resize(n_sv);
    for (Eigen::Index k = 0; k < n_sv; ++k) {
        const auto i = kp.support_indices[static_cast<std::size_t>(k)];
        kp.support_vectors.row(k) = X.row(i);
        kp.dual_coef(k) = beta(i);
    }

    FittedModel model;
    model.spec.family = Family::SVRRBF;
    model.spec.svr = params;
    model.n_features = X.cols();
    model.info.converged = converged;
    model.info.iterations = iter;
    model.info.max_kkt_violation = gap;
    // Dual objective from the gradient: a'Qa = a'(G - p) summed over both halves.
    {
        Vector p(l);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = params.epsilon - y(i);
            p(i + n) = params.epsilon + y(i);
        }
        model.info.objective = -(0.5 * alpha.dot(grad - p) + p.dot(alpha));
    }
    if (!std::isfinite(kp.intercept) || !kp.dual_coef.allFinite()) {
        throw Error("non_finite", "fit_svr_rbf: non-finite solution");
    }
    model.params = std::move(kp);
    return model;
}

Vector full_dual_coef(const KernelParams& p, Eigen::Index n_train) {
    Vector beta = Vector::Zero(n_train);
    for (std::size_t k = 0; k < p.support_indices.size(); ++k) {
        beta(p.support_indices[k]) = p.dual_coef(static_cast<Eigen::Index>(k));
    }
    return beta;
}

KktReport check_kkt(const FittedModel& model, const Matrix& X, const Vector& y, double tol) {
    const auto* kp = std::get_if<KernelParams>(&model.params);
    if (kp == nullptr) throw Error("wrong_family", "check_kkt needs an RBF model");
    const double C = model.spec.svr.C;
    const double eps = model.spec.svr.epsilon;
    const Vector beta = full_dual_coef(*kp, X.rows());
    const Vector residual = y - predict(model, X);

    KktReport report;
    report.coef_sum = beta.sum();
    const double bound_tol = 1e-12 * C;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double b = std::abs(beta(i));
        const double r = std::abs(residual(i));
        if (b > C + bound_tol) report.box_feasible = false;
        double miss = 0.0;
        if (b <= bound_tol) miss = r - (eps + tol);
        else if (b >= C - bound_tol) miss = (eps - tol) - r;
        else miss = std::abs(r - eps) - tol;
        if (miss > 0.0) {
            ++report.violations;
            report.worst = std::max(report.worst, miss);
        }
    }
    return report;
}

}  // namespace vh

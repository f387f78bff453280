#include "vh/models.hpp"

#include <cmath>

#include <json.hpp>

namespace vh {

using nlohmann::json;

std::string_view to_string(Family f) {
    switch (f) {
        case Family::OLS: return "ols";
        case Family::SGD: return "sgd";
        case Family::SVRLinear: return "svr_linear";
        case Family::SVRRBF: return "svr_rbf";
    }
    return "?";
}

Family parse_family(std::string_view s) {
    for (auto f : {Family::OLS, Family::SGD, Family::SVRLinear, Family::SVRRBF}) {
        if (to_string(f) == s) return f;
    }
    throw Error("bad_config", "unknown model family '" + std::string(s) + "'");
}

FittedModel fit(const RegressorSpec& spec, const Matrix& X, const Vector& y) {
    FittedModel m;
    switch (spec.family) {
        case Family::OLS: m = fit_ols(X, y, spec.ols); break;
        case Family::SGD: m = fit_sgd(X, y, spec.sgd, spec.seed); break;
        case Family::SVRLinear: m = fit_svr_linear(X, y, spec.linear_svr, spec.seed); break;
        case Family::SVRRBF: m = fit_svr_rbf(X, y, spec.svr); break;
    }
    m.spec = spec;
    return m;
}

Vector predict(const FittedModel& model, const Eigen::Ref<const Matrix>& X) {
    if (X.rows() > 0 && X.cols() != model.n_features) {
        throw Error("dim_mismatch", "predict: expected " + std::to_string(model.n_features) + " columns, got " +
                                        std::to_string(X.cols()));
    }
    if (X.rows() == 0) return Vector(0);
    if (const auto* lp = std::get_if<LinearParams>(&model.params)) {
        return (X * lp->weights).array() + lp->intercept;
    }
    const auto& kp = std::get<KernelParams>(model.params);
    Vector out = Vector::Constant(X.rows(), kp.intercept);
    if (kp.dual_coef.size() == 0) return out;
    // Blocks of test rows bound the kernel block to chunk x n_sv.
    constexpr Eigen::Index kChunk = 256;
    for (Eigen::Index start = 0; start < X.rows(); start += kChunk) {
        const Eigen::Index rows = std::min(kChunk, X.rows() - start);
        const Matrix K = rbf_kernel(X.middleRows(start, rows), kp.support_vectors, kp.gamma);
        out.segment(start, rows) += K * kp.dual_coef;
    }
    return out;
}

// ------------------------------------------------------------ serialization

namespace {

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json spec_to_json(const RegressorSpec& s) {
    json j;
    j["family"] = to_string(s.family);
    j["seed"] = s.seed;
    switch (s.family) {
        case Family::OLS:
            j["hyperparams"] = {{"ridge_fallback", s.ols.ridge_fallback}};
            break;
        case Family::SGD:
            j["hyperparams"] = {{"alpha", s.sgd.alpha},           {"eta0", s.sgd.eta0},
                                {"power_t", s.sgd.power_t},       {"max_epochs", s.sgd.max_epochs},
                                {"tol", s.sgd.tol},               {"n_iter_no_change", s.sgd.n_iter_no_change},
                                {"shuffle", s.sgd.shuffle}};
            break;
        case Family::SVRLinear:
            j["hyperparams"] = {{"C", s.linear_svr.C},
                                {"epsilon", s.linear_svr.epsilon},
                                {"tol", s.linear_svr.tol},
                                {"max_iter", s.linear_svr.max_iter},
                                {"intercept_scaling", s.linear_svr.intercept_scaling}};
            break;
        case Family::SVRRBF:
            j["hyperparams"] = {{"C", s.svr.C},
                                {"epsilon", s.svr.epsilon},
                                {"gamma", s.svr.gamma ? json(*s.svr.gamma) : json("scale")},
                                {"tol", s.svr.tol},
                                {"max_passes", s.svr.max_passes},
                                {"cache_mb", s.svr.cache_mb}};
            break;
    }
    return j;
}

RegressorSpec spec_from_json(const json& j) {
    RegressorSpec s;
    s.family = parse_family(j.at("family").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& h = j.at("hyperparams");
    switch (s.family) {
        case Family::OLS:
            s.ols.ridge_fallback = h.at("ridge_fallback").get<double>();
            break;
        case Family::SGD:
            s.sgd.alpha = h.at("alpha").get<double>();
            s.sgd.eta0 = h.at("eta0").get<double>();
            s.sgd.power_t = h.at("power_t").get<double>();
            s.sgd.max_epochs = h.at("max_epochs").get<int>();
            s.sgd.tol = h.at("tol").get<double>();
            s.sgd.n_iter_no_change = h.at("n_iter_no_change").get<int>();
            s.sgd.shuffle = h.at("shuffle").get<bool>();
            break;
        case Family::SVRLinear:
            s.linear_svr.C = h.at("C").get<double>();
            s.linear_svr.epsilon = h.at("epsilon").get<double>();
            s.linear_svr.tol = h.at("tol").get<double>();
            s.linear_svr.max_iter = h.at("max_iter").get<int>();
            s.linear_svr.intercept_scaling = h.at("intercept_scaling").get<double>();
            break;
        case Family::SVRRBF:
            s.svr.C = h.at("C").get<double>();
            s.svr.epsilon = h.at("epsilon").get<double>();
            if (h.at("gamma").is_number()) s.svr.gamma = h.at("gamma").get<double>();
            s.svr.tol = h.at("tol").get<double>();
            s.svr.max_passes = h.at("max_passes").get<long>();
            s.svr.cache_mb = h.at("cache_mb").get<double>();
            break;
    }
    return s;
}

}  // namespace

std::string serialize_model(const FittedModel& model) {
    json j;
    j["format"] = "vh-model/1";
    j["spec"] = spec_to_json(model.spec);
    j["n_features"] = model.n_features;
    j["layout"] = model.layout;
    j["info"] = {{"converged", model.info.converged},
                 {"iterations", model.info.iterations},
                 {"max_kkt_violation", model.info.max_kkt_violation},
                 {"objective", std::isfinite(model.info.objective) ? json(model.info.objective) : json(nullptr)},
                 {"ridge_fallback", model.info.ridge_fallback}};
    if (const auto* lp = std::get_if<LinearParams>(&model.params)) {
        j["params"] = {{"kind", "linear"}, {"weights", vector_to_json(lp->weights)}, {"intercept", lp->intercept}};
    } else {
        const auto& kp = std::get<KernelParams>(model.params);
        json svs = json::array();
        for (Eigen::Index r = 0; r < kp.support_vectors.rows(); ++r) {
            svs.push_back(vector_to_json(kp.support_vectors.row(r).transpose()));
        }
        j["params"] = {{"kind", "kernel"},
                       {"gamma", kp.gamma},
                       {"intercept", kp.intercept},
                       {"dual_coef", vector_to_json(kp.dual_coef)},
                       {"support_indices", kp.support_indices},
                       {"support_vectors", std::move(svs)}};
    }
    return j.dump();
}

std::string serialize_spec(const RegressorSpec& spec) { return spec_to_json(spec).dump(); }

FittedModel deserialize_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error("malformed_json", std::string("model: ") + e.what());
    }
    try {
        if (j.at("format") != "vh-model/1") throw Error("bad_model", "unsupported model format");
        FittedModel m;
        m.spec = spec_from_json(j.at("spec"));
        m.n_features = j.at("n_features").get<Eigen::Index>();
        m.layout = j.at("layout").get<std::vector<std::string>>();
        const auto& info = j.at("info");
        m.info.converged = info.at("converged").get<bool>();
        m.info.iterations = info.at("iterations").get<long>();
        m.info.max_kkt_violation = info.at("max_kkt_violation").get<double>();
        if (!info.at("objective").is_null()) m.info.objective = info.at("objective").get<double>();
        m.info.ridge_fallback = info.at("ridge_fallback").get<bool>();
        const auto& p = j.at("params");
        if (p.at("kind") == "linear") {
            m.params = LinearParams{vector_from_json(p.at("weights")), p.at("intercept").get<double>()};
        } else {
            KernelParams kp;
            kp.gamma = p.at("gamma").get<double>();
            kp.intercept = p.at("intercept").get<double>();
            kp.dual_coef = vector_from_json(p.at("dual_coef"));
            kp.support_indices = p.at("support_indices").get<std::vector<Eigen::Index>>();
            const auto& svs = p.at("support_vectors");
            kp.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), m.n_features);
            for (std::size_t r = 0; r < svs.size(); ++r) {
                kp.support_vectors.row(static_cast<Eigen::Index>(r)) = vector_from_json(svs[r]).transpose();
            }
            m.params = std::move(kp);
        }
        return m;
    } catch (const json::exception& e) {
        throw Error("bad_model", std::string("model: ") + e.what());
    }
}

}  // namespace vh

#include "vh/features.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "vh/csv.hpp"

namespace vh {

void FeatureConfig::validate() const {
    if (!use_text && !use_zip_features) {
        throw Error("bad_config", "feature config needs text or zip features; sentiment alone is not a model input");
    }
}

ColumnLayout layout_for(const FeatureConfig& cfg, int embedding_dim) {
    cfg.validate();
    ColumnLayout layout;
    if (cfg.use_text) {
        for (int k = 0; k < embedding_dim; ++k) {
            layout.names.push_back("emb_" + std::to_string(k));
            layout.kinds.push_back(ColumnKind::Embedding);
        }
    }
    if (cfg.use_sentiment) {
        layout.names.emplace_back("sentiment");
        layout.kinds.push_back(ColumnKind::Sentiment);
    }
    if (cfg.use_zip_features) {
        for (const char* name : {"zhvi", "n_health", "n_edu", "n_pst"}) {
            layout.names.emplace_back(name);
            layout.kinds.push_back(ColumnKind::ZipFeature);
        }
    }
    return layout;
}

Vector assemble(const TweetEmbedding* embedding, std::optional<double> sentiment, const ZipFeatureRecord* zip,
                const FeatureConfig& cfg, int embedding_dim) {
    cfg.validate();
    const Eigen::Index n = (cfg.use_text ? embedding_dim : 0) + (cfg.use_sentiment ? 1 : 0) +
                           (cfg.use_zip_features ? 4 : 0);
    Vector out(n);
    Eigen::Index pos = 0;
    if (cfg.use_text) {
        if (embedding == nullptr) throw Error("missing_component", "assemble: embedding required");
        if (embedding->vector.size() != embedding_dim) {
            throw Error("dim_mismatch", "assemble: embedding has " + std::to_string(embedding->vector.size()) +
                                            " dims, expected " + std::to_string(embedding_dim));
        }
        out.segment(pos, embedding_dim) = embedding->vector;
        pos += embedding_dim;
    }
    if (cfg.use_sentiment) {
        if (!sentiment) throw Error("missing_component", "assemble: sentiment required");
        out(pos++) = *sentiment;
    }
    if (cfg.use_zip_features) {
        if (zip == nullptr) throw Error("missing_component", "assemble: zip features required");
        out(pos++) = zip->zhvi;
        out(pos++) = static_cast<double>(zip->n_health);
        out(pos++) = static_cast<double>(zip->n_edu);
        out(pos++) = static_cast<double>(zip->n_pst);
    }
    if (!out.allFinite()) throw Error("non_finite", "assemble: non-finite feature value");
    return out;
}

FeatureBuilder::FeatureBuilder(Matrix raw, ColumnLayout layout, StandardizationPolicy policy)
    : raw_(std::move(raw)), layout_(std::move(layout)), policy_(policy) {
    if (raw_.cols() != layout_.size()) {
        throw Error("dim_mismatch", "FeatureBuilder: matrix has " + std::to_string(raw_.cols()) +
                                        " columns, layout has " + std::to_string(layout_.size()));
    }
    for (Eigen::Index c = 0; c < layout_.size(); ++c) {
        if (policy_.applies_to(layout_.kinds[static_cast<std::size_t>(c)])) standardized_cols_.push_back(c);
    }
}

Matrix FeatureBuilder::gather(std::span<const std::size_t> rows) const {
    Matrix out(static_cast<Eigen::Index>(rows.size()), raw_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = raw_.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

StandardizationParams<Scalar> FeatureBuilder::fit(const Matrix& m) const {
    Matrix sub(m.rows(), static_cast<Eigen::Index>(standardized_cols_.size()));
    for (std::size_t k = 0; k < standardized_cols_.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = m.col(standardized_cols_[k]);
    return standardize_fit(sub);
}

void FeatureBuilder::standardize_in_place(Matrix& m, const StandardizationParams<Scalar>& p) const {
    for (std::size_t k = 0; k < standardized_cols_.size(); ++k) {
        const auto c = standardized_cols_[k];
        const auto kk = static_cast<Eigen::Index>(k);
        m.col(c).array() -= p.means(kk);
        if (p.stds(kk) > 0.0) m.col(c) /= p.stds(kk);
        else m.col(c).setZero();
    }
}

FeatureBuilder::TrainTest FeatureBuilder::build(std::span<const std::size_t> train_rows,
                                                std::span<const std::size_t> test_rows) const {
    TrainTest out{gather(train_rows), gather(test_rows)};
    if (standardized_cols_.empty()) return out;
    if (out.train.rows() == 0) throw Error("empty_matrix", "FeatureBuilder: empty training set");
    const auto train_params = fit(out.train);
    standardize_in_place(out.train, train_params);
    if (out.test.rows() > 0) {
        const auto test_params = policy_.mode == StandardizationMode::Separate ? fit(out.test) : train_params;
        standardize_in_place(out.test, test_params);
    }
    return out;
}

void write_feature_csv(std::ostream& out, const ColumnLayout& layout, const Matrix& values) {
    if (values.cols() != layout.size()) throw Error("dim_mismatch", "write_feature_csv: layout/matrix mismatch");
    for (Eigen::Index c = 0; c < layout.size(); ++c) out << (c ? "," : "") << layout.names[static_cast<std::size_t>(c)];
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << csv::format_double(values(r, c));
        out << '\n';
    }
}

Matrix read_feature_csv(std::istream& in, ColumnLayout* layout) {
    const auto table = csv::read(in);
    ColumnLayout l;
    for (const auto& name : table.header) {
        l.names.push_back(name);
        if (name.rfind("emb_", 0) == 0) l.kinds.push_back(ColumnKind::Embedding);
        else if (name == "sentiment") l.kinds.push_back(ColumnKind::Sentiment);
        else l.kinds.push_back(ColumnKind::ZipFeature);
    }
    Matrix m(static_cast<Eigen::Index>(table.rows.size()), l.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                csv::parse_double(table.rows[r][c], "feature csv line " + std::to_string(table.line_numbers[r]));
        }
    }
    if (layout != nullptr) *layout = std::move(l);
    return m;
}

}  // namespace vh

#ifndef VH_FEATURES_HPP
#define VH_FEATURES_HPP

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vh/common.hpp"
#include "vh/corpus.hpp"
#include "vh/embed.hpp"

namespace vh {

struct FeatureConfig {
    Representation representation = Representation::TextOnly;
    bool use_text = true;
    bool use_sentiment = false;
    bool use_zip_features = true;

    /// Requires use_text or use_zip_features.
    void validate() const;
};

enum class ColumnKind { Embedding, Sentiment, ZipFeature };

/// Ordered column descriptor: embedding dims, sentiment, zhvi, n_health,
/// n_edu, n_pst, each block present per FeatureConfig.
struct ColumnLayout {
    std::vector<std::string> names;
    std::vector<ColumnKind> kinds;

    Eigen::Index size() const { return static_cast<Eigen::Index>(names.size()); }
    friend bool operator==(const ColumnLayout&, const ColumnLayout&) = default;
};

ColumnLayout layout_for(const FeatureConfig& cfg, int embedding_dim = 300);

template <typename Scalar>
struct StandardizationParams {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> means;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> stds;
};

/// Per-column mean and population standard deviation.
template <typename Derived>
StandardizationParams<typename Derived::Scalar> standardize_fit(const Eigen::MatrixBase<Derived>& m) {
    using S = typename Derived::Scalar;
    if (m.rows() == 0) throw Error("empty_matrix", "standardize_fit needs at least one row");
    StandardizationParams<S> p;
    p.means = m.colwise().mean().transpose();
    p.stds = ((m.rowwise() - p.means.transpose()).array().square().colwise().sum() / static_cast<S>(m.rows()))
                 .sqrt()
                 .transpose();
    return p;
}

/// x' = (x - mean) / std per column; zero-std columns map to 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> standardize_apply(
    const Eigen::MatrixBase<Derived>& m, const StandardizationParams<typename Derived::Scalar>& p) {
    using S = typename Derived::Scalar;
    if (m.cols() != p.means.size()) {
        throw Error("dim_mismatch", "standardize_apply: matrix has " + std::to_string(m.cols()) +
                                        " columns, params have " + std::to_string(p.means.size()));
    }
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> out = m.rowwise() - p.means.transpose();
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        if (p.stds(c) > S(0)) out.col(c) /= p.stds(c);
        else out.col(c).setZero();
    }
    return out;
}

/// Where standardization parameters come from.
enum class StandardizationMode {
    Separate,    // fit on train and on test independently
    FitOnTrain,  // fit on train, apply to both
};

struct StandardizationPolicy {
    StandardizationMode mode = StandardizationMode::Separate;
    bool standardize_sentiment = true;
    bool standardize_embeddings = false;

    bool applies_to(ColumnKind k) const {
        switch (k) {
            case ColumnKind::Embedding: return standardize_embeddings;
            case ColumnKind::Sentiment: return standardize_sentiment;
            case ColumnKind::ZipFeature: return true;
        }
        return false;
    }
};

/// Concatenates the enabled blocks in layout order. Missing enabled
/// components raise `missing_component` naming the field.
Vector assemble(const TweetEmbedding* embedding, std::optional<double> sentiment, const ZipFeatureRecord* zip,
                const FeatureConfig& cfg, int embedding_dim = 300);

/// Unstandardized design matrix over a whole corpus for one config, and
/// train/test views standardized according to a policy.
class FeatureBuilder {
public:
    struct TrainTest {
        Matrix train;
        Matrix test;
    };

    FeatureBuilder(Matrix raw, ColumnLayout layout, StandardizationPolicy policy);

    const Matrix& raw() const { return raw_; }
    const ColumnLayout& layout() const { return layout_; }
    const StandardizationPolicy& policy() const { return policy_; }

    TrainTest build(std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows) const;

private:
    Matrix raw_;
    ColumnLayout layout_;
    StandardizationPolicy policy_;
    std::vector<Eigen::Index> standardized_cols_;

    Matrix gather(std::span<const std::size_t> rows) const;
    void standardize_in_place(Matrix& m, const StandardizationParams<Scalar>& p) const;
    StandardizationParams<Scalar> fit(const Matrix& m) const;
};

/// Header row of layout names, then one row per sample.
void write_feature_csv(std::ostream& out, const ColumnLayout& layout, const Matrix& values);
Matrix read_feature_csv(std::istream& in, ColumnLayout* layout = nullptr);

}  // namespace vh

#endif  // VH_FEATURES_HPP

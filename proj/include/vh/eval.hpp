#ifndef VH_EVAL_HPP
#define VH_EVAL_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vh/common.hpp"
#include "vh/corpus.hpp"
#include "vh/features.hpp"
#include "vh/models.hpp"

namespace vh {

/// Zip -> hesitancy in [0, 1].
struct GroundTruth {
    std::map<std::string, double> by_zip;

    /// CSV header `zip,hesitancy`. Out-of-range values and duplicate zips are fatal.
    static GroundTruth load(const std::filesystem::path& path);
    static GroundTruth load(std::istream& in, const std::string& source = "<stream>");

    double mean() const;
    /// Restriction to the given zips (those missing from the table are skipped).
    GroundTruth restricted_to(const std::vector<std::string>& zips) const;
};

struct LabeledTweet {
    std::size_t tweet = 0;  // index into the located corpus
    std::string zip;
    double label = 0.0;
};

struct LabelReport {
    std::size_t dropped_tweets = 0;
    std::vector<std::string> missing_zips;
};

/// Copies h_z onto every tweet of zip z. Tweets in zips absent from the
/// ground truth are dropped and counted.
std::vector<LabeledTweet> pseudo_label(std::span<const LocatedTweet> corpus, const GroundTruth& gt,
                                       LabelReport* report = nullptr);

struct SplitResult {
    std::vector<std::size_t> train;  // positions into the labeled list, ascending
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

/// Per-zip shuffle, then floor(n_z * test_frac) test tweets per zip; the
/// remaining round(N * test_frac) - sum(floor) go to the zips with the
/// largest fractional parts (ties by zip ascending). Every zip keeps at
/// least one tweet on each side.
SplitResult stratified_split(std::span<const LabeledTweet> labeled, double test_frac = 0.2, std::uint64_t seed = 42);

/// Seeded shuffle then contiguous folds; the first n % k folds get one extra.
std::vector<std::vector<std::size_t>> kfold(std::span<const std::size_t> items, int k = 5, std::uint64_t seed = 42);

/// Mean tweet-level prediction per zip.
std::map<std::string, double> aggregate_zip(const std::map<std::string, std::vector<double>>& tweet_preds);

/// sqrt(mean((y - yhat)^2)).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rmse(const Eigen::MatrixBase<DerivedA>& y, const Eigen::MatrixBase<DerivedB>& yhat) {
    if (y.size() != yhat.size()) {
        throw Error("size_mismatch", "rmse: lengths " + std::to_string(y.size()) + " and " +
                                         std::to_string(yhat.size()) + " differ");
    }
    if (y.size() == 0) throw Error("empty", "rmse: needs at least one value");
    using S = typename DerivedA::Scalar;
    return std::sqrt((y - yhat).squaredNorm() / static_cast<S>(y.size()));
}

inline double rmse(std::span<const double> y, std::span<const double> yhat) {
    using Map = Eigen::Map<const Vector>;
    return rmse(Map(y.data(), static_cast<Eigen::Index>(y.size())),
                Map(yhat.data(), static_cast<Eigen::Index>(yhat.size())));
}

struct BaselineRow {
    std::string name;
    double constant = 0.0;
    double tweet_rmse = 0.0;
    double zip_rmse = 0.0;
};

/// The six constant predictors (0, 1, 0.5, train-label mean, all-label
/// mean, ground-truth mean), scored against test labels at tweet level and
/// against `gt` at zip level.
std::vector<BaselineRow> constant_baselines(const GroundTruth& gt, std::span<const double> train_labels,
                                            std::span<const double> all_labels,
                                            std::span<const double> test_labels);

struct CvResult {
    std::vector<double> fold_rmse;
    double mean_rmse = 0.0;
};

/// For each fold, fits on the other folds and scores tweet-level RMSE on
/// it. Standardization is refit per fold through the builder. `labels` and
/// fold entries index the builder's rows.
CvResult cross_validate(const RegressorSpec& spec, const FeatureBuilder& builder, std::span<const double> labels,
                        const std::vector<std::vector<std::size_t>>& folds);

struct ErrorRow {
    std::string metro;
    std::size_t n_zips = 0;
    std::size_t n_over = 0;   // strict
    std::size_t n_under = 0;  // strict
    std::size_t n_over_by_threshold = 0;
    std::size_t n_absgap_ge_threshold = 0;
    double fraction_overestimated = 0.0;
};

struct ErrorAnalysis {
    double threshold = 0.20;
    std::vector<ErrorRow> metros;  // sorted by metro name
    ErrorRow global;
};

/// Over/under-estimation counts per metro and overall. Thresholds are
/// inclusive (a gap within 1e-12 of the threshold counts).
ErrorAnalysis error_analysis(const std::map<std::string, double>& zip_preds, const GroundTruth& gt,
                             const std::map<std::string, std::string>& zip_metro, double threshold = 0.20);

void write_error_csv(std::ostream& out, const ErrorAnalysis& ea);

}  // namespace vh

#endif  // VH_EVAL_HPP

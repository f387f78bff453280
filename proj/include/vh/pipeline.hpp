#ifndef VH_PIPELINE_HPP
#define VH_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vh/config.hpp"
#include "vh/corpus.hpp"
#include "vh/embed.hpp"
#include "vh/eval.hpp"
#include "vh/features.hpp"
#include "vh/models.hpp"
#include "vh/textprep.hpp"

namespace vh {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitFatal = 1, kExitPartial = 2 };

struct PipelineConfig {
    KeyValueConfig source;

    std::filesystem::path corpus;
    std::filesystem::path vectors;
    std::filesystem::path zip_features;
    std::filesystem::path zip_lookup;
    std::filesystem::path ground_truth;
    std::filesystem::path output_dir;

    std::vector<BoundingBox> boxes;
    std::string resolver = "centroid";  // or "exact"
    double cutoff_km = 25.0;
    int lookup_decimals = 4;

    std::size_t min_tweets = 10;
    bool refilter_after_join = false;
    bool exclude_retweets = true;

    double test_frac = 0.2;
    std::uint64_t split_seed = 42;
    int cv_folds = 5;
    std::uint64_t cv_seed = 42;
    bool cv_enabled = true;

    int embedding_dim = 300;
    bool drop_empty_embeddings = false;
    StandardizationPolicy standardization;

    bool clamp_predictions = false;  // clip to [0, 1] before scoring

    RegressorSpec model_defaults;  // family is ignored; hyperparameters per family

    std::vector<std::string> cells;  // empty selects the full matrix
    int workers = 1;

    std::string train_cell = "text_only:svr_rbf:no_sentiment";
    std::string report_cell = "best";
    double report_threshold = 0.20;

    /// Reads every known key; unknown keys are rejected.
    static PipelineConfig from(const KeyValueConfig& kv);
};

/// One model row of the results matrix.
struct MatrixCell {
    std::string id;  // representation:variant:sentiment
    std::string variant;
    FeatureConfig features;
    Family family = Family::OLS;
};

/// 3 representations x 5 variants x sentiment off/on, then the two
/// zip-feature-only SVR-RBF cells.
const std::vector<MatrixCell>& full_matrix();
const MatrixCell& find_cell(const std::string& id);
RegressorSpec spec_for(const MatrixCell& cell, const PipelineConfig& cfg);

/// Inputs shared read-only by every cell.
struct PreparedData {
    std::vector<LocatedTweet> located;
    std::vector<LabeledTweet> labeled;
    std::vector<double> labels;  // labels[i] == labeled[i].label
    std::vector<ProcessedText> processed;  // per labeled tweet
    SplitResult split;
    std::vector<std::vector<std::size_t>> folds;  // over split.train
    GroundTruth gt;  // restricted to labeled zips
    std::shared_ptr<const VectorTable> vectors;
    std::map<Representation, std::vector<TweetEmbedding>> embeddings;
};

/// Builds the labeled corpus, tokens and requested embeddings. `split`
/// is computed from the config when not given.
PreparedData prepare_data(std::vector<LocatedTweet> located, const GroundTruth& gt,
                          std::shared_ptr<const VectorTable> vectors, const PipelineConfig& cfg,
                          const std::vector<MatrixCell>& cells, std::optional<SplitResult> split = std::nullopt);

struct CellResult {
    std::string id;
    bool ok = false;
    std::string error;
    RegressorSpec spec;
    FitInfo info;
    std::size_t n_features = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double tweet_rmse = 0.0;
    std::optional<double> cv_rmse;
    double zip_rmse = 0.0;
    std::map<std::string, double> zip_predictions;
    std::map<std::string, std::size_t> zip_test_counts;
};

/// Raw (unstandardized) design matrix over all labeled tweets.
FeatureBuilder feature_builder(const MatrixCell& cell, const PreparedData& data, const PipelineConfig& cfg);

/// Fits on the train side, scores the test side at tweet and zip level,
/// and runs cross-validation when enabled. Never throws; failures are
/// returned in the result.
CellResult evaluate_cell(const MatrixCell& cell, const PreparedData& data, const PipelineConfig& cfg);

struct MatrixReport {
    std::vector<CellResult> cells;
    std::vector<BaselineRow> baselines;

    bool any_failed() const;
};

/// Cells run on a pool of `cfg.workers` threads; output order follows `cells`.
MatrixReport run_matrix(const std::vector<MatrixCell>& cells, const PreparedData& data, const PipelineConfig& cfg);

void write_results_csv(std::ostream& out, const MatrixReport& report);
void write_results_json(std::ostream& out, const MatrixReport& report);
void write_zip_predictions_csv(std::ostream& out, const MatrixReport& report, const PreparedData& data);

/// SHA-256 of a file, lowercase hex.
std::string sha256_file(const std::filesystem::path& path);

// Subcommands. Each reads its inputs from the config and the persisted
// artifacts of earlier stages, writes into cfg.output_dir together with a
// manifest, and returns an exit code. Fatal errors throw vh::Error.
int cmd_ingest(const PipelineConfig& cfg, std::ostream& log);
int cmd_stats(const PipelineConfig& cfg, std::ostream& log);
int cmd_split(const PipelineConfig& cfg, std::ostream& log);
int cmd_train(const PipelineConfig& cfg, std::ostream& log);
int cmd_matrix(const PipelineConfig& cfg, std::ostream& log);
int cmd_report(const PipelineConfig& cfg, std::ostream& log);
/// ingest, split, matrix and report in sequence.
int cmd_run(const PipelineConfig& cfg, std::ostream& log);

}  // namespace vh

#endif  // VH_PIPELINE_HPP

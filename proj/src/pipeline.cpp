#include "vh/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <openssl/evp.h>

#include "vh/csv.hpp"

namespace vh {

using ojson = nlohmann::ordered_json;

namespace {

// ------------------------------------------------------------------ config

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "paths.corpus", "paths.vectors", "paths.zip_features", "paths.zip_lookup", "paths.ground_truth",
        "paths.output_dir", "geo.resolver", "geo.cutoff_km", "geo.lookup_decimals", "filter.min_tweets",
        "filter.refilter_after_join", "filter.exclude_retweets", "predict.clamp", "split.test_frac", "split.seed",
        "cv.folds", "cv.seed", "cv.enabled",
        "embed.dim", "embed.drop_empty", "features.standardization", "features.standardize_sentiment",
        "features.standardize_embeddings", "model.seed", "ols.ridge_fallback", "sgd.alpha", "sgd.eta0",
        "sgd.power_t", "sgd.max_epochs", "sgd.tol", "sgd.n_iter_no_change", "sgd.shuffle", "svr_linear.C",
        "svr_linear.epsilon", "svr_linear.tol", "svr_linear.max_iter", "svr_linear.intercept_scaling",
        "svr_rbf.C", "svr_rbf.epsilon", "svr_rbf.gamma", "svr_rbf.tol", "svr_rbf.max_passes", "svr_rbf.cache_mb",
        "matrix.cells", "matrix.workers", "train.cell", "report.cell", "report.threshold",
    };
    return keys;
}

std::uint64_t get_seed(const KeyValueConfig& kv, const std::string& key, std::uint64_t fallback) {
    const auto v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw Error("bad_config", "config key " + key + ": seeds must be nonnegative integers");
    return static_cast<std::uint64_t>(v);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        const auto t = csv::trim(item);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

void require_file(const std::filesystem::path& p, const std::string& key) {
    if (p.empty()) throw Error("bad_config", "config key " + key + " is not set");
    if (!std::filesystem::is_regular_file(p)) throw Error("missing_file", key + ": no such file " + p.string());
}

std::filesystem::path artifact(const PipelineConfig& cfg, const std::string& name) { return cfg.output_dir / name; }

std::filesystem::path require_artifact(const PipelineConfig& cfg, const std::string& name, const std::string& stage) {
    auto p = artifact(cfg, name);
    if (!std::filesystem::is_regular_file(p)) {
        throw Error("missing_artifact", p.string() + " not found; run '" + stage + "' first");
    }
    return p;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("io_error", "cannot write " + p.string());
    return out;
}

std::string clean_field(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

// ---------------------------------------------------------------- manifest

class StageTimer {
public:
    void start(const std::string& stage) {
        stage_ = stage;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0_;
        timings_.emplace_back(stage_, dt.count());
    }
    const std::vector<std::pair<std::string, double>>& timings() const { return timings_; }

private:
    std::string stage_;
    std::chrono::steady_clock::time_point t0_;
    std::vector<std::pair<std::string, double>> timings_;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

struct ManifestFiles {
    std::vector<std::pair<std::string, std::filesystem::path>> inputs;
    std::vector<std::pair<std::string, std::filesystem::path>> outputs;
    std::vector<std::pair<std::string, std::size_t>> rows;
};

void write_manifest(const PipelineConfig& cfg, const std::string& command, const ManifestFiles& files,
                    const StageTimer& timer) {
    ojson m;
    m["artifact_version"] = kVersion;
    m["command"] = command;
    m["created_utc"] = utc_now();
    ojson config = ojson::object();
    for (const auto& [k, v] : cfg.source.entries()) config[k] = v;
    m["config"] = std::move(config);
    ojson overrides = ojson::object();
    for (const auto& [k, v] : cfg.source.overrides()) overrides[k] = v;
    m["overrides"] = std::move(overrides);
    const auto digests = [](const auto& list) {
        ojson j = ojson::object();
        for (const auto& [name, path] : list) j[name] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
        return j;
    };
    m["inputs"] = digests(files.inputs);
    m["outputs"] = digests(files.outputs);
    ojson rows = ojson::object();
    for (const auto& [k, v] : files.rows) rows[k] = v;
    m["rows"] = std::move(rows);
    ojson timings = ojson::object();
    for (const auto& [k, v] : timer.timings()) timings[k] = v;
    m["wall_seconds"] = std::move(timings);
    auto out = open_out(artifact(cfg, "manifest_" + command + ".json"));
    out << m.dump(2) << '\n';
}

// ------------------------------------------------------------- artifacts

void write_split_csv(const std::filesystem::path& path, const PreparedData& data) {
    std::vector<int> fold_of(data.labeled.size(), -1);
    for (std::size_t f = 0; f < data.folds.size(); ++f) {
        for (auto pos : data.folds[f]) fold_of[pos] = static_cast<int>(f);
    }
    std::vector<char> is_test(data.labeled.size(), 0);
    for (auto pos : data.split.test) is_test[pos] = 1;
    auto out = open_out(path);
    out << "tweet_id,zip,label,side,fold\n";
    for (std::size_t i = 0; i < data.labeled.size(); ++i) {
        const auto& l = data.labeled[i];
        out << data.located[l.tweet].tweet.tweet_id << ',' << l.zip << ',' << csv::format_double(l.label) << ','
            << (is_test[i] ? "test" : "train") << ',' << (fold_of[i] < 0 ? std::string("NA") : std::to_string(fold_of[i]))
            << '\n';
    }
}

SplitResult read_split_csv(const std::filesystem::path& path, const std::vector<LabeledTweet>& labeled,
                           const std::vector<LocatedTweet>& located, std::uint64_t seed) {
    const auto table = csv::read(path, {"tweet_id", "zip", "label", "side", "fold"});
    if (table.rows.size() != labeled.size()) {
        throw Error("stale_artifact", path.string() + " has " + std::to_string(table.rows.size()) +
                                          " rows but the labeled corpus has " + std::to_string(labeled.size()) +
                                          "; rerun 'split'");
    }
    SplitResult split;
    split.seed = seed;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row[0] != located[labeled[i].tweet].tweet.tweet_id || row[1] != labeled[i].zip) {
            throw Error("stale_artifact", path.string() + ":" + std::to_string(table.line_numbers[i]) +
                                              ": tweet does not match the labeled corpus; rerun 'split'");
        }
        if (row[3] == "train") split.train.push_back(i);
        else if (row[3] == "test") split.test.push_back(i);
        else throw Error("stale_artifact", path.string() + ": bad side '" + row[3] + "'");
    }
    return split;
}

// ---------------------------------------------------------------- loaders

std::vector<BoundingBox> boxes_or_throw(const PipelineConfig& cfg) {
    if (cfg.boxes.empty()) throw Error("bad_config", "no bounding boxes configured (boxes.<metro> keys)");
    return cfg.boxes;
}

std::unique_ptr<ZipResolver> make_resolver(const PipelineConfig& cfg) {
    require_file(cfg.zip_lookup, "paths.zip_lookup");
    if (cfg.resolver == "centroid") {
        return std::make_unique<NearestCentroidResolver>(NearestCentroidResolver::load(cfg.zip_lookup, cfg.cutoff_km));
    }
    return std::make_unique<ExactZipTable>(ExactZipTable::load(cfg.zip_lookup, cfg.lookup_decimals));
}

std::shared_ptr<const VectorTable> load_vector_table(const PipelineConfig& cfg, std::ostream& log) {
    require_file(cfg.vectors, "paths.vectors");
    VectorLoadReport report;
    auto table = std::make_shared<const VectorTable>(load_vectors(cfg.vectors, cfg.embedding_dim, &report));
    log << "[vectors] " << report.rows_loaded << " vectors of dim " << table->dim() << ", " << report.malformed_lines
        << " malformed, " << report.duplicate_tokens << " duplicates\n";
    return table;
}

std::vector<MatrixCell> selected_cells(const PipelineConfig& cfg) {
    if (cfg.cells.empty()) return full_matrix();
    std::vector<MatrixCell> out;
    for (const auto& id : cfg.cells) out.push_back(find_cell(id));
    return out;
}

std::string representation_name(const MatrixCell& c) {
    return c.features.use_text ? std::string(to_string(c.features.representation)) : std::string("none");
}

}  // namespace

// ------------------------------------------------------------------ config

PipelineConfig PipelineConfig::from(const KeyValueConfig& kv) {
    for (const auto& [k, v] : kv.entries()) {
        if (k.rfind("boxes.", 0) == 0) continue;
        if (!known_keys().count(k)) throw Error("bad_config", "unknown config key '" + k + "'");
    }
    PipelineConfig c;
    c.source = kv;
    c.corpus = kv.get_path("paths.corpus");
    c.vectors = kv.get_path("paths.vectors");
    c.zip_features = kv.get_path("paths.zip_features");
    c.zip_lookup = kv.get_path("paths.zip_lookup");
    c.ground_truth = kv.get_path("paths.ground_truth");
    c.output_dir = kv.get_path("paths.output_dir");
    if (c.output_dir.empty()) c.output_dir = kv.base_dir() / "out";

    for (const auto& [metro, value] : kv.with_prefix("boxes.")) {
        const auto parts = split_list(value);
        if (parts.size() != 4) throw Error("bad_config", "boxes." + metro + ": expected min_lat,max_lat,min_lon,max_lon");
        BoundingBox b;
        b.metro = metro;
        b.min_lat = csv::parse_double(parts[0], "boxes." + metro);
        b.max_lat = csv::parse_double(parts[1], "boxes." + metro);
        b.min_lon = csv::parse_double(parts[2], "boxes." + metro);
        b.max_lon = csv::parse_double(parts[3], "boxes." + metro);
        b.validate();
        c.boxes.push_back(b);
    }
    c.resolver = kv.get_string("geo.resolver", c.resolver);
    if (c.resolver != "centroid" && c.resolver != "exact") {
        throw Error("bad_config", "geo.resolver must be 'centroid' or 'exact'");
    }
    c.cutoff_km = kv.get_double("geo.cutoff_km", c.cutoff_km);
    c.lookup_decimals = static_cast<int>(kv.get_int("geo.lookup_decimals", c.lookup_decimals));

    const auto min_tweets = kv.get_int("filter.min_tweets", static_cast<long long>(c.min_tweets));
    if (min_tweets < 1) throw Error("bad_config", "filter.min_tweets must be >= 1");
    c.min_tweets = static_cast<std::size_t>(min_tweets);
    c.refilter_after_join = kv.get_bool("filter.refilter_after_join", c.refilter_after_join);
    c.exclude_retweets = kv.get_bool("filter.exclude_retweets", c.exclude_retweets);
    c.clamp_predictions = kv.get_bool("predict.clamp", c.clamp_predictions);

    c.test_frac = kv.get_double("split.test_frac", c.test_frac);
    if (!(c.test_frac > 0.0 && c.test_frac < 1.0)) throw Error("bad_config", "split.test_frac must lie in (0, 1)");
    c.split_seed = get_seed(kv, "split.seed", c.split_seed);
    c.cv_folds = static_cast<int>(kv.get_int("cv.folds", c.cv_folds));
    if (c.cv_folds < 2) throw Error("bad_config", "cv.folds must be >= 2");
    c.cv_seed = get_seed(kv, "cv.seed", c.cv_seed);
    c.cv_enabled = kv.get_bool("cv.enabled", c.cv_enabled);

    c.embedding_dim = static_cast<int>(kv.get_int("embed.dim", c.embedding_dim));
    if (c.embedding_dim < 1) throw Error("bad_config", "embed.dim must be >= 1");
    c.drop_empty_embeddings = kv.get_bool("embed.drop_empty", c.drop_empty_embeddings);

    const auto mode = kv.get_string("features.standardization", "separate");
    if (mode == "separate") c.standardization.mode = StandardizationMode::Separate;
    else if (mode == "fit_on_train") c.standardization.mode = StandardizationMode::FitOnTrain;
    else throw Error("bad_config", "features.standardization must be 'separate' or 'fit_on_train'");
    c.standardization.standardize_sentiment =
        kv.get_bool("features.standardize_sentiment", c.standardization.standardize_sentiment);
    c.standardization.standardize_embeddings =
        kv.get_bool("features.standardize_embeddings", c.standardization.standardize_embeddings);

    auto& m = c.model_defaults;
    m.seed = get_seed(kv, "model.seed", m.seed);
    m.ols.ridge_fallback = kv.get_double("ols.ridge_fallback", m.ols.ridge_fallback);
    m.sgd.alpha = kv.get_double("sgd.alpha", m.sgd.alpha);
    m.sgd.eta0 = kv.get_double("sgd.eta0", m.sgd.eta0);
    m.sgd.power_t = kv.get_double("sgd.power_t", m.sgd.power_t);
    m.sgd.max_epochs = static_cast<int>(kv.get_int("sgd.max_epochs", m.sgd.max_epochs));
    m.sgd.tol = kv.get_double("sgd.tol", m.sgd.tol);
    m.sgd.n_iter_no_change = static_cast<int>(kv.get_int("sgd.n_iter_no_change", m.sgd.n_iter_no_change));
    m.sgd.shuffle = kv.get_bool("sgd.shuffle", m.sgd.shuffle);
    m.linear_svr.C = kv.get_double("svr_linear.C", m.linear_svr.C);
    m.linear_svr.epsilon = kv.get_double("svr_linear.epsilon", m.linear_svr.epsilon);
    m.linear_svr.tol = kv.get_double("svr_linear.tol", m.linear_svr.tol);
    m.linear_svr.max_iter = static_cast<int>(kv.get_int("svr_linear.max_iter", m.linear_svr.max_iter));
    m.linear_svr.intercept_scaling = kv.get_double("svr_linear.intercept_scaling", m.linear_svr.intercept_scaling);
    m.svr.C = kv.get_double("svr_rbf.C", m.svr.C);
    m.svr.epsilon = kv.get_double("svr_rbf.epsilon", m.svr.epsilon);
    if (const auto g = kv.find("svr_rbf.gamma"); g && *g != "scale") m.svr.gamma = csv::parse_double(*g, "svr_rbf.gamma");
    m.svr.tol = kv.get_double("svr_rbf.tol", m.svr.tol);
    m.svr.max_passes = static_cast<long>(kv.get_int("svr_rbf.max_passes", m.svr.max_passes));
    m.svr.cache_mb = kv.get_double("svr_rbf.cache_mb", m.svr.cache_mb);

    const auto cells = kv.get_string("matrix.cells", "all");
    if (cells != "all") {
        c.cells = split_list(cells);
        for (const auto& id : c.cells) find_cell(id);
    }
    c.workers = static_cast<int>(kv.get_int("matrix.workers", c.workers));
    if (c.workers < 1) throw Error("bad_config", "matrix.workers must be >= 1");
    c.train_cell = kv.get_string("train.cell", c.train_cell);
    find_cell(c.train_cell);
    c.report_cell = kv.get_string("report.cell", c.report_cell);
    c.report_threshold = kv.get_double("report.threshold", c.report_threshold);
    return c;
}

// ------------------------------------------------------------------ matrix

const std::vector<MatrixCell>& full_matrix() {
    static const std::vector<MatrixCell> cells = [] {
        struct Variant {
            const char* name;
            Family family;
            bool zip;
        };
        const Variant variants[] = {
            {"svr_rbf", Family::SVRRBF, true},  {"svr_rbf_nozip", Family::SVRRBF, false},
            {"svr_linear", Family::SVRLinear, true}, {"ols", Family::OLS, true},
            {"sgd", Family::SGD, true},
        };
        std::vector<MatrixCell> out;
        for (auto r : kAllRepresentations) {
            for (const auto& v : variants) {
                for (bool sentiment : {false, true}) {
                    MatrixCell c;
                    c.id = std::string(to_string(r)) + ":" + v.name + ":" + (sentiment ? "sentiment" : "no_sentiment");
                    c.variant = v.name;
                    c.features = {r, true, sentiment, v.zip};
                    c.family = v.family;
                    out.push_back(std::move(c));
                }
            }
        }
        for (bool sentiment : {false, true}) {
            MatrixCell c;
            c.id = std::string("zip_only:svr_rbf:") + (sentiment ? "sentiment" : "no_sentiment");
            c.variant = "svr_rbf_zip_only";
            c.features = {Representation::TextOnly, false, sentiment, true};
            c.family = Family::SVRRBF;
            out.push_back(std::move(c));
        }
        return out;
    }();
    return cells;
}

const MatrixCell& find_cell(const std::string& id) {
    for (const auto& c : full_matrix()) {
        if (c.id == id) return c;
    }
    std::string known;
    for (const auto& c : full_matrix()) known += (known.empty() ? "" : ", ") + c.id;
    throw Error("bad_config", "unknown matrix cell '" + id + "'; known cells: " + known);
}

RegressorSpec spec_for(const MatrixCell& cell, const PipelineConfig& cfg) {
    RegressorSpec s = cfg.model_defaults;
    s.family = cell.family;
    return s;
}

PreparedData prepare_data(std::vector<LocatedTweet> located, const GroundTruth& gt,
                          std::shared_ptr<const VectorTable> vectors, const PipelineConfig& cfg,
                          const std::vector<MatrixCell>& cells, std::optional<SplitResult> split) {
    PreparedData d;
    d.located = std::move(located);
    d.labeled = pseudo_label(d.located, gt);
    if (d.labeled.empty()) throw Error("empty", "no tweet has a ground-truth label");
    for (const auto& l : d.labeled) d.labels.push_back(l.label);

    const TextPipeline text;
    d.processed.reserve(d.labeled.size());
    for (const auto& l : d.labeled) d.processed.push_back(text(d.located[l.tweet].tweet.text));

    d.split = split ? std::move(*split) : stratified_split(d.labeled, cfg.test_frac, cfg.split_seed);
    if (cfg.cv_enabled) d.folds = kfold(d.split.train, cfg.cv_folds, cfg.cv_seed);

    std::vector<std::string> zips;
    for (const auto& l : d.labeled) zips.push_back(l.zip);
    std::sort(zips.begin(), zips.end());
    zips.erase(std::unique(zips.begin(), zips.end()), zips.end());
    d.gt = gt.restricted_to(zips);

    d.vectors = std::move(vectors);
    for (const auto& c : cells) {
        if (!c.features.use_text || d.embeddings.count(c.features.representation)) continue;
        if (!d.vectors) throw Error("missing_component", "text cells need word vectors");
        auto& out = d.embeddings[c.features.representation];
        out.reserve(d.processed.size());
        for (const auto& p : d.processed) {
            out.push_back(embed_tweet(select_tokens(p.tokens, c.features.representation), *d.vectors));
        }
    }
    return d;
}

FeatureBuilder feature_builder(const MatrixCell& cell, const PreparedData& data, const PipelineConfig& cfg) {
    const auto layout = layout_for(cell.features, cfg.embedding_dim);
    const std::vector<TweetEmbedding>* embeddings = nullptr;
    if (cell.features.use_text) {
        auto it = data.embeddings.find(cell.features.representation);
        if (it == data.embeddings.end()) throw Error("missing_component", "embeddings not prepared for " + cell.id);
        embeddings = &it->second;
    }
    Matrix raw(static_cast<Eigen::Index>(data.labeled.size()), layout.size());
    for (std::size_t i = 0; i < data.labeled.size(); ++i) {
        const auto& t = data.located[data.labeled[i].tweet];
        const ZipFeatureRecord* zip = t.features ? &*t.features : nullptr;
        raw.row(static_cast<Eigen::Index>(i)) =
            assemble(embeddings ? &(*embeddings)[i] : nullptr, t.tweet.sentiment, zip, cell.features, cfg.embedding_dim)
                .transpose();
    }
    return FeatureBuilder(std::move(raw), layout, cfg.standardization);
}

CellResult evaluate_cell(const MatrixCell& cell, const PreparedData& data, const PipelineConfig& cfg) {
    CellResult r;
    r.id = cell.id;
    r.spec = spec_for(cell, cfg);
    try {
        const auto builder = feature_builder(cell, data, cfg);
        r.n_features = static_cast<std::size_t>(builder.layout().size());
        const std::vector<TweetEmbedding>* emb =
            cell.features.use_text && cfg.drop_empty_embeddings ? &data.embeddings.at(cell.features.representation)
                                                                : nullptr;
        const auto keep = [&](const std::vector<std::size_t>& rows) {
            if (!emb) return rows;
            std::vector<std::size_t> out;
            for (auto i : rows) {
                if (!(*emb)[i].is_empty()) out.push_back(i);
            }
            return out;
        };
        const auto train = keep(data.split.train);
        const auto test = keep(data.split.test);
        r.n_train = train.size();
        r.n_test = test.size();

        const auto tt = builder.build(train, test);
        Vector y_train(static_cast<Eigen::Index>(train.size()));
        for (std::size_t i = 0; i < train.size(); ++i) y_train(static_cast<Eigen::Index>(i)) = data.labels[train[i]];
        Vector y_test(static_cast<Eigen::Index>(test.size()));
        for (std::size_t i = 0; i < test.size(); ++i) y_test(static_cast<Eigen::Index>(i)) = data.labels[test[i]];

        const auto model = fit(r.spec, tt.train, y_train);
        r.info = model.info;
        Vector pred = predict(model, tt.test);
        if (cfg.clamp_predictions) pred = pred.cwiseMax(0.0).cwiseMin(1.0);
        r.tweet_rmse = rmse(y_test, pred);

        std::map<std::string, std::vector<double>> by_zip;
        for (std::size_t i = 0; i < test.size(); ++i) {
            by_zip[data.labeled[test[i]].zip].push_back(pred(static_cast<Eigen::Index>(i)));
        }
        r.zip_predictions = aggregate_zip(by_zip);
        std::vector<double> truth, predicted;
        for (const auto& [zip, p] : r.zip_predictions) {
            r.zip_test_counts[zip] = by_zip[zip].size();
            truth.push_back(data.gt.by_zip.at(zip));
            predicted.push_back(p);
        }
        r.zip_rmse = rmse(truth, predicted);

        if (cfg.cv_enabled) {
            std::vector<std::vector<std::size_t>> folds;
            for (const auto& f : data.folds) folds.push_back(keep(f));
            r.cv_rmse = cross_validate(r.spec, builder, data.labels, folds).mean_rmse;
        }
        r.ok = true;
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
        r.zip_predictions.clear();
        r.zip_test_counts.clear();
    }
    return r;
}

bool MatrixReport::any_failed() const {
    return std::any_of(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; });
}

MatrixReport run_matrix(const std::vector<MatrixCell>& cells, const PreparedData& data, const PipelineConfig& cfg) {
    MatrixReport report;
    report.cells.resize(cells.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) report.cells[i] = evaluate_cell(cells[i], data, cfg);
    };
    const auto width = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), cells.size());
    if (width <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<double> train_labels, test_labels;
    for (auto i : data.split.train) train_labels.push_back(data.labels[i]);
    for (auto i : data.split.test) test_labels.push_back(data.labels[i]);
    report.baselines = constant_baselines(data.gt, train_labels, data.labels, test_labels);
    return report;
}

void write_results_csv(std::ostream& out, const MatrixReport& report) {
    out << "kind,cell,representation,model,use_text,use_zip_features,use_sentiment,status,tweet_rmse,cv_rmse,"
           "zip_rmse,constant,error\n";
    const auto num = [](double v) { return csv::format_fixed(v, 6); };
    for (const auto& r : report.cells) {
        const auto& c = find_cell(r.id);
        out << "model," << c.id << ',' << representation_name(c) << ',' << c.variant << ',' << c.features.use_text
            << ',' << c.features.use_zip_features << ',' << c.features.use_sentiment << ','
            << (r.ok ? "ok" : "failed") << ',' << (r.ok ? num(r.tweet_rmse) : "NA") << ','
            << (r.ok && r.cv_rmse ? num(*r.cv_rmse) : "NA") << ',' << (r.ok ? num(r.zip_rmse) : "NA") << ",NA,"
            << clean_field(r.error) << '\n';
    }
    for (const auto& b : report.baselines) {
        out << "baseline," << b.name << ",NA,constant,NA,NA,NA,ok," << num(b.tweet_rmse) << ",NA," << num(b.zip_rmse)
            << ',' << num(b.constant) << ",\n";
    }
}

void write_results_json(std::ostream& out, const MatrixReport& report) {
    ojson j;
    j["artifact_version"] = kVersion;
    ojson cells = ojson::array();
    for (const auto& r : report.cells) {
        const auto& c = find_cell(r.id);
        ojson e;
        e["cell"] = c.id;
        e["representation"] = representation_name(c);
        e["model"] = c.variant;
        e["use_text"] = c.features.use_text;
        e["use_zip_features"] = c.features.use_zip_features;
        e["use_sentiment"] = c.features.use_sentiment;
        e["status"] = r.ok ? "ok" : "failed";
        if (!r.ok) e["error"] = r.error;
        e["spec"] = ojson::parse(serialize_spec(r.spec));
        e["n_features"] = r.n_features;
        e["n_train"] = r.n_train;
        e["n_test"] = r.n_test;
        if (r.ok) {
            e["tweet_rmse"] = r.tweet_rmse;
            e["cv_rmse"] = r.cv_rmse ? ojson(*r.cv_rmse) : ojson(nullptr);
            e["zip_rmse"] = r.zip_rmse;
            e["fit"] = {{"converged", r.info.converged},
                        {"iterations", r.info.iterations},
                        {"max_kkt_violation", r.info.max_kkt_violation},
                        {"objective", number_or_null(r.info.objective)},
                        {"ridge_fallback", r.info.ridge_fallback}};
        }
        cells.push_back(std::move(e));
    }
    j["cells"] = std::move(cells);
    ojson baselines = ojson::array();
    for (const auto& b : report.baselines) {
        baselines.push_back(
            {{"name", b.name}, {"constant", b.constant}, {"tweet_rmse", b.tweet_rmse}, {"zip_rmse", b.zip_rmse}});
    }
    j["baselines"] = std::move(baselines);
    out << j.dump(2) << '\n';
}

void write_zip_predictions_csv(std::ostream& out, const MatrixReport& report, const PreparedData& data) {
    std::map<std::string, std::string> metro_of;
    for (const auto& l : data.labeled) metro_of.emplace(l.zip, data.located[l.tweet].metro);
    out << "cell,zip,metro,n_test_tweets,predicted,truth\n";
    for (const auto& r : report.cells) {
        for (const auto& [zip, p] : r.zip_predictions) {
            out << r.id << ',' << zip << ',' << metro_of.at(zip) << ',' << r.zip_test_counts.at(zip) << ','
                << csv::format_double(p) << ',' << csv::format_double(data.gt.by_zip.at(zip)) << '\n';
        }
    }
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("missing_file", "cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("digest", "sha256 init failed");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

// ------------------------------------------------------------- subcommands

int cmd_ingest(const PipelineConfig& cfg, std::ostream& log) {
    require_file(cfg.corpus, "paths.corpus");
    require_file(cfg.zip_features, "paths.zip_features");
    const auto boxes = boxes_or_throw(cfg);
    std::filesystem::create_directories(cfg.output_dir);
    StageTimer timer;

    timer.start("parse");
    ParseReport parse;
    const auto raw = parse_corpus(cfg.corpus, parse);
    timer.stop();
    log << "[ingest] " << raw.size() << " tweets parsed, " << parse.rejected.size() << " lines rejected\n";

    timer.start("locate");
    const auto resolver = make_resolver(cfg);
    std::vector<LocatedTweet> located;
    std::size_t no_metro = 0, no_zip = 0, retweets = 0;
    for (const auto& t : raw) {
        if (cfg.exclude_retweets && is_retweet(t.text)) {
            ++retweets;
            continue;
        }
        auto metro = assign_metro(t.point, boxes);
        if (!metro) {
            ++no_metro;
            continue;
        }
        auto zip = resolve_zip(t.point, *resolver);
        if (!zip) {
            ++no_zip;
            continue;
        }
        located.push_back({t, *metro, *zip, std::nullopt});
    }
    timer.stop();

    timer.start("filter_join");
    const auto count_zips = [](const std::vector<LocatedTweet>& ts) {
        std::set<std::string> z;
        for (const auto& t : ts) z.insert(t.zip);
        return z.size();
    };
    const auto zips_located = count_zips(located);
    auto filtered = filter_min_tweets(located, cfg.min_tweets);
    const auto min_removed_tweets = located.size() - filtered.size();
    const auto min_removed_zips = zips_located - count_zips(filtered);
    const auto features = load_zip_features(cfg.zip_features);
    JoinReport join;
    auto joined = join_zip_features(filtered, features, &join);
    if (cfg.refilter_after_join) joined = filter_min_tweets(joined, cfg.min_tweets);
    timer.stop();
    log << "[ingest] " << located.size() << " located, " << min_removed_tweets << " tweets in " << min_removed_zips
        << " zips below " << cfg.min_tweets << " tweets removed, " << join.dropped_tweets << " tweets in "
        << join.dropped_zips.size() << " zips without features removed, " << joined.size() << " kept\n";

    timer.start("write");
    const auto located_path = artifact(cfg, "located.jsonl");
    {
        auto out = open_out(located_path);
        write_located(out, joined);
    }
    const TextPipeline text;
    std::vector<ProcessedText> processed;
    processed.reserve(joined.size());
    for (const auto& t : joined) processed.push_back(text(t.tweet.text));
    const auto stats = corpus_stats(joined, processed);
    const auto table_path = artifact(cfg, "table1.csv");
    {
        auto out = open_out(table_path);
        write_stats_csv(out, stats);
    }
    ojson report;
    report["lines_read"] = parse.lines_read;
    report["tweets_parsed"] = raw.size();
    ojson reasons = ojson::object();
    for (const auto& [reason, n] : parse.reason_counts()) reasons[reason] = n;
    report["rejected_by_reason"] = std::move(reasons);
    report["retweets_excluded"] = retweets;
    report["outside_boxes"] = no_metro;
    report["unresolved_zip"] = no_zip;
    report["located"] = located.size();
    report["min_tweet_filter"] = {{"threshold", cfg.min_tweets},
                                  {"removed_tweets", min_removed_tweets},
                                  {"removed_zips", min_removed_zips}};
    report["join"] = {{"dropped_tweets", join.dropped_tweets}, {"dropped_zips", join.dropped_zips}};
    report["kept_tweets"] = joined.size();
    report["kept_zips"] = stats.total_zips;
    const auto report_path = artifact(cfg, "ingest_report.json");
    {
        auto out = open_out(report_path);
        out << report.dump(2) << '\n';
    }
    timer.stop();

    ManifestFiles files;
    files.inputs = {{"corpus", cfg.corpus}, {"zip_features", cfg.zip_features}, {"zip_lookup", cfg.zip_lookup}};
    files.outputs = {{"located", located_path}, {"table1", table_path}, {"ingest_report", report_path}};
    files.rows = {{"lines_read", parse.lines_read},  {"parsed", raw.size()},       {"located", located.size()},
                  {"after_min_filter", filtered.size()}, {"after_join", joined.size()}};
    write_manifest(cfg, "ingest", files, timer);
    return kExitOk;
}

int cmd_stats(const PipelineConfig& cfg, std::ostream& log) {
    const auto located_path = require_artifact(cfg, "located.jsonl", "ingest");
    StageTimer timer;
    timer.start("stats");
    const auto located = read_located(located_path);
    const TextPipeline text;
    std::vector<ProcessedText> processed;
    processed.reserve(located.size());
    for (const auto& t : located) processed.push_back(text(t.tweet.text));
    const auto stats = corpus_stats(located, processed);
    const auto table_path = artifact(cfg, "table1.csv");
    {
        auto out = open_out(table_path);
        write_stats_csv(out, stats);
    }
    write_stats_csv(log, stats);
    timer.stop();
    ManifestFiles files;
    files.inputs = {{"located", located_path}};
    files.outputs = {{"table1", table_path}};
    files.rows = {{"tweets", located.size()}, {"zips", stats.total_zips}};
    write_manifest(cfg, "stats", files, timer);
    return kExitOk;
}

int cmd_split(const PipelineConfig& cfg, std::ostream& log) {
    const auto located_path = require_artifact(cfg, "located.jsonl", "ingest");
    require_file(cfg.ground_truth, "paths.ground_truth");
    StageTimer timer;
    timer.start("split");
    const auto gt = GroundTruth::load(cfg.ground_truth);
    LabelReport labels;
    auto located = read_located(located_path);
    PreparedData d;
    d.located = std::move(located);
    d.labeled = pseudo_label(d.located, gt, &labels);
    if (d.labeled.empty()) throw Error("empty", "no tweet has a ground-truth label");
    d.split = stratified_split(d.labeled, cfg.test_frac, cfg.split_seed);
    d.folds = kfold(d.split.train, cfg.cv_folds, cfg.cv_seed);
    const auto split_path = artifact(cfg, "split.csv");
    write_split_csv(split_path, d);
    timer.stop();
    log << "[split] " << d.labeled.size() << " labeled tweets (" << labels.dropped_tweets << " without ground truth), "
        << d.split.train.size() << " train / " << d.split.test.size() << " test; folds";
    for (const auto& f : d.folds) log << ' ' << f.size();
    log << '\n';
    ManifestFiles files;
    files.inputs = {{"located", located_path}, {"ground_truth", cfg.ground_truth}};
    files.outputs = {{"split", split_path}};
    files.rows = {{"labeled", d.labeled.size()},
                  {"unlabeled_dropped", labels.dropped_tweets},
                  {"train", d.split.train.size()},
                  {"test", d.split.test.size()}};
    write_manifest(cfg, "split", files, timer);
    return kExitOk;
}

namespace {

PreparedData load_prepared(const PipelineConfig& cfg, const std::vector<MatrixCell>& cells, StageTimer& timer,
                           std::ostream& log) {
    const auto located_path = require_artifact(cfg, "located.jsonl", "ingest");
    const auto split_path = require_artifact(cfg, "split.csv", "split");
    require_file(cfg.ground_truth, "paths.ground_truth");
    timer.start("load");
    const auto gt = GroundTruth::load(cfg.ground_truth);
    auto located = read_located(located_path);
    const bool need_vectors = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.features.use_text; });
    auto vectors = need_vectors ? load_vector_table(cfg, log) : nullptr;
    const auto labeled = pseudo_label(located, gt);
    auto split = read_split_csv(split_path, labeled, located, cfg.split_seed);
    timer.stop();
    timer.start("prepare");
    auto data = prepare_data(std::move(located), gt, std::move(vectors), cfg, cells, std::move(split));
    timer.stop();
    return data;
}

std::string cell_file_stem(const std::string& id) {
    std::string s = id;
    std::replace(s.begin(), s.end(), ':', '_');
    return s;
}

}  // namespace

int cmd_train(const PipelineConfig& cfg, std::ostream& log) {
    const auto& cell = find_cell(cfg.train_cell);
    StageTimer timer;
    auto data = load_prepared(cfg, {cell}, timer, log);
    timer.start("fit");
    const auto builder = feature_builder(cell, data, cfg);
    const auto tt = builder.build(data.split.train, data.split.test);
    Vector y_train(static_cast<Eigen::Index>(data.split.train.size()));
    for (std::size_t i = 0; i < data.split.train.size(); ++i) {
        y_train(static_cast<Eigen::Index>(i)) = data.labels[data.split.train[i]];
    }
    Vector y_test(static_cast<Eigen::Index>(data.split.test.size()));
    for (std::size_t i = 0; i < data.split.test.size(); ++i) {
        y_test(static_cast<Eigen::Index>(i)) = data.labels[data.split.test[i]];
    }
    auto model = fit(spec_for(cell, cfg), tt.train, y_train);
    model.layout = builder.layout().names;
    timer.stop();
    const auto model_path = artifact(cfg, "model_" + cell_file_stem(cell.id) + ".json");
    {
        auto out = open_out(model_path);
        out << serialize_model(model) << '\n';
    }
    log << "[train] " << cell.id << ": tweet-level test RMSE " << csv::format_fixed(rmse(y_test, predict(model, tt.test)), 6)
        << (model.info.converged ? "" : " (not converged)") << '\n';
    ManifestFiles files;
    files.inputs = {{"located", artifact(cfg, "located.jsonl")}, {"split", artifact(cfg, "split.csv")},
                    {"ground_truth", cfg.ground_truth}};
    if (cell.features.use_text) files.inputs.emplace_back("vectors", cfg.vectors);
    files.outputs = {{"model", model_path}};
    files.rows = {{"train", data.split.train.size()}, {"test", data.split.test.size()}};
    write_manifest(cfg, "train", files, timer);
    return kExitOk;
}

int cmd_matrix(const PipelineConfig& cfg, std::ostream& log) {
    const auto cells = selected_cells(cfg);
    StageTimer timer;
    auto data = load_prepared(cfg, cells, timer, log);
    timer.start("matrix");
    const auto report = run_matrix(cells, data, cfg);
    timer.stop();
    for (const auto& r : report.cells) {
        if (r.ok) log << "[matrix] " << r.id << ": zip RMSE " << csv::format_fixed(r.zip_rmse, 4) << '\n';
        else log << "[matrix] " << r.id << ": FAILED " << r.error << '\n';
    }
    timer.start("write");
    const auto csv_path = artifact(cfg, "results.csv");
    const auto json_path = artifact(cfg, "results.json");
    const auto zip_path = artifact(cfg, "zip_predictions.csv");
    {
        auto out = open_out(csv_path);
        write_results_csv(out, report);
    }
    {
        auto out = open_out(json_path);
        write_results_json(out, report);
    }
    {
        auto out = open_out(zip_path);
        write_zip_predictions_csv(out, report, data);
    }
    timer.stop();
    ManifestFiles files;
    files.inputs = {{"located", artifact(cfg, "located.jsonl")}, {"split", artifact(cfg, "split.csv")},
                    {"ground_truth", cfg.ground_truth}};
    if (data.vectors) files.inputs.emplace_back("vectors", cfg.vectors);
    files.outputs = {{"results_csv", csv_path}, {"results_json", json_path}, {"zip_predictions", zip_path}};
    const auto failed = static_cast<std::size_t>(
        std::count_if(report.cells.begin(), report.cells.end(), [](const CellResult& c) { return !c.ok; }));
    files.rows = {{"labeled", data.labeled.size()},
                  {"train", data.split.train.size()},
                  {"test", data.split.test.size()},
                  {"cells", report.cells.size()},
                  {"failed_cells", failed}};
    write_manifest(cfg, "matrix", files, timer);
    return report.any_failed() ? kExitPartial : kExitOk;
}

int cmd_report(const PipelineConfig& cfg, std::ostream& log) {
    const auto json_path = require_artifact(cfg, "results.json", "matrix");
    const auto zip_path = require_artifact(cfg, "zip_predictions.csv", "matrix");
    StageTimer timer;
    timer.start("report");
    ojson results;
    {
        std::ifstream in(json_path);
        try {
            results = ojson::parse(in);
        } catch (const ojson::exception& e) {
            throw Error("malformed_json", json_path.string() + ": " + e.what());
        }
    }
    std::vector<std::string> available;
    std::string chosen;
    double chosen_rmse = std::numeric_limits<double>::infinity();
    std::map<std::string, double> zip_rmse_of;
    for (const auto& c : results.at("cells")) {
        if (c.at("status") != "ok") continue;
        const auto id = c.at("cell").get<std::string>();
        const auto z = c.at("zip_rmse").get<double>();
        available.push_back(id);
        zip_rmse_of[id] = z;
        if (z < chosen_rmse) {
            chosen_rmse = z;
            chosen = id;
        }
    }
    if (cfg.report_cell != "best") {
        chosen = cfg.report_cell;
        if (!zip_rmse_of.count(chosen)) {
            std::string list;
            for (const auto& a : available) list += (list.empty() ? "" : ", ") + a;
            throw Error("missing_cell", "cell '" + chosen + "' has no successful result; available: " +
                                            (list.empty() ? std::string("none") : list));
        }
        chosen_rmse = zip_rmse_of[chosen];
    }
    if (chosen.empty()) throw Error("missing_cell", "no matrix cell succeeded; nothing to report");

    const auto table = csv::read(zip_path, {"cell", "zip", "metro", "n_test_tweets", "predicted", "truth"});
    std::map<std::string, double> preds;
    std::map<std::string, std::string> metros;
    GroundTruth gt;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row[0] != chosen) continue;
        const auto ctx = zip_path.string() + ":" + std::to_string(table.line_numbers[i]);
        preds[row[1]] = csv::parse_double(row[4], ctx);
        metros[row[1]] = row[2];
        gt.by_zip[row[1]] = csv::parse_double(row[5], ctx);
    }
    const auto ea = error_analysis(preds, gt, metros, cfg.report_threshold);
    const auto ea_path = artifact(cfg, "error_analysis.csv");
    {
        auto out = open_out(ea_path);
        write_error_csv(out, ea);
    }

    std::ostringstream s;
    s << "cell: " << chosen << (cfg.report_cell == "best" ? " (lowest zip-level RMSE)" : "") << '\n';
    s << "zip-level RMSE: " << csv::format_fixed(chosen_rmse, 4) << '\n';
    s << "zips: " << ea.global.n_zips << ", overestimated " << ea.global.n_over << ", underestimated "
      << ea.global.n_under << '\n';
    s << "overestimated by >= " << csv::format_fixed(ea.threshold, 2) << ": " << ea.global.n_over_by_threshold
      << ", |gap| >= " << csv::format_fixed(ea.threshold, 2) << ": " << ea.global.n_absgap_ge_threshold << "\n\n";
    s << "per metro (zips / over / under / fraction over):\n";
    for (const auto& r : ea.metros) {
        s << "  " << r.metro << ": " << r.n_zips << " / " << r.n_over << " / " << r.n_under << " / "
          << csv::format_fixed(r.fraction_overestimated, 3) << '\n';
    }
    s << "\nbaselines (tweet RMSE / zip RMSE):\n";
    for (const auto& b : results.at("baselines")) {
        s << "  " << b.at("name").get<std::string>() << " (" << csv::format_fixed(b.at("constant").get<double>(), 4)
          << "): " << csv::format_fixed(b.at("tweet_rmse").get<double>(), 4) << " / "
          << csv::format_fixed(b.at("zip_rmse").get<double>(), 4) << '\n';
    }
    s << "\nmodel cells (tweet RMSE / CV RMSE / zip RMSE):\n";
    for (const auto& c : results.at("cells")) {
        s << "  " << c.at("cell").get<std::string>() << ": ";
        if (c.at("status") != "ok") {
            s << "failed\n";
            continue;
        }
        s << csv::format_fixed(c.at("tweet_rmse").get<double>(), 4) << " / "
          << (c.at("cv_rmse").is_null() ? std::string("NA") : csv::format_fixed(c.at("cv_rmse").get<double>(), 4))
          << " / " << csv::format_fixed(c.at("zip_rmse").get<double>(), 4) << '\n';
    }
    const auto summary_path = artifact(cfg, "summary.txt");
    {
        auto out = open_out(summary_path);
        out << s.str();
    }
    timer.stop();
    log << s.str();
    ManifestFiles files;
    files.inputs = {{"results_json", json_path}, {"zip_predictions", zip_path}};
    files.outputs = {{"error_analysis", ea_path}, {"summary", summary_path}};
    files.rows = {{"zips", ea.global.n_zips}};
    write_manifest(cfg, "report", files, timer);
    return kExitOk;
}

int cmd_run(const PipelineConfig& cfg, std::ostream& log) {
    cmd_ingest(cfg, log);
    cmd_split(cfg, log);
    const int code = cmd_matrix(cfg, log);
    cmd_report(cfg, log);
    return code;
}

}  // namespace vh

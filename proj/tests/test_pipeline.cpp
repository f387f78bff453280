#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "vh/common.hpp"
#include "vh/csv.hpp"
#include "vh/pipeline.hpp"
#include "vh/synth.hpp"

using namespace vh;
namespace fs = std::filesystem;

namespace {

PipelineConfig config_at(const fs::path& file, const std::vector<KeyValueConfig::Entry>& overrides = {}) {
    auto kv = KeyValueConfig::load(file);
    for (const auto& [k, v] : overrides) kv.override_value(k, v);
    return PipelineConfig::from(kv);
}

// One metro, zips given as (code, lat, lon, n_tweets).
struct MiniZip {
    std::string code;
    double lat;
    double lon;
    int tweets;
};

fs::path mini_fixture(const std::string& name, const std::vector<MiniZip>& zips, const std::string& extra_config = "") {
    const auto dir = test::temp_dir(name);
    std::string corpus, lookup = "zip,lat,lon\n", features = "zip,zhvi,n_health,n_edu,n_pst\n",
                                truth = "zip,hesitancy\n";
    int id = 1;
    for (const auto& z : zips) {
        for (int t = 0; t < z.tweets; ++t) {
            nlohmann::ordered_json j;
            j["tweet_id"] = std::to_string(id++);
            j["text"] = "Masks and vaccines #covid day " + std::to_string(t);
            j["lat"] = z.lat + 0.001 * t;
            j["lon"] = z.lon;
            j["sentiment"] = 0.1;
            corpus += j.dump() + "\n";
        }
        lookup += z.code + "," + csv::format_double(z.lat) + "," + csv::format_double(z.lon) + "\n";
        features += z.code + ",250000,10,5,20\n";
        truth += z.code + ",0.3\n";
    }
    test::write_file(dir / "corpus.jsonl", corpus);
    test::write_file(dir / "lookup.csv", lookup);
    test::write_file(dir / "features.csv", features);
    test::write_file(dir / "truth.csv", truth);
    test::write_file(dir / "config.txt",
                     "paths.corpus = corpus.jsonl\npaths.zip_lookup = lookup.csv\npaths.zip_features = features.csv\n"
                     "paths.ground_truth = truth.csv\npaths.output_dir = out\nboxes.metro_a = 40,41,-75,-74\n" +
                         extra_config);
    return dir;
}

std::string table1_total(const fs::path& out) {
    const auto text = test::read_file(out / "table1.csv");
    std::istringstream in(text);
    std::string line, last;
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    return last;
}

synth::Fixture small_synth(const std::string& name, synth::Options o = {}) {
    o.n_zips = o.n_zips == 20 ? 6 : o.n_zips;
    o.tweets_per_zip = o.tweets_per_zip == 50 ? 20 : o.tweets_per_zip;
    o.dim = o.dim == 300 ? 16 : o.dim;
    return synth::write_fixture(test::temp_dir(name), o);
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("ingest on a 12-tweet fixture") {
    // Two zips of six tweets each; the minimum is lowered so both survive.
    const auto dir = mini_fixture("ingest12", {{"10001", 40.2, -74.8, 6}, {"10002", 40.6, -74.3, 6}},
                                  "filter.min_tweets = 6\n");
    const auto cfg = config_at(dir / "config.txt");
    std::ostringstream log;
    CHECK(cmd_ingest(cfg, log) == kExitOk);
    const auto table = test::read_file(dir / "out" / "table1.csv");
    CHECK(table.find("metro_a,2,12,6.000,") != std::string::npos);
    CHECK(table1_total(dir / "out").rfind("Total,2,12,", 0) == 0);
    CHECK(fs::exists(dir / "out" / "manifest_ingest.json"));

    CHECK(cmd_stats(cfg, log) == kExitOk);
    CHECK(test::read_file(dir / "out" / "table1.csv") == table);
}

TEST_CASE("ingest drops a zip below the tweet minimum") {
    const auto dir = mini_fixture("ingest9", {{"10001", 40.2, -74.8, 10}, {"10002", 40.6, -74.3, 9}});
    const auto cfg = config_at(dir / "config.txt");
    std::ostringstream log;
    CHECK(cmd_ingest(cfg, log) == kExitOk);
    const auto table = test::read_file(dir / "out" / "table1.csv");
    CHECK(table1_total(dir / "out").rfind("Total,1,10,", 0) == 0);
    const auto located = test::read_file(dir / "out" / "located.jsonl");
    CHECK(located.find("10002") == std::string::npos);
    const auto report = read_json(dir / "out" / "ingest_report.json");
    CHECK(report["min_tweet_filter"]["removed_tweets"] == 9);
    CHECK(report["min_tweet_filter"]["removed_zips"] == 1);
}

TEST_CASE("rerunning ingest and split gives identical digests") {
    const auto fx = small_synth("rerun");
    const auto cfg = config_at(fx.config);
    std::ostringstream log;
    cmd_ingest(cfg, log);
    cmd_split(cfg, log);
    const auto out = cfg.output_dir;
    const std::vector<std::string> names = {"located.jsonl", "table1.csv", "ingest_report.json", "split.csv"};
    std::vector<std::string> first;
    for (const auto& n : names) first.push_back(sha256_file(out / n));
    cmd_ingest(cfg, log);
    cmd_split(cfg, log);
    for (std::size_t i = 0; i < names.size(); ++i) CHECK_MESSAGE(sha256_file(out / names[i]) == first[i], names[i]);

    const auto manifest = read_json(out / "manifest_ingest.json");
    CHECK(manifest["artifact_version"] == kVersion);
    CHECK(manifest["outputs"]["located"]["sha256"] == first[0]);
}

TEST_CASE("ingest report counts the fixture noise records") {
    const auto fx = small_synth("noise");
    const auto cfg = config_at(fx.config);
    std::ostringstream log;
    cmd_ingest(cfg, log);
    const auto report = read_json(cfg.output_dir / "ingest_report.json");
    CHECK(report["kept_tweets"] == fx.clean_tweets);
    CHECK(report["outside_boxes"] == 5);
    CHECK(report["min_tweet_filter"]["removed_tweets"] == 6);
    CHECK(report["join"]["dropped_tweets"] == 12);
    CHECK(report["rejected_by_reason"].size() >= 2);
}

TEST_CASE("matrix definition") {
    const auto& m = full_matrix();
    REQUIRE(m.size() == 32);
    CHECK(m.front().id == "text_only:svr_rbf:no_sentiment");
    CHECK(m[1].id == "text_only:svr_rbf:sentiment");
    CHECK(m[30].id == "zip_only:svr_rbf:no_sentiment");
    CHECK_FALSE(m[30].features.use_text);
    std::set<std::string> ids;
    for (const auto& c : m) ids.insert(c.id);
    CHECK(ids.size() == 32);
    CHECK(find_cell("hybrid:sgd:sentiment").family == Family::SGD);
    CHECK_FALSE(find_cell("hybrid:svr_rbf_nozip:sentiment").features.use_zip_features);
    CHECK_THROWS_AS(find_cell("hybrid:forest:sentiment"), Error);
}

TEST_CASE("single-cell selection gives one model row and six baselines") {
    const auto fx = small_synth("single");
    const auto cfg = config_at(fx.config, {{"matrix.cells", "text_only:ols:no_sentiment"}});
    std::ostringstream log;
    cmd_ingest(cfg, log);
    cmd_split(cfg, log);
    CHECK(cmd_matrix(cfg, log) == kExitOk);
    const auto table = csv::read(cfg.output_dir / "results.csv");
    std::size_t models = 0, baselines = 0;
    for (const auto& row : table.rows) {
        if (row[0] == "baseline") ++baselines;
        else ++models;
    }
    CHECK(models == 1);
    CHECK(baselines == 6);
    const auto json = read_json(cfg.output_dir / "results.json");
    REQUIRE(json["cells"].size() == 1);
    CHECK(json["cells"][0]["spec"]["family"] == "ols");

    CHECK(cmd_report(cfg, log) == kExitOk);
    CHECK(test::read_file(cfg.output_dir / "summary.txt").find("cell: text_only:ols:no_sentiment") == 0);

    const auto train_cfg = config_at(fx.config, {{"train.cell", "zip_only:svr_rbf:sentiment"}});
    CHECK(cmd_train(train_cfg, log) == kExitOk);
    const auto model = deserialize_model(test::read_file(cfg.output_dir / "model_zip_only_svr_rbf_sentiment.json"));
    CHECK(model.family() == Family::SVRRBF);
    CHECK(model.layout == std::vector<std::string>{"sentiment", "zhvi", "n_health", "n_edu", "n_pst"});
}

TEST_CASE("ols on labels linear in zip features beats every baseline") {
    synth::Options o;
    o.label_noise = 0.0;
    const auto fx = small_synth("linear_exact", o);
    const auto cfg = config_at(fx.config, {{"matrix.cells", "text_only:ols:no_sentiment"}});
    std::ostringstream log;
    cmd_ingest(cfg, log);
    cmd_split(cfg, log);
    CHECK(cmd_matrix(cfg, log) == kExitOk);
    const auto json = read_json(cfg.output_dir / "results.json");
    const double zip_rmse = json["cells"][0]["zip_rmse"];
    CHECK(zip_rmse < 0.01);
    for (const auto& b : json["baselines"]) CHECK(zip_rmse < b["zip_rmse"].get<double>());
}

TEST_CASE("a failing cell yields exit code 2 and keeps the others") {
    const auto fx = small_synth("partial");
    const auto cfg = config_at(
        fx.config, {{"matrix.cells", "zip_only:svr_rbf:no_sentiment,text_only:ols:no_sentiment"}, {"svr_rbf.C", "-1"}});
    std::ostringstream log;
    cmd_ingest(cfg, log);
    cmd_split(cfg, log);
    CHECK(cmd_matrix(cfg, log) == kExitPartial);
    const auto json = read_json(cfg.output_dir / "results.json");
    REQUIRE(json["cells"].size() == 2);
    CHECK(json["cells"][0]["status"] == "failed");
    CHECK(json["cells"][1]["status"] == "ok");

    // Best-cell selection skips the failed cell; asking for it names the alternatives.
    CHECK(cmd_report(cfg, log) == kExitOk);
    auto kv = cfg.source;
    kv.override_value("report.cell", "zip_only:svr_rbf:no_sentiment");
    try {
        cmd_report(PipelineConfig::from(kv), log);
        FAIL("expected missing_cell");
    } catch (const Error& e) {
        CHECK(e.code() == "missing_cell");
        CHECK(std::string(e.what()).find("text_only:ols:no_sentiment") != std::string::npos);
    }
}

TEST_CASE("config validation") {
    const auto dir = test::temp_dir("config_bad");
    test::write_file(dir / "c.txt", "paths.corpus = x\nmodel.sead = 3\n");
    CHECK_THROWS_AS(config_at(dir / "c.txt"), Error);
    test::write_file(dir / "d.txt", "matrix.cells = text_only:ols:nope\n");
    CHECK_THROWS_AS(config_at(dir / "d.txt"), Error);
    test::write_file(dir / "e.txt", "boxes.a = 1,2,3\n");
    CHECK_THROWS_AS(config_at(dir / "e.txt"), Error);
    test::write_file(dir / "f.txt", "split.test_frac = abc\n");
    CHECK_THROWS_AS(config_at(dir / "f.txt"), Error);

    test::write_file(dir / "g.txt", "paths.corpus = missing.jsonl\npaths.zip_features = z.csv\nboxes.a = 1,2,3,4\n");
    std::ostringstream log;
    try {
        cmd_ingest(config_at(dir / "g.txt"), log);
        FAIL("expected missing_file");
    } catch (const Error& e) {
        CHECK(e.code() == "missing_file");
    }
}

TEST_CASE("matrix refuses a split that does not match the corpus") {
    const auto fx = small_synth("stale");
    const auto cfg = config_at(fx.config, {{"matrix.cells", "text_only:ols:no_sentiment"}});
    std::ostringstream log;
    cmd_ingest(cfg, log);
    cmd_split(cfg, log);
    auto split = test::read_file(cfg.output_dir / "split.csv");
    split = split.substr(0, split.rfind('\n', split.size() - 2) + 1);
    test::write_file(cfg.output_dir / "split.csv", split);
    try {
        cmd_matrix(cfg, log);
        FAIL("expected stale_artifact");
    } catch (const Error& e) {
        CHECK(e.code() == "stale_artifact");
    }
}

namespace {

// Writes the two matrix artifacts the report stage reads.
fs::path report_fixture(const std::string& name, const std::vector<std::pair<std::string, double>>& cells,
                        const std::string& zip_rows) {
    const auto dir = test::temp_dir(name);
    nlohmann::ordered_json j;
    j["artifact_version"] = kVersion;
    j["cells"] = nlohmann::ordered_json::array();
    for (const auto& [id, z] : cells) {
        j["cells"].push_back({{"cell", id}, {"status", "ok"}, {"tweet_rmse", z}, {"cv_rmse", nullptr}, {"zip_rmse", z}});
    }
    j["baselines"] = nlohmann::ordered_json::array();
    fs::create_directories(dir / "out");
    test::write_file(dir / "out" / "results.json", j.dump());
    test::write_file(dir / "out" / "zip_predictions.csv", "cell,zip,metro,n_test_tweets,predicted,truth\n" + zip_rows);
    test::write_file(dir / "config.txt", "paths.output_dir = out\n");
    return dir;
}

}  // namespace

TEST_CASE("report on perfect predictions is all zero") {
    const auto dir = report_fixture("report_perfect", {{"a:ols:no_sentiment", 0.0}},
                                    "a:ols:no_sentiment,10001,nyc,3,0.4,0.4\n"
                                    "a:ols:no_sentiment,90001,la,2,0.25,0.25\n");
    std::ostringstream log;
    CHECK(cmd_report(config_at(dir / "config.txt"), log) == kExitOk);
    CHECK(test::read_file(dir / "out" / "error_analysis.csv") ==
          "metro,n_zips,n_over,n_under,fraction_overestimated,n_over_by_0.20,n_absgap_ge_0.20\n"
          "la,1,0,0,0.000000,0,0\n"
          "nyc,1,0,0,0.000000,0,0\n"
          "ALL,2,0,0,0.000000,0,0\n");
}

TEST_CASE("report picks the unique best cell and flags an overestimating metro") {
    const std::string rows =
        "worse,10001,nyc,3,0.1,0.4\n"
        "worse,10002,nyc,3,0.1,0.5\n"
        "best,10001,nyc,3,0.5,0.4\n"
        "best,10002,nyc,3,0.8,0.5\n"
        "best,90001,la,2,0.2,0.3\n";
    const auto dir = report_fixture("report_best", {{"worse", 0.35}, {"best", 0.2}}, rows);
    std::ostringstream log;
    CHECK(cmd_report(config_at(dir / "config.txt"), log) == kExitOk);
    CHECK(test::read_file(dir / "out" / "summary.txt").rfind("cell: best", 0) == 0);
    const auto ea = test::read_file(dir / "out" / "error_analysis.csv");
    CHECK(ea.find("nyc,2,2,0,1.000000,1,1\n") != std::string::npos);
    CHECK(ea.find("la,1,0,1,0.000000,0,0\n") != std::string::npos);
}

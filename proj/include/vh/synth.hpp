#ifndef VH_SYNTH_HPP
#define VH_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vh::synth {

enum class Scenario {
    Linear,     // hesitancy is affine in the standardized zip features
    Nonlinear,  // hesitancy is a bump in standardized ZHVI
};

struct Options {
    std::uint64_t seed = 7;
    Scenario scenario = Scenario::Linear;
    int n_zips = 20;  // split evenly over two metros
    int tweets_per_zip = 50;
    int dim = 300;
    double label_noise = 0.02;  // std of zip-level label noise
    double text_signal = 1.0;   // length of the planted direction in word vectors
    /// Adds records the ingest stage must reject or drop: malformed lines,
    /// a duplicate id, out-of-range sentiment, tweets outside every box, a
    /// zip below the tweet minimum and a zip without features.
    bool include_noise_records = true;
};

struct Fixture {
    std::filesystem::path dir;
    std::filesystem::path config;
    std::filesystem::path corpus;
    std::filesystem::path vectors;
    std::filesystem::path zip_features;
    std::filesystem::path zip_lookup;
    std::filesystem::path ground_truth;
    std::map<std::string, double> hesitancy;  // labeled zips only
    std::size_t clean_tweets = 0;             // tweets expected to survive ingest
};

/// Writes corpus.jsonl, vectors.txt, zip_features.csv, zip_centroids.csv,
/// ground_truth.csv and config.txt into `dir`. Identical options give
/// byte-identical files.
Fixture write_fixture(const std::filesystem::path& dir, const Options& options = {});

Scenario parse_scenario(const std::string& s);

const std::vector<std::string>& hesitant_words();
const std::vector<std::string>& accepting_words();
const std::vector<std::string>& neutral_words();
const std::vector<std::string>& hesitant_hashtags();
const std::vector<std::string>& accepting_hashtags();
const std::vector<std::string>& neutral_hashtags();

}  // namespace vh::synth

#endif  // VH_SYNTH_HPP

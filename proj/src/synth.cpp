#include "vh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vh/common.hpp"
#include "vh/csv.hpp"
#include "vh/textprep.hpp"

namespace vh::synth {

namespace {

std::vector<std::string> words(std::initializer_list<const char*> list) { return {list.begin(), list.end()}; }

struct Metro {
    const char* name;
    const char* zip_prefix;
    double min_lat, max_lat, min_lon, max_lon;
};

constexpr Metro kMetros[] = {
    {"metro_a", "100", 40.0, 41.0, -75.0, -74.0},
    {"metro_b", "900", 34.0, 35.0, -119.0, -118.0},
};

struct Zip {
    std::string code;
    int metro = 0;
    double lat = 0.0, lon = 0.0;
};

// Grid positions 0.15 degrees apart, well inside the box.
Zip make_zip(int metro, int slot) {
    const auto& m = kMetros[metro];
    Zip z;
    z.metro = metro;
    std::string num = std::to_string(slot + 1);
    if (num.size() < 2) num = "0" + num;
    z.code = std::string(m.zip_prefix) + num;
    z.lat = m.min_lat + 0.15 + 0.15 * (slot / 5);
    z.lon = m.min_lon + 0.15 + 0.15 * (slot % 5);
    return z;
}

double round_to(double v, int decimals) {
    const double f = std::pow(10.0, decimals);
    return std::round(v * f) / f;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
    return v[rng.uniform_index(v.size())];
}

// Every generated word must come out of the text pipeline unchanged, or
// the vectors would not line up with the tokens.
void check_vocabulary() {
    const TextPipeline text;
    for (const auto* list : {&hesitant_words(), &accepting_words(), &neutral_words(), &hesitant_hashtags(),
                             &accepting_hashtags(), &neutral_hashtags()}) {
        for (const auto& w : *list) {
            const auto p = text(w);
            if (p.tokens.size() != 1 || p.tokens[0].text != w) {
                throw Error("synth_vocabulary", "word '" + w + "' is changed by the text pipeline");
            }
        }
    }
}

std::string format_vector(const std::string& token, const Vector& v) {
    std::string line = token;
    for (Eigen::Index i = 0; i < v.size(); ++i) line += ' ' + csv::format_fixed(v(i), 6);
    return line;
}

}  // namespace

const std::vector<std::string>& hesitant_words() {
    static const auto w = words({"hoax", "plandemic", "microchip", "refuse", "experimental", "tyranny", "freedom",
                                 "poison", "ivermectin", "scam", "mandate", "agenda", "coverup", "propaganda",
                                 "bigpharma", "sheeple"});
    return w;
}

const std::vector<std::string>& accepting_words() {
    static const auto w = words({"vaccine", "booster", "appointment", "pfizer", "moderna", "dose", "grateful",
                                 "science", "protect", "clinic", "pharmacy", "immunize", "nurse", "safe", "community",
                                 "hope"});
    return w;
}

const std::vector<std::string>& neutral_words() {
    static const auto w = words({"today", "weather", "coffee", "game", "music", "city", "friend", "weekend", "food",
                                 "traffic", "work", "happy", "morning", "family", "dinner", "park", "movie", "beach",
                                 "school", "train"});
    return w;
}

const std::vector<std::string>& hesitant_hashtags() {
    static const auto w = words({"nomandate", "medicalfreedom", "novaxx"});
    return w;
}

const std::vector<std::string>& accepting_hashtags() {
    static const auto w = words({"getvaccinated", "thisismyshot", "vaxup"});
    return w;
}

const std::vector<std::string>& neutral_hashtags() {
    static const auto w = words({"sunday", "nyc", "throwback"});
    return w;
}

Scenario parse_scenario(const std::string& s) {
    if (s == "linear") return Scenario::Linear;
    if (s == "nonlinear") return Scenario::Nonlinear;
    throw Error("bad_config", "unknown scenario '" + s + "' (expected linear or nonlinear)");
}

Fixture write_fixture(const std::filesystem::path& dir, const Options& o) {
    if (o.n_zips < 2 || o.tweets_per_zip < 1 || o.dim < 1) throw Error("bad_config", "synth: invalid sizes");
    check_vocabulary();
    std::filesystem::create_directories(dir);
    Rng rng(o.seed);

    Fixture fx;
    fx.dir = dir;
    fx.config = dir / "config.txt";
    fx.corpus = dir / "corpus.jsonl";
    fx.vectors = dir / "vectors.txt";
    fx.zip_features = dir / "zip_features.csv";
    fx.zip_lookup = dir / "zip_centroids.csv";
    fx.ground_truth = dir / "ground_truth.csv";

    // Zips and their features.
    std::vector<Zip> zips;
    const int per_metro = (o.n_zips + 1) / 2;
    for (int i = 0; i < o.n_zips; ++i) zips.push_back(make_zip(i / per_metro, i % per_metro));
    const auto n = static_cast<Eigen::Index>(zips.size());
    Matrix feats(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        feats(i, 0) = std::round(350000.0 * std::exp(0.35 * rng.normal()));
        feats(i, 1) = std::max(0.0, std::round(40.0 + 12.0 * rng.normal()));
        feats(i, 2) = std::max(0.0, std::round(25.0 + 8.0 * rng.normal()));
        feats(i, 3) = std::max(0.0, std::round(60.0 + 20.0 * rng.normal()));
    }
    const RowVector mean = feats.colwise().mean();
    const Matrix centered = feats.rowwise() - mean;
    const RowVector sd = (centered.array().square().colwise().sum() / static_cast<double>(n)).sqrt();
    Matrix s = centered;
    for (Eigen::Index c = 0; c < 4; ++c) {
        if (sd(c) > 0) s.col(c) /= sd(c);
    }

    // Zip-level hesitancy.
    std::vector<double> h(zips.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = 0.0;
        if (o.scenario == Scenario::Linear) {
            v = 0.4 + 0.12 * s(i, 0) - 0.09 * s(i, 1) + 0.07 * s(i, 2) + 0.05 * s(i, 3);
        } else {
            v = 0.15 + 0.6 * std::exp(-s(i, 0) * s(i, 0));
        }
        v += o.label_noise * rng.normal();
        h[static_cast<std::size_t>(i)] = round_to(std::clamp(v, 0.01, 0.99), 4);
        fx.hesitancy[zips[static_cast<std::size_t>(i)].code] = h[static_cast<std::size_t>(i)];
    }

    // Word vectors: isotropic noise plus +/- a shared planted direction.
    Vector u(o.dim);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
    u.normalize();
    const double noise_scale = 1.0 / std::sqrt(static_cast<double>(o.dim));
    std::vector<std::string> vector_lines;
    const auto add_vectors = [&](const std::vector<std::string>& list, double sign) {
        for (const auto& w : list) {
            Vector v(o.dim);
            for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = noise_scale * rng.normal();
            v += sign * o.text_signal * u;
            vector_lines.push_back(format_vector(w, v));
        }
    };
    add_vectors(hesitant_words(), 1.0);
    add_vectors(accepting_words(), -1.0);
    add_vectors(neutral_words(), 0.0);
    add_vectors(hesitant_hashtags(), 1.0);
    add_vectors(accepting_hashtags(), -1.0);
    add_vectors(neutral_hashtags(), 0.0);
    std::vector<std::string> fillers;
    for (int k = 0; k < 50; ++k) {
        std::string w;
        for (int c = 0; c < 7; ++c) w += static_cast<char>('a' + rng.uniform_index(26));
        fillers.push_back(w);
    }
    add_vectors(fillers, 0.0);

    // Tweets.
    static const char* const kStop[] = {"the", "is", "not", "and", "very", "my", "this"};
    std::vector<std::string> lines;
    std::size_t next_id = 1000;
    const auto tweet_line = [&](const std::string& id, const std::string& text, double lat, double lon,
                                double sentiment) {
        nlohmann::ordered_json j;
        j["tweet_id"] = id;
        j["text"] = text;
        j["lat"] = round_to(lat, 5);
        j["lon"] = round_to(lon, 5);
        j["sentiment"] = sentiment;
        return j.dump();
    };
    const auto make_text = [&](double hz, int& hesitant_count) {
        std::vector<std::string> parts;
        hesitant_count = 0;
        for (int k = 0; k < 3; ++k) {
            const bool hes = rng.uniform() < hz;
            hesitant_count += hes;
            parts.push_back(pick(hes ? hesitant_words() : accepting_words(), rng));
        }
        const int n_neutral = 2 + static_cast<int>(rng.uniform_index(3));
        for (int k = 0; k < n_neutral; ++k) parts.push_back(pick(neutral_words(), rng));
        if (rng.uniform() < 0.5) parts.push_back(kStop[rng.uniform_index(std::size(kStop))]);
        if (rng.uniform() < 0.6) {
            parts.push_back("#" + pick(rng.uniform() < hz ? hesitant_hashtags() : accepting_hashtags(), rng));
        }
        if (rng.uniform() < 0.2) parts.push_back("#" + pick(neutral_hashtags(), rng));
        rng.shuffle(parts.begin(), parts.end());
        if (parts[0][0] != '#') parts[0][0] = static_cast<char>(std::toupper(static_cast<unsigned char>(parts[0][0])));
        std::string text;
        if (rng.uniform() < 0.2) text += "@user_" + std::to_string(rng.uniform_index(1000)) + " ";
        for (std::size_t k = 0; k < parts.size(); ++k) text += (k ? " " : "") + parts[k];
        if (rng.uniform() < 0.15) text += " https://t.co/x" + std::to_string(rng.uniform_index(100000));
        return text;
    };
    const auto emit_zip_tweets = [&](const Zip& z, double hz, int count) {
        for (int t = 0; t < count; ++t) {
            int hes = 0;
            const auto text = make_text(hz, hes);
            const double sentiment =
                round_to(std::clamp(0.2 - 0.5 * (hes / 3.0 - 0.5) + 0.2 * rng.normal(), -1.0, 1.0), 4);
            const double lat = z.lat + 0.02 * (rng.uniform() - 0.5);
            const double lon = z.lon + 0.02 * (rng.uniform() - 0.5);
            lines.push_back(tweet_line(std::to_string(next_id++), text, lat, lon, sentiment));
        }
    };
    for (std::size_t i = 0; i < zips.size(); ++i) emit_zip_tweets(zips[i], h[i], o.tweets_per_zip);
    fx.clean_tweets = zips.size() * static_cast<std::size_t>(o.tweets_per_zip);

    std::vector<Zip> extra_zips;
    if (o.include_noise_records) {
        // Slots past the labeled grid in metro_a.
        auto small = make_zip(0, per_metro);
        auto featureless = make_zip(0, per_metro + 1);
        extra_zips = {small, featureless};
        emit_zip_tweets(small, 0.5, 6);
        emit_zip_tweets(featureless, 0.5, 12);
        for (int k = 0; k < 5; ++k) {
            lines.push_back(tweet_line(std::to_string(next_id++), "Traffic downtown today", 10.0 + k, 10.0, 0.0));
        }
        lines.push_back("{\"tweet_id\": \"broken\", \"text\": ");
        lines.push_back(tweet_line("1000", "Duplicate id coffee", zips[0].lat, zips[0].lon, 0.0));
        lines.push_back(tweet_line(std::to_string(next_id++), "Too positive coffee", zips[0].lat, zips[0].lon, 1.5));
        // Spread the noise records through the file deterministically.
        rng.shuffle(lines.begin(), lines.end());
    }

    {
        std::ofstream out(fx.corpus, std::ios::binary);
        for (const auto& l : lines) out << l << '\n';
    }
    {
        std::ofstream out(fx.vectors, std::ios::binary);
        out << vector_lines.size() << ' ' << o.dim << '\n';
        for (const auto& l : vector_lines) out << l << '\n';
    }
    {
        std::ofstream out(fx.zip_features, std::ios::binary);
        out << "zip,zhvi,n_health,n_edu,n_pst\n";
        for (Eigen::Index i = 0; i < n; ++i) {
            out << zips[static_cast<std::size_t>(i)].code << ',' << csv::format_double(feats(i, 0)) << ','
                << csv::format_double(feats(i, 1)) << ',' << csv::format_double(feats(i, 2)) << ','
                << csv::format_double(feats(i, 3)) << '\n';
        }
        if (o.include_noise_records) {
            out << extra_zips[0].code << ",300000,40,25,60\n";
            out << extra_zips[1].code << ",,40,25,60\n";
        }
    }
    {
        std::ofstream out(fx.zip_lookup, std::ios::binary);
        out << "zip,lat,lon\n";
        for (const auto* list : {&zips, &extra_zips}) {
            for (const auto& z : *list) {
                out << z.code << ',' << csv::format_double(z.lat) << ',' << csv::format_double(z.lon) << '\n';
            }
        }
    }
    {
        std::ofstream out(fx.ground_truth, std::ios::binary);
        out << "zip,hesitancy\n";
        for (const auto& [zip, hz] : fx.hesitancy) out << zip << ',' << csv::format_double(hz) << '\n';
    }
    {
        std::ofstream out(fx.config, std::ios::binary);
        out << "# synthetic fixture, seed " << o.seed << "\n"
            << "paths.corpus = corpus.jsonl\n"
            << "paths.vectors = vectors.txt\n"
            << "paths.zip_features = zip_features.csv\n"
            << "paths.zip_lookup = zip_centroids.csv\n"
            << "paths.ground_truth = ground_truth.csv\n"
            << "paths.output_dir = out\n";
        for (const auto& m : kMetros) {
            out << "boxes." << m.name << " = " << csv::format_double(m.min_lat) << ',' << csv::format_double(m.max_lat)
                << ',' << csv::format_double(m.min_lon) << ',' << csv::format_double(m.max_lon) << '\n';
        }
        out << "geo.resolver = centroid\n"
            << "embed.dim = " << o.dim << '\n';
    }
    return fx;
}

}  // namespace vh::synth

#include "vh/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "vh/common.hpp"
#include "vh/csv.hpp"
#include "vh/textprep.hpp"

namespace vh {

using ordered_json = nlohmann::ordered_json;

bool GeoPoint::valid() const {
    return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

void BoundingBox::validate() const {
    if (metro.empty()) throw Error("bad_box", "bounding box with empty metro name");
    if (!(min_lat < max_lat) || !(min_lon < max_lon)) {
        throw Error("bad_box", "bounding box '" + metro + "' needs min_lat < max_lat and min_lon < max_lon");
    }
}

bool BoundingBox::contains(const GeoPoint& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
}

std::map<std::string, std::size_t> ParseReport::reason_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : rejected) ++counts[r.reason];
    return counts;
}

namespace {

struct FieldError {
    std::string reason;
    std::string detail;
};

std::optional<FieldError> read_raw_fields(const nlohmann::json& obj, RawTweet& out) {
    const auto require = [&](const char* name) -> const nlohmann::json* {
        auto it = obj.find(name);
        return it == obj.end() || it->is_null() ? nullptr : &*it;
    };
    const auto* id = require("tweet_id");
    const auto* text = require("text");
    const auto* lat = require("lat");
    const auto* lon = require("lon");
    const auto* sentiment = require("sentiment");
    for (auto [ptr, name] : {std::pair{id, "tweet_id"}, {text, "text"}, {lat, "lat"}, {lon, "lon"},
                             {sentiment, "sentiment"}}) {
        if (ptr == nullptr) return FieldError{"missing_field", name};
    }
    if (!id->is_string()) return FieldError{"wrong_type", "tweet_id"};
    if (!text->is_string()) return FieldError{"wrong_type", "text"};
    for (auto [ptr, name] : {std::pair{lat, "lat"}, {lon, "lon"}, {sentiment, "sentiment"}}) {
        if (!ptr->is_number()) return FieldError{"wrong_type", name};
    }
    out.tweet_id = id->get<std::string>();
    out.text = text->get<std::string>();
    out.point = {lat->get<double>(), lon->get<double>()};
    out.sentiment = sentiment->get<double>();
    if (out.tweet_id.empty()) return FieldError{"empty_tweet_id", ""};
    if (out.text.empty()) return FieldError{"empty_text", ""};
    if (!out.point.valid()) return FieldError{"coordinate_out_of_range", ""};
    if (!std::isfinite(out.sentiment) || out.sentiment < -1.0 || out.sentiment > 1.0) {
        return FieldError{"sentiment_out_of_range", std::to_string(out.sentiment)};
    }
    return std::nullopt;
}

ordered_json raw_to_json(const RawTweet& t) {
    ordered_json j;
    j["tweet_id"] = t.tweet_id;
    j["text"] = t.text;
    j["lat"] = t.point.lat;
    j["lon"] = t.point.lon;
    j["sentiment"] = t.sentiment;
    return j;
}

}  // namespace

std::vector<RawTweet> parse_corpus(std::istream& lines, ParseReport& report) {
    std::vector<RawTweet> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        ++report.lines_read;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            report.rejected.push_back({line_no, "malformed_json", e.what()});
            continue;
        }
        if (!obj.is_object()) {
            report.rejected.push_back({line_no, "malformed_json", "not an object"});
            continue;
        }
        RawTweet t;
        if (auto err = read_raw_fields(obj, t)) {
            report.rejected.push_back({line_no, err->reason, err->detail});
            continue;
        }
        if (!seen.insert(t.tweet_id).second) {
            report.rejected.push_back({line_no, "duplicate_tweet_id", t.tweet_id});
            continue;
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<RawTweet> parse_corpus(const std::filesystem::path& path, ParseReport& report) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open corpus " + path.string());
    return parse_corpus(in, report);
}

void write_corpus(std::ostream& out, std::span<const RawTweet> tweets) {
    for (const auto& t : tweets) out << raw_to_json(t).dump() << '\n';
}

void write_located(std::ostream& out, std::span<const LocatedTweet> tweets) {
    for (const auto& t : tweets) {
        auto j = raw_to_json(t.tweet);
        j["metro"] = t.metro;
        j["zip"] = t.zip;
        if (t.features) {
            j["zhvi"] = t.features->zhvi;
            j["n_health"] = t.features->n_health;
            j["n_edu"] = t.features->n_edu;
            j["n_pst"] = t.features->n_pst;
        }
        out << j.dump() << '\n';
    }
}

std::vector<LocatedTweet> read_located(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open located corpus " + path.string());
    std::vector<LocatedTweet> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto context = path.string() + ":" + std::to_string(line_no);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error("malformed_json", context + ": " + e.what());
        }
        LocatedTweet t;
        if (auto err = read_raw_fields(obj, t.tweet)) throw Error(err->reason, context + ": " + err->detail);
        if (!obj.contains("metro") || !obj.contains("zip")) throw Error("missing_field", context + ": metro/zip");
        t.metro = obj["metro"].get<std::string>();
        t.zip = obj["zip"].get<std::string>();
        if (obj.contains("zhvi")) {
            t.features = ZipFeatureRecord{t.zip, obj["zhvi"].get<double>(), obj["n_health"].get<long long>(),
                                          obj["n_edu"].get<long long>(), obj["n_pst"].get<long long>()};
        }
        out.push_back(std::move(t));
    }
    return out;
}

bool is_retweet(std::string_view text) { return text.rfind("RT @", 0) == 0; }

std::optional<std::string> assign_metro(const GeoPoint& p, std::span<const BoundingBox> boxes) {
    for (const auto& box : boxes) {
        if (box.contains(p)) return box.metro;
    }
    return std::nullopt;
}

bool is_valid_zip(const std::string& zip) {
    return zip.size() == 5 && std::all_of(zip.begin(), zip.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::pair<long long, long long> ExactZipTable::key(const GeoPoint& p) const {
    const double scale = std::pow(10.0, decimals_);
    return {std::llround(p.lat * scale), std::llround(p.lon * scale)};
}

void ExactZipTable::add(const GeoPoint& p, const std::string& zip) {
    if (!is_valid_zip(zip)) throw Error("bad_zip", "invalid zip '" + zip + "'");
    table_[key(p)] = zip;
}

std::optional<std::string> ExactZipTable::resolve(const GeoPoint& p) const {
    if (auto it = table_.find(key(p)); it != table_.end()) return it->second;
    return std::nullopt;
}

ExactZipTable ExactZipTable::load(const std::filesystem::path& path, int decimals) {
    const auto table = csv::read(path, {"lat", "lon", "zip"});
    ExactZipTable out(decimals);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto ctx = path.string() + ":" + std::to_string(table.line_numbers[i]);
        const auto& r = table.rows[i];
        out.add({csv::parse_double(r[0], ctx), csv::parse_double(r[1], ctx)}, r[2]);
    }
    return out;
}

double great_circle_km(const GeoPoint& a, const GeoPoint& b) {
    constexpr double kEarthRadiusKm = 6371.0088;
    constexpr double kRad = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * kRad;
    const double dlon = (b.lon - a.lon) * kRad;
    const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

NearestCentroidResolver::NearestCentroidResolver(std::vector<Centroid> centroids, double cutoff_km)
    : centroids_(std::move(centroids)), cutoff_km_(cutoff_km) {
    if (!(cutoff_km_ > 0.0)) throw Error("bad_config", "centroid cutoff radius must be positive");
    for (const auto& c : centroids_) {
        if (!is_valid_zip(c.zip)) throw Error("bad_zip", "invalid centroid zip '" + c.zip + "'");
        if (!c.point.valid()) throw Error("bad_centroid", "centroid for " + c.zip + " has invalid coordinates");
    }
}

NearestCentroidResolver NearestCentroidResolver::load(const std::filesystem::path& path, double cutoff_km) {
    const auto table = csv::read(path, {"zip", "lat", "lon"});
    std::vector<Centroid> centroids;
    centroids.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto ctx = path.string() + ":" + std::to_string(table.line_numbers[i]);
        const auto& r = table.rows[i];
        centroids.push_back({r[0], {csv::parse_double(r[1], ctx), csv::parse_double(r[2], ctx)}});
    }
    return NearestCentroidResolver(std::move(centroids), cutoff_km);
}

std::optional<std::string> NearestCentroidResolver::resolve(const GeoPoint& p) const {
    constexpr double kTieKm = 1e-9;
    const Centroid* best = nullptr;
    double best_d = 0.0;
    for (const auto& c : centroids_) {
        const double d = great_circle_km(p, c.point);
        if (d > cutoff_km_) continue;
        if (best == nullptr || d < best_d - kTieKm || (std::abs(d - best_d) <= kTieKm && c.zip < best->zip)) {
            best = &c;
            best_d = d;
        }
    }
    if (best == nullptr) return std::nullopt;
    return best->zip;
}

std::optional<std::string> resolve_zip(const GeoPoint& p, const ZipResolver& resolver) { return resolver.resolve(p); }

std::vector<LocatedTweet> filter_min_tweets(std::span<const LocatedTweet> tweets, std::size_t threshold) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& t : tweets) ++counts[t.zip];
    std::vector<LocatedTweet> out;
    for (const auto& t : tweets) {
        if (counts[t.zip] >= threshold) out.push_back(t);
    }
    return out;
}

ZipFeatureTable load_zip_features(std::istream& in, const std::string& source) {
    const auto table = csv::read(in, {"zip", "zhvi", "n_health", "n_edu", "n_pst"}, source);
    ZipFeatureTable out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto ctx = source + ":" + std::to_string(table.line_numbers[i]);
        const auto& r = table.rows[i];
        if (!is_valid_zip(r[0])) throw Error("bad_zip", ctx + ": invalid zip '" + r[0] + "'");
        if (out.contains(r[0])) throw Error("duplicate_zip", ctx + ": duplicate zip " + r[0]);
        const bool any_null = std::any_of(r.begin() + 1, r.end(), [](const std::string& f) { return f.empty(); });
        if (any_null) {
            out.emplace(r[0], std::nullopt);
            continue;
        }
        ZipFeatureRecord rec{r[0], csv::parse_double(r[1], ctx), csv::parse_int(r[2], ctx), csv::parse_int(r[3], ctx),
                             csv::parse_int(r[4], ctx)};
        if (!(rec.zhvi > 0.0)) throw Error("bad_feature", ctx + ": zhvi must be positive");
        if (rec.n_health < 0 || rec.n_edu < 0 || rec.n_pst < 0) {
            throw Error("bad_feature", ctx + ": establishment counts must be nonnegative");
        }
        out.emplace(r[0], rec);
    }
    return out;
}

ZipFeatureTable load_zip_features(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open zip features " + path.string());
    return load_zip_features(in, path.string());
}

std::vector<LocatedTweet> join_zip_features(std::span<const LocatedTweet> tweets, const ZipFeatureTable& features,
                                            JoinReport* report) {
    std::vector<LocatedTweet> out;
    std::set<std::string> dropped;
    std::size_t dropped_tweets = 0;
    for (const auto& t : tweets) {
        auto it = features.find(t.zip);
        if (it == features.end() || !it->second) {
            dropped.insert(t.zip);
            ++dropped_tweets;
            continue;
        }
        auto joined = t;
        joined.features = *it->second;
        out.push_back(std::move(joined));
    }
    if (report != nullptr) {
        report->dropped_tweets = dropped_tweets;
        report->dropped_zips.assign(dropped.begin(), dropped.end());
    }
    return out;
}

CorpusStats corpus_stats(std::span<const LocatedTweet> tweets, std::span<const ProcessedText> processed) {
    if (tweets.size() != processed.size()) throw Error("size_mismatch", "corpus_stats: tweets/processed size mismatch");
    struct Acc {
        std::set<std::string> zips;
        std::size_t tweets = 0, before = 0, after = 0;
        std::set<std::string> unique;
    };
    std::map<std::string, Acc> by_metro;
    std::set<std::string> all_zips;
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        auto& acc = by_metro[tweets[i].metro];
        acc.zips.insert(tweets[i].zip);
        all_zips.insert(tweets[i].zip);
        ++acc.tweets;
        acc.before += processed[i].n_hashtags_raw;
        acc.after += processed[i].n_hashtags_processed;
        for (const auto& tok : processed[i].tokens) {
            if (tok.is_hashtag) acc.unique.insert(tok.text);
        }
    }
    CorpusStats stats;
    for (const auto& [metro, acc] : by_metro) {
        MetroStats row;
        row.metro = metro;
        row.n_zips = acc.zips.size();
        row.n_tweets = acc.tweets;
        row.avg_tweets_per_zip = static_cast<double>(acc.tweets) / static_cast<double>(acc.zips.size());
        row.hashtags_before = acc.before;
        row.hashtags_after = acc.after;
        row.unique_hashtags_after = acc.unique.size();
        stats.total_tweets += row.n_tweets;
        stats.total_hashtags_before += row.hashtags_before;
        stats.total_hashtags_after += row.hashtags_after;
        stats.metros.push_back(std::move(row));
    }
    stats.total_zips = all_zips.size();
    std::stable_sort(stats.metros.begin(), stats.metros.end(),
                     [](const MetroStats& a, const MetroStats& b) { return a.n_tweets > b.n_tweets; });
    return stats;
}

void write_stats_csv(std::ostream& out, const CorpusStats& stats) {
    out << "metro,n_zips,n_tweets,avg_tweets_per_zip,hashtags_before,hashtags_after,unique_hashtags_after\n";
    for (const auto& m : stats.metros) {
        out << m.metro << ',' << m.n_zips << ',' << m.n_tweets << ',' << csv::format_fixed(m.avg_tweets_per_zip, 3)
            << ',' << m.hashtags_before << ',' << m.hashtags_after << ',' << m.unique_hashtags_after << '\n';
    }
    out << "Total," << stats.total_zips << ',' << stats.total_tweets << ",NA," << stats.total_hashtags_before << ','
        << stats.total_hashtags_after << ",NA\n";
}

}  // namespace vh

#ifndef VH_CORPUS_HPP
#define VH_CORPUS_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vh {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    bool valid() const;
    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct BoundingBox {
    std::string metro;
    double min_lat = 0.0;
    double max_lat = 0.0;
    double min_lon = 0.0;
    double max_lon = 0.0;

    /// Throws if min >= max on either axis.
    void validate() const;
    /// Boundaries are inclusive.
    bool contains(const GeoPoint& p) const;
    GeoPoint center() const { return {(min_lat + max_lat) / 2, (min_lon + max_lon) / 2}; }
};

struct RawTweet {
    std::string tweet_id;
    std::string text;
    GeoPoint point;
    double sentiment = 0.0;

    friend bool operator==(const RawTweet&, const RawTweet&) = default;
};

struct ZipFeatureRecord {
    std::string zip;
    double zhvi = 0.0;
    long long n_health = 0;
    long long n_edu = 0;
    long long n_pst = 0;

    friend bool operator==(const ZipFeatureRecord&, const ZipFeatureRecord&) = default;
};

/// A tweet resolved to a metro and zip; `features` is filled by the join.
struct LocatedTweet {
    RawTweet tweet;
    std::string metro;
    std::string zip;
    std::optional<ZipFeatureRecord> features;

    friend bool operator==(const LocatedTweet&, const LocatedTweet&) = default;
};

// ---------------------------------------------------------------- parsing

struct RejectedLine {
    std::size_t line_number;  // 1-based
    std::string reason;       // malformed_json, missing_field, wrong_type, sentiment_out_of_range, ...
    std::string detail;
};

struct ParseReport {
    std::size_t lines_read = 0;
    std::vector<RejectedLine> rejected;

    std::map<std::string, std::size_t> reason_counts() const;
};

/// One RawTweet per valid JSONL line, input order preserved. Bad lines are
/// recorded in `report` and never throw. Repeated tweet_ids keep the first.
std::vector<RawTweet> parse_corpus(std::istream& lines, ParseReport& report);
std::vector<RawTweet> parse_corpus(const std::filesystem::path& path, ParseReport& report);
void write_corpus(std::ostream& out, std::span<const RawTweet> tweets);

/// Located-corpus artifact: the raw fields plus metro, zip and zip features.
void write_located(std::ostream& out, std::span<const LocatedTweet> tweets);
std::vector<LocatedTweet> read_located(const std::filesystem::path& path);

/// Text begins with the retweet marker `RT @`.
bool is_retweet(std::string_view text);

// ----------------------------------------------------------- geolocation

/// First box (in the given order) containing p, or nullopt.
std::optional<std::string> assign_metro(const GeoPoint& p, std::span<const BoundingBox> boxes);

/// Offline substitute for a reverse-geocoding service.
class ZipResolver {
public:
    virtual ~ZipResolver() = default;
    virtual std::optional<std::string> resolve(const GeoPoint& p) const = 0;
};

/// Exact lookup on coordinates rounded to `decimals` places.
/// CSV header: `lat,lon,zip`.
class ExactZipTable final : public ZipResolver {
public:
    explicit ExactZipTable(int decimals = 4) : decimals_(decimals) {}
    static ExactZipTable load(const std::filesystem::path& path, int decimals = 4);

    void add(const GeoPoint& p, const std::string& zip);
    std::optional<std::string> resolve(const GeoPoint& p) const override;

private:
    int decimals_;
    std::map<std::pair<long long, long long>, std::string> table_;

    std::pair<long long, long long> key(const GeoPoint& p) const;
};

/// Great-circle nearest zip centroid within `cutoff_km`; equidistant
/// centroids resolve to the lexicographically smaller zip.
/// CSV header: `zip,lat,lon`.
class NearestCentroidResolver final : public ZipResolver {
public:
    struct Centroid {
        std::string zip;
        GeoPoint point;
    };

    explicit NearestCentroidResolver(std::vector<Centroid> centroids, double cutoff_km = 25.0);
    static NearestCentroidResolver load(const std::filesystem::path& path, double cutoff_km = 25.0);

    std::optional<std::string> resolve(const GeoPoint& p) const override;
    std::span<const Centroid> centroids() const { return centroids_; }

private:
    std::vector<Centroid> centroids_;
    double cutoff_km_;
};

/// Haversine distance on a sphere of radius 6371.0088 km.
double great_circle_km(const GeoPoint& a, const GeoPoint& b);

std::optional<std::string> resolve_zip(const GeoPoint& p, const ZipResolver& resolver);

bool is_valid_zip(const std::string& zip);

// -------------------------------------------------------------- filtering

/// Drops every tweet whose zip has fewer than `threshold` tweets.
std::vector<LocatedTweet> filter_min_tweets(std::span<const LocatedTweet> tweets, std::size_t threshold = 10);

using ZipFeatureTable = std::map<std::string, std::optional<ZipFeatureRecord>>;

/// CSV header `zip,zhvi,n_health,n_edu,n_pst`; any empty cell makes the
/// whole record null. Duplicate zips are fatal.
ZipFeatureTable load_zip_features(const std::filesystem::path& path);
ZipFeatureTable load_zip_features(std::istream& in, const std::string& source = "<stream>");

struct JoinReport {
    std::size_t dropped_tweets = 0;
    std::vector<std::string> dropped_zips;
};

/// Attaches zip features. Zips that are absent or null are dropped as a whole.
std::vector<LocatedTweet> join_zip_features(std::span<const LocatedTweet> tweets, const ZipFeatureTable& features,
                                            JoinReport* report = nullptr);

// ------------------------------------------------------------------ stats

struct MetroStats {
    std::string metro;
    std::size_t n_zips = 0;
    std::size_t n_tweets = 0;
    double avg_tweets_per_zip = 0.0;
    std::size_t hashtags_before = 0;
    std::size_t hashtags_after = 0;
    std::size_t unique_hashtags_after = 0;
};

struct CorpusStats {
    std::vector<MetroStats> metros;  // sorted by n_tweets descending, then name
    std::size_t total_zips = 0;
    std::size_t total_tweets = 0;
    std::size_t total_hashtags_before = 0;
    std::size_t total_hashtags_after = 0;
};

struct ProcessedText;

/// `processed[i]` must be the text-pipeline output for `tweets[i]`.
CorpusStats corpus_stats(std::span<const LocatedTweet> tweets, std::span<const ProcessedText> processed);
void write_stats_csv(std::ostream& out, const CorpusStats& stats);

}  // namespace vh

#endif  // VH_CORPUS_HPP

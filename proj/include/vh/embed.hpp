#ifndef VH_EMBED_HPP
#define VH_EMBED_HPP

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vh/common.hpp"
#include "vh/textprep.hpp"

namespace vh {

enum class Representation { TextOnly, TextAndHashtags, Hybrid };

std::string_view to_string(Representation r);
Representation parse_representation(std::string_view s);
inline constexpr Representation kAllRepresentations[] = {Representation::TextOnly, Representation::TextAndHashtags,
                                                         Representation::Hybrid};

/// Immutable token -> vector map. Components are stored as float, the
/// precision of the textual vector files.
class VectorTable {
public:
    using Storage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    VectorTable(int dim, std::unordered_map<std::string, Eigen::Index> index, Storage vectors);

    int dim() const { return dim_; }
    std::size_t size() const { return index_.size(); }

    /// Row of the token's vector, or nullopt when out of vocabulary.
    std::optional<Eigen::Ref<const Eigen::RowVectorXf>> find(std::string_view token) const;

private:
    int dim_;
    std::unordered_map<std::string, Eigen::Index> index_;
    Storage vectors_;
};

struct VectorLoadReport {
    std::optional<std::size_t> header_count;
    std::size_t rows_loaded = 0;
    std::size_t malformed_lines = 0;
    std::size_t duplicate_tokens = 0;

    std::size_t warnings() const {
        return malformed_lines + duplicate_tokens + (header_count && *header_count != rows_loaded ? 1 : 0);
    }
};

/// Loads `token v1 ... v_dim` lines. An optional `count dim` header is
/// detected when the first line holds exactly two integers. A header dim
/// (or, without a header, a first row) that disagrees with `expected_dim`
/// is fatal; later bad rows are skipped and counted. Duplicates: last wins.
VectorTable load_vectors(const std::filesystem::path& path, int expected_dim = 300,
                         VectorLoadReport* report = nullptr);
VectorTable load_vectors(std::istream& in, int expected_dim = 300, VectorLoadReport* report = nullptr);

/// Tokens that feed one representation.
std::vector<Token> select_tokens(std::span<const Token> tokens, Representation r);

struct TweetEmbedding {
    Vector vector;
    std::size_t n_tokens_used = 0;

    bool is_empty() const { return n_tokens_used == 0; }
};

/// Optional source of vectors for out-of-vocabulary tokens.
using OovProvider = std::function<std::optional<Vector>(std::string_view)>;

/// Unweighted mean of in-vocabulary token vectors, repeated tokens counted
/// each time. No usable token gives the zero vector.
TweetEmbedding embed_tweet(std::span<const Token> tokens, const VectorTable& table,
                           const OovProvider& oov = nullptr);

}  // namespace vh

#endif  // VH_EMBED_HPP

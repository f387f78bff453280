#include "vh/embed.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vh/csv.hpp"

namespace vh {

std::string_view to_string(Representation r) {
    switch (r) {
        case Representation::TextOnly: return "text_only";
        case Representation::TextAndHashtags: return "text_hashtags";
        case Representation::Hybrid: return "hybrid";
    }
    return "?";
}

Representation parse_representation(std::string_view s) {
    for (auto r : kAllRepresentations) {
        if (to_string(r) == s) return r;
    }
    throw Error("bad_config", "unknown representation '" + std::string(s) + "'");
}

VectorTable::VectorTable(int dim, std::unordered_map<std::string, Eigen::Index> index, Storage vectors)
    : dim_(dim), index_(std::move(index)), vectors_(std::move(vectors)) {}

std::optional<Eigen::Ref<const Eigen::RowVectorXf>> VectorTable::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return Eigen::Ref<const Eigen::RowVectorXf>(vectors_.row(it->second));
}

namespace {

std::vector<std::string_view> fields_of(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace

VectorTable load_vectors(std::istream& in, int expected_dim, VectorLoadReport* report) {
    if (expected_dim <= 0) throw Error("bad_config", "vector dimension must be positive");
    VectorLoadReport local;
    auto& rep = report != nullptr ? *report : local;
    rep = {};

    std::unordered_map<std::string, Eigen::Index> index;
    std::vector<float> data;
    std::string line;
    bool first = true;
    std::vector<float> row(static_cast<std::size_t>(expected_dim));
    while (std::getline(in, line)) {
        const auto fields = fields_of(line);
        if (fields.empty()) continue;
        if (first) {
            first = false;
            long long count = 0, dim = 0;
            if (fields.size() == 2 && parse_number(fields[0], count) && parse_number(fields[1], dim)) {
                if (dim != expected_dim) {
                    throw Error("dim_mismatch", "vector file declares dim " + std::to_string(dim) + ", expected " +
                                                    std::to_string(expected_dim));
                }
                rep.header_count = static_cast<std::size_t>(count);
                continue;
            }
            if (static_cast<long long>(fields.size()) - 1 != expected_dim) {
                throw Error("dim_mismatch", "first vector row has " + std::to_string(fields.size() - 1) +
                                                " components, expected " + std::to_string(expected_dim));
            }
        }
        bool ok = static_cast<long long>(fields.size()) - 1 == expected_dim;
        for (int k = 0; ok && k < expected_dim; ++k) {
            float v = 0.0f;
            ok = parse_number(fields[static_cast<std::size_t>(k) + 1], v) && std::isfinite(v);
            row[static_cast<std::size_t>(k)] = v;
        }
        if (!ok) {
            ++rep.malformed_lines;
            continue;
        }
        std::string token(fields[0]);
        auto [it, inserted] = index.try_emplace(token, static_cast<Eigen::Index>(index.size()));
        if (inserted) {
            data.insert(data.end(), row.begin(), row.end());
        } else {
            ++rep.duplicate_tokens;
            std::copy(row.begin(), row.end(), data.begin() + it->second * expected_dim);
        }
    }
    rep.rows_loaded = index.size();
    VectorTable::Storage storage =
        Eigen::Map<VectorTable::Storage>(data.data(), static_cast<Eigen::Index>(index.size()), expected_dim);
    return VectorTable(expected_dim, std::move(index), std::move(storage));
}

VectorTable load_vectors(const std::filesystem::path& path, int expected_dim, VectorLoadReport* report) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open vectors " + path.string());
    return load_vectors(in, expected_dim, report);
}

std::vector<Token> select_tokens(std::span<const Token> tokens, Representation r) {
    std::vector<Token> out;
    switch (r) {
        case Representation::TextAndHashtags:
            out.assign(tokens.begin(), tokens.end());
            break;
        case Representation::TextOnly:
            for (const auto& t : tokens) {
                if (!t.is_hashtag) out.push_back(t);
            }
            break;
        case Representation::Hybrid: {
            for (const auto& t : tokens) {
                if (t.is_hashtag) out.push_back(t);
            }
            if (out.empty()) out.assign(tokens.begin(), tokens.end());
            break;
        }
    }
    return out;
}

TweetEmbedding embed_tweet(std::span<const Token> tokens, const VectorTable& table, const OovProvider& oov) {
    TweetEmbedding e;
    e.vector = Vector::Zero(table.dim());
    for (const auto& t : tokens) {
        if (auto v = table.find(t.text)) {
            e.vector += v->transpose().cast<double>();
            ++e.n_tokens_used;
        } else if (oov) {
            if (auto fallback = oov(t.text); fallback && fallback->size() == table.dim()) {
                e.vector += *fallback;
                ++e.n_tokens_used;
            }
        }
    }
    if (e.n_tokens_used > 0) e.vector /= static_cast<double>(e.n_tokens_used);
    return e;
}

}  // namespace vh

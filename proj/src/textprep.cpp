#include "vh/textprep.hpp"

#include <algorithm>
#include <fstream>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "vh/common.hpp"
#include "vh/csv.hpp"

namespace vh {

namespace {

std::vector<std::string> read_word_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open word list " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto w = csv::trim(line);
        if (w.empty() || w.front() == '#') continue;
        out.emplace_back(w);
    }
    return out;
}

struct CodePoint {
    UChar32 c;
    std::size_t begin;
    std::size_t end;
};

std::vector<CodePoint> decode(const std::string& s) {
    std::vector<CodePoint> out;
    out.reserve(s.size());
    const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
    const auto length = static_cast<int32_t>(s.size());
    int32_t i = 0;
    while (i < length) {
        const int32_t start = i;
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (c < 0) c = 0xFFFD;
        out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
    }
    return out;
}

bool is_word_char(UChar32 c) {
    if (c == '_' || u_isalnum(c)) return true;
    const auto cat = u_charType(c);
    return cat == U_NON_SPACING_MARK || cat == U_COMBINING_SPACING_MARK;
}

bool is_joiner(UChar32 c) { return c == '-' || c == '\'' || c == 0x2019; }

bool is_handle_char(UChar32 c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

bool starts_with_ci(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char c = text[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c != prefix[i]) return false;
    }
    return true;
}

bool is_url_start(std::string_view rest) {
    return starts_with_ci(rest, "http://") || starts_with_ci(rest, "https://") || starts_with_ci(rest, "www.");
}

std::string unescape_entities(std::string_view raw) {
    static constexpr std::pair<std::string_view, std::string_view> kEntities[] = {
        {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"},
    };
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        bool replaced = false;
        if (raw[i] == '&') {
            for (const auto& [from, to] : kEntities) {
                if (raw.substr(i, from.size()) == from) {
                    out += to;
                    i += from.size();
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) out += raw[i++];
    }
    return out;
}

std::string lower_utf8(std::string_view s) {
    std::string out;
    icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())))
        .toLower(icu::Locale::getRoot())
        .toUTF8String(out);
    return out;
}

std::string ascii_letters_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c >= 'a' && c <= 'z') out += c;
        else if (c >= 'A' && c <= 'Z') out += static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

}  // namespace

StopwordSet::StopwordSet(std::unordered_set<std::string> words) : words_(std::move(words)) {
    for (auto keep : kRetained) words_.erase(std::string(keep));
}

StopwordSet StopwordSet::load(const std::filesystem::path& path) {
    std::unordered_set<std::string> words;
    for (auto& w : read_word_lines(path)) words.insert(std::move(w));
    return StopwordSet(std::move(words));
}

const StopwordSet& StopwordSet::english() {
    static const StopwordSet set = load(std::filesystem::path(VH_DATA_DIR) / "stopwords_en.txt");
    return set;
}

std::string nfc(std::string_view utf8) {
    UErrorCode status = U_ZERO_ERROR;
    const auto* normalizer = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("icu", "NFC normalizer unavailable");
    const auto in = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    const auto normalized = normalizer->normalize(in, status);
    if (U_FAILURE(status)) throw Error("icu", "NFC normalization failed");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::vector<Token> tokenize(std::string_view raw) {
    const std::string text = nfc(unescape_entities(raw));
    const auto cps = decode(text);
    const std::size_t n = cps.size();
    std::vector<Token> tokens;

    // Extends a word run starting at i; joiners only bind word chars on both sides.
    const auto word_end = [&](std::size_t i) {
        std::size_t j = i;
        while (j < n) {
            if (j > i && is_url_start(std::string_view(text).substr(cps[j].begin))) break;
            if (is_word_char(cps[j].c)) {
                ++j;
            } else if (j > i && is_joiner(cps[j].c) && j + 1 < n && is_word_char(cps[j + 1].c)) {
                ++j;
            } else {
                break;
            }
        }
        return j;
    };

    std::size_t i = 0;
    while (i < n) {
        const UChar32 c = cps[i].c;
        if (u_isUWhiteSpace(c)) {
            ++i;
            continue;
        }
        if (is_url_start(std::string_view(text).substr(cps[i].begin))) {
            while (i < n && !u_isUWhiteSpace(cps[i].c)) ++i;
            continue;
        }
        if (c == '@' && i + 1 < n && is_handle_char(cps[i + 1].c) && (i == 0 || !is_word_char(cps[i - 1].c))) {
            ++i;
            while (i < n && is_handle_char(cps[i].c)) ++i;
            continue;
        }
        if (c == '#' && i + 1 < n && is_word_char(cps[i + 1].c)) {
            const std::size_t j = word_end(i + 1);
            const auto begin = cps[i + 1].begin;
            const auto end = cps[j - 1].end;
            tokens.push_back({lower_utf8(std::string_view(text).substr(begin, end - begin)), true, cps[i].begin, end});
            i = j;
            continue;
        }
        if (is_word_char(c)) {
            const std::size_t j = word_end(i);
            const auto begin = cps[i].begin;
            const auto end = cps[j - 1].end;
            tokens.push_back({lower_utf8(std::string_view(text).substr(begin, end - begin)), false, begin, end});
            i = j;
            continue;
        }
        ++i;
    }
    return tokens;
}

std::vector<Token> normalize(std::span<const Token> tokens, const StopwordSet& stops, const Lemmatizer& lemmatizer) {
    std::vector<Token> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        // Contractions such as "don't" are matched before their apostrophe is stripped.
        if (stops.contains(lower_utf8(t.text))) continue;
        const auto letters = ascii_letters_lower(t.text);
        if (letters.size() <= 1 || stops.contains(letters)) continue;
        auto lemma = lemmatizer.lemmatize(letters);
        if (lemma.size() <= 1 || stops.contains(lemma)) continue;
        out.push_back({std::move(lemma), t.is_hashtag, t.begin, t.end});
    }
    return out;
}

std::size_t count_hashtags_raw(std::string_view raw) {
    return static_cast<std::size_t>(std::count(raw.begin(), raw.end(), '#'));
}

std::size_t count_hashtags_processed(std::span<const Token> tokens) {
    return static_cast<std::size_t>(
        std::count_if(tokens.begin(), tokens.end(), [](const Token& t) { return t.is_hashtag; }));
}

TextPipeline::TextPipeline()
    : stops_(StopwordSet::english()),
      lemmatizer_(std::shared_ptr<const Lemmatizer>(&RuleLemmatizer::english(), [](const Lemmatizer*) {})) {}

TextPipeline::TextPipeline(const StopwordSet& stops, std::shared_ptr<const Lemmatizer> lemmatizer)
    : stops_(stops), lemmatizer_(std::move(lemmatizer)) {}

ProcessedText TextPipeline::operator()(std::string_view raw) const {
    ProcessedText out;
    out.tokens = normalize(tokenize(raw), stops_, *lemmatizer_);
    out.n_hashtags_raw = count_hashtags_raw(raw);
    out.n_hashtags_processed = count_hashtags_processed(out.tokens);
    return out;
}

}  // namespace vh

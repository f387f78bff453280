#ifndef VH_TEXTPREP_HPP
#define VH_TEXTPREP_HPP

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace vh {

/// One token of a tweet. After `normalize` the text is `[a-z]{2,}`; before
/// it, `tokenize` may leave digits, hyphens, apostrophes or non-ASCII letters.
/// `begin`/`end` are byte offsets into the NFC-normalized input.
struct Token {
    std::string text;
    bool is_hashtag = false;
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const Token&, const Token&) = default;
};

/// Stopwords with the negation/intensity exceptions always removed.
class StopwordSet {
public:
    static constexpr std::string_view kRetained[] = {"not", "no", "nor", "very", "most"};

    StopwordSet() = default;
    explicit StopwordSet(std::unordered_set<std::string> words);

    /// One word per line; blank lines and `#` comments skipped.
    static StopwordSet load(const std::filesystem::path& path);
    /// The shipped English list (data/stopwords_en.txt).
    static const StopwordSet& english();

    bool contains(std::string_view word) const { return words_.contains(std::string(word)); }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

enum class PartOfSpeech { Noun, Verb };

/// Lemmatizer contract. Input is a lowercase letters-only token.
class Lemmatizer {
public:
    virtual ~Lemmatizer() = default;
    virtual std::string lemmatize(std::string_view token, PartOfSpeech pos = PartOfSpeech::Noun) const = 0;
};

/// Exception table + morphological suffix rules. Suffix candidates are
/// validated against a base-word dictionary; nouns fall back to guarded
/// unvalidated plural rules when no candidate is in the dictionary.
class RuleLemmatizer final : public Lemmatizer {
public:
    RuleLemmatizer() = default;

    /// Exception file lines: `inflected lemma [n|v]` (pos defaults to n).
    /// Dictionary file: one base word per line.
    static RuleLemmatizer load(const std::filesystem::path& exceptions, const std::filesystem::path& dictionary);
    static const RuleLemmatizer& english();

    void add_exception(std::string inflected, std::string lemma, PartOfSpeech pos = PartOfSpeech::Noun);
    void add_word(std::string base);

    std::string lemmatize(std::string_view token, PartOfSpeech pos = PartOfSpeech::Noun) const override;

    const std::unordered_map<std::string, std::string>& noun_exceptions() const { return noun_exc_; }

private:
    std::unordered_map<std::string, std::string> noun_exc_;
    std::unordered_map<std::string, std::string> verb_exc_;
    std::unordered_set<std::string> dictionary_;

    bool known(const std::string& w) const { return dictionary_.contains(w); }
};

/// Unicode NFC normalization. Invalid UTF-8 sequences are replaced with U+FFFD.
std::string nfc(std::string_view utf8);

/// Splits a tweet into lowercase provisional tokens. Mentions and URLs are
/// dropped; `#x` runs (including glued `#a#b#c`) become hashtag-flagged
/// tokens without the `#`. Common HTML entities are unescaped first.
std::vector<Token> tokenize(std::string_view raw);

/// Strips non-letters, drops short tokens and stopwords, lemmatizes.
std::vector<Token> normalize(std::span<const Token> tokens, const StopwordSet& stops, const Lemmatizer& lemmatizer);

/// Number of `#` characters in the raw text.
std::size_t count_hashtags_raw(std::string_view raw);
/// Number of hashtag-flagged tokens.
std::size_t count_hashtags_processed(std::span<const Token> tokens);

struct ProcessedText {
    std::vector<Token> tokens;
    std::size_t n_hashtags_raw = 0;
    std::size_t n_hashtags_processed = 0;
};

/// tokenize + normalize + both hashtag counts.
class TextPipeline {
public:
    TextPipeline();
    TextPipeline(const StopwordSet& stops, std::shared_ptr<const Lemmatizer> lemmatizer);

    ProcessedText operator()(std::string_view raw) const;

    const StopwordSet& stopwords() const { return stops_; }
    const Lemmatizer& lemmatizer() const { return *lemmatizer_; }

private:
    StopwordSet stops_;
    std::shared_ptr<const Lemmatizer> lemmatizer_;
};

}  // namespace vh

#endif  // VH_TEXTPREP_HPP

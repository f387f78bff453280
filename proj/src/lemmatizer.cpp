#include <fstream>
#include <sstream>

#include "vh/common.hpp"
#include "vh/csv.hpp"
#include "vh/textprep.hpp"

namespace vh {

namespace {

struct SuffixRule {
    std::string_view suffix;
    std::string_view replacement;
};

// WordNet's morphological substitutions, tried in order.
constexpr SuffixRule kNounRules[] = {
    {"s", ""}, {"ses", "s"}, {"xes", "x"}, {"zes", "z"}, {"ches", "ch"}, {"shes", "sh"}, {"men", "man"}, {"ies", "y"},
};
constexpr SuffixRule kVerbRules[] = {
    {"s", ""}, {"ies", "y"}, {"es", "e"}, {"es", ""}, {"ed", "e"}, {"ed", ""}, {"ing", "e"}, {"ing", ""},
};

bool ends_with(std::string_view w, std::string_view suffix) {
    return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

std::string apply_rule(std::string_view w, const SuffixRule& r) {
    std::string out(w.substr(0, w.size() - r.suffix.size()));
    out += r.replacement;
    return out;
}

// Unvalidated plural stripping for nouns outside the dictionary.
std::string fallback_noun(std::string_view w) {
    if (w.size() > 4 && ends_with(w, "sses")) return std::string(w.substr(0, w.size() - 2));
    if (w.size() > 4 && ends_with(w, "ies")) return std::string(w.substr(0, w.size() - 3)) + "y";
    if (w.size() > 4 && (ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes"))) {
        return std::string(w.substr(0, w.size() - 2));
    }
    if (w.size() > 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) {
        return std::string(w.substr(0, w.size() - 1));
    }
    return std::string(w);
}

}  // namespace

void RuleLemmatizer::add_exception(std::string inflected, std::string lemma, PartOfSpeech pos) {
    auto& table = pos == PartOfSpeech::Noun ? noun_exc_ : verb_exc_;
    table[std::move(inflected)] = std::move(lemma);
}

void RuleLemmatizer::add_word(std::string base) { dictionary_.insert(std::move(base)); }

RuleLemmatizer RuleLemmatizer::load(const std::filesystem::path& exceptions, const std::filesystem::path& dictionary) {
    RuleLemmatizer lem;
    {
        std::ifstream in(exceptions);
        if (!in) throw Error("missing_file", "cannot open lemma exceptions " + exceptions.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto trimmed = csv::trim(line);
            if (trimmed.empty() || trimmed.front() == '#') continue;
            std::istringstream fields{std::string(trimmed)};
            std::string inflected, lemma, pos = "n";
            fields >> inflected >> lemma;
            fields >> pos;
            if (lemma.empty() || (pos != "n" && pos != "v")) {
                throw Error("bad_row", exceptions.string() + ":" + std::to_string(line_no) + ": malformed exception");
            }
            lem.add_exception(inflected, lemma, pos == "n" ? PartOfSpeech::Noun : PartOfSpeech::Verb);
        }
    }
    {
        std::ifstream in(dictionary);
        if (!in) throw Error("missing_file", "cannot open lemma dictionary " + dictionary.string());
        std::string line;
        while (std::getline(in, line)) {
            const auto w = csv::trim(line);
            if (w.empty() || w.front() == '#') continue;
            lem.add_word(std::string(w));
        }
    }
    return lem;
}

const RuleLemmatizer& RuleLemmatizer::english() {
    static const RuleLemmatizer lem = load(std::filesystem::path(VH_DATA_DIR) / "lemma_exceptions.txt",
                                           std::filesystem::path(VH_DATA_DIR) / "lemma_dictionary.txt");
    return lem;
}

std::string RuleLemmatizer::lemmatize(std::string_view token, PartOfSpeech pos) const {
    const auto& exceptions = pos == PartOfSpeech::Noun ? noun_exc_ : verb_exc_;
    const auto step = [&](const std::string& w) -> std::string {
        if (auto it = exceptions.find(w); it != exceptions.end()) return it->second;
        if (known(w)) return w;
        const auto& rules = pos == PartOfSpeech::Noun ? std::span<const SuffixRule>(kNounRules)
                                                      : std::span<const SuffixRule>(kVerbRules);
        for (const auto& r : rules) {
            if (w.size() > r.suffix.size() && ends_with(w, r.suffix)) {
                auto candidate = apply_rule(w, r);
                if (known(candidate)) return candidate;
            }
        }
        return pos == PartOfSpeech::Noun ? fallback_noun(w) : w;
    };

    // Iterate to a fixed point so lemmatize(lemmatize(w)) == lemmatize(w).
    std::string current(token);
    for (int i = 0; i < 4; ++i) {
        auto next = step(current);
        if (next == current) break;
        current = std::move(next);
    }
    return current;
}

}  // namespace vh

#include <doctest.h>

#include <regex>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "vh/common.hpp"
#include "vh/textprep.hpp"

using namespace vh;

namespace {

std::vector<std::string> texts(const std::vector<Token>& tokens) {
    std::vector<std::string> out;
    for (const auto& t : tokens) out.push_back(t.text);
    return out;
}

std::vector<std::string> processed(std::string_view raw) {
    static const TextPipeline pipeline;
    return texts(pipeline(raw).tokens);
}

}  // namespace

TEST_CASE("tokenize drops mentions and flags hashtags") {
    const auto tokens = tokenize("@user Be back soon #corona");
    REQUIRE(tokens.size() == 4);
    CHECK(texts(tokens) == std::vector<std::string>{"be", "back", "soon", "corona"});
    CHECK_FALSE(tokens[0].is_hashtag);
    CHECK(tokens[3].is_hashtag);
    CHECK(tokens[3].begin == 19);
    CHECK(tokens[3].end == 26);
}

TEST_CASE("glued hashtags split into separate tokens") {
    const auto tokens = tokenize("#corona#coronavirus#quarantine");
    REQUIRE(tokens.size() == 3);
    for (const auto& t : tokens) CHECK(t.is_hashtag);
    CHECK(texts(tokens) == std::vector<std::string>{"corona", "coronavirus", "quarantine"});
}

TEST_CASE("covid spellings collapse to one form") {
    CHECK(processed("covid19 Covid19 covid-19 covid") == std::vector<std::string>{"covid", "covid", "covid", "covid"});
}

TEST_CASE("numeric and single-letter hashtags are eliminated") {
    CHECK(processed("#2020").empty());
    CHECK(processed("#K").empty());
    CHECK(processed("#2020 #K masks") == std::vector<std::string>{"mask"});
}

TEST_CASE("stopwords removed except negation and intensity words") {
    CHECK(processed("the").empty());
    CHECK(processed("not") == std::vector<std::string>{"not"});
    CHECK(processed("the vaccine is not very safe nor most") ==
          std::vector<std::string>{"vaccine", "not", "very", "safe", "nor", "most"});
    const auto& stops = StopwordSet::english();
    for (auto w : StopwordSet::kRetained) CHECK_FALSE(stops.contains(w));
    CHECK(stops.contains("the"));
    CHECK(stops.size() == 179 - 5);
}

TEST_CASE("hashtag counts raw and processed") {
    const TextPipeline pipeline;
    const auto check = [&](std::string_view raw, std::size_t n_raw, std::size_t n_proc) {
        const auto p = pipeline(raw);
        CHECK(p.n_hashtags_raw == n_raw);
        CHECK(p.n_hashtags_processed == n_proc);
    };
    check("#a #b", 2, 0);
    check("#a#b#c", 3, 0);
    check("#corona #2020", 2, 1);
    check("#corona#cov", 2, 2);
    CHECK(count_hashtags_processed(tokenize("#a #b")) == 2);
    CHECK(count_hashtags_processed(tokenize("#a#b#c")) == 3);
}

TEST_CASE("lemmatizer examples") {
    const auto& lem = RuleLemmatizer::english();
    CHECK(lem.lemmatize("viruses") == "virus");
    CHECK(lem.lemmatize("corona") == "corona");
    CHECK(lem.lemmatize("masks") == "mask");
    CHECK(lem.lemmatize("cities") == "city");
    CHECK(lem.lemmatize("churches") == "church");
    CHECK(lem.lemmatize("children") == "child");
    CHECK(lem.lemmatize("news") == "news");
    CHECK(lem.lemmatize("coronavirus") == "coronavirus");
    CHECK(lem.lemmatize("was", PartOfSpeech::Verb) == "be");
    CHECK(lem.lemmatize("was") == "was");
    CHECK(lem.lemmatize("testing", PartOfSpeech::Verb) == "test");
    CHECK(lem.lemmatize("lockdowns") == "lockdown");
}

TEST_CASE("custom lemmatizer exceptions and dictionary") {
    RuleLemmatizer lem;
    lem.add_word("zorb");
    lem.add_exception("zorbae", "zorb");
    CHECK(lem.lemmatize("zorbs") == "zorb");
    CHECK(lem.lemmatize("zorbae") == "zorb");
    CHECK(lem.lemmatize("bus") == "bus");
    CHECK(lem.lemmatize("class") == "class");
}

TEST_CASE("urls, entities and apostrophes") {
    CHECK(processed("and https://t.co/x www.a.com now").empty());
    CHECK(processed("maskshttps://t.co/x") == std::vector<std::string>{"mask"});
    CHECK(processed("doctors &amp; nurses") == std::vector<std::string>{"doctor", "nurse"});
    CHECK(processed("don't panic") == std::vector<std::string>{"panic"});
    CHECK(processed("teachers' lives") == std::vector<std::string>{"teacher", "life"});
}

TEST_CASE("offsets refer to the NFC text") {
    // "e" + combining acute composes to one two-byte code point.
    const std::string decomposed = "cafe\xCC\x81 open";
    const auto tokens = tokenize(decomposed);
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0].text == "caf\xC3\xA9");
    CHECK(tokens[1].begin == 6);
    CHECK(tokens[1].end == 10);
    CHECK(nfc(decomposed).substr(tokens[1].begin, 4) == "open");
}

TEST_CASE("empty and whitespace input") {
    CHECK(tokenize("").empty());
    CHECK(tokenize("   \t\n").empty());
    const TextPipeline pipeline;
    const auto p = pipeline("");
    CHECK(p.tokens.empty());
    CHECK(p.n_hashtags_raw == 0);
}

namespace {

std::string random_tweet(Rng& rng) {
    static const std::vector<std::string> pieces = {
        "the", "Masks", "#covid19", "@someone", "https://t.co/q1", "not", "very", "viruses", "#a#b#Vax",
        "Cities", "don't", "2020", "#2021", "café", "e\xCC\x81t\xC3\xA9", "x", "churches", "&amp;", "!!", "RT",
        "self-care", "www.site.org", "NO", "news", "\xF0\x9F\x98\xB7", "#", "@", "_", "it's", "studies",
    };
    std::string out;
    const auto n = rng.uniform_index(12);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) out += rng.uniform() < 0.8 ? " " : "";
        out += pieces[rng.uniform_index(pieces.size())];
    }
    return out;
}

}  // namespace

TEST_CASE("property: processed tokens are lowercase ascii of length two or more") {
    const TextPipeline pipeline;
    const std::regex shape("[a-z]{2,}");
    Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        const auto tweet = random_tweet(rng);
        const auto p = pipeline(tweet);
        for (const auto& t : p.tokens) {
            CHECK_MESSAGE(std::regex_match(t.text, shape), tweet);
            CHECK_FALSE(pipeline.stopwords().contains(t.text));
        }
        CHECK(p.n_hashtags_processed <= p.n_hashtags_raw);
    }
}

TEST_CASE("property: normalization is idempotent on its output") {
    const TextPipeline pipeline;
    Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        const auto tweet = random_tweet(rng);
        const auto once = pipeline(tweet).tokens;
        std::string joined;
        for (const auto& t : once) joined += (t.is_hashtag ? "#" : "") + t.text + " ";
        const auto twice = pipeline(joined).tokens;
        REQUIRE(once.size() == twice.size());
        for (std::size_t k = 0; k < once.size(); ++k) {
            CHECK(once[k].text == twice[k].text);
            CHECK(once[k].is_hashtag == twice[k].is_hashtag);
        }
        for (const auto& t : once) CHECK(pipeline.lemmatizer().lemmatize(t.text) == t.text);
    }
}

TEST_CASE("property: retained words survive and mentions or urls never do") {
    const TextPipeline pipeline;
    Rng rng(13);
    for (int i = 0; i < 300; ++i) {
        auto tweet = random_tweet(rng);
        const std::string word(StopwordSet::kRetained[rng.uniform_index(5)]);
        tweet += " " + word + " @handle99 https://x.y/z";
        const auto out = texts(pipeline(tweet).tokens);
        CHECK(std::find(out.begin(), out.end(), word) != out.end());
        CHECK(std::find(out.begin(), out.end(), "handle") == out.end());
        for (const auto& t : out) {
            CHECK(t.find("http") == std::string::npos);
            CHECK(t != "xy");
        }
    }
}

TEST_CASE("property: offsets are ordered and inside the normalized text") {
    Rng rng(14);
    for (int i = 0; i < 300; ++i) {
        const auto tweet = random_tweet(rng);
        const auto text = nfc(tweet);
        std::size_t prev_end = 0;
        for (const auto& t : tokenize(tweet)) {
            CHECK(t.begin < t.end);
            CHECK(t.end <= text.size());
            CHECK(t.begin >= prev_end);
            prev_end = t.end;
        }
    }
}

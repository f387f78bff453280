#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "vh/common.hpp"
#include "vh/csv.hpp"
#include "vh/embed.hpp"

using namespace vh;

namespace {

Token word(std::string text, bool hashtag = false) { return Token{std::move(text), hashtag, 0, 0}; }

VectorTable table_from(const std::string& text, int dim, VectorLoadReport* report = nullptr) {
    std::istringstream in(text);
    return load_vectors(in, dim, report);
}

}  // namespace

TEST_CASE("load vectors with and without header") {
    VectorLoadReport rep;
    const auto t = table_from("2 3\nmask 1 2 3\nvirus 0.5 -1 2e-1\n", 3, &rep);
    CHECK(t.size() == 2);
    CHECK(t.dim() == 3);
    REQUIRE(rep.header_count);
    CHECK(*rep.header_count == 2);
    CHECK(rep.warnings() == 0);
    const auto v = t.find("virus");
    REQUIRE(v);
    CHECK((*v)(2) == doctest::Approx(0.2f));
    CHECK_FALSE(t.find("flu"));

    const auto plain = table_from("mask 1 2 3\n", 3, &rep);
    CHECK(plain.size() == 1);
    CHECK_FALSE(rep.header_count);
}

TEST_CASE("vector file problems") {
    CHECK_THROWS_AS(table_from("2 4\nmask 1 2 3 4\n", 3), Error);
    CHECK_THROWS_AS(table_from("mask 1 2\n", 3), Error);
    VectorLoadReport rep;
    const auto t = table_from("mask 1 2 3\nbad 1 2\nworse 1 x 3\nmask 4 5 6\n", 3, &rep);
    CHECK(rep.malformed_lines == 2);
    CHECK(rep.duplicate_tokens == 1);
    CHECK(t.size() == 1);
    CHECK((*t.find("mask"))(0) == 4.0f);
    table_from("5 3\nmask 1 2 3\n", 3, &rep);
    CHECK(rep.warnings() == 1);
}

TEST_CASE("representation names round-trip") {
    for (auto r : kAllRepresentations) CHECK(parse_representation(to_string(r)) == r);
    CHECK_THROWS_AS(parse_representation("emoji"), Error);
}

TEST_CASE("token selection per representation") {
    const std::vector<Token> mixed = {word("mask"), word("covid", true), word("vaccine")};
    const std::vector<Token> plain = {word("mask"), word("vaccine")};
    CHECK(select_tokens(mixed, Representation::TextOnly).size() == 2);
    CHECK(select_tokens(mixed, Representation::TextAndHashtags).size() == 3);
    const auto hyb = select_tokens(mixed, Representation::Hybrid);
    REQUIRE(hyb.size() == 1);
    CHECK(hyb[0].text == "covid");
    CHECK(select_tokens(plain, Representation::Hybrid).size() == 2);
    CHECK(select_tokens({}, Representation::Hybrid).empty());
}

TEST_CASE("embedding is the plain mean with repeats counted") {
    const auto t = table_from("a 1 0\nb 0 2\n", 2);
    const std::vector<Token> tokens = {word("a"), word("a"), word("b"), word("oov")};
    const auto e = embed_tweet(tokens, t);
    CHECK(e.n_tokens_used == 3);
    CHECK(e.vector(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(e.vector(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("empty embeddings and cancelling vectors") {
    const auto t = table_from("up 1 -2\ndown -1 2\n", 2);
    const auto none = embed_tweet(std::vector<Token>{word("zzz")}, t);
    CHECK(none.is_empty());
    CHECK(none.vector.isZero());
    // A zero mean from real tokens is not an empty embedding.
    const auto cancel = embed_tweet(std::vector<Token>{word("up"), word("down")}, t);
    CHECK(cancel.vector.isZero());
    CHECK_FALSE(cancel.is_empty());
}

TEST_CASE("oov provider fills missing tokens of the right size") {
    const auto t = table_from("a 2 2\n", 2);
    const OovProvider oov = [](std::string_view tok) -> std::optional<Vector> {
        if (tok == "b") return Vector::Constant(2, 4.0);
        if (tok == "wrong") return Vector::Constant(3, 1.0);
        return std::nullopt;
    };
    const auto e = embed_tweet(std::vector<Token>{word("a"), word("b"), word("wrong"), word("c")}, t, oov);
    CHECK(e.n_tokens_used == 2);
    CHECK(e.vector(0) == 3.0);
}

TEST_CASE("property: embedding equals independent mean and is order invariant") {
    Rng rng(21);
    const int dim = 5;
    std::string text;
    std::vector<std::vector<float>> rows;
    for (int w = 0; w < 20; ++w) {
        text += "w" + std::to_string(w);
        rows.emplace_back();
        for (int k = 0; k < dim; ++k) {
            const float x = static_cast<float>(rng.normal());
            rows.back().push_back(x);
            text += " " + csv::format_double(x);
        }
        text += "\n";
    }
    const auto t = table_from(text, dim);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Token> tokens;
        const auto n = 1 + rng.uniform_index(12);
        for (std::size_t i = 0; i < n; ++i) tokens.push_back(word("w" + std::to_string(rng.uniform_index(25))));
        std::vector<double> sum(dim, 0.0);
        std::size_t used = 0;
        for (const auto& tok : tokens) {
            const int id = std::stoi(tok.text.substr(1));
            if (id >= 20) continue;
            ++used;
            for (int k = 0; k < dim; ++k) sum[static_cast<std::size_t>(k)] += rows[static_cast<std::size_t>(id)][static_cast<std::size_t>(k)];
        }
        const auto e = embed_tweet(tokens, t);
        CHECK(e.n_tokens_used == used);
        for (int k = 0; k < dim; ++k) {
            const double expected = used ? sum[static_cast<std::size_t>(k)] / static_cast<double>(used) : 0.0;
            CHECK(std::abs(e.vector(k) - expected) < 1e-12);
        }
        auto shuffled = tokens;
        rng.shuffle(shuffled.begin(), shuffled.end());
        CHECK((embed_tweet(shuffled, t).vector - e.vector).cwiseAbs().maxCoeff() < 1e-12);
    }
}

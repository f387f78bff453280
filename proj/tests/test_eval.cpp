#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "vh/common.hpp"
#include "vh/eval.hpp"

using namespace vh;

namespace {

std::vector<LabeledTweet> labeled_corpus(const std::vector<std::pair<std::string, std::size_t>>& sizes) {
    std::vector<LabeledTweet> out;
    for (const auto& [zip, n] : sizes) {
        for (std::size_t i = 0; i < n; ++i) out.push_back({out.size(), zip, 0.5});
    }
    return out;
}

LocatedTweet located(std::string id, std::string zip) {
    LocatedTweet t;
    t.tweet.tweet_id = std::move(id);
    t.zip = std::move(zip);
    t.metro = "m";
    return t;
}

std::string zip_name(std::size_t i) {
    return std::to_string(10000 + i);
}

}  // namespace

TEST_CASE("ground truth loading") {
    std::istringstream ok("zip,hesitancy\n10001,0.25\n10002,1\n");
    const auto gt = GroundTruth::load(ok);
    CHECK(gt.by_zip.size() == 2);
    CHECK(gt.mean() == 0.625);
    CHECK(gt.restricted_to({"10002", "99999"}).by_zip.size() == 1);

    const auto fails = [](const std::string& text, const std::string& code) {
        std::istringstream in(text);
        try {
            GroundTruth::load(in);
            FAIL("expected " << code);
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };
    fails("zip,hesitancy\n10001,1.5\n", "label_out_of_range");
    fails("zip,hesitancy\n10001,0.1\n10001,0.2\n", "duplicate_zip");
    fails("zip,hesitancy\n1001,0.1\n", "bad_zip");
}

TEST_CASE("pseudo labels copy the zip value and drop unknown zips") {
    GroundTruth gt;
    gt.by_zip = {{"10001", 0.3}, {"10002", 0.7}};
    const std::vector<LocatedTweet> corpus = {located("1", "10001"), located("2", "20000"), located("3", "10002"),
                                              located("4", "20000")};
    LabelReport rep;
    const auto lab = pseudo_label(corpus, gt, &rep);
    REQUIRE(lab.size() == 2);
    CHECK(lab[0].tweet == 0);
    CHECK(lab[0].label == 0.3);
    CHECK(lab[1].tweet == 2);
    CHECK(lab[1].label == 0.7);
    CHECK(rep.dropped_tweets == 2);
    CHECK(rep.missing_zips == std::vector<std::string>{"20000"});
}

TEST_CASE("split allocation example") {
    // 11 * 0.2 = 2.2 and 13 * 0.2 = 2.6: floors 2 + 2, target round(4.8) = 5,
    // the extra tweet goes to the larger fractional part.
    const auto lab = labeled_corpus({{"10001", 11}, {"10002", 13}});
    const auto s = stratified_split(lab, 0.2, 42);
    CHECK(s.test.size() == 5);
    CHECK(s.train.size() == 19);
    std::map<std::string, std::size_t> per_zip;
    for (auto i : s.test) ++per_zip[lab[i].zip];
    CHECK(per_zip["10001"] == 2);
    CHECK(per_zip["10002"] == 3);

    CHECK_THROWS_AS(stratified_split(labeled_corpus({{"10001", 1}, {"10002", 5}})), Error);
    CHECK_THROWS_AS(stratified_split(lab, 1.0), Error);
}

TEST_CASE("split ties go to the smaller zip") {
    const auto lab = labeled_corpus({{"10002", 12}, {"10001", 12}});
    // 2.4 each: floors 4, target round(4.8) = 5, equal fractions.
    const auto s = stratified_split(lab, 0.2, 1);
    std::map<std::string, std::size_t> per_zip;
    for (auto i : s.test) ++per_zip[lab[i].zip];
    CHECK(per_zip["10001"] == 3);
    CHECK(per_zip["10002"] == 2);
}

TEST_CASE("property: stratified split partitions every zip") {
    Rng rng(61);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<std::pair<std::string, std::size_t>> sizes;
        const auto n_zips = 1 + rng.uniform_index(30);
        for (std::size_t z = 0; z < n_zips; ++z) sizes.emplace_back(zip_name(z), 5 + rng.uniform_index(150));
        const auto lab = labeled_corpus(sizes);
        const double frac = 0.1 + 0.3 * rng.uniform();
        const auto seed = rng.next();
        const auto s = stratified_split(lab, frac, seed);

        std::vector<std::size_t> all(s.train);
        all.insert(all.end(), s.test.begin(), s.test.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expected(lab.size());
        std::iota(expected.begin(), expected.end(), std::size_t{0});
        CHECK(all == expected);
        CHECK(std::is_sorted(s.train.begin(), s.train.end()));
        CHECK(std::is_sorted(s.test.begin(), s.test.end()));

        std::map<std::string, std::size_t> test_count;
        for (auto i : s.test) ++test_count[lab[i].zip];
        const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(lab.size()) * frac));
        bool clamped = false;
        for (const auto& [zip, n] : sizes) {
            const auto t = test_count[zip];
            CHECK(t >= 1);
            CHECK(t <= n - 1);
            const double q = static_cast<double>(n) * frac;
            const auto fl = static_cast<std::size_t>(std::floor(q + 1e-9));
            if (fl == 0 || fl >= n - 1) clamped = true;
            else CHECK((t == fl || t == fl + 1));
        }
        if (!clamped) CHECK(s.test.size() == target);

        const auto again = stratified_split(lab, frac, seed);
        CHECK(again.test == s.test);
    }
}

TEST_CASE("kfold sizes and coverage") {
    std::vector<std::size_t> items(23);
    std::iota(items.begin(), items.end(), std::size_t{100});
    const auto folds = kfold(items, 5, 3);
    REQUIRE(folds.size() == 5);
    CHECK(folds[0].size() == 5);
    CHECK(folds[2].size() == 5);
    CHECK(folds[3].size() == 4);
    std::vector<std::size_t> all;
    for (const auto& f : folds) all.insert(all.end(), f.begin(), f.end());
    std::sort(all.begin(), all.end());
    CHECK(all == items);
    CHECK(kfold(items, 5, 3) == folds);
    CHECK(kfold(items, 5, 4) != folds);
    CHECK_THROWS_AS(kfold(items, 1), Error);
    CHECK_THROWS_AS(kfold(std::vector<std::size_t>{1, 2}, 3), Error);
}

TEST_CASE("rmse basics") {
    const std::vector<double> y = {1, 2, 3};
    const std::vector<double> p = {1, 2, 5};
    CHECK(rmse(y, p) == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-15));
    CHECK_THROWS_AS(rmse(y, std::vector<double>{1}), Error);
    CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("property: constant rmse decomposes into variance and bias") {
    Rng rng(62);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 1 + rng.uniform_index(300);
        std::vector<double> y(n);
        for (auto& v : y) v = rng.uniform();
        const double c = rng.uniform();
        const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const std::vector<double> pred(n, c);
        const double r = rmse(y, pred);
        CHECK(std::abs(r * r - (var + (mean - c) * (mean - c))) < 1e-12);
    }
}

TEST_CASE("constant baselines") {
    GroundTruth gt;
    gt.by_zip = {{"10001", 0.0}, {"10002", 0.5}, {"10003", 1.0}};
    const std::vector<double> train = {0.2, 0.4};
    const std::vector<double> all = {0.2, 0.4, 0.6};
    const std::vector<double> test = {0.6};
    const auto rows = constant_baselines(gt, train, all, test);
    REQUIRE(rows.size() == 6);
    const std::vector<std::string> names = {"no_hesitancy",     "complete_hesitancy", "partial_hesitancy",
                                            "mean_pseudo_train", "mean_pseudo_all",    "mean_ground_truth"};
    const std::vector<double> constants = {0.0, 1.0, 0.5, 0.3, 0.4, 0.5};
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(rows[k].name == names[k]);
        CHECK(rows[k].constant == doctest::Approx(constants[k]).epsilon(1e-15));
        const double c = rows[k].constant;
        CHECK(rows[k].tweet_rmse == doctest::Approx(std::abs(0.6 - c)).epsilon(1e-12));
        const double zip = std::sqrt((c * c + (0.5 - c) * (0.5 - c) + (1.0 - c) * (1.0 - c)) / 3.0);
        CHECK(rows[k].zip_rmse == doctest::Approx(zip).epsilon(1e-12));
    }
}

TEST_CASE("zip aggregation is the mean of tweet predictions") {
    const auto agg = aggregate_zip({{"10001", {0.1, 0.3}}, {"10002", {0.9}}});
    CHECK(agg.at("10001") == doctest::Approx(0.2));
    CHECK(agg.at("10002") == 0.9);
}

TEST_CASE("error analysis counts and inclusive threshold") {
    GroundTruth gt;
    gt.by_zip = {{"10001", 0.5}, {"10002", 0.5}, {"10003", 0.5}, {"90001", 0.2}};
    const std::map<std::string, std::string> metro = {
        {"10001", "nyc"}, {"10002", "nyc"}, {"10003", "nyc"}, {"90001", "la"}};
    // 0.7 - 0.5 is just below 0.2 in binary and still counts.
    const std::map<std::string, double> preds = {{"10001", 0.7}, {"10002", 0.5}, {"10003", 0.25}, {"90001", 0.45}};
    const auto ea = error_analysis(preds, gt, metro, 0.2);
    REQUIRE(ea.metros.size() == 2);
    CHECK(ea.metros[0].metro == "la");
    CHECK(ea.metros[1].metro == "nyc");
    const auto& nyc = ea.metros[1];
    CHECK(nyc.n_zips == 3);
    CHECK(nyc.n_over == 1);
    CHECK(nyc.n_under == 1);
    CHECK(nyc.n_over_by_threshold == 1);
    CHECK(nyc.n_absgap_ge_threshold == 2);
    CHECK(nyc.fraction_overestimated == doctest::Approx(1.0 / 3.0));
    CHECK(ea.global.n_zips == 4);
    CHECK(ea.global.n_over == 2);
    CHECK(ea.global.n_over_by_threshold == 2);

    std::ostringstream out;
    write_error_csv(out, ea);
    CHECK(out.str() ==
          "metro,n_zips,n_over,n_under,fraction_overestimated,n_over_by_0.20,n_absgap_ge_0.20\n"
          "la,1,1,0,1.000000,1,1\n"
          "nyc,3,1,1,0.333333,1,2\n"
          "ALL,4,2,1,0.500000,2,3\n");

    CHECK_THROWS_AS(error_analysis({{"55555", 0.1}}, gt, metro), Error);
}

TEST_CASE("cross validation matches a longhand loop") {
    Rng rng(63);
    const Eigen::Index n = 40;
    FeatureConfig fc;
    fc.use_text = false;
    const auto layout = layout_for(fc, 0);
    Matrix raw = test::random_matrix(rng, n, 4);
    std::vector<double> labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = 0.3 * raw(i, 0) - 0.1 * raw(i, 2) + 0.05 * rng.normal();
    const FeatureBuilder fb(raw, layout, StandardizationPolicy{});
    std::vector<std::size_t> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto folds = kfold(rows, 4, 5);
    RegressorSpec spec;
    const auto cv = cross_validate(spec, fb, labels, folds);
    REQUIRE(cv.fold_rmse.size() == 4);

    double total = 0.0;
    for (std::size_t f = 0; f < 4; ++f) {
        std::vector<std::size_t> train;
        for (std::size_t g = 0; g < 4; ++g) {
            if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
        }
        // Standardization is refit on each training fold.
        Matrix Xtr(static_cast<Eigen::Index>(train.size()), 4), Xte(static_cast<Eigen::Index>(folds[f].size()), 4);
        Vector ytr(Xtr.rows()), yte(Xte.rows());
        for (std::size_t i = 0; i < train.size(); ++i) {
            Xtr.row(static_cast<Eigen::Index>(i)) = raw.row(static_cast<Eigen::Index>(train[i]));
            ytr(static_cast<Eigen::Index>(i)) = labels[train[i]];
        }
        for (std::size_t i = 0; i < folds[f].size(); ++i) {
            Xte.row(static_cast<Eigen::Index>(i)) = raw.row(static_cast<Eigen::Index>(folds[f][i]));
            yte(static_cast<Eigen::Index>(i)) = labels[folds[f][i]];
        }
        const auto ptr = standardize_fit(Xtr);
        const auto pte = standardize_fit(Xte);
        const Matrix Str = standardize_apply(Xtr, ptr);
        const Matrix Ste = standardize_apply(Xte, pte);
        const Vector coef = oracle::ols_qr(Str, ytr);
        const Vector pred = (Ste * coef.tail(4)).array() + coef(0);
        const double r = rmse(yte, pred);
        CHECK(std::abs(cv.fold_rmse[f] - r) < 1e-8);
        total += r;
    }
    CHECK(std::abs(cv.mean_rmse - total / 4.0) < 1e-8);
}

TEST_CASE("cross validation prefixes fold errors") {
    FeatureConfig fc;
    fc.use_text = false;
    const FeatureBuilder fb(Matrix::Ones(6, 4), layout_for(fc, 0), StandardizationPolicy{});
    const std::vector<double> labels(6, 0.5);
    RegressorSpec spec;
    spec.family = Family::SVRRBF;
    spec.svr.C = -1.0;
    try {
        cross_validate(spec, fb, labels, {{0, 1}, {2, 3}, {4, 5}});
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).rfind("fold 0: ", 0) == 0);
    }
}

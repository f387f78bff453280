#include "vh/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

#include "vh/csv.hpp"

namespace vh {

GroundTruth GroundTruth::load(std::istream& in, const std::string& source) {
    const auto table = csv::read(in, {"zip", "hesitancy"}, source);
    GroundTruth gt;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto ctx = source + ":" + std::to_string(table.line_numbers[i]);
        const auto& zip = table.rows[i][0];
        if (!is_valid_zip(zip)) throw Error("bad_zip", ctx + ": invalid zip '" + zip + "'");
        const double h = csv::parse_double(table.rows[i][1], ctx);
        if (h < 0.0 || h > 1.0) throw Error("label_out_of_range", ctx + ": hesitancy must lie in [0, 1]");
        if (!gt.by_zip.emplace(zip, h).second) throw Error("duplicate_zip", ctx + ": duplicate zip " + zip);
    }
    return gt;
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open ground truth " + path.string());
    return load(in, path.string());
}

double GroundTruth::mean() const {
    if (by_zip.empty()) throw Error("empty", "ground truth is empty");
    double sum = 0.0;
    for (const auto& [zip, h] : by_zip) sum += h;
    return sum / static_cast<double>(by_zip.size());
}

GroundTruth GroundTruth::restricted_to(const std::vector<std::string>& zips) const {
    GroundTruth out;
    for (const auto& z : zips) {
        if (auto it = by_zip.find(z); it != by_zip.end()) out.by_zip.emplace(z, it->second);
    }
    return out;
}

std::vector<LabeledTweet> pseudo_label(std::span<const LocatedTweet> corpus, const GroundTruth& gt,
                                       LabelReport* report) {
    std::vector<LabeledTweet> out;
    std::set<std::string> missing;
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto it = gt.by_zip.find(corpus[i].zip);
        if (it == gt.by_zip.end()) {
            missing.insert(corpus[i].zip);
            ++dropped;
            continue;
        }
        if (it->second < 0.0 || it->second > 1.0) {
            throw Error("label_out_of_range", "ground truth for " + it->first + " outside [0, 1]");
        }
        out.push_back({i, corpus[i].zip, it->second});
    }
    if (report != nullptr) {
        report->dropped_tweets = dropped;
        report->missing_zips.assign(missing.begin(), missing.end());
    }
    return out;
}

SplitResult stratified_split(std::span<const LabeledTweet> labeled, double test_frac, std::uint64_t seed) {
    if (!(test_frac > 0.0 && test_frac < 1.0)) throw Error("bad_config", "test fraction must lie in (0, 1)");
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < labeled.size(); ++i) strata[labeled[i].zip].push_back(i);
    for (const auto& [zip, members] : strata) {
        if (members.size() < 2) throw Error("small_stratum", "zip " + zip + " has fewer than 2 tweets");
    }

    struct Alloc {
        const std::string* zip;
        std::size_t n;
        std::size_t test;
        double frac_part;
    };
    std::vector<Alloc> allocs;
    std::size_t floor_sum = 0;
    for (const auto& [zip, members] : strata) {
        const double q = static_cast<double>(members.size()) * test_frac;
        // The nudge keeps exact products such as 10 * 0.2 from flooring to 1.
        const auto fl = static_cast<std::size_t>(std::floor(q + 1e-9));
        allocs.push_back({&zip, members.size(), fl, std::max(0.0, q - static_cast<double>(fl))});
        floor_sum += fl;
    }
    const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(labeled.size()) * test_frac));
    if (target > floor_sum) {
        std::vector<std::size_t> order(allocs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return allocs[a].frac_part > allocs[b].frac_part;  // zips already ascending
        });
        std::size_t remainder = target - floor_sum;
        for (std::size_t k = 0; k < order.size() && remainder > 0; ++k) {
            if (allocs[order[k]].frac_part <= 0.0) continue;
            ++allocs[order[k]].test;
            --remainder;
        }
    }

    SplitResult split;
    split.seed = seed;
    Rng rng(seed);
    std::size_t k = 0;
    for (auto& [zip, members] : strata) {
        auto& a = allocs[k++];
        a.test = std::clamp<std::size_t>(a.test, 1, a.n - 1);
        auto shuffled = members;
        rng.shuffle(shuffled.begin(), shuffled.end());
        split.test.insert(split.test.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(a.test));
        split.train.insert(split.train.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(a.test), shuffled.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<std::vector<std::size_t>> kfold(std::span<const std::size_t> items, int k, std::uint64_t seed) {
    if (k < 2) throw Error("bad_config", "cross-validation needs k >= 2");
    const auto uk = static_cast<std::size_t>(k);
    if (items.size() < uk) throw Error("too_few_rows", "kfold: fewer items than folds");
    std::vector<std::size_t> shuffled(items.begin(), items.end());
    Rng rng(seed);
    rng.shuffle(shuffled.begin(), shuffled.end());

    std::vector<std::vector<std::size_t>> folds(uk);
    const std::size_t base = shuffled.size() / uk;
    const std::size_t extra = shuffled.size() % uk;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < uk; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                        shuffled.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

std::map<std::string, double> aggregate_zip(const std::map<std::string, std::vector<double>>& tweet_preds) {
    std::map<std::string, double> out;
    for (const auto& [zip, preds] : tweet_preds) {
        if (preds.empty()) throw Error("empty", "aggregate_zip: zip " + zip + " has no predictions");
        out[zip] = std::accumulate(preds.begin(), preds.end(), 0.0) / static_cast<double>(preds.size());
    }
    return out;
}

std::vector<BaselineRow> constant_baselines(const GroundTruth& gt, std::span<const double> train_labels,
                                            std::span<const double> all_labels,
                                            std::span<const double> test_labels) {
    if (gt.by_zip.empty() || train_labels.empty() || all_labels.empty() || test_labels.empty()) {
        throw Error("empty", "constant_baselines: inputs must be nonempty");
    }
    const auto mean_of = [](std::span<const double> v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    std::vector<double> gt_values;
    for (const auto& [zip, h] : gt.by_zip) gt_values.push_back(h);

    const std::pair<const char*, double> constants[] = {
        {"no_hesitancy", 0.0},
        {"complete_hesitancy", 1.0},
        {"partial_hesitancy", 0.5},
        {"mean_pseudo_train", mean_of(train_labels)},
        {"mean_pseudo_all", mean_of(all_labels)},
        {"mean_ground_truth", mean_of(gt_values)},
    };
    std::vector<BaselineRow> rows;
    for (const auto& [name, c] : constants) {
        const std::vector<double> tweet_pred(test_labels.size(), c);
        const std::vector<double> zip_pred(gt_values.size(), c);
        rows.push_back({name, c, rmse(test_labels, tweet_pred), rmse(gt_values, zip_pred)});
    }
    return rows;
}

CvResult cross_validate(const RegressorSpec& spec, const FeatureBuilder& builder, std::span<const double> labels,
                        const std::vector<std::vector<std::size_t>>& folds) {
    if (folds.size() < 2) throw Error("bad_config", "cross_validate needs at least 2 folds");
    CvResult result;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train;
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
        }
        try {
            const auto data = builder.build(train, folds[f]);
            Vector y_train(static_cast<Eigen::Index>(train.size()));
            for (std::size_t i = 0; i < train.size(); ++i) y_train(static_cast<Eigen::Index>(i)) = labels[train[i]];
            Vector y_test(static_cast<Eigen::Index>(folds[f].size()));
            for (std::size_t i = 0; i < folds[f].size(); ++i) {
                y_test(static_cast<Eigen::Index>(i)) = labels[folds[f][i]];
            }
            const auto model = fit(spec, data.train, y_train);
            result.fold_rmse.push_back(rmse(y_test, predict(model, data.test)));
        } catch (const Error& e) {
            throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
        }
    }
    result.mean_rmse = std::accumulate(result.fold_rmse.begin(), result.fold_rmse.end(), 0.0) /
                       static_cast<double>(result.fold_rmse.size());
    return result;
}

ErrorAnalysis error_analysis(const std::map<std::string, double>& zip_preds, const GroundTruth& gt,
                             const std::map<std::string, std::string>& zip_metro, double threshold) {
    constexpr double kSlack = 1e-12;
    ErrorAnalysis ea;
    ea.threshold = threshold;
    ea.global.metro = "ALL";
    std::map<std::string, ErrorRow> rows;
    for (const auto& [zip, pred] : zip_preds) {
        auto truth = gt.by_zip.find(zip);
        if (truth == gt.by_zip.end()) throw Error("missing_zip", "error_analysis: no ground truth for " + zip);
        auto metro = zip_metro.find(zip);
        if (metro == zip_metro.end()) throw Error("missing_zip", "error_analysis: no metro for " + zip);
        const double gap = pred - truth->second;
        auto& row = rows[metro->second];
        row.metro = metro->second;
        for (ErrorRow* r : {&row, &ea.global}) {
            ++r->n_zips;
            if (gap > 0.0) ++r->n_over;
            if (gap < 0.0) ++r->n_under;
            if (gap >= threshold - kSlack) ++r->n_over_by_threshold;
            if (std::abs(gap) >= threshold - kSlack) ++r->n_absgap_ge_threshold;
        }
    }
    const auto finish = [](ErrorRow& r) {
        r.fraction_overestimated = r.n_zips ? static_cast<double>(r.n_over) / static_cast<double>(r.n_zips) : 0.0;
    };
    for (auto& [metro, row] : rows) {
        finish(row);
        ea.metros.push_back(row);
    }
    finish(ea.global);
    return ea;
}

void write_error_csv(std::ostream& out, const ErrorAnalysis& ea) {
    const auto t = csv::format_fixed(ea.threshold, 2);
    out << "metro,n_zips,n_over,n_under,fraction_overestimated,n_over_by_" << t << ",n_absgap_ge_" << t << '\n';
    const auto line = [&](const ErrorRow& r) {
        out << r.metro << ',' << r.n_zips << ',' << r.n_over << ',' << r.n_under << ','
            << csv::format_fixed(r.fraction_overestimated, 6) << ',' << r.n_over_by_threshold << ','
            << r.n_absgap_ge_threshold << '\n';
    };
    for (const auto& r : ea.metros) line(r);
    line(ea.global);
}

}  // namespace vh

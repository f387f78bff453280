#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vh/common.hpp"
#include "vh/config.hpp"
#include "vh/pipeline.hpp"
#include "vh/synth.hpp"

namespace {

// Leftover `--key value` and `--key=value` pairs become config overrides.
void apply_overrides(vh::KeyValueConfig& kv, const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const auto& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.size() < 3) {
            throw vh::Error("bad_config", "unexpected argument '" + arg + "' (overrides are --key value)");
        }
        auto key = arg.substr(2);
        std::string value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key.resize(eq);
        } else {
            if (i + 1 >= extras.size()) throw vh::Error("bad_config", "override --" + key + " is missing a value");
            value = extras[++i];
        }
        kv.override_value(key, value);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zip-level vaccine hesitancy from geolocated tweets"};
    app.require_subcommand(1);
    app.set_version_flag("--version", vh::kVersion);

    std::string config_path;
    std::vector<std::string> cells;
    int workers = 0;
    std::string report_cell;

    using Command = int (*)(const vh::PipelineConfig&, std::ostream&);
    struct Stage {
        const char* name;
        const char* help;
        Command run;
    };
    const Stage stages[] = {
        {"ingest", "Parse, locate, filter and join the corpus; write located.jsonl and table1.csv", vh::cmd_ingest},
        {"stats", "Recompute per-metro corpus statistics from located.jsonl", vh::cmd_stats},
        {"split", "Pseudo-label tweets and write the stratified train/test split with CV folds", vh::cmd_split},
        {"train", "Fit one matrix cell on the train split and save the model", vh::cmd_train},
        {"matrix", "Evaluate the model matrix and constant baselines", vh::cmd_matrix},
        {"report", "Error analysis for one matrix cell (default: best zip-level RMSE)", vh::cmd_report},
        {"run", "ingest, split, matrix and report in sequence", vh::cmd_run},
    };
    std::vector<std::pair<CLI::App*, Command>> commands;
    for (const auto& s : stages) {
        auto* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("-c,--config", config_path, "Config file (dotted key = value)")->required();
        sub->allow_extras();
        if (std::string(s.name) == "matrix" || std::string(s.name) == "run") {
            sub->add_option("--cell", cells, "Evaluate only these cells (repeatable)");
            sub->add_option("--workers", workers, "Worker threads for the matrix");
        }
        if (std::string(s.name) == "train") sub->add_option("--cell", report_cell, "Cell to train");
        if (std::string(s.name) == "report") sub->add_option("--cell", report_cell, "Cell to analyse");
        commands.emplace_back(sub, s.run);
    }

    vh::synth::Options synth;
    std::string synth_dir;
    std::string scenario = "linear";
    auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic fixture with its config");
    synth_cmd->add_option("-o,--out", synth_dir, "Output directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "Generator seed");
    synth_cmd->add_option("--scenario", scenario, "linear or nonlinear");
    synth_cmd->add_option("--zips", synth.n_zips, "Number of labeled zips");
    synth_cmd->add_option("--tweets-per-zip", synth.tweets_per_zip, "Tweets per labeled zip");
    synth_cmd->add_option("--dim", synth.dim, "Word vector dimension");
    synth_cmd->add_option("--noise", synth.label_noise, "Std of zip-level label noise");
    synth_cmd->add_option("--signal", synth.text_signal, "Strength of the planted text direction");
    synth_cmd->add_flag("!--no-noise-records", synth.include_noise_records, "Omit records ingest must reject");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) {
            synth.scenario = vh::synth::parse_scenario(scenario);
            const auto fx = vh::synth::write_fixture(synth_dir, synth);
            std::cout << "wrote fixture to " << fx.dir.string() << " (config " << fx.config.string() << ")\n";
            return vh::kExitOk;
        }
        for (const auto& [sub, run] : commands) {
            if (!sub->parsed()) continue;
            auto kv = vh::KeyValueConfig::load(config_path);
            apply_overrides(kv, sub->remaining());
            if (!cells.empty()) {
                std::string joined;
                for (const auto& c : cells) joined += (joined.empty() ? "" : ",") + c;
                kv.override_value("matrix.cells", joined);
            }
            if (workers > 0) kv.override_value("matrix.workers", std::to_string(workers));
            if (!report_cell.empty()) {
                kv.override_value(std::string(sub->get_name()) == "train" ? "train.cell" : "report.cell", report_cell);
            }
            const auto cfg = vh::PipelineConfig::from(kv);
            return run(cfg, std::cerr);
        }
    } catch (const vh::Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
        return vh::kExitFatal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return vh::kExitFatal;
    }
    return vh::kExitFatal;
}

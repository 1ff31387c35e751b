// fermiloc: batch front end for the localization experiments.
//
//   fermiloc <command> [-c config.json] [--set key=value ...] [--out dir]
//
// Exit codes: 0 all checks passed, 1 a one-sided check failed, 2 bad
// configuration, 3 runtime failure (budget, numerics, I/O).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fermiloc/experiment.hpp"

using namespace fermiloc;

namespace {

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<double> g;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.overrides, "override a config key, e.g. --set model.g=50");
    cmd->add_option("--seed", o.seed, "seeds.base");
    cmd->add_option("--trials", o.trials, "budgets.trials");
    cmd->add_option("--g", o.g, "model.g");
    cmd->add_option("--workers", o.workers, "budgets.workers");
    cmd->add_option("--out", o.out, "output root (else $FERMILOC_OUTPUT_ROOT, else output.dir)");
    cmd->add_flag("-q,--quiet", o.quiet, "do not print the report");
}

ExperimentConfig resolve(const CommonOptions& o) {
    nlohmann::json doc = nlohmann::json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        try {
            in >> doc;
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("malformed JSON in '" + o.config_path + "': " + e.what());
        }
    }
    std::vector<std::string> sets = o.overrides;
    if (o.seed) sets.push_back("seeds.base=" + std::to_string(*o.seed));
    if (o.trials) sets.push_back("budgets.trials=" + std::to_string(*o.trials));
    if (o.g) sets.push_back("model.g=" + nlohmann::json(*o.g).dump());
    if (o.workers) sets.push_back("budgets.workers=" + std::to_string(*o.workers));
    return load_config(apply_overrides(doc, sets));
}

int run(const std::string& name, const CommonOptions& o,
        CommandResult (*command)(const ExperimentConfig&, RunDirectory*)) {
    const ExperimentConfig cfg = resolve(o);
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
    RunDirectory dir(output_root(cfg, o.out), name, cfg);
    const CommandResult res = command(cfg, &dir);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    dir.finish(res.passed, {{"warnings", res.warnings}});
    if (!o.quiet) std::cout << res.report.dump(2) << '\n';
    std::cerr << name << ": " << (res.passed ? "all checks passed" : "CHECK FAILED") << " -> "
              << dir.path().string() << '\n';
    return res.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Localization experiments for fermions in quasi-periodic potentials"};
    app.require_subcommand(1);

    struct Entry {
        const char* name;
        const char* help;
        CommandResult (*fn)(const ExperimentConfig&, RunDirectory*);
        CommonOptions opts;
        CLI::App* cmd = nullptr;
    };
    std::vector<Entry> entries{
        {"graph", "balls, boundaries and equivalence classes of the configuration graph", cmd_graph, {}},
        {"spectrum", "eigenvalues of the window Hamiltonian", cmd_spectrum, {}},
        {"localize", "localization centres, unimodality and decay fits", cmd_localize, {}},
        {"msa", "scale sequence, sparseness scans and implication checks", cmd_msa, {}},
        {"wegner", "Monte-Carlo spacing, separation and concentration estimates", cmd_wegner, {}},
        {"entropy", "distinct truncated operators over a phase grid", cmd_entropy, {}},
    };
    for (auto& e : entries) {
        e.cmd = app.add_subcommand(e.name, e.help);
        add_common(e.cmd, e.opts);
    }

    std::string report_path;
    std::optional<std::size_t> replay_trial_index;
    auto* replay = app.add_subcommand("replay", "recompute Monte-Carlo trials from a report and compare bit-exactly");
    replay->add_option("report", report_path, "report JSON (wegner.json, sep_L0.json, theta_bad.json)")
        ->required()
        ->check(CLI::ExistingFile);
    replay->add_option("--trial", replay_trial_index, "trial index (default: every recorded failure)");

    CLI11_PARSE(app, argc, argv);

    try {
        for (auto& e : entries)
            if (e.cmd->parsed()) return run(e.name, e.opts, e.fn);

        std::ifstream in(report_path);
        nlohmann::json report;
        in >> report;
        std::vector<ReplayOutcome> outcomes;
        if (replay_trial_index) outcomes.push_back(replay_trial(report, *replay_trial_index));
        else outcomes = replay_failures(report);
        bool all = true;
        for (const auto& r : outcomes) {
            all = all && r.identical;
            std::cout << "trial " << r.trial << " seed " << r.replayed.seed << " value " << double_bits(r.replayed.value)
                      << (r.identical ? " reproduced" : " MISMATCH (recorded " + double_bits(r.recorded.value) + ")")
                      << '\n';
        }
        if (outcomes.empty()) std::cout << "no recorded failures\n";
        return all ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

// Experiment configuration, run directories and the command pipelines shared
// by the command-line tool and the acceptance runner.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fermiloc/hamiltonian.hpp"
#include "fermiloc/wegner.hpp"

namespace fermiloc {

/// Raised for malformed or invalid configurations.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    nlohmann::json raw;  ///< defaults merged with the user document

    // model
    std::size_t N = 2, d = 1, nu = 1;
    double b = 2.5;
    int A = 1;
    double C = 2.0;
    int A_prime = 1;
    double g = 1.0;
    double hopping = 1.0;
    unsigned n_max = 24;
    KineticConvention kinetic = KineticConvention::laplacian;
    Interaction interaction = Interaction::none();
    std::optional<Coord> R;  ///< nullopt: R(L) = L

    // scales
    std::uint64_t L0 = 2;
    int j_max = 1;
    double m = 1.0;

    // dynamics
    std::vector<std::string> frequencies{"golden"};
    std::vector<double> omega;

    // geometry
    std::size_t window = 14;
    FermiConfig center;
    std::size_t L = 1;

    // seeds and budgets
    std::uint64_t base_seed = 1;
    std::uint64_t theta_seed = 1;
    std::size_t max_configs = 4000;
    std::size_t max_energies = 200000;
    std::size_t trials = 100;
    std::size_t workers = 1;

    std::string output_dir = "runs";
    std::vector<std::string> warnings;

    Coord R_of(std::size_t L) const { return R ? *R : static_cast<Coord>(L); }
    ShiftSystem system() const;
    PotentialModel potential() const;
    Scenario scenario() const;
};

/// The full default document; every accepted key appears in it.
nlohmann::json default_config();

/// Merge `user` over the defaults, reject unknown keys, validate and decode.
ExperimentConfig load_config(const nlohmann::json& user);
ExperimentConfig load_config_file(const std::filesystem::path& path);

/// Apply "a.b.c=value" overrides (value parsed as JSON, else as a string).
nlohmann::json apply_overrides(nlohmann::json doc, const std::vector<std::string>& assignments);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

/// Output root: explicit argument, else $FERMILOC_OUTPUT_ROOT, else the
/// configured directory.
std::filesystem::path output_root(const ExperimentConfig& cfg, const std::optional<std::string>& explicit_root);

class RunDirectory {
public:
    RunDirectory(const std::filesystem::path& root, const std::string& command, const ExperimentConfig& cfg);

    const std::filesystem::path& path() const { return path_; }
    /// Writes a JSON document with config hash and seed embedded.
    void write_json(const std::string& name, nlohmann::json doc);
    /// Writes CSV text preceded by a "# config_hash=..., seed=..." line.
    void write_csv(const std::string& name, const std::string& body);
    void write_binary(const std::string& name, const std::string& bytes);
    void finish(bool passed, const nlohmann::json& summary);

private:
    std::filesystem::path path_;
    std::string command_;
    std::string hash_;
    std::uint64_t seed_;
    nlohmann::json config_;
    std::vector<std::string> files_;
};

struct CommandResult {
    nlohmann::json report;
    bool passed = true;
    std::vector<std::string> warnings;
};

/// Window domain: all N-particle configurations in a box of `window` sites
/// per axis starting at the origin. Throws std::length_error above budget.
std::shared_ptr<const ConfigDomain> window_domain(const ExperimentConfig& cfg);

/// hopping * kinetic + g V + U on the domain.
FiniteHamiltonian build_hamiltonian(const ExperimentConfig& cfg, std::shared_ptr<const ConfigDomain> domain);

CommandResult cmd_graph(const ExperimentConfig& cfg, RunDirectory* out);
CommandResult cmd_spectrum(const ExperimentConfig& cfg, RunDirectory* out);
CommandResult cmd_localize(const ExperimentConfig& cfg, RunDirectory* out);
CommandResult cmd_msa(const ExperimentConfig& cfg, RunDirectory* out);
CommandResult cmd_wegner(const ExperimentConfig& cfg, RunDirectory* out);
CommandResult cmd_entropy(const ExperimentConfig& cfg, RunDirectory* out);

struct ReplayOutcome {
    std::size_t trial = 0;
    TrialRecord recorded;
    TrialRecord replayed;
    bool identical = false;  ///< value, omega and failure flag bit-identical
};

/// Recompute one trial of a serialized Monte-Carlo report.
ReplayOutcome replay_trial(const nlohmann::json& report, std::size_t trial);
/// Recompute every recorded failure.
std::vector<ReplayOutcome> replay_failures(const nlohmann::json& report);

}  // namespace fermiloc

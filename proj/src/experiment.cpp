#include "fermiloc/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fermiloc/msa.hpp"
#include "fermiloc/random.hpp"

namespace fermiloc {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

nlohmann::json default_config() {
    return nlohmann::json::parse(R"({
  "model": {
    "N": 2, "d": 1, "nu": 1, "b": 2.5, "A": 1, "C": 2.0, "A_prime": 1,
    "g": 1.0, "hopping": 1.0, "n_max": 24, "kinetic": "laplacian", "R": null,
    "interaction": {"B": 10.0, "scale": 0.0, "radius": null, "norm": "l1"}
  },
  "scales": {"L0": 2, "j_max": 1, "m": 1.0},
  "dynamics": {"frequencies": "golden", "omega": null},
  "geometry": {"window": 14, "center": null, "L": 1},
  "seeds": {"base": 1, "theta": 1},
  "budgets": {"max_configs": 4000, "max_energies": 200000, "trials": 100, "workers": 1},
  "msa": {"nr_checks": 20},
  "wegner": {
    "L": 2, "x": null, "y": null,
    "s_grid": [1e-6, 3e-6, 1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2],
    "omega_grid": 0, "omega_random": 1, "threshold": null,
    "window_radius_cap": 16, "max_pairs": 2000, "bad_level": 0
  },
  "rcm": {
    "q": [2, 4], "ell": 1.0, "samples": 1000000, "bin_width": [0.05, 0.125], "min_bin_count": 64,
    "t_grid": [0.01, 0.02, 0.05, 0.1, 0.2], "eps_grid": [0.1, 0.2, 0.3, 0.4, 0.5]
  },
  "entropy": {"generation": 2, "grid": 10000, "L": [2, 3]},
  "output": {"dir": "runs"}
})");
}

namespace {

void merge_checked(nlohmann::json& base, const nlohmann::json& user, const std::string& path) {
    if (!user.is_object()) throw ConfigError("config" + (path.empty() ? "" : " key '" + path + "'") + " must be an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        auto& slot = base[it.key()];
        if (slot.is_object() && it.value().is_object()) merge_checked(slot, it.value(), key);
        else if (slot.is_object()) throw ConfigError("config key '" + key + "' must be an object");
        else slot = it.value();
    }
}

template <class T>
T get(const nlohmann::json& doc, const std::string& dotted) {
    const nlohmann::json* node = &doc;
    std::stringstream ss(dotted);
    for (std::string part; std::getline(ss, part, '.');) node = &node->at(part);
    try {
        return node->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + dotted + "' has the wrong type: " + e.what());
    }
}

const nlohmann::json& at(const nlohmann::json& doc, const std::string& dotted) {
    const nlohmann::json* node = &doc;
    std::stringstream ss(dotted);
    for (std::string part; std::getline(ss, part, '.');) node = &node->at(part);
    return *node;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

FermiConfig origin_config(std::size_t N, std::size_t d) {
    std::vector<Site> sites;
    for (std::size_t i = 0; i < N; ++i) {
        Site s(d, 0);
        s[0] = static_cast<Coord>(i);
        sites.push_back(std::move(s));
    }
    return FermiConfig(std::move(sites));
}

FermiConfig config_or(const nlohmann::json& node, const FermiConfig& fallback, const std::string& key,
                      std::size_t N, std::size_t d) {
    if (node.is_null()) return fallback;
    FermiConfig x;
    try {
        x = config_from_json(node);
    } catch (const std::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
    require(x.particle_count() == N && x.dimension() == d, "config key '" + key + "' must hold N sites of dimension d");
    return x;
}

}  // namespace

ExperimentConfig load_config(const nlohmann::json& user) {
    ExperimentConfig c;
    c.raw = default_config();
    merge_checked(c.raw, user, "");
    const auto& r = c.raw;
    try {
        c.N = get<std::size_t>(r, "model.N");
        c.d = get<std::size_t>(r, "model.d");
        c.nu = get<std::size_t>(r, "model.nu");
        c.b = get<double>(r, "model.b");
        c.A = get<int>(r, "model.A");
        c.C = get<double>(r, "model.C");
        c.A_prime = get<int>(r, "model.A_prime");
        c.g = get<double>(r, "model.g");
        c.hopping = get<double>(r, "model.hopping");
        c.n_max = get<unsigned>(r, "model.n_max");
        c.kinetic = kinetic_from_string(get<std::string>(r, "model.kinetic"));
        if (!at(r, "model.R").is_null()) c.R = get<Coord>(r, "model.R");
        c.interaction.B = get<double>(r, "model.interaction.B");
        c.interaction.scale = get<double>(r, "model.interaction.scale");
        c.interaction.norm = site_norm_from_string(get<std::string>(r, "model.interaction.norm"));
        if (!at(r, "model.interaction.radius").is_null()) c.interaction.radius = get<Coord>(r, "model.interaction.radius");

        c.L0 = get<std::uint64_t>(r, "scales.L0");
        c.j_max = get<int>(r, "scales.j_max");
        c.m = get<double>(r, "scales.m");

        const auto& freq = at(r, "dynamics.frequencies");
        c.frequencies = freq.is_string() ? std::vector<std::string>{freq.get<std::string>()}
                                         : get<std::vector<std::string>>(r, "dynamics.frequencies");
        if (at(r, "dynamics.omega").is_null()) c.omega.assign(c.nu, 0.3);
        else c.omega = get<std::vector<double>>(r, "dynamics.omega");

        c.window = get<std::size_t>(r, "geometry.window");
        c.L = get<std::size_t>(r, "geometry.L");
        c.base_seed = get<std::uint64_t>(r, "seeds.base");
        c.theta_seed = get<std::uint64_t>(r, "seeds.theta");
        c.max_configs = get<std::size_t>(r, "budgets.max_configs");
        c.max_energies = get<std::size_t>(r, "budgets.max_energies");
        c.trials = get<std::size_t>(r, "budgets.trials");
        c.workers = get<std::size_t>(r, "budgets.workers");
        c.output_dir = get<std::string>(r, "output.dir");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(e.what());
    }

    require(c.N >= 1 && c.d >= 1 && c.nu >= 1, "model.N, model.d and model.nu must be positive");
    require(c.b > 0.0, "model.b must be positive");
    require(c.A >= 1 && c.A_prime >= 1, "model.A and model.A_prime must be >= 1");
    require(c.C > 0.0, "model.C must be positive");
    require(std::isfinite(c.g) && std::isfinite(c.hopping), "model.g and model.hopping must be finite");
    require(c.n_max >= 1 && c.n_max <= kMaxGeneration, "model.n_max must lie in [1, 52]");
    require(!c.R || *c.R >= 0, "model.R must be nonnegative");
    require(c.L0 >= 2, "scales.L0 must be >= 2");
    require(c.j_max >= -1, "scales.j_max must be >= -1");
    require(c.m > 0.0, "scales.m must be positive");
    require(c.omega.size() == c.nu, "dynamics.omega must have nu coordinates");
    require(c.window >= 1, "geometry.window must be positive");
    require(c.max_configs > 0 && c.max_energies > 0 && c.workers > 0, "budgets must be positive");
    require(get<std::size_t>(r, "rcm.samples") > 0, "rcm.samples must be positive");
    require(get<std::size_t>(r, "entropy.grid") > 0, "entropy.grid must be positive");
    c.center = config_or(at(r, "geometry.center"), origin_config(c.N, c.d), "geometry.center", c.N, c.d);
    try {
        (void)c.system();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("dynamics.frequencies: ") + e.what());
    }
    if (c.b <= 2.0 * static_cast<double>(c.N * c.d))
        c.warnings.push_back("model.b = " + std::to_string(c.b) + " does not exceed 2Nd = " +
                             std::to_string(2 * c.N * c.d));
    if (c.trials == 0) c.warnings.push_back("budgets.trials = 0: Monte-Carlo reports will be empty");
    return c;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed JSON in '" + path.string() + "': " + e.what());
    }
    return load_config(doc);
}

nlohmann::json apply_overrides(nlohmann::json doc, const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + a + "' must look like key=value");
        const std::string key = a.substr(0, eq), text = a.substr(eq + 1);
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            value = text;
        }
        nlohmann::json* node = &doc;
        std::stringstream ss(key);
        std::vector<std::string> parts;
        for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            if (!node->contains(parts[i])) (*node)[parts[i]] = nlohmann::json::object();
            node = &(*node)[parts[i]];
        }
        (*node)[parts.back()] = value;
    }
    return doc;
}

std::string config_hash(const nlohmann::json& doc) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : doc.dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

ShiftSystem ExperimentConfig::system() const {
    ShiftSystem s = ShiftSystem::from_spec(frequencies, d, nu);
    s.A = A;
    s.A_prime = A_prime;
    return s;
}

PotentialModel ExperimentConfig::potential() const {
    HaarshHull hull{b, nu, n_max, ThetaField(theta_seed)};
    hull.validate();
    return PotentialModel{hull, system(), TorusPoint(omega), 0};
}

Scenario ExperimentConfig::scenario() const {
    Scenario s;
    s.N = N;
    s.d = d;
    s.g = g;
    s.b = b;
    s.n_max = n_max;
    s.frequencies = frequencies;
    s.nu = nu;
    s.A = A;
    s.C = C;
    s.A_prime = A_prime;
    s.U = interaction;
    s.convention = kinetic;
    return s;
}

// ---------------------------------------------------------------------------
// Run directories
// ---------------------------------------------------------------------------

std::filesystem::path output_root(const ExperimentConfig& cfg, const std::optional<std::string>& explicit_root) {
    if (explicit_root) return *explicit_root;
    if (const char* env = std::getenv("FERMILOC_OUTPUT_ROOT"); env && *env) return env;
    return cfg.output_dir;
}

RunDirectory::RunDirectory(const std::filesystem::path& root, const std::string& command, const ExperimentConfig& cfg)
    : command_(command), hash_(config_hash(cfg.raw)), seed_(cfg.base_seed), config_(cfg.raw) {
    path_ = root / (command + "-" + hash_ + "-seed" + std::to_string(seed_));
    std::filesystem::create_directories(path_);
}

void RunDirectory::write_json(const std::string& name, nlohmann::json doc) {
    doc["config_hash"] = hash_;
    doc["seed"] = seed_;
    std::ofstream(path_ / name) << doc.dump(2) << '\n';
    files_.push_back(name);
}

void RunDirectory::write_csv(const std::string& name, const std::string& body) {
    std::ofstream(path_ / name) << "# config_hash=" << hash_ << ", seed=" << seed_ << '\n' << body;
    files_.push_back(name);
}

void RunDirectory::write_binary(const std::string& name, const std::string& bytes) {
    std::ofstream(path_ / name, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    files_.push_back(name);
}

void RunDirectory::finish(bool passed, const nlohmann::json& summary) {
    nlohmann::json manifest{{"command", command_}, {"config", config_}, {"config_hash", hash_},
                            {"seed", seed_},       {"files", files_},   {"passed", passed},
                            {"summary", summary}};
    std::ofstream(path_ / "manifest.json") << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

std::shared_ptr<const ConfigDomain> window_domain(const ExperimentConfig& cfg) {
    double sites = std::pow(static_cast<double>(cfg.window), static_cast<double>(cfg.d));
    double count = 1.0;
    for (std::size_t k = 0; k < cfg.N; ++k) count = count * (sites - static_cast<double>(k)) / static_cast<double>(k + 1);
    if (count > static_cast<double>(cfg.max_configs))
        throw std::length_error("window holds " + std::to_string(static_cast<long long>(count)) +
                                " configurations, above budgets.max_configs");
    if (count < 1.0) throw std::invalid_argument("window has fewer sites than particles");
    const auto w = SiteWindow::box(Site(cfg.d, 0), Site(cfg.d, static_cast<Coord>(cfg.window) - 1));
    return std::make_shared<const ConfigDomain>(ConfigDomain::all_in_window(w, cfg.N));
}

FiniteHamiltonian build_hamiltonian(const ExperimentConfig& cfg, std::shared_ptr<const ConfigDomain> domain) {
    const Eigen::VectorXd v = domain_potential(*domain, cfg.potential());
    FiniteHamiltonian H = assemble_with_potential(std::move(domain), v, cfg.g, cfg.interaction, cfg.kinetic);
    if (cfg.hopping != 1.0) {
        const Eigen::VectorXd diag_part = cfg.g * H.potential + H.interaction;
        H.matrix.diagonal() -= diag_part;
        H.matrix *= cfg.hopping;
        H.matrix.diagonal() += diag_part;
    }
    return H;
}

namespace {

std::string eigenvalue_csv(const Eigen::VectorXd& ev) {
    std::ostringstream os;
    write_spectrum_csv(os, ev);
    return os.str();
}

nlohmann::json decay_json(const DecayFit& f) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"rate", num(f.rate)}, {"intercept", num(f.intercept)}, {"r_squared", num(f.r_squared)},
            {"points", f.points}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

CommandResult cmd_graph(const ExperimentConfig& cfg, RunDirectory* out) {
    CommandResult res;
    const FermiBall B = ball(cfg.center, cfg.L);
    if (B.domain.size() > cfg.max_configs) throw std::length_error("ball exceeds budgets.max_configs");
    const Boundaries bd = boundaries(B.domain);
    const Coord R = cfg.R_of(cfg.L);
    const auto clusters = r_clusters(cfg.center, R);
    nlohmann::json rep{{"center", to_json(cfg.center)},
                       {"radius", cfg.L},
                       {"ball_size", B.domain.size()},
                       {"inner_boundary", bd.inner.size()},
                       {"outer_boundary", bd.outer.size()},
                       {"boundary_edges", bd.edges.size()},
                       {"internal_edges", B.domain.internal_edges().size()},
                       {"R", R},
                       {"cluster_cardinalities", clusters.cardinalities}};
    try {
        const auto classes = shift_equivalence_classes(cfg.N, cfg.d, R, cfg.max_configs * 1000);
        rep["equivalence_classes"] = classes.representatives.size();
        rep["monocluster_classes"] = classes.monocluster_count;
    } catch (const std::length_error&) {
        res.warnings.push_back("equivalence class enumeration exceeds the budget; skipped");
        rep["equivalence_classes"] = nullptr;
    }
    if (out) {
        std::ostringstream csv;
        csv << "index,config,distance\n";
        const auto dist = ambient_distances(B.domain, 0);
        for (std::size_t i = 0; i < B.domain.size(); ++i)
            csv << i << ",\"" << B.domain[i].to_string() << "\"," << dist[i] << '\n';
        out->write_csv("ball.csv", csv.str());
        out->write_json("graph.json", rep);
    }
    res.report = rep;
    return res;
}

CommandResult cmd_spectrum(const ExperimentConfig& cfg, RunDirectory* out) {
    CommandResult res;
    const auto H = build_hamiltonian(cfg, window_domain(cfg));
    const Eigen::VectorXd ev = eigenvalues(H.matrix);
    std::vector<double> values(ev.data(), ev.data() + ev.size());
    res.report = {{"configs", H.size()},
                  {"g", cfg.g},
                  {"kinetic", to_string(cfg.kinetic)},
                  {"eigenvalues", values},
                  {"min", ev.minCoeff()},
                  {"max", ev.maxCoeff()}};
    if (out) {
        out->write_json("spectrum.json", res.report);
        out->write_csv("spectrum.csv", eigenvalue_csv(ev));
        std::ostringstream bin;
        write_matrix_binary(bin, H, cfg.raw.dump());
        out->write_binary("hamiltonian.bin", bin.str());
    }
    return res;
}

CommandResult cmd_localize(const ExperimentConfig& cfg, RunDirectory* out) {
    CommandResult res;
    const auto domain = window_domain(cfg);
    const auto H = build_hamiltonian(cfg, domain);
    Spectrum spec = diagonalize(H.matrix);
    const std::size_t refined = refine_localized(spec, H.matrix);
    const auto loc = localization_report(spec, *domain);
    const auto env = envelope_decay_fit(spec, *domain);
    double min_peak = 1.0;
    nlohmann::json states = nlohmann::json::array();
    for (std::size_t k = 0; k < loc.states.size(); ++k) {
        const auto& s = loc.states[k];
        min_peak = std::min(min_peak, s.peak_mass);
        states.push_back({{"eigenvalue", spec.eigenvalues(static_cast<Eigen::Index>(k))},
                          {"center", to_json((*domain)[s.centers.front()])},
                          {"centers", s.centers.size()},
                          {"peak_mass", s.peak_mass},
                          {"unimodal", s.unimodal},
                          {"decay", decay_json(s.decay)}});
    }
    res.report = {{"configs", domain->size()},
                  {"refined_states", refined},
                  {"bijection", loc.bijection},
                  {"unimodal_fraction", loc.unimodal_fraction},
                  {"min_peak_mass", min_peak},
                  {"median_rate", std::isfinite(loc.median_rate) ? nlohmann::json(loc.median_rate) : nlohmann::json(nullptr)},
                  {"envelope_decay", decay_json(env)},
                  {"states", states}};
    if (out) {
        out->write_json("localize.json", res.report);
        std::ostringstream csv;
        csv << "state,config,distance,abs_psi\n";
        csv.precision(17);
        for (std::size_t k = 0; k < loc.states.size(); ++k) {
            const auto dist = ambient_distances(*domain, loc.states[k].centers.front());
            for (std::size_t i = 0; i < domain->size(); ++i)
                csv << k << ",\"" << (*domain)[i].to_string() << "\"," << dist[i] << ','
                    << std::abs(spec.eigenvectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))) << '\n';
        }
        out->write_csv("profiles.csv", csv.str());
    }
    return res;
}

CommandResult cmd_msa(const ExperimentConfig& cfg, RunDirectory* out) {
    CommandResult res;
    const auto seq = ScaleSequence::build(cfg.L0, cfg.j_max, cfg.b, cfg.A, cfg.C);
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& lv : seq.levels)
        levels.push_back({{"j", lv.j},
                          {"L", lv.L ? nlohmann::json(*lv.L) : nlohmann::json(nullptr)},
                          {"log2_L", std::isfinite(lv.log2_L) ? nlohmann::json(lv.log2_L) : nlohmann::json(nullptr)},
                          {"N_tilde", lv.N_tilde},
                          {"log2_beta", lv.log2_beta},
                          {"log2_delta", lv.log2_delta},
                          {"gamma", gamma_rate(cfg.m, lv.L.value_or(0))}});

    const auto domain = window_domain(cfg);
    const auto H = build_hamiltonian(cfg, domain);
    const Eigen::VectorXd v = H.potential;
    std::vector<double> gv(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) gv[static_cast<std::size_t>(i)] = cfg.g * v(i);
    const double sep = gv.size() >= 2 ? separation(gv) : std::numeric_limits<double>::infinity();
    const double strong = 16.0 * static_cast<double>(cfg.N * cfg.d) * std::exp(4.0 * cfg.m);
    const bool strong_disorder = sep >= strong;

    SparsenessOptions opts;
    opts.m = cfg.m;
    opts.resonance_threshold = seq.resonance_threshold(-1, cfg.g);
    opts.max_energies = cfg.max_energies;
    opts.workers = cfg.workers;
    const auto scan = sparseness_scan(H, 0, opts);
    bool ok = true;
    if (strong_disorder && scan.max_singular_per_energy > 1) ok = false;

    nlohmann::json scans = nlohmann::json::array();
    auto scan_json = [](const SparsenessReport& r) {
        nlohmann::json v = nlohmann::json::array();
        for (const auto& x : r.violations)
            v.push_back({{"energy", x.energy}, {"first", to_json(x.first)}, {"second", to_json(x.second)},
                         {"resonant", x.resonant_pair}});
        return nlohmann::json{{"radius", r.radius},
                              {"window", r.window_size},
                              {"sub_balls", r.sub_balls},
                              {"energies", r.energies},
                              {"singular_pairs", r.singular_pair_violations},
                              {"resonant_pairs", r.resonant_pair_violations},
                              {"max_singular_per_energy", r.max_singular_per_energy},
                              {"recorded", v}};
    };
    scans.push_back(scan_json(scan));
    if (seq.level(0).L && *seq.level(0).L <= cfg.window) {
        SparsenessOptions o0 = opts;
        o0.resonance_threshold = seq.resonance_threshold(0, cfg.g);
        try {
            scans.push_back(scan_json(sparseness_scan(H, static_cast<std::size_t>(*seq.level(0).L), o0)));
        } catch (const std::length_error& e) {
            res.warnings.push_back(std::string("level 0 scan skipped: ") + e.what());
        }
    }

    // Implication checks on energies drawn from the window spectrum.
    const std::size_t checks = get<std::size_t>(cfg.raw, "msa.nr_checks");
    std::size_t hyp = 0, inconsistent = 0;
    const Eigen::VectorXd ev = eigenvalues(H.matrix);
    const std::size_t outer_L = seq.level(0).L.value_or(1);
    KeyedStream rng(cfg.base_seed, 0x45A);
    for (std::size_t k = 0; k < checks; ++k) {
        const std::size_t c = rng.below(domain->size());
        const double E = ev(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(ev.size())))) + rng.uniform(-0.5, 0.5);
        try {
            const auto r = nr_implies_ns(H, (*domain)[c], outer_L, 0, E, cfg.m, seq.resonance_threshold(0, cfg.g));
            hyp += r.hypotheses;
            inconsistent += !r.consistent();
        } catch (const std::invalid_argument&) {
            // Outer ball does not fit in the window.
        }
    }
    res.report = {{"levels", levels},
                  {"separation", sep},
                  {"strong_disorder_threshold", strong},
                  {"strong_disorder", strong_disorder},
                  {"scans", scans},
                  {"implication", {{"checks", checks}, {"hypotheses_met", hyp}, {"inconsistent", inconsistent}}}};
    if (inconsistent > 0) ok = false;
    res.passed = ok;
    if (out) {
        out->write_json("msa.json", res.report);
        std::ostringstream csv;
        csv << "j,N_tilde,log2_beta,log2_delta\n";
        for (const auto& lv : seq.levels) csv << lv.j << ',' << lv.N_tilde << ',' << lv.log2_beta << ',' << lv.log2_delta << '\n';
        out->write_csv("levels.csv", csv.str());
    }
    return res;
}

namespace {

McPlan plan_from_config(const ExperimentConfig& cfg) {
    McPlan p;
    p.trials = cfg.trials;
    p.base_seed = cfg.base_seed;
    p.scenario = cfg.scenario();
    p.omega.grid = get<std::size_t>(cfg.raw, "wegner.omega_grid");
    p.omega.random = get<std::size_t>(cfg.raw, "wegner.omega_random");
    p.s_grid = get<std::vector<double>>(cfg.raw, "wegner.s_grid");
    p.L = get<std::size_t>(cfg.raw, "wegner.L");
    if (!at(cfg.raw, "wegner.threshold").is_null()) p.threshold = get<double>(cfg.raw, "wegner.threshold");
    p.window_radius_cap = get<std::size_t>(cfg.raw, "wegner.window_radius_cap");
    p.max_pairs = get<std::size_t>(cfg.raw, "wegner.max_pairs");
    p.workers = cfg.workers;
    return p;
}

}  // namespace

CommandResult cmd_wegner(const ExperimentConfig& cfg, RunDirectory* out) {
    CommandResult res;
    const McPlan plan = plan_from_config(cfg);
    if (plan.trials == 0) res.warnings.push_back("trials = 0: empty report");

    const FermiConfig x = config_or(at(cfg.raw, "wegner.x"), origin_config(cfg.N, cfg.d), "wegner.x", cfg.N, cfg.d);
    FermiConfig y_default = x.shifted([&] {
        Site s(cfg.d, 0);
        s[0] = static_cast<Coord>(3 * cfg.N * plan.L + cfg.N + 1);
        return s;
    }());
    const FermiConfig y = config_or(at(cfg.raw, "wegner.y"), y_default, "wegner.y", cfg.N, cfg.d);

    const auto weg = wegner_estimate(plan, x, y);
    const auto sep = sep_L0_estimate([&] {
        McPlan p = plan;
        p.L = cfg.L0;
        return p;
    }());
    const int j = get<int>(cfg.raw, "wegner.bad_level");
    const auto bad = theta_bad_measure([&] {
        McPlan p = plan;
        p.L = cfg.L0;
        return p;
    }(), j);

    nlohmann::json rcm = nlohmann::json::array();
    bool rcm_ok = true;
    const auto qs = get<std::vector<std::size_t>>(cfg.raw, "rcm.q");
    const auto widths = get<std::vector<double>>(cfg.raw, "rcm.bin_width");
    if (plan.trials > 0) {
        for (std::size_t i = 0; i < qs.size(); ++i) {
            RcmPlan rp;
            rp.q = qs[i];
            rp.ell = get<double>(cfg.raw, "rcm.ell");
            rp.samples = get<std::size_t>(cfg.raw, "rcm.samples");
            rp.seed = cfg.base_seed;
            rp.bin_width = widths.empty() ? 0.1 : widths[std::min(i, widths.size() - 1)];
            rp.min_bin_count = get<std::size_t>(cfg.raw, "rcm.min_bin_count");
            rp.t_grid = get<std::vector<double>>(cfg.raw, "rcm.t_grid");
            rp.eps_grid = get<std::vector<double>>(cfg.raw, "rcm.eps_grid");
            rp.workers = cfg.workers;
            const auto r = rcm_check(rp);
            rcm_ok = rcm_ok && r.passed();
            rcm.push_back(to_json(r));
        }
    }

    res.passed = weg.passed() && sep.passed() && bad.passed() && rcm_ok;
    res.report = {{"wegner", to_json(weg)}, {"sep_L0", to_json(sep)}, {"theta_bad", to_json(bad)}, {"rcm", rcm}};
    if (out) {
        out->write_json("wegner.json", to_json(weg));
        out->write_json("sep_L0.json", to_json(sep));
        out->write_json("theta_bad.json", to_json(bad));
        out->write_json("rcm.json", {{"reports", rcm}});
        std::ostringstream csv;
        write_cdf_csv(csv, weg);
        out->write_csv("wegner_cdf.csv", csv.str());
    }
    return res;
}

CommandResult cmd_entropy(const ExperimentConfig& cfg, RunDirectory* out) {
    CommandResult res;
    const auto Ls = get<std::vector<long>>(cfg.raw, "entropy.L");
    const auto generation = get<unsigned>(cfg.raw, "entropy.generation");
    const auto grid = get<std::size_t>(cfg.raw, "entropy.grid");
    const PotentialModel model = cfg.potential();
    nlohmann::json rows = nlohmann::json::array();
    bool ok = true;
    for (long L : Ls) {
        if (L < 1) throw ConfigError("entropy.L entries must be >= 1");
        const auto B = ball(cfg.center, static_cast<std::size_t>(L));
        const auto count = equivalence_entropy_check(B.domain, model, generation, grid, L, cfg.A, cfg.A_prime);
        const auto covers = entropy_covers(L, cfg.A, cfg.A_prime, cfg.nu);
        if (count.grid_too_coarse) res.warnings.push_back("entropy grid too coarse at L = " + std::to_string(L));
        ok = ok && count.within_bound;
        rows.push_back({{"L", L},
                        {"configs", B.domain.size()},
                        {"grid_points", count.grid_points},
                        {"distinct", count.distinct},
                        {"bound", count.bound},
                        {"within_bound", count.within_bound},
                        {"grid_too_coarse", count.grid_too_coarse},
                        {"cover_R", covers.R},
                        {"cover_r", covers.r},
                        {"cover_generation", covers.generation}});
    }
    res.passed = ok;
    res.report = {{"generation", generation}, {"rows", rows}};
    if (out) out->write_json("entropy.json", res.report);
    return res;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

namespace {

TrialRecord record_from_json(const nlohmann::json& j) {
    TrialRecord r;
    r.trial = j.at("trial").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.value = std::bit_cast<double>(std::stoull(j.at("value_bits").get<std::string>(), nullptr, 16));
    r.omega = j.at("omega").get<std::vector<double>>();
    r.failed = j.at("failed").get<bool>();
    return r;
}

}  // namespace

ReplayOutcome replay_trial(const nlohmann::json& report, std::size_t trial) {
    const std::string kind = report.at("kind").get<std::string>();
    const McPlan plan = plan_from_json(report.at("plan"));
    ReplayOutcome out;
    out.trial = trial;
    for (const auto& t : report.at("trials"))
        if (t.at("trial").get<std::size_t>() == trial) out.recorded = record_from_json(t);
    if (kind == "wegner") {
        out.replayed = wegner_trial(plan, config_from_json(report.at("plan").at("x")),
                                    config_from_json(report.at("plan").at("y")), trial);
    } else if (kind == "sep_L0") {
        out.replayed = sep_trial(plan, trial);
    } else if (kind == "theta_bad") {
        out.replayed = theta_bad_trial(plan, report.at("plan").at("j").get<int>(), trial);
    } else {
        throw std::invalid_argument("replay: unknown report kind '" + kind + "'");
    }
    out.identical = double_bits(out.recorded.value) == double_bits(out.replayed.value) &&
                    out.recorded.omega.size() == out.replayed.omega.size() &&
                    std::equal(out.recorded.omega.begin(), out.recorded.omega.end(), out.replayed.omega.begin(),
                               [](double a, double b) { return double_bits(a) == double_bits(b); }) &&
                    out.recorded.failed == out.replayed.failed && out.recorded.seed == out.replayed.seed;
    return out;
}

std::vector<ReplayOutcome> replay_failures(const nlohmann::json& report) {
    std::vector<ReplayOutcome> out;
    for (const auto& f : report.at("failures")) out.push_back(replay_trial(report, f.at("trial").get<std::size_t>()));
    return out;
}

}  // namespace fermiloc

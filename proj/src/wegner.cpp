#include "fermiloc/wegner.hpp"

#include <algorithm>
#include <bit>
#include <iomanip>
#include <sstream>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "fermiloc/msa.hpp"
#include "fermiloc/precise.hpp"
#include "fermiloc/random.hpp"

namespace fermiloc {

ShiftSystem Scenario::system() const {
    ShiftSystem s = ShiftSystem::from_spec(frequencies, d, nu);
    s.A = A;
    s.A_prime = A_prime;
    return s;
}

HaarshHull Scenario::hull(std::uint64_t theta_seed) const {
    HaarshHull h{b, nu, n_max, ThetaField(theta_seed)};
    h.validate();
    return h;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string double_bits(double v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << std::bit_cast<std::uint64_t>(v);
    return os.str();
}

namespace {

nlohmann::json scenario_json(const Scenario& s) {
    nlohmann::json u{{"B", s.U.B}, {"scale", s.U.scale}, {"norm", to_string(s.U.norm)}};
    u["radius"] = s.U.radius ? nlohmann::json(*s.U.radius) : nlohmann::json(nullptr);
    return {{"N", s.N},           {"d", s.d},           {"g", s.g},
            {"b", s.b},           {"n_max", s.n_max},   {"frequencies", s.frequencies},
            {"nu", s.nu},         {"A", s.A},           {"C", s.C},
            {"A_prime", s.A_prime}, {"interaction", u}, {"kinetic", to_string(s.convention)}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    s.N = j.at("N").get<std::size_t>();
    s.d = j.at("d").get<std::size_t>();
    s.g = j.at("g").get<double>();
    s.b = j.at("b").get<double>();
    s.n_max = j.at("n_max").get<unsigned>();
    s.frequencies = j.at("frequencies").get<std::vector<std::string>>();
    s.nu = j.at("nu").get<std::size_t>();
    s.A = j.at("A").get<int>();
    s.C = j.at("C").get<double>();
    s.A_prime = j.at("A_prime").get<int>();
    const auto& u = j.at("interaction");
    s.U.B = u.at("B").get<double>();
    s.U.scale = u.at("scale").get<double>();
    s.U.norm = site_norm_from_string(u.at("norm").get<std::string>());
    if (!u.at("radius").is_null()) s.U.radius = u.at("radius").get<Coord>();
    s.convention = kinetic_from_string(j.at("kinetic").get<std::string>());
    return s;
}

nlohmann::json record_json(const TrialRecord& r) {
    nlohmann::json j{{"trial", r.trial},           {"seed", r.seed},   {"value", r.value},
                     {"value_bits", double_bits(r.value)}, {"omega", r.omega}, {"failed", r.failed}};
    if (r.secondary) j["secondary"] = *r.secondary;
    if (r.implication_violated) j["implication_violated"] = true;
    if (r.unresolved > 0) j["unresolved"] = r.unresolved;
    return j;
}

}  // namespace

nlohmann::json to_json(const McPlan& p) {
    nlohmann::json j{{"trials", p.trials},
                     {"base_seed", p.base_seed},
                     {"scenario", scenario_json(p.scenario)},
                     {"omega", {{"grid", p.omega.grid}, {"random", p.omega.random}}},
                     {"s_grid", p.s_grid},
                     {"L", p.L},
                     {"window_radius_cap", p.window_radius_cap},
                     {"max_pairs", p.max_pairs},
                     {"workers", p.workers}};
    j["omega"]["fixed"] = p.omega.fixed ? nlohmann::json(*p.omega.fixed) : nlohmann::json(nullptr);
    j["threshold"] = p.threshold ? nlohmann::json(*p.threshold) : nlohmann::json(nullptr);
    return j;
}

McPlan plan_from_json(const nlohmann::json& j) {
    McPlan p;
    p.trials = j.at("trials").get<std::size_t>();
    p.base_seed = j.at("base_seed").get<std::uint64_t>();
    p.scenario = scenario_from_json(j.at("scenario"));
    const auto& w = j.at("omega");
    p.omega.grid = w.at("grid").get<std::size_t>();
    p.omega.random = w.at("random").get<std::size_t>();
    if (!w.at("fixed").is_null()) p.omega.fixed = w.at("fixed").get<std::vector<double>>();
    p.s_grid = j.at("s_grid").get<std::vector<double>>();
    p.L = j.at("L").get<std::size_t>();
    if (!j.at("threshold").is_null()) p.threshold = j.at("threshold").get<double>();
    p.window_radius_cap = j.at("window_radius_cap").get<std::size_t>();
    p.max_pairs = j.at("max_pairs").get<std::size_t>();
    p.workers = j.at("workers").get<std::size_t>();
    return p;
}

nlohmann::json to_json(const SeparationReport& r) {
    nlohmann::json j{{"kind", r.kind},
                     {"plan", r.plan},
                     {"s_grid", r.s_grid},
                     {"empirical", r.empirical},
                     {"half_width", r.half_width},
                     {"log_bound", r.log_bound},
                     {"violations", r.violations},
                     {"log2_threshold", r.log2_threshold},
                     {"bad_measure", r.bad_measure},
                     {"bad_half_width", r.bad_half_width},
                     {"implication_violations", r.implication_violations},
                     {"unresolved", r.unresolved},
                     {"passed", r.passed()}};
    j["log_fitted_constant"] =
        std::isfinite(r.log_fitted_constant) ? nlohmann::json(r.log_fitted_constant) : nlohmann::json(nullptr);
    j["reference_bound"] =
        std::isfinite(r.reference_bound) ? nlohmann::json(r.reference_bound) : nlohmann::json(nullptr);
    j["trials"] = nlohmann::json::array();
    for (const auto& t : r.trials) j["trials"].push_back(record_json(t));
    j["failures"] = nlohmann::json::array();
    for (const auto& t : r.failures) j["failures"].push_back(record_json(t));
    return j;
}

void write_cdf_csv(std::ostream& os, const SeparationReport& r) {
    os << "s,empirical,half_width,log_bound\n";
    os.precision(17);
    for (std::size_t i = 0; i < r.s_grid.size(); ++i)
        os << r.s_grid[i] << ',' << r.empirical[i] << ',' << r.half_width[i] << ','
           << (i < r.log_bound.size() ? r.log_bound[i] : std::nan("")) << '\n';
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

std::vector<TorusPoint> trial_omegas(const McPlan& plan, std::size_t trial) {
    const std::size_t nu = plan.scenario.nu;
    std::vector<TorusPoint> out;
    if (plan.omega.fixed) {
        if (plan.omega.fixed->size() != nu) throw std::invalid_argument("fixed omega has the wrong dimension");
        out.emplace_back(*plan.omega.fixed);
        return out;
    }
    if (plan.omega.grid > 0) {
        std::vector<std::size_t> counter(nu, 0);
        for (;;) {
            std::vector<double> w(nu);
            for (std::size_t i = 0; i < nu; ++i)
                w[i] = (static_cast<double>(counter[i]) + 0.5) / static_cast<double>(plan.omega.grid);
            out.emplace_back(std::move(w));
            std::size_t i = 0;
            while (i < nu && ++counter[i] == plan.omega.grid) counter[i++] = 0;
            if (i == nu) break;
        }
    }
    KeyedStream rng(plan.trial_seed(trial), 0x0E6A);
    for (std::size_t k = 0; k < plan.omega.random; ++k) {
        std::vector<double> w(nu);
        for (auto& v : w) v = rng.uniform();
        out.emplace_back(std::move(w));
    }
    if (out.empty()) throw std::invalid_argument("omega rule yields no phase points");
    return out;
}

std::vector<TrialRecord> run_trials(const McPlan& plan,
                                    const std::function<TrialRecord(const McPlan&, std::size_t)>& trial) {
    std::vector<TrialRecord> out(plan.trials);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t t; (t = next++) < plan.trials;) {
            try {
                out[t] = trial(plan, t);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(plan.workers, 1, std::max<std::size_t>(plan.trials, 1));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

namespace {

PotentialModel trial_model(const McPlan& plan, std::size_t trial, const TorusPoint& omega) {
    return PotentialModel{plan.scenario.hull(plan.trial_seed(trial)), plan.scenario.system(), omega, 0};
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

std::vector<std::size_t> failures_of(const std::vector<TrialRecord>& trials) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < trials.size(); ++i)
        if (trials[i].failed) idx.push_back(i);
    return idx;
}

void fill_bad_measure(SeparationReport& rep) {
    const double n = static_cast<double>(rep.trials.size());
    const auto bad = failures_of(rep.trials);
    for (auto i : bad) rep.failures.push_back(rep.trials[i]);
    for (const auto& t : rep.trials) rep.unresolved += t.unresolved;
    if (n > 0) {
        rep.bad_measure = static_cast<double>(bad.size()) / n;
        rep.bad_half_width = 2.0 * std::sqrt(rep.bad_measure * (1.0 - rep.bad_measure) / n);
    }
}

double safe_log2(double v) { return v > 0.0 ? std::log2(v) : -std::numeric_limits<double>::infinity(); }

// Coefficient differences below this count as identical cube amplitudes.
double series_tolerance(std::size_t N) { return 16.0 * static_cast<double>(N) * std::numeric_limits<double>::epsilon(); }

// Hull amplitudes per site at one phase point, summed per configuration.
class AmplitudeCache {
public:
    AmplitudeCache(PotentialModel model, unsigned generations) : model_(std::move(model)), n_(generations) {}

    const std::vector<double>& site(const Site& s) {
        auto it = sites_.find(s);
        if (it == sites_.end())
            it = sites_.emplace(s, hull_amplitudes(model_.hull, translate(model_.system, model_.omega, s), n_)).first;
        return it->second;
    }

    std::vector<double> config(const FermiConfig& x) {
        std::vector<double> c(n_, 0.0);
        for (const auto& s : x.sites()) {
            const auto& a = site(s);
            for (unsigned n = 0; n < n_; ++n) c[n] += a[n];
        }
        return c;
    }

private:
    PotentialModel model_;
    unsigned n_;
    std::map<Site, std::vector<double>> sites_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Wegner
// ---------------------------------------------------------------------------

double wegner_log_bound(std::size_t L, std::size_t N, std::size_t d, double B, double s) {
    if (L < 1) throw std::invalid_argument("wegner_log_bound: L must be >= 1");
    const double lnL = std::log(static_cast<double>(L));
    return (static_cast<double>((2 * N + 4) * d) + B * lnL) * lnL + (2.0 / 3.0) * std::log(s);
}

TrialRecord wegner_trial(const McPlan& plan, const FermiConfig& x, const FermiConfig& y, std::size_t trial) {
    auto dx = std::make_shared<const ConfigDomain>(ball(x, plan.L).domain);
    auto dy = std::make_shared<const ConfigDomain>(ball(y, plan.L).domain);
    const Scenario& sc = plan.scenario;
    TrialRecord rec;
    rec.trial = trial;
    rec.seed = plan.trial_seed(trial);
    rec.value = std::numeric_limits<double>::infinity();
    for (const auto& w : trial_omegas(plan, trial)) {
        const PotentialModel model = trial_model(plan, trial, w);
        const double D = spectral_distance(eigenvalues(assemble(dx, model, sc.g, sc.U, sc.convention).matrix),
                                           eigenvalues(assemble(dy, model, sc.g, sc.U, sc.convention).matrix));
        if (D < rec.value) {
            rec.value = D;
            rec.omega = w.coords();
        }
    }
    if (!plan.s_grid.empty()) rec.failed = rec.value <= sc.g * plan.s_grid.front();
    return rec;
}

SeparationReport wegner_estimate(const McPlan& plan, const FermiConfig& x, const FermiConfig& y) {
    if (!weakly_separated(x, y, static_cast<Coord>(plan.L)))
        throw std::invalid_argument("wegner_estimate: balls are not weakly separated");
    if (plan.L < 1) throw std::invalid_argument("wegner_estimate: L must be >= 1");
    SeparationReport rep;
    rep.kind = "wegner";
    rep.plan = to_json(plan);
    rep.plan["x"] = to_json(x);
    rep.plan["y"] = to_json(y);
    rep.s_grid = plan.s_grid;
    std::sort(rep.s_grid.begin(), rep.s_grid.end());
    rep.trials = run_trials(plan, [&](const McPlan& p, std::size_t t) { return wegner_trial(p, x, y, t); });
    const Scenario& sc = plan.scenario;
    const double B = ScaleArithmetic{sc.A, sc.C, sc.b}.B();
    const double n = static_cast<double>(rep.trials.size());
    for (double s : rep.s_grid) {
        std::size_t hits = 0;
        for (const auto& t : rep.trials) hits += t.value <= sc.g * s;
        const double p = n > 0 ? static_cast<double>(hits) / n : 0.0;
        const double hw = n > 0 ? 2.0 * std::sqrt(p * (1.0 - p) / n) : 0.0;
        const double lb = wegner_log_bound(plan.L, sc.N, sc.d, B, s);
        rep.empirical.push_back(p);
        rep.half_width.push_back(hw);
        rep.log_bound.push_back(lb);
        if (p - hw > 0.0 && std::log(p - hw) > lb) ++rep.violations;
        if (p > 0.0) rep.log_fitted_constant = std::max(rep.log_fitted_constant, std::log(p) - lb);
    }
    for (auto i : failures_of(rep.trials)) rep.failures.push_back(rep.trials[i]);
    return rep;
}

// ---------------------------------------------------------------------------
// Separation at the initial scale
// ---------------------------------------------------------------------------

ConfigDomain separation_window(const McPlan& plan) {
    const double L4 = std::pow(static_cast<double>(plan.L), 4.0);
    const auto radius = static_cast<std::size_t>(std::min(L4, static_cast<double>(plan.window_radius_cap)));
    return ball(origin_config(plan.scenario.N, plan.scenario.d), radius).domain;
}

namespace {

struct SepThresholds {
    double log2_bad;   // log2(4 g delta_0) or log2(threshold)
    double log2_good;  // log2(5 g delta_0) or log2(5/4 threshold)
    unsigned truncation;
};

SepThresholds sep_thresholds(const McPlan& plan) {
    const Scenario& sc = plan.scenario;
    if (plan.L < 2) throw std::invalid_argument("sep_L0_estimate: L0 must be >= 2");
    const auto seq = ScaleSequence::build(plan.L, 0, sc.b, sc.A, sc.C);
    const double log2_delta = seq.level(0).log2_delta;
    SepThresholds t;
    if (plan.threshold) {
        t.log2_bad = safe_log2(*plan.threshold);
        t.log2_good = safe_log2(1.25 * *plan.threshold);
    } else {
        t.log2_bad = std::log2(4.0 * std::abs(sc.g)) + log2_delta;
        t.log2_good = std::log2(5.0 * std::abs(sc.g)) + log2_delta;
    }
    t.truncation = static_cast<unsigned>(std::min<long>(seq.level(0).N_tilde, sc.n_max));
    return t;
}

TrialRecord sep_trial_in(const McPlan& plan, const ConfigDomain& window, const SepThresholds& thr,
                         std::size_t trial) {
    const Scenario& sc = plan.scenario;
    TrialRecord rec;
    rec.trial = trial;
    rec.seed = plan.trial_seed(trial);
    rec.value = std::numeric_limits<double>::infinity();
    bool inconsistent = false;
    const double log2_g = safe_log2(std::abs(sc.g));
    const double tol = series_tolerance(sc.N);
    for (const auto& w : trial_omegas(plan, trial)) {
        AmplitudeCache amp(trial_model(plan, trial, w), sc.n_max);
        std::vector<std::vector<double>> full, trunc;
        for (const auto& x : window.members()) {
            full.push_back(amp.config(x));
            trunc.emplace_back(full.back().begin(), full.back().begin() + thr.truncation);
        }
        const double sep_full = log2_g + log2_series_separation(full, sc.b, tol);
        const double sep_trunc = log2_g + log2_series_separation(trunc, sc.b, tol);
        if (sep_trunc >= thr.log2_good && sep_full < thr.log2_bad) inconsistent = true;
        if (sep_full < rec.value) {
            rec.value = sep_full;
            rec.secondary = sep_trunc;
            rec.omega = w.coords();
        }
    }
    rec.failed = rec.value < thr.log2_bad;
    rec.implication_violated = inconsistent;
    return rec;
}

}  // namespace

TrialRecord sep_trial(const McPlan& plan, std::size_t trial) {
    return sep_trial_in(plan, separation_window(plan), sep_thresholds(plan), trial);
}

SeparationReport sep_L0_estimate(const McPlan& plan) {
    SeparationReport rep;
    rep.kind = "sep_L0";
    rep.plan = to_json(plan);
    const ConfigDomain window = separation_window(plan);
    if (window.size() < 2) throw std::invalid_argument("sep_L0_estimate: window has fewer than two configurations");
    const SepThresholds thr = sep_thresholds(plan);
    rep.log2_threshold = thr.log2_bad;
    rep.trials = run_trials(plan, [&](const McPlan& p, std::size_t t) { return sep_trial_in(p, window, thr, t); });
    for (const auto& t : rep.trials)
        if (t.implication_violated) ++rep.implication_violations;
    fill_bad_measure(rep);
    return rep;
}

// ---------------------------------------------------------------------------
// Bad parameter sets
// ---------------------------------------------------------------------------

std::vector<BallPair> separated_pairs(const ConfigDomain& window, std::size_t L, std::size_t max_pairs) {
    std::vector<std::size_t> fitting;
    for (std::size_t i = 0; i < window.size(); ++i) {
        const auto b = ball(window[i], L, window.ambient());
        if (std::all_of(b.domain.members().begin(), b.domain.members().end(),
                        [&](const FermiConfig& z) { return window.contains(z); }))
            fitting.push_back(i);
    }
    std::vector<BallPair> out;
    if (fitting.empty()) return out;
    const std::size_t cap = 3 * window[0].particle_count() * L;
    for (std::size_t a = 0; a < fitting.size() && out.size() < max_pairs; ++a)
        for (std::size_t b = a + 1; b < fitting.size() && out.size() < max_pairs; ++b) {
            const auto& x = window[fitting[a]];
            const auto& y = window[fitting[b]];
            if (graph_distance(x, y, cap)) continue;
            if (weakly_separated(x, y, static_cast<Coord>(L))) out.push_back({fitting[a], fitting[b]});
        }
    return out;
}

namespace {

struct BadSetup {
    ConfigDomain window;
    std::vector<BallPair> pairs;
    std::size_t L = 0;
    double log2_threshold = 0.0;
    double reference = 0.0;
};

BadSetup bad_setup(const McPlan& plan, int j) {
    const Scenario& sc = plan.scenario;
    const auto seq = ScaleSequence::build(plan.L, std::max(j, 0), sc.b, sc.A, sc.C);
    const auto& lv = seq.level(j);
    if (!lv.L || *lv.L > 64) throw std::invalid_argument("theta_bad_measure: scale too large for a window");
    BadSetup s;
    s.L = static_cast<std::size_t>(*lv.L);
    const double L4 = std::pow(static_cast<double>(s.L), 4.0);
    const auto radius = static_cast<std::size_t>(std::min(L4, static_cast<double>(plan.window_radius_cap)));
    s.window = ball(origin_config(sc.N, sc.d), radius).domain;
    s.pairs = separated_pairs(s.window, s.L, plan.max_pairs);
    s.log2_threshold = plan.threshold ? safe_log2(*plan.threshold) : std::log2(4.0 * std::abs(sc.g)) + lv.log2_delta;
    s.reference = s.L == 0 ? 1.0 : std::pow(static_cast<double>(s.L), -sc.b * sc.A);
    return s;
}

struct BallData {
    std::shared_ptr<const ConfigDomain> domain;
    Eigen::VectorXd eigenvalues;
    std::optional<PreciseSpectrum> precise;
};

TrialRecord bad_trial_in(const McPlan& plan, const BadSetup& setup, std::size_t trial) {
    const Scenario& sc = plan.scenario;
    TrialRecord rec;
    rec.trial = trial;
    rec.seed = plan.trial_seed(trial);
    rec.value = std::numeric_limits<double>::infinity();
    for (const auto& w : trial_omegas(plan, trial)) {
        const PotentialModel model = trial_model(plan, trial, w);
        std::map<std::size_t, BallData> balls;
        auto get = [&](std::size_t c) -> BallData& {
            auto it = balls.find(c);
            if (it == balls.end()) {
                BallData b;
                b.domain = std::make_shared<const ConfigDomain>(ball(setup.window[c], setup.L).domain);
                b.eigenvalues = eigenvalues(assemble(b.domain, model, sc.g, sc.U, sc.convention).matrix);
                it = balls.emplace(c, std::move(b)).first;
            }
            return it->second;
        };
        auto precise = [&](BallData& b) -> PreciseSpectrum& {
            if (!b.precise) b.precise.emplace(series_hamiltonian(b.domain, model, sc.g, sc.U, sc.convention));
            return *b.precise;
        };
        for (const auto& p : setup.pairs) {
            BallData& bx = get(p.first);
            BallData& by = get(p.second);
            const double D = spectral_distance(bx.eigenvalues, by.eigenvalues);
            const double resolution = 64 * std::numeric_limits<double>::epsilon() *
                                      std::max({1.0, bx.eigenvalues.cwiseAbs().maxCoeff(),
                                                by.eigenvalues.cwiseAbs().maxCoeff()});
            double value = safe_log2(D);
            if (D <= resolution) {
                const auto r = precise_log2_distance(precise(bx), precise(by), setup.log2_threshold);
                value = r.log2_distance;
                if (!r.resolved && r.log2_distance >= setup.log2_threshold) ++rec.unresolved;
            }
            if (value < rec.value) {
                rec.value = value;
                rec.omega = w.coords();
            }
        }
    }
    rec.failed = rec.value < setup.log2_threshold;
    return rec;
}

}  // namespace

TrialRecord theta_bad_trial(const McPlan& plan, int j, std::size_t trial) {
    return bad_trial_in(plan, bad_setup(plan, j), trial);
}

SeparationReport theta_bad_measure(const McPlan& plan, int j) {
    SeparationReport rep;
    rep.kind = "theta_bad";
    rep.plan = to_json(plan);
    rep.plan["j"] = j;
    const BadSetup setup = bad_setup(plan, j);
    rep.plan["pairs"] = setup.pairs.size();
    rep.log2_threshold = setup.log2_threshold;
    rep.reference_bound = setup.reference;
    if (!setup.pairs.empty())
        rep.trials = run_trials(plan, [&](const McPlan& p, std::size_t t) { return bad_trial_in(p, setup, t); });
    fill_bad_measure(rep);
    if (rep.bad_measure - rep.bad_half_width > rep.reference_bound) ++rep.violations;
    return rep;
}

// ---------------------------------------------------------------------------
// Concentration of sample means
// ---------------------------------------------------------------------------

double rcm_exact_nu(std::span<const double> values, double t, double ell) {
    if (values.empty()) throw std::invalid_argument("rcm_exact_nu: empty sample");
    if (!(ell > 0.0) || !(t >= 0.0)) throw std::invalid_argument("rcm_exact_nu: bad parameters");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double len = ell - (*hi - *lo);
    return len <= t ? 1.0 : t / len;
}

bool RcmReport::passed() const {
    return std::all_of(cells.begin(), cells.end(), [](const RcmCell& c) { return c.passed; });
}

namespace {

struct BinnedSample {
    std::uint64_t key;
    double mean;
};

// For each t, the fraction of samples whose bin has nu-hat above each
// threshold is accumulated by the caller; here nu-hat per sample.
std::vector<std::vector<double>> binned_nu(std::vector<BinnedSample>& samples, const std::vector<double>& t_grid,
                                           std::size_t min_count, std::size_t& bins, std::size_t& sparse) {
    std::sort(samples.begin(), samples.end(), [](const BinnedSample& a, const BinnedSample& b) {
        return a.key != b.key ? a.key < b.key : a.mean < b.mean;
    });
    std::vector<std::vector<double>> nu(t_grid.size(), std::vector<double>(samples.size(), 1.0));
    bins = 0;
    sparse = 0;
    for (std::size_t begin = 0; begin < samples.size();) {
        std::size_t end = begin;
        while (end < samples.size() && samples[end].key == samples[begin].key) ++end;
        ++bins;
        const std::size_t n = end - begin;
        if (n < min_count) {
            sparse += n;
        } else {
            for (std::size_t k = 0; k < t_grid.size(); ++k) {
                std::size_t best = 0;
                for (std::size_t lo = begin, hi = begin; lo < end; ++lo) {
                    while (hi < end && samples[hi].mean <= samples[lo].mean + t_grid[k]) ++hi;
                    best = std::max(best, hi - lo);
                }
                const double v = static_cast<double>(best) / static_cast<double>(n);
                std::fill(nu[k].begin() + static_cast<long>(begin), nu[k].begin() + static_cast<long>(end), v);
            }
        }
        begin = end;
    }
    return nu;
}

}  // namespace

RcmReport rcm_check(const RcmPlan& plan) {
    if (plan.q < 2) throw std::invalid_argument("rcm_check: |Q| must be >= 2");
    if (plan.q > 5) throw std::invalid_argument("rcm_check: |Q| > 5 is not supported by the binning key");
    if (!(plan.ell > 0.0) || !(plan.bin_width > 0.0)) throw std::invalid_argument("rcm_check: bad parameters");
    const std::size_t q = plan.q;

    std::vector<double> values(plan.samples * q);
    auto sample = [&](std::size_t i) { return std::span<const double>(values.data() + i * q, q); };
    {
        std::atomic<std::size_t> next{0};
        constexpr std::size_t chunk = 4096;
        auto work = [&] {
            for (std::size_t c; (c = next.fetch_add(chunk)) < plan.samples;)
                for (std::size_t i = c; i < std::min(plan.samples, c + chunk); ++i) {
                    KeyedStream rng(plan.seed, i);
                    for (std::size_t k = 0; k < q; ++k) values[i * q + k] = plan.ell * rng.uniform();
                }
        };
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < std::max<std::size_t>(plan.workers, 1); ++w) pool.emplace_back(work);
        work();
    }

    auto make_samples = [&](double width) {
        const double h = width * plan.ell;
        std::vector<BinnedSample> out(plan.samples);
        for (std::size_t i = 0; i < plan.samples; ++i) {
            const auto v = sample(i);
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(q);
            std::uint64_t key = 0;
            for (std::size_t k = 0; k + 1 < q; ++k)
                key = (key << 16) | static_cast<std::uint64_t>(std::floor((v[k] - mean + plan.ell) / h));
            out[i] = {key, mean};
        }
        return out;
    };

    RcmReport rep;
    rep.q = q;
    rep.ell = plan.ell;
    rep.samples = plan.samples;
    rep.bin_diameter = plan.bin_width * plan.ell * std::sqrt(static_cast<double>(q - 1));

    std::size_t sparse = 0, bins_half = 0, sparse_half = 0;
    auto coarse = make_samples(plan.bin_width);
    const auto nu = binned_nu(coarse, plan.t_grid, plan.min_bin_count, rep.bins, sparse);
    auto fine = make_samples(0.5 * plan.bin_width);
    const auto nu_half = binned_nu(fine, plan.t_grid, plan.min_bin_count, bins_half, sparse_half);
    rep.sparse_fraction = plan.samples ? static_cast<double>(sparse) / static_cast<double>(plan.samples) : 0.0;

    const double n = static_cast<double>(plan.samples);
    for (std::size_t k = 0; k < plan.t_grid.size(); ++k)
        for (double eps : plan.eps_grid) {
            RcmCell c;
            c.t = plan.t_grid[k];
            c.eps = eps;
            c.bound = static_cast<double>(q * q) * eps * eps;
            const double level = c.t / (plan.ell * eps);
            std::size_t hit = 0, hit_half = 0, hit_exact = 0;
            for (std::size_t i = 0; i < plan.samples; ++i) {
                hit += nu[k][i] > level;
                hit_half += nu_half[k][i] > level;
                hit_exact += rcm_exact_nu(sample(i), c.t, plan.ell) > level;
            }
            c.exceedance = n > 0 ? static_cast<double>(hit) / n : 0.0;
            c.exceedance_halved = n > 0 ? static_cast<double>(hit_half) / n : 0.0;
            c.exceedance_exact = n > 0 ? static_cast<double>(hit_exact) / n : 0.0;
            c.half_width = n > 0 ? 2.0 * std::sqrt(c.exceedance * (1.0 - c.exceedance) / n) : 0.0;
            c.passed = c.exceedance - c.half_width <= c.bound;
            rep.max_sensitivity = std::max(rep.max_sensitivity, std::abs(c.exceedance - c.exceedance_halved));
            rep.cells.push_back(c);
        }
    return rep;
}

nlohmann::json to_json(const RcmReport& r) {
    nlohmann::json j{{"q", r.q},
                     {"ell", r.ell},
                     {"samples", r.samples},
                     {"bin_diameter", r.bin_diameter},
                     {"bins", r.bins},
                     {"sparse_fraction", r.sparse_fraction},
                     {"max_sensitivity", r.max_sensitivity},
                     {"passed", r.passed()}};
    j["cells"] = nlohmann::json::array();
    for (const auto& c : r.cells)
        j["cells"].push_back({{"t", c.t},
                              {"eps", c.eps},
                              {"bound", c.bound},
                              {"exceedance", c.exceedance},
                              {"half_width", c.half_width},
                              {"exceedance_halved", c.exceedance_halved},
                              {"exceedance_exact", c.exceedance_exact},
                              {"passed", c.passed}});
    return j;
}

// ---------------------------------------------------------------------------
// Eigenvalue shifts
// ---------------------------------------------------------------------------

EvcReport evc_pair_bound_check(const Scenario& scenario, std::uint64_t theta_seed, const TorusPoint& omega,
                               const FermiConfig& x, const FermiConfig& y, std::size_t L, double c) {
    auto witness = weakly_separated(x, y, static_cast<Coord>(L));
    if (!witness) throw std::invalid_argument("evc_pair_bound_check: pair is not weakly separated");
    EvcReport rep;
    rep.witness = *witness;
    rep.c = c;
    rep.exact = L == 0;
    const FermiConfig& first = witness->swapped ? y : x;
    const FermiConfig& second = witness->swapped ? x : y;
    const PotentialModel model{scenario.hull(theta_seed), scenario.system(), omega, 0};

    struct Slopes {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
    };
    bool ok = true;
    auto examine = [&](const FermiConfig& center) {
        auto dom = std::make_shared<const ConfigDomain>(ball(center, L).domain);
        const Eigen::VectorXd v0 = domain_potential(*dom, model);
        Eigen::VectorXd nq(v0.size());
        for (Eigen::Index i = 0; i < v0.size(); ++i)
            nq(i) = (*dom)[static_cast<std::size_t>(i)].occupation_in_cube(witness->cube.lower, witness->cube.side);
        const auto H0 = assemble_with_potential(dom, v0, scenario.g, scenario.U, scenario.convention);
        const auto Hc = assemble_with_potential(dom, v0 + c * nq, scenario.g, scenario.U, scenario.convention);
        const Spectrum s0 = diagonalize(H0.matrix);
        const Eigen::VectorXd sc = eigenvalues(Hc.matrix);
        Slopes sl;
        const double scale = std::max(1.0, s0.eigenvalues.cwiseAbs().maxCoeff());
        for (Eigen::Index k = 0; k < sc.size(); ++k) {
            const double slope = scenario.g * s0.eigenvectors.col(k).cwiseAbs2().dot(nq);
            sl.lo = std::min(sl.lo, slope);
            sl.hi = std::max(sl.hi, slope);
            const double shift = sc(k) - s0.eigenvalues(k);
            if (rep.exact) {
                const double err = std::abs(shift - scenario.g * c * nq(k));
                rep.max_exact_error = std::max(rep.max_exact_error, err);
                if (err > 1e-12 * scale) ok = false;
            } else if (c != 0.0) {
                const double fd = shift / c;
                const double rel = std::abs(fd - slope) / std::max(std::abs(slope), std::abs(scenario.g) * 1e-3);
                rep.max_relative_fd_error = std::max(rep.max_relative_fd_error, rel);
                if (rel > 0.05) ok = false;
            }
        }
        return sl;
    };
    const Slopes a = examine(first), b = examine(second);
    rep.min_slope_first = a.lo;
    rep.max_slope_first = a.hi;
    rep.min_slope_second = b.lo;
    rep.max_slope_second = b.hi;
    rep.passed = ok;
    return rep;
}

}  // namespace fermiloc

// Monte-Carlo estimates over the parameter field theta: spectral spacing of
// separated balls, separation of the potential, bad-parameter measures,
// concentration of sample means of uniform variables, and the eigenvalue
// shift mechanics behind the Wegner-type bound.
//
// Trial t of a plan uses seed base_seed + t for theta and for its phase
// points, so every trial can be recomputed on its own.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fermiloc/fermi_graph.hpp"
#include "fermiloc/haarsh.hpp"
#include "fermiloc/hamiltonian.hpp"
#include "fermiloc/torus.hpp"

namespace fermiloc {

struct Scenario {
    std::size_t N = 2;
    std::size_t d = 1;
    double g = 1.0;
    double b = 2.5;
    unsigned n_max = 24;
    std::vector<std::string> frequencies{"golden"};
    std::size_t nu = 1;
    int A = 1;
    double C = 2.0;
    int A_prime = 1;
    Interaction U = Interaction::none();
    KineticConvention convention = KineticConvention::laplacian;

    ShiftSystem system() const;
    HaarshHull hull(std::uint64_t theta_seed) const;
};

/// Phase points per trial: `grid` centres of a uniform grid plus `random`
/// uniform points drawn from the trial seed, or one fixed point.
struct OmegaRule {
    std::size_t grid = 0;
    std::size_t random = 1;
    std::optional<std::vector<double>> fixed;
};

struct McPlan {
    std::size_t trials = 100;
    std::uint64_t base_seed = 1;
    Scenario scenario;
    OmegaRule omega;
    std::vector<double> s_grid;
    std::size_t L = 2;                       ///< ball radius (or L_0)
    std::optional<double> threshold;         ///< replaces 4 g delta_j when set
    std::size_t window_radius_cap = 16;      ///< caps L^4 window radii
    std::size_t max_pairs = 2000;
    std::size_t workers = 1;

    std::uint64_t trial_seed(std::size_t t) const { return base_seed + t; }
};

/// Hex image of a double, for bit-exact comparisons in reports.
std::string double_bits(double v);

nlohmann::json to_json(const McPlan& plan);
McPlan plan_from_json(const nlohmann::json& j);

std::vector<TorusPoint> trial_omegas(const McPlan& plan, std::size_t trial);

struct TrialRecord {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double value = 0.0;            ///< the trial statistic (min over phase points)
    std::vector<double> omega;     ///< phase point attaining it
    bool failed = false;
    std::optional<double> secondary;  ///< auxiliary statistic (e.g. truncated Sep)
    bool implication_violated = false;
    std::size_t unresolved = 0;       ///< distances left undecided at full precision
};

/// Runs trials 0..plan.trials-1 over a worker pool; results ordered by trial.
std::vector<TrialRecord> run_trials(const McPlan& plan,
                                    const std::function<TrialRecord(const McPlan&, std::size_t)>& trial);

struct SeparationReport {
    std::string kind;
    nlohmann::json plan;
    std::vector<double> s_grid;
    std::vector<double> empirical;    ///< P{value <= g s}
    std::vector<double> half_width;   ///< 2 sigma, normal approximation
    std::vector<double> log_bound;    ///< natural log of the theoretical bound
    std::size_t violations = 0;
    double log_fitted_constant = -std::numeric_limits<double>::infinity();
    double log2_threshold = 0.0;
    double bad_measure = 0.0;
    double bad_half_width = 0.0;
    double reference_bound = std::numeric_limits<double>::quiet_NaN();
    std::size_t implication_violations = 0;
    std::size_t unresolved = 0;
    std::vector<TrialRecord> trials;
    std::vector<TrialRecord> failures;

    bool passed() const { return violations == 0 && implication_violations == 0; }
};

nlohmann::json to_json(const SeparationReport& r);
/// "s,empirical,half_width,log_bound" rows.
void write_cdf_csv(std::ostream& os, const SeparationReport& r);

// ---------------------------------------------------------------------------
// Spectral spacing of weakly separated balls
// ---------------------------------------------------------------------------

/// D = min over the trial's phase points of dist(spec H_B(x), spec H_B(y)).
TrialRecord wegner_trial(const McPlan& plan, const FermiConfig& x, const FermiConfig& y, std::size_t trial);

/// Empirical P{D <= g s} against C5 L^((2N+4)d + B ln L) s^(2/3) with
/// C5 = 1; the constant that would make the bound tight is reported. Throws
/// if the balls are not weakly separated.
SeparationReport wegner_estimate(const McPlan& plan, const FermiConfig& x, const FermiConfig& y);

/// ln of L^((2N+4)d + B ln L) s^(2/3).
double wegner_log_bound(std::size_t L, std::size_t N, std::size_t d, double B, double s);

// ---------------------------------------------------------------------------
// Separation of the potential
// ---------------------------------------------------------------------------

/// Window ball of radius min(L^4, cap) around {0, e_1, ..., (N-1) e_1}.
ConfigDomain separation_window(const McPlan& plan);

/// value = min over phase points of log2 Sep(g V) on the window with the
/// full hull, secondary = the same with the hull truncated at N~(L). Gaps
/// below double resolution come from the hull series.
TrialRecord sep_trial(const McPlan& plan, std::size_t trial);

/// Measure of {Sep < 4 g delta_0} and the truncation implication
/// Sep_trunc >= 5 g delta_0 => Sep >= 4 g delta_0.
SeparationReport sep_L0_estimate(const McPlan& plan);

// ---------------------------------------------------------------------------
// Bad parameter sets
// ---------------------------------------------------------------------------

struct BallPair {
    std::size_t first = 0;
    std::size_t second = 0;
};

/// Pairs of 3NL-distant, weakly separated centres whose L-balls fit in the
/// window (at most max_pairs, in index order).
std::vector<BallPair> separated_pairs(const ConfigDomain& window, std::size_t L, std::size_t max_pairs);

/// value = min over pairs and phase points of log2 dist(spec, spec). Distances
/// doubles cannot resolve are recomputed in MPFR (see precise.hpp).
TrialRecord theta_bad_trial(const McPlan& plan, int j, std::size_t trial);

/// Fraction of theta with D(L_j) < 4 g delta_j, compared with L_j^(-bA).
SeparationReport theta_bad_measure(const McPlan& plan, int j);

// ---------------------------------------------------------------------------
// Concentration of sample means
// ---------------------------------------------------------------------------

struct RcmPlan {
    std::size_t q = 2;                ///< |Q|
    double ell = 1.0;                 ///< interval length
    std::size_t samples = 2'000'000;
    std::uint64_t seed = 1;
    double bin_width = 0.1;           ///< fluctuation bin side, in units of ell
    std::size_t min_bin_count = 64;   ///< sparser bins count as nu = 1
    std::vector<double> t_grid{0.01, 0.02, 0.05, 0.1, 0.2};
    std::vector<double> eps_grid{0.1, 0.2, 0.3, 0.4, 0.5};
    std::size_t workers = 1;
};

struct RcmCell {
    double t = 0.0;
    double eps = 0.0;
    double bound = 0.0;            ///< |Q|^2 eps^2
    double exceedance = 0.0;       ///< binned estimate of P{nu > t / (ell eps)}
    double half_width = 0.0;       ///< 2 sigma
    double exceedance_halved = 0.0;  ///< with half the bin width
    double exceedance_exact = 0.0;   ///< with the exact conditional law
    bool passed = false;
};

struct RcmReport {
    std::size_t q = 0;
    double ell = 0.0;
    std::size_t samples = 0;
    double bin_diameter = 0.0;
    std::size_t bins = 0;
    double sparse_fraction = 0.0;   ///< samples in bins below min_bin_count
    double max_sensitivity = 0.0;   ///< max |exceedance - exceedance_halved|
    std::vector<RcmCell> cells;

    bool passed() const;
};

/// Exact sup_r P{xi_Q in [r, r + t] | eta} for iid Unif[0, ell] values.
double rcm_exact_nu(std::span<const double> values, double t, double ell);

/// Binned estimate of nu_Q(t) conditional on the fluctuation vector.
RcmReport rcm_check(const RcmPlan& plan);
nlohmann::json to_json(const RcmReport& r);

// ---------------------------------------------------------------------------
// Eigenvalue shifts under a constant added on Q
// ---------------------------------------------------------------------------

struct EvcReport {
    WeakSeparationWitness witness;
    double c = 0.0;
    bool exact = false;                 ///< L = 0: shifts must equal n g c
    double max_exact_error = 0.0;       ///< max |shift - n g c| (L = 0)
    double max_relative_fd_error = 0.0; ///< finite difference vs <psi, g n_Q psi>
    double min_slope_first = 0.0;       ///< d lambda / d c over the first ball
    double max_slope_first = 0.0;
    double min_slope_second = 0.0;
    double max_slope_second = 0.0;
    bool passed = false;
};

EvcReport evc_pair_bound_check(const Scenario& scenario, std::uint64_t theta_seed, const TorusPoint& omega,
                               const FermiConfig& x, const FermiConfig& y, std::size_t L, double c);

}  // namespace fermiloc

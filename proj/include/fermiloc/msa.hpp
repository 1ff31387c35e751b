// Multi-scale-analysis verifier: scale sequence, Green functions, the
// resolvent identities, resonance/singularity classification of balls,
// dominated functions, sparseness scans, and eigenfunction localization.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fermiloc/fermi_graph.hpp"
#include "fermiloc/hamiltonian.hpp"

namespace fermiloc {

// ---------------------------------------------------------------------------
// Scales
// ---------------------------------------------------------------------------

struct ScaleLevel {
    int j = 0;
    double log2_L = 0.0;                ///< -inf for j = -1 (L = 0)
    std::optional<std::uint64_t> L;     ///< when it fits in 64 bits
    long N_tilde = 0;
    double log2_beta = 0.0;             ///< -2 b N~
    double log2_delta = 0.0;            ///< log2(beta * a_{N~})
};

/// L_j = L_0^(2^j) with L_{-1} = 0; beta_j = 2^(-2 b N~_j), delta_j =
/// beta_j a_{N~_j}; level -1 reuses N~(L_0). Everything that can underflow
/// is kept in log2.
struct ScaleSequence {
    std::uint64_t L0 = 2;
    int j_max = 2;
    double b = 2.5;
    int A = 1;
    double C = 2.0;
    std::vector<ScaleLevel> levels;  ///< j = -1 .. j_max

    static ScaleSequence build(std::uint64_t L0, int j_max, double b, int A, double C);
    const ScaleLevel& level(int j) const { return levels.at(static_cast<std::size_t>(j + 1)); }
    /// g * delta_j, or 0 when it underflows.
    double resonance_threshold(int j, double g) const;
};

/// gamma(m, L) = m (1 + L^(-1/8)) L for L >= 1, 2m for L = 0.
double gamma_rate(double m, std::uint64_t L);

// ---------------------------------------------------------------------------
// Green functions and resolvent identities
// ---------------------------------------------------------------------------

struct GreenData {
    double energy = 0.0;
    double resonance_margin = 0.0;  ///< dist(spectrum, E)
    Eigen::MatrixXd columns;        ///< G(., y_k; E) for the requested y_k
    std::vector<std::size_t> targets;

    double operator()(std::size_t x, std::size_t k) const {
        return columns(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(k));
    }
};

/// Columns of (H - E)^-1 by a dense solve. Throws std::domain_error when E
/// lies within 1e-12 ||H|| of the spectrum.
GreenData green(const Eigen::MatrixXd& H, double E, const std::vector<std::size_t>& targets);
Eigen::MatrixXd green_matrix(const Eigen::MatrixXd& H, double E);

struct GreDefect {
    double green_defect = 0.0;        ///< |G'(x,y) - sum G(x,z) (-h_zz') G'(z',y)|
    double green_scale = 0.0;         ///< max(|G'(x,y)|, max |G(x,z)| |G'(z',y)|)
    double eigen_defect = 0.0;        ///< max_x |psi(x) - sum G(x,z) (-h_zz') psi(z')|
    double eigen_scale = 0.0;         ///< max(||psi||_inf, largest single term)
    std::size_t boundary_edges = 0;
};

/// Geometric resolvent equation for a subdomain `inner` (indices into the
/// outer domain). x must lie in `inner`, y outside it. When `eigen_index` is
/// given, also checks the eigenfunction identity for that eigenvector of the
/// outer operator (its eigenvalue replaces E).
GreDefect gre_defect(const Eigen::MatrixXd& H_outer, const std::vector<std::size_t>& inner, double E,
                     std::size_t x, std::size_t y, const Spectrum* outer_spectrum = nullptr,
                     std::optional<std::size_t> eigen_index = std::nullopt);

// ---------------------------------------------------------------------------
// Classification of balls
// ---------------------------------------------------------------------------

struct ResonanceClass {
    bool nonresonant = false;
    double distance = 0.0;  ///< dist(spectrum, E)
    double margin = 0.0;    ///< distance - threshold
};

/// E-NR iff dist(spectrum, E) >= threshold (typically g * delta_j).
ResonanceClass classify_resonant(const Eigen::VectorXd& spectrum, double E, double threshold);

struct SingularityClass {
    bool nonsingular = false;
    bool energy_in_spectrum = false;
    double threshold = 0.0;
    double max_green = 0.0;                 ///< max over inner boundary of |G(center, y)|
    std::optional<FermiConfig> witness;     ///< boundary point attaining max_green
};

/// (E, m)-NS test for a ball: |G(center, y; E)| against (3L)^(-Nd) e^-gamma
/// (L >= 1) or (2Nd)^-1 e^-gamma (L = 0) for all y in the inner boundary.
SingularityClass classify_singular(const FiniteHamiltonian& ball_H, const FermiBall& ball, double E, double m);
/// Same, with a precomputed spectrum of the ball Hamiltonian.
SingularityClass classify_singular(const Spectrum& spectrum, const FermiBall& ball, double E, double m);

double singular_threshold(std::size_t L, std::size_t N, std::size_t d, double m);

// ---------------------------------------------------------------------------
// Dominated functions
// ---------------------------------------------------------------------------

/// Graph distances from `source` (a member) to every member, measured in the
/// ambient configuration graph. Members farther than max_depth get SIZE_MAX.
std::vector<std::size_t> ambient_distances(const ConfigDomain& domain, std::size_t source,
                                           std::size_t max_depth = std::numeric_limits<std::size_t>::max());

/// True if f (per domain member) is (ell, q)-dominated in ball_L(center):
/// |f(x)| <= q max_{rho(x,y) = ell+1} |f(y)| for every x with
/// ball_ell(x) inside ball_2L(center). The domain must contain ball_{2L+1}.
bool dominated_check(const Eigen::VectorXd& f, const ConfigDomain& domain, std::size_t center, std::size_t L,
                     std::size_t ell, double q);

/// q^floor((L+1)/(ell+1)) M.
double dominated_bound(std::size_t L, std::size_t ell, double q, double M);

// ---------------------------------------------------------------------------
// Sparseness of singular balls
// ---------------------------------------------------------------------------

struct SparsenessViolation {
    double energy = 0.0;
    FermiConfig first;
    FermiConfig second;
    bool resonant_pair = false;  ///< E-R pair (otherwise an (E,m)-S pair)
};

struct SparsenessReport {
    std::size_t window_size = 0;
    std::size_t sub_balls = 0;
    std::size_t energies = 0;
    std::size_t radius = 0;
    std::vector<SparsenessViolation> violations;
    std::size_t singular_pair_violations = 0;
    std::size_t resonant_pair_violations = 0;
    std::size_t max_singular_per_energy = 0;
};

struct SparsenessOptions {
    double m = 1.0;
    double resonance_threshold = 0.0;  ///< g delta_j; 0 disables the E-R scan
    std::size_t max_energies = 200000;
    std::size_t max_recorded = 50;
    std::size_t workers = 1;
};

/// For every energy on the grid (all sub-ball eigenvalues and the midpoints
/// between consecutive ones) find pairs of 3NL-distant (E,m)-singular balls of
/// radius L inside the window. With L = 0 every pair of distinct single-site
/// balls counts. Throws std::length_error when the grid exceeds the budget.
SparsenessReport sparseness_scan(const FiniteHamiltonian& window_H, std::size_t L, const SparsenessOptions& opts);

struct ImplicationCheck {
    bool hypotheses = false;  ///< outer ball E-NR and no 3N ell-distant S sub-balls
    bool conclusion = false;  ///< outer ball (E, m)-NS
    bool consistent() const { return !hypotheses || conclusion; }
};

/// Non-resonant balls without separated singular sub-balls are non-singular:
/// evaluated on one (ball, E) instance, never assumed.
ImplicationCheck nr_implies_ns(const FiniteHamiltonian& window_H, const FermiConfig& center, std::size_t L,
                               std::size_t ell, double E, double m, double resonance_threshold);

// ---------------------------------------------------------------------------
// Localization
// ---------------------------------------------------------------------------

struct DecayFit {
    double rate = std::numeric_limits<double>::quiet_NaN();  ///< slope of -log|f| vs distance
    double intercept = 0.0;
    double r_squared = std::numeric_limits<double>::quiet_NaN();
    std::size_t points = 0;
};

/// Ordinary least squares of -log|value| against distance, dropping values
/// below the noise floor.
DecayFit fit_decay(const std::vector<double>& distances, const std::vector<double>& values, double noise_floor = 1e-14);

struct EigenfunctionLocalization {
    std::vector<std::size_t> centers;  ///< argmax set of |psi|
    double peak_mass = 0.0;            ///< |psi(center)|^2
    bool unimodal = false;             ///< unique center with mass > 1/2
    DecayFit decay;
};

struct LocalizationReport {
    std::vector<EigenfunctionLocalization> states;
    bool bijection = false;  ///< unique centers, pairwise distinct, covering the domain
    double unimodal_fraction = 0.0;
    double median_rate = std::numeric_limits<double>::quiet_NaN();
};

LocalizationReport localization_report(const Spectrum& spectrum, const ConfigDomain& domain,
                                       double noise_floor = 1e-14);

struct CorrelatorEstimate {
    double envelope = 0.0;         ///< sum_z |psi_z(x) psi_z(y)|
    double propagator_sup = 0.0;   ///< sup over times of |<x|e^{-itH}|y>|
    double test_function_sup = 0.0;
};

CorrelatorEstimate correlator(const Spectrum& spectrum, std::size_t x, std::size_t y, const std::vector<double>& times,
                              const std::vector<std::function<double(double)>>& test_functions = {});

/// Envelope decay fit over all pairs of the domain.
DecayFit envelope_decay_fit(const Spectrum& spectrum, const ConfigDomain& domain, double noise_floor = 1e-14);

// ---------------------------------------------------------------------------
// Piecewise constancy in the phase point
// ---------------------------------------------------------------------------

struct EntropyCount {
    std::size_t grid_points = 0;
    std::size_t distinct = 0;
    double bound = 0.0;          ///< 2^nu L^(4A + 4A')
    bool within_bound = false;
    bool grid_too_coarse = false;
};

/// Counts distinct truncated operators H^(N) over a uniform omega grid for
/// fixed theta. Only the potential depends on omega; it is quantized at the
/// hull tail resolution before comparison.
EntropyCount equivalence_entropy_check(const ConfigDomain& domain, const PotentialModel& model, unsigned generation,
                                       std::size_t grid_per_axis, long L, int A, int A_prime);

}  // namespace fermiloc

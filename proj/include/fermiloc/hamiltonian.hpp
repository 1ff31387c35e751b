// Finite-volume fermionic Hamiltonians H = -Delta + g V + U restricted to a
// set of configurations, and their full eigensystems.

#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fermiloc/fermi_graph.hpp"
#include "fermiloc/haarsh.hpp"
#include "fermiloc/torus.hpp"

namespace fermiloc {

enum class SiteNorm { l1, max };

std::string to_string(SiteNorm n);
SiteNorm site_norm_from_string(const std::string& s);

/// Two-body interaction U(r) = scale * r^(-2 B ln r), cut off beyond radius.
struct Interaction {
    double B = 10.0;
    double scale = 1.0;
    std::optional<Coord> radius;  ///< nullopt: no cutoff inside the domain
    SiteNorm norm = SiteNorm::l1;

    static Interaction none() { return Interaction{10.0, 0.0, std::nullopt, SiteNorm::l1}; }
    Interaction truncated(Coord R) const {
        Interaction u = *this;
        u.radius = radius ? std::min(*radius, R) : R;
        return u;
    }
};

/// U(r) for r >= 1; throws for r = 0.
double interaction_value(const Interaction& U, Coord r);
/// Sum over unordered site pairs of U(|x_i - x_j|).
double interaction_energy(const Interaction& U, const FermiConfig& x);

enum class KineticConvention {
    laplacian,  ///< -Delta: ambient degree on the diagonal, -1 on edges
    adjacency,  ///< +1 on edges, no diagonal term
};

std::string to_string(KineticConvention c);
KineticConvention kinetic_from_string(const std::string& s);

/// The phase point and parameter field that fix the external potential.
struct PotentialModel {
    HaarshHull hull;
    ShiftSystem system;
    TorusPoint omega;
    unsigned generation = 0;  ///< truncation of the hull; 0 means hull.n_max

    unsigned effective_generation() const { return generation == 0 ? hull.n_max : generation; }
    double site_value(const Site& x) const;
};

struct FiniteHamiltonian {
    std::shared_ptr<const ConfigDomain> domain;
    Eigen::MatrixXd matrix;
    KineticConvention convention = KineticConvention::laplacian;
    double g = 0.0;
    Eigen::VectorXd potential;    ///< V(x) per member, before the factor g
    Eigen::VectorXd interaction;  ///< U(x) per member

    std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

/// Kinetic part only (g = 0, U = 0).
FiniteHamiltonian assemble_kinetic(std::shared_ptr<const ConfigDomain> domain, KineticConvention convention);

/// Kinetic part plus diagonal g * potential + interaction, the potential
/// given per domain member.
FiniteHamiltonian assemble_with_potential(std::shared_ptr<const ConfigDomain> domain,
                                          const Eigen::VectorXd& potential, double g, const Interaction& U,
                                          KineticConvention convention);

FiniteHamiltonian assemble(std::shared_ptr<const ConfigDomain> domain, const PotentialModel& model, double g,
                           const Interaction& U, KineticConvention convention = KineticConvention::laplacian);

/// Per-member potential V(x) = sum_{s in x} v_N(T^s w).
Eigen::VectorXd domain_potential(const ConfigDomain& domain, const PotentialModel& model);

struct Spectrum {
    Eigen::VectorXd eigenvalues;   ///< ascending
    Eigen::MatrixXd eigenvectors;  ///< orthonormal columns, domain order

    std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
};

/// Full eigensystem. Eigenvector signs make the largest-magnitude entry
/// positive (first such index on ties). Throws on asymmetric input or
/// solver failure.
Spectrum diagonalize(const Eigen::MatrixXd& matrix);
inline Spectrum diagonalize(const FiniteHamiltonian& H) { return diagonalize(H.matrix); }

/// Recomputes strongly localized eigenpairs from their peak: with psi = 1 at
/// the peak, (H - E) psi = 0 is solved off the peak by Jacobi sweeps, which
/// keeps exponentially small entries at full relative accuracy. Applied only
/// when every off-peak row satisfies sum_w |H_zw| <= max_ratio |H_zz - E|.
/// Returns the number of eigenpairs replaced.
std::size_t refine_localized(Spectrum& spec, const Eigen::MatrixXd& H, double max_ratio = 0.5);

/// Eigenvalues only.
Eigen::VectorXd eigenvalues(const Eigen::MatrixXd& matrix);

/// min over i, j of |E'_i - E''_j|; both inputs sorted ascending.
double spectral_distance(const Eigen::VectorXd& first, const Eigen::VectorXd& second);
inline double spectral_distance(const Spectrum& a, const Spectrum& b) {
    return spectral_distance(a.eigenvalues, b.eigenvalues);
}

struct CovarianceResult {
    double max_eigenvalue_deviation = 0.0;
    double max_entry_deviation = 0.0;  ///< after relabelling configurations
};

/// Compares H on ball(u0 + a, L) at w against H on ball(u0, L) at T^a w.
CovarianceResult covariance_check(const FermiConfig& u0, const Site& a, std::size_t L,
                                  const PotentialModel& model, double g, const Interaction& U,
                                  KineticConvention convention = KineticConvention::laplacian);

struct TruncatedHamiltonian {
    FiniteHamiltonian H;
    double hull_bound = 0.0;         ///< g * N * (tail bound of the hull at the generation)
    double interaction_bound = 0.0;  ///< max over members of the discarded pair terms
    double bound = 0.0;              ///< hull_bound + interaction_bound
    double exact_difference = 0.0;   ///< ||H_full - H_trunc|| (diagonal, computed)
};

/// H with the hull truncated at `generation` and the interaction at radius R,
/// compared against the untruncated assembly.
TruncatedHamiltonian truncated_hamiltonian(std::shared_ptr<const ConfigDomain> domain, const PotentialModel& model,
                                           double g, const Interaction& U, unsigned generation,
                                           std::optional<Coord> R,
                                           KineticConvention convention = KineticConvention::laplacian);

/// Binary layout: "FLHM", u32 version, u64 rows, u64 cols, u32 convention,
/// f64 g, u64 params length, params JSON bytes, rows*cols f64 row-major.
/// All integers and doubles little-endian.
void write_matrix_binary(std::ostream& os, const FiniteHamiltonian& H, const std::string& params_json);
struct MatrixFile {
    Eigen::MatrixXd matrix;
    KineticConvention convention = KineticConvention::laplacian;
    double g = 0.0;
    std::string params_json;
};
MatrixFile read_matrix_binary(std::istream& is);

/// "index,eigenvalue" rows.
void write_spectrum_csv(std::ostream& os, const Eigen::VectorXd& eigenvalues);

}  // namespace fermiloc

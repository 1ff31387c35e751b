#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "fermiloc/hamiltonian.hpp"

namespace fermiloc {

/// Finite Hamiltonian with the hull potential kept as generation
/// coefficients, so the diagonal can be summed past double precision.
struct SeriesHamiltonian {
    Eigen::MatrixXd base;                    ///< kinetic part plus interaction
    std::vector<std::vector<double>> theta;  ///< per member: theta_n(s) for each site, site-major
    double g = 0.0;
    double b = 0.0;
    unsigned generations = 0;

    std::size_t size() const { return static_cast<std::size_t>(base.rows()); }
};

SeriesHamiltonian series_hamiltonian(std::shared_ptr<const ConfigDomain> domain, const PotentialModel& model,
                                     double g, const Interaction& U, KineticConvention convention);

struct PreciseDistance {
    double log2_distance = 0.0;
    double log2_error = 0.0;
    unsigned bits = 0;
    bool resolved = false;  ///< log2_distance exceeds log2_error
};

/// Eigenvalues of a SeriesHamiltonian in MPFR arithmetic, refined on demand.
class PreciseSpectrum {
public:
    explicit PreciseSpectrum(SeriesHamiltonian H);
    ~PreciseSpectrum();
    PreciseSpectrum(PreciseSpectrum&&) noexcept;
    PreciseSpectrum& operator=(PreciseSpectrum&&) noexcept;

    /// Recomputes with at least `bits` of mantissa.
    void ensure(unsigned bits);
    unsigned bits() const;
    /// log2 of the absolute eigenvalue error at the current precision.
    double log2_error() const;
    /// Bits beyond which the truncated potential carries no further information.
    unsigned useful_bits() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    friend PreciseDistance precise_log2_distance(PreciseSpectrum&, PreciseSpectrum&, double, unsigned);
};

/// log2 dist(spec x, spec y), doubling the precision from `start_bits` until
/// the distance is resolved, the error drops below `log2_floor`, or the
/// potential is exhausted. Unresolved results carry an upper bound.
PreciseDistance precise_log2_distance(PreciseSpectrum& x, PreciseSpectrum& y, double log2_floor,
                                      unsigned start_bits = 192);

}  // namespace fermiloc

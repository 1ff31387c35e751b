// Quasi-periodic shifts on the torus T^nu and its dyadic partitions.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fermiloc/fermi_graph.hpp"

namespace fermiloc {

class TorusPoint {
public:
    TorusPoint() = default;
    /// Coordinates are reduced mod 1 into [0, 1).
    explicit TorusPoint(std::vector<double> coords);

    std::size_t dimension() const { return coords_.size(); }
    double operator[](std::size_t i) const { return coords_[i]; }
    const std::vector<double>& coords() const { return coords_; }

    bool operator==(const TorusPoint&) const = default;

private:
    std::vector<double> coords_;
};

/// Wraparound max-metric on the torus.
double torus_distance(const TorusPoint& a, const TorusPoint& b);

/// Reduce a real number into [0, 1).
double wrap_unit(double t);

/// The Z^d action x -> T^x on T^nu by rotations with frequency vectors
/// alpha^(1..d), plus the aperiodicity/divergence constants it is claimed to
/// satisfy.
struct ShiftSystem {
    std::vector<std::vector<double>> frequencies;  ///< d vectors of nu components
    int A = 1;
    double C_A = 1.0;
    int A_prime = 1;
    double C_A_prime = 1.0;

    std::size_t lattice_dimension() const { return frequencies.size(); }
    std::size_t torus_dimension() const { return frequencies.empty() ? 0 : frequencies.front().size(); }

    /// Golden-ratio family: frequency (j, i) is the fractional part of
    /// sqrt(p) for distinct small non-square p, the first being the golden
    /// ratio conjugate (sqrt 5 - 1)/2.
    static ShiftSystem golden(std::size_t d, std::size_t nu);
    /// Parse a preset name ("golden", "sqrt2") or a list of decimal strings.
    static ShiftSystem from_spec(const std::vector<std::string>& spec, std::size_t d, std::size_t nu);
};

TorusPoint translate(const ShiftSystem& system, const TorusPoint& omega, const Site& x);

struct DyadicCube {
    unsigned generation = 0;
    std::vector<std::uint64_t> multi_index;  ///< l_i, lower corner l_i * 2^-n

    /// k in [1, 2^(nu n)] with k - 1 = sum_i l_i 2^(n i); throws if it does
    /// not fit in 64 bits.
    std::uint64_t linear_index() const;
    std::vector<double> lower_corner() const;
    double side() const;
    bool contains(const TorusPoint& omega) const;
    /// The enclosing cube of generation n - 1.
    DyadicCube parent() const;

    bool operator==(const DyadicCube&) const = default;
};

/// Largest generation with exactly representable double corners.
inline constexpr unsigned kMaxGeneration = 52;

/// The unique half-open cube of generation n containing omega.
DyadicCube cube_index(const TorusPoint& omega, unsigned n);

struct UpaReport {
    long range = 0;
    int A = 0;
    double C_A = 0.0;
    double min_margin = 0.0;     ///< min over shifts of dist * C_A * |x|^A
    Site worst_shift;            ///< argmin
    double required_C_A = 0.0;   ///< smallest C_A giving margin >= 1
    bool holds = false;
};

/// Scan all nonzero lattice shifts with max-norm <= range. For rotations the
/// orbit distance does not depend on omega.
UpaReport verify_upa(const ShiftSystem& system, long range);

struct DivReport {
    std::size_t samples = 0;
    std::size_t skipped = 0;  ///< omega == omega'
    double max_ratio = 0.0;   ///< dist(T^x w, T^x w') / (|x|^A' dist(w, w'))
    bool holds = false;       ///< max_ratio <= C_A'
};

DivReport verify_div(const ShiftSystem& system, std::size_t samples, long range, std::uint64_t seed);

struct EntropyCovers {
    double R = 0.0;             ///< (6 L^(4A))^-1
    double r = 0.0;             ///< (6 L^(4A + 4A'))^-1
    double cover_count = 0.0;   ///< R^-nu
    unsigned generation = 0;    ///< n with 2^(-n-2) <= 6R < 2^(-n-1)
};

EntropyCovers entropy_covers(long L, int A, int A_prime, std::size_t nu);

/// Sampled check that T^z of an r-cube meets at most 2^nu cells of the
/// given generation for every z with |z| <= L^4. Returns the maximal number
/// of cells met.
std::size_t sampled_cover_cells(const ShiftSystem& system, const EntropyCovers& covers, long L,
                                std::size_t cubes, std::size_t points_per_cube, std::uint64_t seed);

struct TrajectorySeparation {
    unsigned generation = 0;
    bool separated = false;      ///< all orbit points in distinct cubes
    double min_distance = 0.0;   ///< min pairwise torus distance on the orbit
};

/// Do the points T^x omega, x in `sites`, occupy pairwise distinct cubes of
/// the given generation?
TrajectorySeparation trajectory_separation(const ShiftSystem& system, const TorusPoint& omega,
                                           const std::vector<Site>& sites, unsigned generation);

/// All lattice points with max-norm <= radius around the origin.
std::vector<Site> lattice_ball(std::size_t d, long radius);

}  // namespace fermiloc

// Haarsh hull: a lacunary series of Haar indicators of dyadic torus cubes
// with independent uniform amplitudes,
//
//   v(w; theta) = sum_{n>=1} a_n theta_{n, k_n(w)},   a_n = 2^(-2 b n^2),
//
// where k_n(w) is the generation-n cube containing w. The amplitudes are
// addressed lazily through a keyed counter-based generator.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fermiloc/fermi_graph.hpp"
#include "fermiloc/torus.hpp"

namespace fermiloc {

class ThetaField {
public:
    explicit ThetaField(std::uint64_t seed = 0) : seed_(seed) {}
    /// theta_{n,k} = c for every (n, k).
    static ThetaField constant(double c);

    std::uint64_t seed() const { return seed_; }

    /// theta_{n,k} in [0, 1) for the cube with the given multi-index.
    double operator()(unsigned generation, std::span<const std::uint64_t> multi_index) const;

    /// The same field except generation `n`, which is redrawn from `seed`.
    ThetaField with_generation_seed(unsigned n, std::uint64_t seed) const;

private:
    std::uint64_t seed_;
    std::optional<double> constant_;
    std::map<unsigned, std::uint64_t> generation_seeds_;
};

/// a_n = 2^(-2 b n^2); n must be >= 1.
double coeff_a(unsigned n, double b);
/// log2(a_n) = -2 b n^2, usable where a_n underflows.
double log2_coeff_a(unsigned n, double b);

/// sup-norm bound for v - v_N: 1/2 * 2^(-2bN) * a_N, raised to the exact
/// series tail sum_{n>N} a_n when b < 2 makes the closed form too small.
double hull_tail_bound(unsigned N, double b);
/// Exact sum_{n>N} a_n (summed until terms underflow).
double hull_tail_sum(unsigned N, double b);

struct HaarshHull {
    double b = 2.5;
    std::size_t nu = 1;
    unsigned n_max = 24;  ///< finest generation evaluated
    ThetaField theta;

    void validate() const;
};

struct HullValue {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// v_N(w; theta) = sum_{n<=N} a_n theta_{n, k_n(w)} with the bound on |v - v_N|.
HullValue hull_value(const HaarshHull& hull, const TorusPoint& omega, unsigned N);

/// theta_{n, k_n(w)} for n = 1..N, so that v_N = sum_n a_n amplitudes[n-1].
std::vector<double> hull_amplitudes(const HaarshHull& hull, const TorusPoint& omega, unsigned N);

/// log2 |sum_n a_n c_n| with c[0] the generation-1 coefficient, factored at
/// the first coefficient above tol so that it stays finite far below the
/// double range. -inf when no coefficient exceeds tol.
double log2_series_magnitude(std::span<const double> c, double b, double tol);

/// log2 of the separation of values given by their hull coefficients (one
/// row per position). Pairs that doubles resolve are taken from the summed
/// values, the rest from the series.
double log2_series_separation(const std::vector<std::vector<double>>& coefficients, double b, double tol);

/// The integer n~(L) = 1 + floor((4 A ln L - ln(C/2)) / ln 2). Takes log2 L
/// so that arguments like L^4 do not overflow.
long tilde_n_log2(double log2_L, int A, double C);
long tilde_n(double L, int A, double C);
/// N~(L) = n~(L^4).
long tilde_N(double L, int A, double C);

struct TildeSandwich {
    bool preconditions = false;  ///< |ln C| + 2 ln 2 < A ln L
    double lower = 0.0;          ///< 3 A ln L / ln 2
    double upper = 0.0;          ///< 5 A ln L / ln 2
    long value = 0;
    bool holds = false;
};

TildeSandwich tilde_n_sandwich(double L, int A, double C);

/// The constants derived from the aperiodicity exponent and lacunarity.
struct ScaleArithmetic {
    int A = 1;
    double C = 1.0;
    double b = 2.5;

    long n_tilde(double L) const { return tilde_n(L, A, C); }
    long N_tilde(double L) const { return tilde_N(L, A, C); }
    /// A~ with 2^(-N~(L)) = L^(-A~).
    double A_tilde(double L) const;
    /// B = 400 b A^2 / ln 2.
    double B() const;
};

/// V(x) = v_N(T^x w).
double site_potential(const HaarshHull& hull, const ShiftSystem& system, const TorusPoint& omega,
                      const Site& x, unsigned N);
/// Sum of site potentials over the occupied sites.
double config_potential(const HaarshHull& hull, const ShiftSystem& system, const TorusPoint& omega,
                        const FermiConfig& x, unsigned N);

/// min over distinct positions i < j of |v_i - v_j|; throws for fewer than
/// two values.
double separation(std::span<const double> values);

struct LvbDensityBound {
    long N_tilde = 0;
    double log2_inverse_density = 0.0;  ///< log2(1 / a_{N~(L)}) = 2 b N~^2
    double B = 0.0;
    double log2_bound = 0.0;            ///< log2(L^(B ln L))
    bool holds = false;
};

/// Compares 1/a_{N~(L)} against L^(B ln L) in the log domain.
LvbDensityBound lvb_density_bound(double L, double b, int A, double C);

}  // namespace fermiloc

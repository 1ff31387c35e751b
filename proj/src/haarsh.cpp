#include "fermiloc/haarsh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "fermiloc/random.hpp"

namespace fermiloc {

ThetaField ThetaField::constant(double c) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("ThetaField::constant: value outside [0, 1]");
    ThetaField f;
    f.constant_ = c;
    return f;
}

double ThetaField::operator()(unsigned generation, std::span<const std::uint64_t> multi_index) const {
    if (constant_) return *constant_;
    std::uint64_t seed = seed_;
    if (auto it = generation_seeds_.find(generation); it != generation_seeds_.end()) seed = it->second;
    std::uint64_t key = multi_index.empty() ? 0 : multi_index[0];
    for (std::size_t i = 1; i < multi_index.size(); ++i) key = mix64(key ^ mix64(multi_index[i] + i));
    return to_unit(philox_block(seed, generation, key)[0]);
}

ThetaField ThetaField::with_generation_seed(unsigned n, std::uint64_t seed) const {
    ThetaField f = *this;
    f.generation_seeds_[n] = seed;
    return f;
}

double coeff_a(unsigned n, double b) {
    if (n < 1) throw std::invalid_argument("coeff_a: generation index starts at 1");
    return std::exp2(log2_coeff_a(n, b));
}

double log2_coeff_a(unsigned n, double b) {
    if (n < 1) throw std::invalid_argument("log2_coeff_a: generation index starts at 1");
    if (!(b > 0.0)) throw std::invalid_argument("log2_coeff_a: b must be positive");
    const double nn = static_cast<double>(n);
    return -2.0 * b * nn * nn;
}

double hull_tail_sum(unsigned N, double b) {
    double sum = 0.0;
    for (unsigned n = N + 1;; ++n) {
        const double a = coeff_a(n, b);
        if (a == 0.0 || a < sum * 1e-17) break;
        sum += a;
    }
    return sum;
}

double hull_tail_bound(unsigned N, double b) {
    const double closed = 0.5 * std::exp2(-2.0 * b * N + log2_coeff_a(std::max(N, 1u), b));
    return b >= 2.0 ? closed : std::max(closed, hull_tail_sum(N, b));
}

void HaarshHull::validate() const {
    if (!(b > 0.0)) throw std::invalid_argument("HaarshHull: b must be positive");
    if (nu == 0) throw std::invalid_argument("HaarshHull: torus dimension must be positive");
    if (n_max < 1 || n_max > kMaxGeneration)
        throw std::invalid_argument("HaarshHull: n_max must lie in [1, 52]");
}

HullValue hull_value(const HaarshHull& hull, const TorusPoint& omega, unsigned N) {
    if (N < 1 || N > hull.n_max) throw std::invalid_argument("hull_value: truncation outside [1, n_max]");
    if (omega.dimension() != hull.nu) throw std::invalid_argument("hull_value: torus dimension mismatch");
    HullValue out;
    // Finest generation first so small terms are not absorbed early.
    for (unsigned n = N; n >= 1; --n) {
        const auto cube = cube_index(omega, n);
        out.value += coeff_a(n, hull.b) * hull.theta(n, cube.multi_index);
    }
    out.tail_bound = hull_tail_bound(N, hull.b);
    return out;
}

std::vector<double> hull_amplitudes(const HaarshHull& hull, const TorusPoint& omega, unsigned N) {
    if (N < 1 || N > hull.n_max) throw std::invalid_argument("hull_amplitudes: truncation outside [1, n_max]");
    if (omega.dimension() != hull.nu) throw std::invalid_argument("hull_amplitudes: torus dimension mismatch");
    std::vector<double> out(N);
    for (unsigned n = 1; n <= N; ++n) out[n - 1] = hull.theta(n, cube_index(omega, n).multi_index);
    return out;
}

double log2_series_magnitude(std::span<const double> c, double b, double tol) {
    std::size_t lead = 0;
    while (lead < c.size() && !(std::abs(c[lead]) > tol)) ++lead;
    if (lead == c.size()) return -std::numeric_limits<double>::infinity();
    const double l0 = log2_coeff_a(static_cast<unsigned>(lead + 1), b);
    double rel = 1.0;
    for (std::size_t n = c.size(); n-- > lead + 1;)
        rel += std::exp2(log2_coeff_a(static_cast<unsigned>(n + 1), b) - l0) * (c[n] / c[lead]);
    return l0 + std::log2(std::abs(c[lead])) + std::log2(std::abs(rel));
}

double log2_series_separation(const std::vector<std::vector<double>>& coefficients, double b, double tol) {
    const std::size_t m = coefficients.size();
    if (m < 2) throw std::invalid_argument("log2_series_separation: needs at least two values");
    std::vector<std::pair<double, std::size_t>> v(m);
    double scale = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t n = coefficients[i].size(); n-- > 0;)
            s += coeff_a(static_cast<unsigned>(n + 1), b) * coefficients[i][n];
        v[i] = {s, i};
        scale = std::max(scale, std::abs(s));
    }
    std::sort(v.begin(), v.end());
    const double resolved = 64 * std::numeric_limits<double>::epsilon() * std::max(scale, 1e-300);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> diff;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double gap = v[i + 1].first - v[i].first;
        if (gap > resolved) {
            best = std::min(best, std::log2(gap));
            continue;
        }
        for (std::size_t j = i + 1; j < m && v[j].first - v[i].first <= resolved; ++j) {
            const auto& a = coefficients[v[i].second];
            const auto& c = coefficients[v[j].second];
            diff.resize(std::max(a.size(), c.size()));
            for (std::size_t n = 0; n < diff.size(); ++n)
                diff[n] = (n < c.size() ? c[n] : 0.0) - (n < a.size() ? a[n] : 0.0);
            best = std::min(best, log2_series_magnitude(diff, b, tol));
        }
    }
    return best;
}

long tilde_n_log2(double log2_L, int A, double C) {
    if (!(log2_L > 0.0)) throw std::invalid_argument("tilde_n: L must exceed 1");
    if (!(C > 0.0)) throw std::invalid_argument("tilde_n: C must be positive");
    return 1 + static_cast<long>(std::floor(4.0 * A * log2_L - std::log2(C / 2.0)));
}

long tilde_n(double L, int A, double C) {
    if (!(L >= 2.0)) throw std::invalid_argument("tilde_n: L must be >= 2");
    return tilde_n_log2(std::log2(L), A, C);
}

long tilde_N(double L, int A, double C) {
    if (!(L >= 2.0)) throw std::invalid_argument("tilde_N: L must be >= 2");
    return tilde_n_log2(4.0 * std::log2(L), A, C);
}

TildeSandwich tilde_n_sandwich(double L, int A, double C) {
    TildeSandwich s;
    const double lnL = std::log(L);
    s.preconditions = std::abs(std::log(C)) + 2.0 * std::numbers::ln2 < A * lnL;
    s.lower = 3.0 * A * lnL / std::numbers::ln2;
    s.upper = 5.0 * A * lnL / std::numbers::ln2;
    s.value = tilde_n(L, A, C);
    const double v = static_cast<double>(s.value);
    s.holds = s.lower < v && v < s.upper;
    return s;
}

double ScaleArithmetic::A_tilde(double L) const { return static_cast<double>(N_tilde(L)) / std::log2(L); }

double ScaleArithmetic::B() const { return 400.0 * b * A * A / std::numbers::ln2; }

double site_potential(const HaarshHull& hull, const ShiftSystem& system, const TorusPoint& omega,
                      const Site& x, unsigned N) {
    return hull_value(hull, translate(system, omega, x), N).value;
}

double config_potential(const HaarshHull& hull, const ShiftSystem& system, const TorusPoint& omega,
                        const FermiConfig& x, unsigned N) {
    double v = 0.0;
    for (const auto& s : x.sites()) v += site_potential(hull, system, omega, s, N);
    return v;
}

double separation(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("separation: needs at least two values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < sorted.size(); ++i) best = std::min(best, sorted[i] - sorted[i - 1]);
    return best;
}

LvbDensityBound lvb_density_bound(double L, double b, int A, double C) {
    if (!(L >= 2.0)) throw std::invalid_argument("lvb_density_bound: L must be >= 2");
    LvbDensityBound out;
    out.N_tilde = tilde_N(L, A, C);
    out.log2_inverse_density = -log2_coeff_a(static_cast<unsigned>(out.N_tilde), b);
    out.B = ScaleArithmetic{A, C, b}.B();
    // L^(B ln L) = 2^(B ln L log2 L)
    out.log2_bound = out.B * std::log(L) * std::log2(L);
    out.holds = out.log2_inverse_density <= out.log2_bound;
    return out;
}

}  // namespace fermiloc

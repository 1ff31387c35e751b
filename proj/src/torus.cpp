#include "fermiloc/torus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "fermiloc/random.hpp"

namespace fermiloc {

double wrap_unit(double t) {
    double w = t - std::floor(t);
    return w >= 1.0 ? 0.0 : w;
}

TorusPoint::TorusPoint(std::vector<double> coords) : coords_(std::move(coords)) {
    for (auto& c : coords_) {
        if (!std::isfinite(c)) throw std::invalid_argument("TorusPoint: non-finite coordinate");
        c = wrap_unit(c);
    }
}

double torus_distance(const TorusPoint& a, const TorusPoint& b) {
    if (a.dimension() != b.dimension()) throw std::invalid_argument("torus_distance: dimension mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.dimension(); ++i) {
        const double t = std::abs(a[i] - b[i]);
        d = std::max(d, std::min(t, 1.0 - t));
    }
    return d;
}

namespace {

// Fractional parts of square roots of non-squares.
ShiftSystem quadratic_irrationals(std::size_t d, std::size_t nu, std::vector<int> radicands) {
    if (d == 0 || nu == 0) throw std::invalid_argument("ShiftSystem: dimensions must be positive");
    if (d * nu > radicands.size()) throw std::invalid_argument("ShiftSystem: too many frequencies for preset");
    ShiftSystem s;
    std::size_t next = 0;
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> alpha(nu);
        for (auto& a : alpha) a = wrap_unit(std::sqrt(static_cast<double>(radicands[next++])));
        s.frequencies.push_back(std::move(alpha));
    }
    return s;
}

}  // namespace

ShiftSystem ShiftSystem::golden(std::size_t d, std::size_t nu) {
    auto s = quadratic_irrationals(d, nu, {5, 2, 3, 7, 11, 13, 17, 19, 23, 29, 31, 37});
    // frac(sqrt 5) = 0.236..., replace by the golden ratio conjugate.
    s.frequencies.front().front() = (std::sqrt(5.0) - 1.0) / 2.0;
    return s;
}

ShiftSystem ShiftSystem::from_spec(const std::vector<std::string>& spec, std::size_t d, std::size_t nu) {
    if (spec.size() == 1 && spec.front() == "golden") return golden(d, nu);
    if (spec.size() == 1 && spec.front() == "sqrt2")
        return quadratic_irrationals(d, nu, {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37});
    if (spec.size() != d * nu)
        throw std::invalid_argument("frequency list must have d*nu entries or name a preset");
    ShiftSystem s;
    std::size_t next = 0;
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> alpha(nu);
        for (auto& a : alpha) {
            std::size_t used = 0;
            const std::string& text = spec[next++];
            a = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument("bad frequency '" + text + "'");
        }
        s.frequencies.push_back(std::move(alpha));
    }
    return s;
}

TorusPoint translate(const ShiftSystem& system, const TorusPoint& omega, const Site& x) {
    if (x.size() != system.lattice_dimension())
        throw std::invalid_argument("translate: lattice dimension mismatch");
    if (omega.dimension() != system.torus_dimension())
        throw std::invalid_argument("translate: torus dimension mismatch");
    std::vector<double> out(omega.coords());
    for (std::size_t i = 0; i < out.size(); ++i) {
        long double acc = out[i];
        for (std::size_t j = 0; j < x.size(); ++j) {
            const long double p = static_cast<long double>(x[j]) * system.frequencies[j][i];
            acc += p - std::floor(p);
        }
        out[i] = wrap_unit(static_cast<double>(acc - std::floor(acc)));
    }
    return TorusPoint(std::move(out));
}

// ---------------------------------------------------------------------------
// Dyadic cubes
// ---------------------------------------------------------------------------

std::uint64_t DyadicCube::linear_index() const {
    const std::size_t nu = multi_index.size();
    if (static_cast<std::size_t>(generation) * nu >= 64)
        throw std::overflow_error("DyadicCube::linear_index: index does not fit in 64 bits");
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < nu; ++i) k |= multi_index[i] << (generation * i);
    return k + 1;
}

std::vector<double> DyadicCube::lower_corner() const {
    std::vector<double> c(multi_index.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::ldexp(static_cast<double>(multi_index[i]), -static_cast<int>(generation));
    return c;
}

double DyadicCube::side() const { return std::ldexp(1.0, -static_cast<int>(generation)); }

bool DyadicCube::contains(const TorusPoint& omega) const { return cube_index(omega, generation) == *this; }

DyadicCube DyadicCube::parent() const {
    if (generation == 0) throw std::logic_error("DyadicCube::parent: generation 0 has no parent");
    DyadicCube p{generation - 1, multi_index};
    for (auto& l : p.multi_index) l >>= 1;
    return p;
}

DyadicCube cube_index(const TorusPoint& omega, unsigned n) {
    if (n > kMaxGeneration) throw std::invalid_argument("cube_index: generation too fine for double precision");
    DyadicCube c{n, std::vector<std::uint64_t>(omega.dimension())};
    for (std::size_t i = 0; i < omega.dimension(); ++i) {
        // Exact: scaling by a power of two and flooring introduce no rounding.
        c.multi_index[i] = static_cast<std::uint64_t>(std::floor(std::ldexp(omega[i], static_cast<int>(n))));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Hypothesis checks
// ---------------------------------------------------------------------------

std::vector<Site> lattice_ball(std::size_t d, long radius) {
    return SiteWindow::box(Site(d, -radius), Site(d, radius)).sites();
}

UpaReport verify_upa(const ShiftSystem& system, long range) {
    if (range < 1) throw std::invalid_argument("verify_upa: range must be >= 1");
    const std::size_t d = system.lattice_dimension();
    const TorusPoint origin(std::vector<double>(system.torus_dimension(), 0.0));
    UpaReport rep;
    rep.range = range;
    rep.A = system.A;
    rep.C_A = system.C_A;
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& x : lattice_ball(d, range)) {
        Coord norm = 0;
        for (Coord c : x) norm = std::max(norm, std::abs(c));
        if (norm == 0) continue;
        // Half of the shifts suffice: dist(T^x 0, 0) = dist(T^-x 0, 0).
        if (x < Site(d, 0)) continue;
        const double scaled = torus_distance(translate(system, origin, x), origin) *
                              std::pow(static_cast<double>(norm), system.A);
        if (scaled < worst) {
            worst = scaled;
            rep.worst_shift = x;
        }
    }
    rep.min_margin = worst * system.C_A;
    rep.required_C_A = worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
    rep.holds = rep.min_margin >= 1.0;
    return rep;
}

DivReport verify_div(const ShiftSystem& system, std::size_t samples, long range, std::uint64_t seed) {
    if (range < 1) throw std::invalid_argument("verify_div: range must be >= 1");
    const std::size_t d = system.lattice_dimension(), nu = system.torus_dimension();
    KeyedStream rng(seed, 0xD1F);
    DivReport rep;
    rep.samples = samples;
    auto draw_point = [&] {
        std::vector<double> c(nu);
        for (auto& v : c) v = rng.uniform();
        return TorusPoint(std::move(c));
    };
    for (std::size_t s = 0; s < samples; ++s) {
        const TorusPoint w = draw_point();
        // Every fourth sample uses a nearby partner to probe local divergence.
        TorusPoint w2 = draw_point();
        if (s % 4 == 0) {
            std::vector<double> c = w.coords();
            for (auto& v : c) v += 1e-6 * (rng.uniform() - 0.5);
            w2 = TorusPoint(std::move(c));
        }
        if (s % 16 == 15) w2 = w;
        Site x(d);
        Coord norm = 0;
        while (norm == 0) {
            for (auto& c : x) c = static_cast<Coord>(rng.below(2 * range + 1)) - range;
            norm = 0;
            for (Coord c : x) norm = std::max(norm, std::abs(c));
        }
        const double base = torus_distance(w, w2);
        if (base == 0.0) {
            ++rep.skipped;
            continue;
        }
        const double moved = torus_distance(translate(system, w, x), translate(system, w2, x));
        rep.max_ratio = std::max(rep.max_ratio, moved / (std::pow(static_cast<double>(norm), system.A_prime) * base));
    }
    // Rotations are isometries; allow for rounding in the translated distance.
    rep.holds = rep.max_ratio <= system.C_A_prime * (1.0 + 1e-6);
    return rep;
}

EntropyCovers entropy_covers(long L, int A, int A_prime, std::size_t nu) {
    if (L < 2) throw std::invalid_argument("entropy_covers: L must be >= 2");
    EntropyCovers c;
    const double l = static_cast<double>(L);
    c.R = 1.0 / (6.0 * std::pow(l, 4.0 * A));
    c.r = 1.0 / (6.0 * std::pow(l, 4.0 * A + 4.0 * A_prime));
    c.cover_count = std::pow(c.R, -static_cast<double>(nu));
    const double t = -std::log2(6.0 * c.R);
    int n = static_cast<int>(std::ceil(t - 2.0));
    // Guard the boundary cases against log2 rounding.
    while (std::ldexp(1.0, -n - 2) > 6.0 * c.R) ++n;
    while (n > 0 && !(6.0 * c.R < std::ldexp(1.0, -n - 1))) --n;
    c.generation = static_cast<unsigned>(std::max(n, 0));
    return c;
}

std::size_t sampled_cover_cells(const ShiftSystem& system, const EntropyCovers& covers, long L,
                                std::size_t cubes, std::size_t points_per_cube, std::uint64_t seed) {
    const std::size_t d = system.lattice_dimension(), nu = system.torus_dimension();
    KeyedStream rng(seed, 0xC0FE);
    const long reach = L * L * L * L;
    const auto shifts = lattice_ball(d, reach);
    std::size_t worst = 0;
    for (std::size_t q = 0; q < cubes; ++q) {
        std::vector<double> centre(nu);
        for (auto& c : centre) c = rng.uniform();
        std::vector<TorusPoint> pts;
        for (std::size_t p = 0; p < points_per_cube; ++p) {
            std::vector<double> c(centre);
            for (auto& v : c) v += covers.r * (2.0 * rng.uniform() - 1.0);
            pts.emplace_back(std::move(c));
        }
        // Corners of the r-cube are the extreme points of its image.
        for (std::size_t mask = 0; mask < (std::size_t{1} << nu); ++mask) {
            std::vector<double> c(centre);
            for (std::size_t i = 0; i < nu; ++i) c[i] += (mask >> i & 1u) ? covers.r : -covers.r;
            pts.emplace_back(std::move(c));
        }
        for (const auto& z : shifts) {
            std::set<std::vector<std::uint64_t>> cells;
            for (const auto& w : pts) cells.insert(cube_index(translate(system, w, z), covers.generation).multi_index);
            worst = std::max(worst, cells.size());
        }
    }
    return worst;
}

TrajectorySeparation trajectory_separation(const ShiftSystem& system, const TorusPoint& omega,
                                           const std::vector<Site>& sites, unsigned generation) {
    TrajectorySeparation out;
    out.generation = generation;
    out.min_distance = std::numeric_limits<double>::infinity();
    std::vector<TorusPoint> orbit;
    orbit.reserve(sites.size());
    for (const auto& x : sites) orbit.push_back(translate(system, omega, x));
    std::set<std::vector<std::uint64_t>> cells;
    for (const auto& w : orbit) cells.insert(cube_index(w, std::min(generation, kMaxGeneration)).multi_index);
    out.separated = cells.size() == orbit.size() && generation <= kMaxGeneration;
    for (std::size_t i = 0; i < orbit.size(); ++i)
        for (std::size_t j = i + 1; j < orbit.size(); ++j)
            out.min_distance = std::min(out.min_distance, torus_distance(orbit[i], orbit[j]));
    return out;
}

}  // namespace fermiloc

#include "fermiloc/msa.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "fermiloc/haarsh.hpp"

namespace fermiloc {

// ---------------------------------------------------------------------------
// Scales
// ---------------------------------------------------------------------------

ScaleSequence ScaleSequence::build(std::uint64_t L0, int j_max, double b, int A, double C) {
    if (L0 < 2) throw std::invalid_argument("ScaleSequence: L0 must be >= 2");
    if (j_max < -1) throw std::invalid_argument("ScaleSequence: j_max must be >= -1");
    ScaleSequence s{L0, j_max, b, A, C, {}};
    const double log2_L0 = std::log2(static_cast<double>(L0));
    auto fill = [&](ScaleLevel& lv) {
        lv.log2_beta = -2.0 * b * static_cast<double>(lv.N_tilde);
        lv.log2_delta = lv.log2_beta + log2_coeff_a(static_cast<unsigned>(lv.N_tilde), b);
    };
    ScaleLevel minus_one;
    minus_one.j = -1;
    minus_one.log2_L = -std::numeric_limits<double>::infinity();
    minus_one.L = 0;
    minus_one.N_tilde = tilde_n_log2(4.0 * log2_L0, A, C);
    fill(minus_one);
    s.levels.push_back(minus_one);
    std::uint64_t L = L0;
    bool fits = true;
    for (int j = 0; j <= j_max; ++j) {
        ScaleLevel lv;
        lv.j = j;
        lv.log2_L = std::ldexp(log2_L0, j);
        if (j > 0) {
            if (fits && L <= std::numeric_limits<std::uint32_t>::max()) L *= L;
            else fits = false;
        }
        if (fits) lv.L = L;
        lv.N_tilde = tilde_n_log2(4.0 * lv.log2_L, A, C);
        fill(lv);
        s.levels.push_back(lv);
    }
    return s;
}

double ScaleSequence::resonance_threshold(int j, double g) const {
    return std::abs(g) * std::exp2(level(j).log2_delta);
}

double gamma_rate(double m, std::uint64_t L) {
    if (L == 0) return 2.0 * m;
    const double l = static_cast<double>(L);
    return m * (1.0 + std::pow(l, -0.125)) * l;
}

// ---------------------------------------------------------------------------
// Green functions
// ---------------------------------------------------------------------------

namespace {

double operator_norm(const Eigen::VectorXd& spectrum) {
    return std::max(std::abs(spectrum(0)), std::abs(spectrum(spectrum.size() - 1)));
}

double distance_to(const Eigen::VectorXd& spectrum, double E) {
    return (spectrum.array() - E).abs().minCoeff();
}

void require_nonresonant(const Eigen::VectorXd& spectrum, double E, const char* who) {
    const double scale = std::max(operator_norm(spectrum), 1.0);
    if (!(distance_to(spectrum, E) > 1e-12 * scale))
        throw std::domain_error(std::string(who) + ": energy lies in the spectrum");
}

Eigen::MatrixXd shifted(const Eigen::MatrixXd& H, double E) {
    Eigen::MatrixXd A = H;
    A.diagonal().array() -= E;
    return A;
}

Eigen::MatrixXd principal(const Eigen::MatrixXd& H, const std::vector<std::size_t>& idx) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            out(a, b) = H(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b]));
    return out;
}

}  // namespace

GreenData green(const Eigen::MatrixXd& H, double E, const std::vector<std::size_t>& targets) {
    const Eigen::VectorXd spec = eigenvalues(H);
    require_nonresonant(spec, E, "green");
    GreenData out;
    out.energy = E;
    out.resonance_margin = distance_to(spec, E);
    out.targets = targets;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(H.rows(), static_cast<Eigen::Index>(targets.size()));
    for (std::size_t k = 0; k < targets.size(); ++k) {
        if (targets[k] >= static_cast<std::size_t>(H.rows())) throw std::out_of_range("green: target index");
        rhs(static_cast<Eigen::Index>(targets[k]), static_cast<Eigen::Index>(k)) = 1.0;
    }
    out.columns = shifted(H, E).partialPivLu().solve(rhs);
    return out;
}

Eigen::MatrixXd green_matrix(const Eigen::MatrixXd& H, double E) {
    require_nonresonant(eigenvalues(H), E, "green_matrix");
    return shifted(H, E).partialPivLu().inverse();
}

GreDefect gre_defect(const Eigen::MatrixXd& H_outer, const std::vector<std::size_t>& inner, double E,
                     std::size_t x, std::size_t y, const Spectrum* outer_spectrum,
                     std::optional<std::size_t> eigen_index) {
    const auto n = static_cast<std::size_t>(H_outer.rows());
    std::vector<long> pos(n, -1);
    for (std::size_t a = 0; a < inner.size(); ++a) {
        if (inner[a] >= n) throw std::out_of_range("gre_defect: inner index");
        pos[inner[a]] = static_cast<long>(a);
    }
    if (x >= n || pos[x] < 0) throw std::invalid_argument("gre_defect: x must lie in the inner domain");
    if (y >= n || pos[y] >= 0) throw std::invalid_argument("gre_defect: y must lie outside the inner domain");

    const Eigen::MatrixXd H_in = principal(H_outer, inner);
    struct Edge {
        std::size_t z_inner;  // position in `inner`
        std::size_t z_outer;  // index in the outer domain
        double h;
    };
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < inner.size(); ++a)
        for (std::size_t zp = 0; zp < n; ++zp) {
            if (pos[zp] >= 0) continue;
            const double h = H_outer(static_cast<Eigen::Index>(inner[a]), static_cast<Eigen::Index>(zp));
            if (h != 0.0) edges.push_back({a, zp, h});
        }

    GreDefect out;
    out.boundary_edges = edges.size();
    const auto xi = static_cast<Eigen::Index>(pos[x]);

    const Eigen::MatrixXd G_in = green_matrix(H_in, E);
    const GreenData G_out = green(H_outer, E, {y});
    double predicted = 0.0;
    out.green_scale = std::abs(G_out(x, 0));
    for (const auto& e : edges) {
        const double term = G_in(xi, static_cast<Eigen::Index>(e.z_inner)) * e.h * G_out(e.z_outer, 0);
        predicted -= term;
        out.green_scale = std::max(out.green_scale, std::abs(term));
    }
    out.green_defect = std::abs(G_out(x, 0) - predicted);

    if (eigen_index) {
        Spectrum local;
        if (!outer_spectrum) {
            local = diagonalize(H_outer);
            outer_spectrum = &local;
        }
        if (*eigen_index >= outer_spectrum->size()) throw std::out_of_range("gre_defect: eigen index");
        const double lambda = outer_spectrum->eigenvalues(static_cast<Eigen::Index>(*eigen_index));
        const Eigen::VectorXd psi = outer_spectrum->eigenvectors.col(static_cast<Eigen::Index>(*eigen_index));
        const Eigen::MatrixXd G_lambda = green_matrix(H_in, lambda);
        out.eigen_scale = psi.cwiseAbs().maxCoeff();
        for (std::size_t a = 0; a < inner.size(); ++a) {
            double pred = 0.0;
            for (const auto& e : edges) {
                const double term = G_lambda(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(e.z_inner)) *
                                    e.h * psi(static_cast<Eigen::Index>(e.z_outer));
                pred -= term;
                out.eigen_scale = std::max(out.eigen_scale, std::abs(term));
            }
            out.eigen_defect =
                std::max(out.eigen_defect, std::abs(psi(static_cast<Eigen::Index>(inner[a])) - pred));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

ResonanceClass classify_resonant(const Eigen::VectorXd& spectrum, double E, double threshold) {
    if (spectrum.size() == 0) throw std::invalid_argument("classify_resonant: empty spectrum");
    ResonanceClass r;
    r.distance = distance_to(spectrum, E);
    r.margin = r.distance - threshold;
    r.nonresonant = r.distance >= threshold;
    return r;
}

double singular_threshold(std::size_t L, std::size_t N, std::size_t d, double m) {
    const double nd = static_cast<double>(N * d);
    if (L == 0) return std::exp(-gamma_rate(m, 0)) / (2.0 * nd);
    return std::pow(3.0 * static_cast<double>(L), -nd) * std::exp(-gamma_rate(m, L));
}

namespace {

std::vector<std::size_t> inner_boundary_indices(const ConfigDomain& domain) {
    std::vector<std::size_t> out;
    for (const auto& z : boundaries(domain).inner) out.push_back(*domain.index_of(z));
    return out;
}

SingularityClass classify_with_boundary(const Spectrum& spectrum, std::size_t center, double threshold,
                                        const std::vector<std::size_t>& inner, double E,
                                        const ConfigDomain& domain) {
    SingularityClass c;
    c.threshold = threshold;
    const double scale = std::max(operator_norm(spectrum.eigenvalues), 1.0);
    if (!(distance_to(spectrum.eigenvalues, E) > 1e-12 * scale)) {
        c.energy_in_spectrum = true;
        c.max_green = std::numeric_limits<double>::infinity();
        return c;
    }
    const Eigen::ArrayXd weights =
        spectrum.eigenvectors.row(static_cast<Eigen::Index>(center)).transpose().array() /
        (spectrum.eigenvalues.array() - E);
    std::optional<std::size_t> arg;
    for (std::size_t y : inner) {
        const double gy = std::abs(
            (weights * spectrum.eigenvectors.row(static_cast<Eigen::Index>(y)).transpose().array()).sum());
        if (!arg || gy > c.max_green) {
            c.max_green = gy;
            arg = y;
        }
    }
    if (arg) c.witness = domain[*arg];
    c.nonsingular = c.max_green <= threshold;
    return c;
}

}  // namespace

SingularityClass classify_singular(const Spectrum& spectrum, const FermiBall& ball, double E, double m) {
    if (spectrum.size() != ball.domain.size()) throw std::invalid_argument("classify_singular: size mismatch");
    const std::size_t center = *ball.domain.index_of(ball.center);
    const double thr =
        singular_threshold(ball.radius, ball.center.particle_count(), ball.center.dimension(), m);
    return classify_with_boundary(spectrum, center, thr, inner_boundary_indices(ball.domain), E, ball.domain);
}

SingularityClass classify_singular(const FiniteHamiltonian& ball_H, const FermiBall& ball, double E, double m) {
    return classify_singular(diagonalize(ball_H), ball, E, m);
}

// ---------------------------------------------------------------------------
// Dominated functions
// ---------------------------------------------------------------------------

std::vector<std::size_t> ambient_distances(const ConfigDomain& domain, std::size_t source, std::size_t max_depth) {
    constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
    if (source >= domain.size()) throw std::out_of_range("ambient_distances: source");
    std::vector<std::size_t> dist(domain.size(), kUnreached);
    std::unordered_map<FermiConfig, std::size_t, FermiConfigHash> seen;
    std::deque<FermiConfig> queue;
    seen.emplace(domain[source], 0);
    queue.push_back(domain[source]);
    std::size_t found = 0;
    while (!queue.empty() && found < domain.size()) {
        const FermiConfig x = std::move(queue.front());
        queue.pop_front();
        const std::size_t dx = seen.at(x);
        if (auto i = domain.index_of(x)) {
            dist[*i] = dx;
            ++found;
        }
        if (dx == max_depth) continue;
        for (auto& y : domain.ambient_neighbors(x))
            if (seen.emplace(y, dx + 1).second) queue.push_back(std::move(y));
    }
    return dist;
}

bool dominated_check(const Eigen::VectorXd& f, const ConfigDomain& domain, std::size_t center, std::size_t L,
                     std::size_t ell, double q) {
    if (static_cast<std::size_t>(f.size()) != domain.size())
        throw std::invalid_argument("dominated_check: function size mismatch");
    const auto from_center = ambient_distances(domain, center, 2 * L);
    for (std::size_t x = 0; x < domain.size(); ++x) {
        if (from_center[x] > 2 * L || from_center[x] + ell > 2 * L) continue;
        const auto dx = ambient_distances(domain, x, ell + 1);
        double sphere_max = -1.0;
        for (std::size_t y = 0; y < domain.size(); ++y)
            if (dx[y] == ell + 1) sphere_max = std::max(sphere_max, std::abs(f(static_cast<Eigen::Index>(y))));
        if (sphere_max < 0.0) throw std::invalid_argument("dominated_check: domain must contain ball_{2L+1}");
        if (std::abs(f(static_cast<Eigen::Index>(x))) > q * sphere_max) return false;
    }
    return true;
}

double dominated_bound(std::size_t L, std::size_t ell, double q, double M) {
    return std::pow(q, static_cast<double>((L + 1) / (ell + 1))) * M;
}

// ---------------------------------------------------------------------------
// Sparseness
// ---------------------------------------------------------------------------

namespace {

struct SubBall {
    FermiBall ball;
    std::vector<std::size_t> members;  // indices into the window domain
    std::size_t center_window_index = 0;
    std::vector<std::size_t> inner;    // indices into the sub-ball
    Spectrum spectrum;
    double threshold = 0.0;
};

std::vector<SubBall> sub_balls(const FiniteHamiltonian& window_H, std::size_t L, double m,
                               std::optional<std::vector<std::size_t>> only = std::nullopt) {
    const ConfigDomain& window = *window_H.domain;
    std::vector<SubBall> out;
    std::vector<std::size_t> centers(window.size());
    std::iota(centers.begin(), centers.end(), 0);
    if (only) centers = *only;
    for (std::size_t c : centers) {
        SubBall sb;
        sb.ball = ball(window[c], L, window.ambient());
        bool inside = true;
        for (const auto& y : sb.ball.domain.members()) {
            auto i = window.index_of(y);
            if (!i) {
                inside = false;
                break;
            }
            sb.members.push_back(*i);
        }
        if (!inside) continue;
        sb.center_window_index = c;
        sb.inner = inner_boundary_indices(sb.ball.domain);
        sb.spectrum = diagonalize(principal(window_H.matrix, sb.members));
        sb.threshold = singular_threshold(L, window[c].particle_count(), window[c].dimension(), m);
        out.push_back(std::move(sb));
    }
    return out;
}

bool is_singular(const SubBall& sb, double E) {
    return !classify_with_boundary(sb.spectrum, 0, sb.threshold, sb.inner, E, sb.ball.domain).nonsingular;
}

class DistantCache {
public:
    DistantCache(const ConfigDomain& window, std::size_t cap) : window_(window), cap_(cap) {}
    bool distant(std::size_t a, std::size_t b) {
        if (a == b) return false;
        const auto key = std::minmax(a, b);
        auto it = memo_.find(key);
        if (it == memo_.end())
            it = memo_.emplace(key, !graph_distance(window_[a], window_[b], cap_).has_value()).first;
        return it->second;
    }

private:
    const ConfigDomain& window_;
    std::size_t cap_;
    std::map<std::pair<std::size_t, std::size_t>, bool> memo_;
};

}  // namespace

SparsenessReport sparseness_scan(const FiniteHamiltonian& window_H, std::size_t L, const SparsenessOptions& opts) {
    SparsenessReport rep;
    rep.radius = L;
    if (!window_H.domain || window_H.domain->empty()) return rep;
    const ConfigDomain& window = *window_H.domain;
    rep.window_size = window.size();
    const auto balls = sub_balls(window_H, L, opts.m);
    rep.sub_balls = balls.size();
    if (balls.empty()) return rep;

    std::vector<double> grid;
    for (const auto& sb : balls)
        for (Eigen::Index k = 0; k < sb.spectrum.eigenvalues.size(); ++k) grid.push_back(sb.spectrum.eigenvalues(k));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const std::size_t base = grid.size();
    for (std::size_t k = 1; k < base; ++k) grid.push_back(0.5 * (grid[k - 1] + grid[k]));
    std::sort(grid.begin(), grid.end());
    if (grid.size() > opts.max_energies) throw std::length_error("sparseness_scan: energy grid exceeds budget");
    rep.energies = grid.size();

    const std::size_t N = window[0].particle_count();
    const std::size_t cap = 3 * N * L;

    struct Partial {
        std::vector<SparsenessViolation> violations;
        std::size_t singular = 0, resonant = 0, max_per_energy = 0;
    };
    auto scan = [&](std::size_t begin, std::size_t end, Partial& out) {
        DistantCache cache(window, cap);
        for (std::size_t e = begin; e < end; ++e) {
            const double E = grid[e];
            std::vector<std::size_t> singular, resonant;
            for (std::size_t b = 0; b < balls.size(); ++b) {
                if (is_singular(balls[b], E)) singular.push_back(b);
                if (opts.resonance_threshold > 0.0 &&
                    !classify_resonant(balls[b].spectrum.eigenvalues, E, opts.resonance_threshold).nonresonant)
                    resonant.push_back(b);
            }
            out.max_per_energy = std::max(out.max_per_energy, singular.size());
            auto pairs = [&](const std::vector<std::size_t>& set, bool is_resonant, std::size_t& counter) {
                for (std::size_t i = 0; i < set.size(); ++i)
                    for (std::size_t k = i + 1; k < set.size(); ++k) {
                        const auto& a = balls[set[i]];
                        const auto& b = balls[set[k]];
                        if (!cache.distant(a.center_window_index, b.center_window_index)) continue;
                        ++counter;
                        if (out.violations.size() < opts.max_recorded)
                            out.violations.push_back({E, a.ball.center, b.ball.center, is_resonant});
                    }
            };
            pairs(singular, false, out.singular);
            pairs(resonant, true, out.resonant);
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(opts.workers, 1, std::max<std::size_t>(grid.size(), 1));
    std::vector<Partial> parts(workers);
    {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (grid.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = std::min(grid.size(), w * chunk), e = std::min(grid.size(), b + chunk);
            pool.emplace_back([&, b, e, w] { scan(b, e, parts[w]); });
        }
    }
    for (auto& p : parts) {
        rep.singular_pair_violations += p.singular;
        rep.resonant_pair_violations += p.resonant;
        rep.max_singular_per_energy = std::max(rep.max_singular_per_energy, p.max_per_energy);
        for (auto& v : p.violations)
            if (rep.violations.size() < opts.max_recorded) rep.violations.push_back(std::move(v));
    }
    return rep;
}

ImplicationCheck nr_implies_ns(const FiniteHamiltonian& window_H, const FermiConfig& center, std::size_t L,
                               std::size_t ell, double E, double m, double resonance_threshold) {
    const ConfigDomain& window = *window_H.domain;
    const auto c = window.index_of(center);
    if (!c) throw std::invalid_argument("nr_implies_ns: center outside the window");
    const auto outer = sub_balls(window_H, L, m, std::vector<std::size_t>{*c});
    if (outer.empty()) throw std::invalid_argument("nr_implies_ns: outer ball does not fit in the window");
    const SubBall& big = outer.front();

    ImplicationCheck out;
    const bool nr = classify_resonant(big.spectrum.eigenvalues, E, resonance_threshold).nonresonant;
    std::set<std::size_t> members(big.members.begin(), big.members.end());
    std::vector<std::size_t> singular;
    for (const auto& sb : sub_balls(window_H, ell, m, big.members)) {
        const bool inside = std::all_of(sb.members.begin(), sb.members.end(),
                                        [&](std::size_t i) { return members.count(i) > 0; });
        if (inside && is_singular(sb, E)) singular.push_back(sb.center_window_index);
    }
    DistantCache cache(window, 3 * center.particle_count() * ell);
    bool distant_pair = false;
    for (std::size_t i = 0; i < singular.size() && !distant_pair; ++i)
        for (std::size_t k = i + 1; k < singular.size() && !distant_pair; ++k)
            distant_pair = cache.distant(singular[i], singular[k]);
    out.hypotheses = nr && !distant_pair;
    out.conclusion = !is_singular(big, E);
    return out;
}

// ---------------------------------------------------------------------------
// Localization
// ---------------------------------------------------------------------------

DecayFit fit_decay(const std::vector<double>& distances, const std::vector<double>& values, double noise_floor) {
    if (distances.size() != values.size()) throw std::invalid_argument("fit_decay: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = std::abs(values[i]);
        if (v < noise_floor || !std::isfinite(distances[i])) continue;
        xs.push_back(distances[i]);
        ys.push_back(-std::log(v));
    }
    DecayFit fit;
    fit.points = xs.size();
    if (xs.size() < 2) return fit;
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) return fit;
    fit.rate = sxy / sxx;
    fit.intercept = my - fit.rate * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

LocalizationReport localization_report(const Spectrum& spectrum, const ConfigDomain& domain, double noise_floor) {
    if (spectrum.size() != domain.size()) throw std::invalid_argument("localization_report: size mismatch");
    LocalizationReport rep;
    std::map<std::size_t, std::vector<std::size_t>> distance_cache;
    std::vector<double> rates;
    std::set<std::size_t> used;
    bool unique_centers = true;
    std::size_t unimodal = 0;
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        const Eigen::VectorXd psi = spectrum.eigenvectors.col(static_cast<Eigen::Index>(k));
        const double peak = psi.cwiseAbs().maxCoeff();
        EigenfunctionLocalization st;
        for (std::size_t i = 0; i < domain.size(); ++i)
            if (std::abs(psi(static_cast<Eigen::Index>(i))) >= peak * (1.0 - 1e-10)) st.centers.push_back(i);
        st.peak_mass = peak * peak;
        st.unimodal = st.centers.size() == 1 && st.peak_mass > 0.5;
        if (st.unimodal) ++unimodal;
        const std::size_t c = st.centers.front();
        if (st.centers.size() != 1 || !used.insert(c).second) unique_centers = false;
        auto it = distance_cache.find(c);
        if (it == distance_cache.end()) it = distance_cache.emplace(c, ambient_distances(domain, c)).first;
        std::vector<double> dist(domain.size()), vals(domain.size());
        for (std::size_t i = 0; i < domain.size(); ++i) {
            dist[i] = static_cast<double>(it->second[i]);
            vals[i] = psi(static_cast<Eigen::Index>(i));
        }
        st.decay = fit_decay(dist, vals, noise_floor);
        if (std::isfinite(st.decay.rate)) rates.push_back(st.decay.rate);
        rep.states.push_back(std::move(st));
    }
    rep.bijection = unique_centers && used.size() == domain.size();
    rep.unimodal_fraction = static_cast<double>(unimodal) / static_cast<double>(spectrum.size());
    if (!rates.empty()) {
        std::sort(rates.begin(), rates.end());
        const std::size_t h = rates.size() / 2;
        rep.median_rate = rates.size() % 2 ? rates[h] : 0.5 * (rates[h - 1] + rates[h]);
    }
    return rep;
}

CorrelatorEstimate correlator(const Spectrum& spectrum, std::size_t x, std::size_t y, const std::vector<double>& times,
                              const std::vector<std::function<double(double)>>& test_functions) {
    if (x >= spectrum.size() || y >= spectrum.size()) throw std::out_of_range("correlator: index");
    const Eigen::ArrayXd w = spectrum.eigenvectors.row(static_cast<Eigen::Index>(x)).transpose().array() *
                             spectrum.eigenvectors.row(static_cast<Eigen::Index>(y)).transpose().array();
    CorrelatorEstimate out;
    out.envelope = w.abs().sum();
    for (double t : times) {
        const double re = (w * (spectrum.eigenvalues.array() * t).cos()).sum();
        const double im = (w * (spectrum.eigenvalues.array() * t).sin()).sum();
        out.propagator_sup = std::max(out.propagator_sup, std::hypot(re, im));
    }
    for (const auto& phi : test_functions) {
        double s = 0.0;
        for (Eigen::Index z = 0; z < w.size(); ++z) s += w(z) * phi(spectrum.eigenvalues(z));
        out.test_function_sup = std::max(out.test_function_sup, std::abs(s));
    }
    return out;
}

DecayFit envelope_decay_fit(const Spectrum& spectrum, const ConfigDomain& domain, double noise_floor) {
    if (spectrum.size() != domain.size()) throw std::invalid_argument("envelope_decay_fit: size mismatch");
    const Eigen::MatrixXd abs_psi = spectrum.eigenvectors.cwiseAbs();
    const Eigen::MatrixXd env = abs_psi * abs_psi.transpose();
    std::vector<double> dist, vals;
    for (std::size_t x = 0; x < domain.size(); ++x) {
        const auto dx = ambient_distances(domain, x);
        for (std::size_t y = x; y < domain.size(); ++y) {
            dist.push_back(static_cast<double>(dx[y]));
            vals.push_back(env(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)));
        }
    }
    return fit_decay(dist, vals, noise_floor);
}

// ---------------------------------------------------------------------------
// Entropy
// ---------------------------------------------------------------------------

EntropyCount equivalence_entropy_check(const ConfigDomain& domain, const PotentialModel& model, unsigned generation,
                                       std::size_t grid_per_axis, long L, int A, int A_prime) {
    if (grid_per_axis == 0) throw std::invalid_argument("equivalence_entropy_check: empty grid");
    const std::size_t nu = model.system.torus_dimension();
    EntropyCount out;
    out.bound = std::pow(2.0, static_cast<double>(nu)) *
                std::pow(static_cast<double>(L), 4.0 * A + 4.0 * A_prime);
    const double resolution = hull_tail_bound(generation, model.hull.b);
    std::set<std::vector<double>> seen;
    std::vector<std::size_t> counter(nu, 0);
    PotentialModel pm = model;
    pm.generation = generation;
    for (;;) {
        std::vector<double> w(nu);
        for (std::size_t i = 0; i < nu; ++i)
            w[i] = (static_cast<double>(counter[i]) + 0.5) / static_cast<double>(grid_per_axis);
        pm.omega = TorusPoint(std::move(w));
        const Eigen::VectorXd v = domain_potential(domain, pm);
        std::vector<double> key(static_cast<std::size_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) key[static_cast<std::size_t>(i)] = std::nearbyint(v(i) / resolution);
        seen.insert(std::move(key));
        ++out.grid_points;
        std::size_t i = 0;
        while (i < nu && ++counter[i] == grid_per_axis) counter[i++] = 0;
        if (i == nu) break;
    }
    out.distinct = seen.size();
    out.within_bound = static_cast<double>(out.distinct) <= out.bound;
    out.grid_too_coarse = out.distinct == out.grid_points;
    return out;
}

}  // namespace fermiloc

#include "fermiloc/fermi_graph.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace fermiloc {

Coord site_distance(const Site& a, const Site& b) {
    Coord d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

Coord site_l1_distance(const Site& a, const Site& b) {
    Coord d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

// ---------------------------------------------------------------------------
// FermiConfig
// ---------------------------------------------------------------------------

FermiConfig::FermiConfig(std::vector<Site> sites) : sites_(std::move(sites)) {
    if (sites_.empty()) throw std::invalid_argument("FermiConfig: needs at least one particle");
    const auto d = sites_.front().size();
    if (d == 0) throw std::invalid_argument("FermiConfig: zero-dimensional site");
    for (const auto& s : sites_)
        if (s.size() != d) throw std::invalid_argument("FermiConfig: inconsistent site dimension");
    std::sort(sites_.begin(), sites_.end());
    if (std::adjacent_find(sites_.begin(), sites_.end()) != sites_.end())
        throw std::invalid_argument("FermiConfig: sites must be pairwise distinct");
}

FermiConfig FermiConfig::from_1d(std::initializer_list<Coord> positions) {
    std::vector<Site> s;
    s.reserve(positions.size());
    for (Coord p : positions) s.push_back(Site{p});
    return FermiConfig(std::move(s));
}

int FermiConfig::occupation(const Site& s) const {
    return std::binary_search(sites_.begin(), sites_.end(), s) ? 1 : 0;
}

int FermiConfig::occupation_in_cube(const Site& lower, Coord side) const {
    return static_cast<int>(std::count_if(sites_.begin(), sites_.end(), [&](const Site& s) {
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] < lower[i] || s[i] > lower[i] + side) return false;
        return true;
    }));
}

FermiConfig FermiConfig::shifted(const Site& offset) const {
    std::vector<Site> out = sites_;
    for (auto& s : out)
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += offset.at(i);
    return FermiConfig(std::move(out));
}

std::string FermiConfig::to_string() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < sites_.size(); ++i) {
        if (i) os << ',';
        if (sites_[i].size() == 1) {
            os << sites_[i][0];
        } else {
            os << '(';
            for (std::size_t k = 0; k < sites_[i].size(); ++k) os << (k ? "," : "") << sites_[i][k];
            os << ')';
        }
    }
    os << '}';
    return os.str();
}

std::size_t FermiConfigHash::operator()(const FermiConfig& x) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& s : x.sites())
        for (Coord c : s) {
            h ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h *= 0x100000001b3ULL;
        }
    return static_cast<std::size_t>(h);
}

nlohmann::json to_json(const FermiConfig& x) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : x.sites()) j.push_back(s);
    return j;
}

FermiConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw std::invalid_argument("configuration must be a JSON array of sites");
    std::vector<Site> sites;
    for (const auto& s : j) {
        if (s.is_number_integer()) {
            sites.push_back(Site{s.get<Coord>()});
        } else if (s.is_array()) {
            sites.push_back(s.get<Site>());
        } else {
            throw std::invalid_argument("site must be an integer or an array of integers");
        }
    }
    return FermiConfig(std::move(sites));
}

// ---------------------------------------------------------------------------
// SiteWindow
// ---------------------------------------------------------------------------

SiteWindow::SiteWindow(std::vector<Site> sites) : sites_(std::move(sites)) {
    std::sort(sites_.begin(), sites_.end());
    sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
}

SiteWindow SiteWindow::box(const Site& lower, const Site& upper) {
    if (lower.size() != upper.size()) throw std::invalid_argument("SiteWindow::box: dimension mismatch");
    std::vector<Site> out;
    Site cur = lower;
    for (;;) {
        out.push_back(cur);
        std::size_t i = 0;
        for (; i < cur.size(); ++i) {
            if (cur[i] < upper[i]) {
                ++cur[i];
                break;
            }
            cur[i] = lower[i];
        }
        if (i == cur.size()) break;
    }
    return SiteWindow(std::move(out));
}

SiteWindow SiteWindow::interval(Coord first, Coord count) {
    if (count <= 0) throw std::invalid_argument("SiteWindow::interval: empty");
    return box(Site{first}, Site{first + count - 1});
}

bool SiteWindow::contains(const Site& s) const {
    return sites_.empty() || std::binary_search(sites_.begin(), sites_.end(), s);
}

bool SiteWindow::contains(const FermiConfig& x) const {
    return std::all_of(x.sites().begin(), x.sites().end(), [&](const Site& s) { return contains(s); });
}

// ---------------------------------------------------------------------------
// Adjacency and distance
// ---------------------------------------------------------------------------

std::vector<FermiConfig> neighbors(const FermiConfig& x, const SiteWindow* window) {
    std::vector<FermiConfig> out;
    const auto& sites = x.sites();
    const std::size_t d = x.dimension();
    for (std::size_t p = 0; p < sites.size(); ++p) {
        for (std::size_t axis = 0; axis < d; ++axis) {
            for (Coord step : {Coord{-1}, Coord{1}}) {
                Site target = sites[p];
                target[axis] += step;
                if (x.occupation(target)) continue;
                if (window && !window->contains(target)) continue;
                std::vector<Site> moved = sites;
                moved[p] = std::move(target);
                out.emplace_back(std::move(moved));
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<std::size_t> graph_distance(const FermiConfig& x, const FermiConfig& y, std::size_t cap) {
    if (x.particle_count() != y.particle_count() || x.dimension() != y.dimension())
        throw std::invalid_argument("graph_distance: mismatched particle count or dimension");
    if (x == y) return 0;
    // Bidirectional BFS keeps the frontier small for larger separations.
    std::unordered_map<FermiConfig, std::size_t, FermiConfigHash> from_x{{x, 0}}, from_y{{y, 0}};
    std::vector<FermiConfig> fx{x}, fy{y};
    std::size_t dx = 0, dy = 0;
    while (dx + dy < cap && !fx.empty() && !fy.empty()) {
        const bool expand_x = fx.size() <= fy.size();
        auto& frontier = expand_x ? fx : fy;
        auto& seen = expand_x ? from_x : from_y;
        auto& other = expand_x ? from_y : from_x;
        auto& depth = expand_x ? dx : dy;
        std::vector<FermiConfig> next;
        std::optional<std::size_t> best;
        for (const auto& u : frontier) {
            for (auto& v : neighbors(u)) {
                if (seen.count(v)) continue;
                if (auto it = other.find(v); it != other.end()) {
                    const std::size_t total = depth + 1 + it->second;
                    if (!best || total < *best) best = total;
                }
                seen.emplace(v, depth + 1);
                next.push_back(std::move(v));
            }
        }
        ++depth;
        if (best) return *best <= cap ? best : std::nullopt;
        frontier = std::move(next);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Domains, balls, boundaries
// ---------------------------------------------------------------------------

ConfigDomain::ConfigDomain(std::vector<FermiConfig> members, std::optional<SiteWindow> ambient)
    : members_(std::move(members)), ambient_(std::move(ambient)) {
    index_.reserve(members_.size());
    for (std::size_t i = 0; i < members_.size(); ++i) {
        if (!index_.emplace(members_[i], i).second)
            throw std::invalid_argument("ConfigDomain: duplicate member " + members_[i].to_string());
        if (ambient_ && !ambient_->contains(members_[i]))
            throw std::invalid_argument("ConfigDomain: member outside ambient window");
    }
}

ConfigDomain ConfigDomain::all_in_window(const SiteWindow& window, std::size_t particle_count) {
    const auto& sites = window.sites();
    if (sites.empty()) throw std::invalid_argument("all_in_window: window must be finite");
    if (particle_count == 0 || particle_count > sites.size())
        throw std::invalid_argument("all_in_window: particle count out of range");
    std::vector<FermiConfig> members;
    std::vector<std::size_t> pick(particle_count);
    std::iota(pick.begin(), pick.end(), 0);
    for (;;) {
        std::vector<Site> chosen;
        for (auto i : pick) chosen.push_back(sites[i]);
        members.emplace_back(std::move(chosen));
        std::size_t k = particle_count;
        while (k > 0 && pick[k - 1] == sites.size() - particle_count + k - 1) --k;
        if (k == 0) break;
        ++pick[k - 1];
        for (std::size_t i = k; i < particle_count; ++i) pick[i] = pick[i - 1] + 1;
    }
    return ConfigDomain(std::move(members), window);
}

std::optional<std::size_t> ConfigDomain::index_of(const FermiConfig& x) const {
    auto it = index_.find(x);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::pair<std::size_t, std::size_t>> ConfigDomain::internal_edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < members_.size(); ++i)
        for (const auto& y : ambient_neighbors(members_[i]))
            if (auto j = index_of(y); j && i < *j) edges.emplace_back(i, *j);
    std::sort(edges.begin(), edges.end());
    return edges;
}

FermiBall ball(const FermiConfig& center, std::size_t radius, const SiteWindow* window) {
    if (window && !window->contains(center)) throw std::invalid_argument("ball: center outside window");
    std::vector<FermiConfig> order{center};
    std::unordered_set<FermiConfig, FermiConfigHash> seen{center};
    std::size_t begin = 0;
    for (std::size_t layer = 0; layer < radius; ++layer) {
        const std::size_t end = order.size();
        for (std::size_t i = begin; i < end; ++i)
            for (auto& y : neighbors(order[i], window))
                if (seen.insert(y).second) order.push_back(std::move(y));
        if (order.size() == end) break;
        begin = end;
    }
    std::optional<SiteWindow> ambient;
    if (window) ambient = *window;
    return FermiBall{center, radius, ConfigDomain(std::move(order), std::move(ambient))};
}

Boundaries boundaries(const ConfigDomain& domain) {
    Boundaries b;
    std::set<FermiConfig> outer;
    for (const auto& x : domain.members()) {
        bool inner = false;
        for (const auto& y : domain.ambient_neighbors(x)) {
            if (domain.contains(y)) continue;
            inner = true;
            outer.insert(y);
            b.edges.emplace_back(x, y);
        }
        if (inner) b.inner.push_back(x);
    }
    std::sort(b.inner.begin(), b.inner.end());
    b.outer.assign(outer.begin(), outer.end());
    std::sort(b.edges.begin(), b.edges.end());
    return b;
}

// ---------------------------------------------------------------------------
// Clusters
// ---------------------------------------------------------------------------

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

std::vector<std::vector<Site>> cluster_sites(const std::vector<Site>& sites, Coord R) {
    UnionFind uf(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t j = i + 1; j < sites.size(); ++j)
            if (site_distance(sites[i], sites[j]) <= R) uf.unite(i, j);
    std::map<std::size_t, std::vector<Site>> groups;
    for (std::size_t i = 0; i < sites.size(); ++i) groups[uf.find(i)].push_back(sites[i]);
    std::vector<std::vector<Site>> out;
    for (auto& [root, g] : groups) {
        std::sort(g.begin(), g.end());
        out.push_back(std::move(g));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

ClusterDecomposition r_clusters(const FermiConfig& x, Coord R) {
    if (R < 0) throw std::invalid_argument("r_clusters: R must be nonnegative");
    ClusterDecomposition out;
    out.threshold = R;
    out.clusters = cluster_sites(x.sites(), R);
    for (const auto& c : out.clusters) out.cardinalities.push_back(c.size());
    std::sort(out.cardinalities.rbegin(), out.cardinalities.rend());
    return out;
}

Coord diameter(std::span<const Site> sites) {
    Coord d = 0;
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t j = i + 1; j < sites.size(); ++j) d = std::max(d, site_distance(sites[i], sites[j]));
    return d;
}

// ---------------------------------------------------------------------------
// Weak separation
// ---------------------------------------------------------------------------

bool Cube::contains(const Site& s) const {
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] < lower[i] || s[i] > lower[i] + side) return false;
    return true;
}

namespace {

// Minimal cube around the L-neighbourhood of a cluster; when the extent is
// smaller than the side in some coordinate, the lowest admissible corner.
Cube enclosing_cube(const std::vector<Site>& cluster, Coord L) {
    const std::size_t d = cluster.front().size();
    Site lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) {
        lo[i] = hi[i] = cluster.front()[i];
        for (const auto& s : cluster) {
            lo[i] = std::min(lo[i], s[i]);
            hi[i] = std::max(hi[i], s[i]);
        }
        lo[i] -= L;
        hi[i] += L;
    }
    Coord side = 0;
    for (std::size_t i = 0; i < d; ++i) side = std::max(side, hi[i] - lo[i]);
    Cube q{Site(d), side};
    for (std::size_t i = 0; i < d; ++i) q.lower[i] = hi[i] - side;
    return q;
}

std::optional<WeakSeparationWitness> one_sided_witness(const FermiConfig& x, const FermiConfig& y, Coord L) {
    for (const auto& cluster : r_clusters(x, 2 * L).clusters) {
        const Cube q = enclosing_cube(cluster, L);
        const int nx = x.occupation_in_cube(q.lower, q.side);
        const int ny = y.occupation_in_cube(q.lower, q.side);
        if (nx > ny) return WeakSeparationWitness{q, false, nx, ny};
    }
    return std::nullopt;
}

}  // namespace

std::optional<WeakSeparationWitness> weakly_separated(const FermiConfig& x, const FermiConfig& y, Coord L) {
    if (x.particle_count() != y.particle_count() || x.dimension() != y.dimension())
        throw std::invalid_argument("weakly_separated: mismatched particle count or dimension");
    if (L < 0) throw std::invalid_argument("weakly_separated: L must be nonnegative");
    if (auto w = one_sided_witness(x, y, L)) return w;
    if (auto w = one_sided_witness(y, x, L)) {
        w->swapped = true;
        return w;
    }
    return std::nullopt;
}

bool weakly_separated_exhaustive(const FermiConfig& x, const FermiConfig& y, Coord L) {
    if (x.particle_count() != y.particle_count() || x.dimension() != y.dimension())
        throw std::invalid_argument("weakly_separated_exhaustive: mismatched configurations");
    const Coord max_side = 2 * static_cast<Coord>(x.particle_count()) * L;
    const std::size_t d = x.dimension();
    // A separating cube holds at least one particle of the richer
    // configuration, so its corner lies within `side` below one of its sites.
    auto search = [&](const FermiConfig& rich, const FermiConfig& poor) {
        for (Coord side = 0; side <= max_side; ++side) {
            for (const auto& anchor : rich.sites()) {
                Site corner(d);
                for (std::size_t i = 0; i < d; ++i) corner[i] = anchor[i] - side;
                Site cur = corner;
                for (;;) {
                    if (rich.occupation_in_cube(cur, side) > poor.occupation_in_cube(cur, side)) return true;
                    std::size_t i = 0;
                    for (; i < d; ++i) {
                        if (cur[i] < anchor[i]) {
                            ++cur[i];
                            break;
                        }
                        cur[i] = corner[i];
                    }
                    if (i == d) break;
                }
            }
        }
        return false;
    };
    return search(x, y) || search(y, x);
}

// ---------------------------------------------------------------------------
// Equivalence classes
// ---------------------------------------------------------------------------

std::vector<std::vector<Site>> r_equivalence_key(const FermiConfig& x, Coord R) {
    auto clusters = cluster_sites(x.sites(), R);
    for (auto& c : clusters) {
        const Site origin = c.front();  // lexicographically smallest
        for (auto& s : c)
            for (std::size_t i = 0; i < s.size(); ++i) s[i] -= origin[i];
    }
    std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a < b;
    });
    return clusters;
}

namespace {

// All monocluster shapes of k sites with the lexicographically smallest site
// at the origin.
std::vector<std::vector<Site>> monocluster_shapes(std::size_t k, std::size_t d, Coord R,
                                                  std::size_t budget, std::size_t& scanned) {
    if (k == 1) return {{Site(d, 0)}};
    const Coord reach = static_cast<Coord>(k - 1) * R;
    // Candidate sites lexicographically greater than the origin.
    std::vector<Site> cand;
    SiteWindow box = SiteWindow::box(Site(d, -reach), Site(d, reach));
    for (const auto& s : box.sites())
        if (s > Site(d, 0)) cand.push_back(s);
    std::vector<std::vector<Site>> shapes;
    std::vector<std::size_t> pick(k - 1);
    std::iota(pick.begin(), pick.end(), 0);
    if (cand.size() < k - 1) return shapes;
    for (;;) {
        if (++scanned > budget) throw std::length_error("shift_equivalence_classes: budget exceeded");
        std::vector<Site> sites{Site(d, 0)};
        for (auto i : pick) sites.push_back(cand[i]);
        if (cluster_sites(sites, R).size() == 1) {
            std::sort(sites.begin(), sites.end());
            shapes.push_back(std::move(sites));
        }
        std::size_t m = k - 1;
        while (m > 0 && pick[m - 1] == cand.size() - (k - 1) + m - 1) --m;
        if (m == 0) break;
        ++pick[m - 1];
        for (std::size_t i = m; i < k - 1; ++i) pick[i] = pick[i - 1] + 1;
    }
    return shapes;
}

void integer_partitions(std::size_t n, std::size_t max_part, std::vector<std::size_t>& cur,
                        std::vector<std::vector<std::size_t>>& out) {
    if (n == 0) {
        out.push_back(cur);
        return;
    }
    for (std::size_t p = std::min(n, max_part); p >= 1; --p) {
        cur.push_back(p);
        integer_partitions(n - p, p, cur, out);
        cur.pop_back();
    }
}

}  // namespace

EquivalenceClasses shift_equivalence_classes(std::size_t N, std::size_t d, Coord R, std::size_t budget) {
    if (N == 0 || d == 0) throw std::invalid_argument("shift_equivalence_classes: N and d must be positive");
    if (R < 0) throw std::invalid_argument("shift_equivalence_classes: R must be nonnegative");
    std::size_t scanned = 0;
    std::map<std::size_t, std::vector<std::vector<Site>>> shapes;
    for (std::size_t k = 1; k <= N; ++k) shapes[k] = monocluster_shapes(k, d, R, budget, scanned);

    std::vector<std::vector<std::size_t>> partitions;
    std::vector<std::size_t> cur;
    integer_partitions(N, N, cur, partitions);

    EquivalenceClasses result;
    result.monocluster_count = shapes[N].size();
    for (const auto& part : partitions) {
        // Multisets of shapes: clusters of equal cardinality pick
        // nondecreasing shape indices.
        std::vector<std::size_t> choice(part.size(), 0);
        for (;;) {
            bool valid = true;
            for (std::size_t i = 0; i < part.size(); ++i) {
                if (shapes[part[i]].empty()) valid = false;
                if (i > 0 && part[i] == part[i - 1] && choice[i] < choice[i - 1]) valid = false;
            }
            if (valid) {
                // Lay clusters out along the first axis, separated by more than R.
                std::vector<Site> sites;
                Coord offset = 0;
                for (std::size_t i = 0; i < part.size(); ++i) {
                    const auto& shape = shapes[part[i]][choice[i]];
                    Coord lo = shape.front()[0], hi = shape.front()[0];
                    for (const auto& s : shape) {
                        lo = std::min(lo, s[0]);
                        hi = std::max(hi, s[0]);
                    }
                    for (auto s : shape) {
                        s[0] += offset - lo;
                        sites.push_back(std::move(s));
                    }
                    offset += hi - lo + R + 1;
                }
                result.representatives.emplace_back(std::move(sites));
                if (++scanned > budget) throw std::length_error("shift_equivalence_classes: budget exceeded");
            }
            std::size_t i = 0;
            for (; i < part.size(); ++i) {
                if (choice[i] + 1 < shapes[part[i]].size()) {
                    ++choice[i];
                    break;
                }
                choice[i] = 0;
            }
            if (i == part.size()) break;
        }
    }
    std::sort(result.representatives.begin(), result.representatives.end());
    return result;
}

}  // namespace fermiloc

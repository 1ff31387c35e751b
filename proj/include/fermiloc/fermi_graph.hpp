// Configuration graph of N indistinguishable fermions on Z^d.
//
// A configuration is an unordered set of N distinct lattice sites. Two
// configurations are adjacent when one is obtained from the other by moving a
// single particle to a vacant nearest-neighbour site (l1 distance 1). Lattice
// site distances used for clustering and cube geometry are max-norm.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace fermiloc {

using Coord = std::int64_t;
using Site = std::vector<Coord>;

/// Max-norm distance between two lattice sites.
Coord site_distance(const Site& a, const Site& b);
/// l1 distance between two lattice sites.
Coord site_l1_distance(const Site& a, const Site& b);

class FermiConfig {
public:
    FermiConfig() = default;
    /// Sorts the sites canonically; throws if they are not pairwise distinct
    /// or have inconsistent dimension.
    explicit FermiConfig(std::vector<Site> sites);

    static FermiConfig from_1d(std::initializer_list<Coord> positions);

    std::size_t particle_count() const { return sites_.size(); }
    std::size_t dimension() const { return sites_.empty() ? 0 : sites_.front().size(); }
    const std::vector<Site>& sites() const { return sites_; }
    const Site& site(std::size_t i) const { return sites_[i]; }

    /// Occupation number n_x(site) in {0, 1}.
    int occupation(const Site& s) const;
    /// Number of particles inside the closed cube [lower, lower + side].
    int occupation_in_cube(const Site& lower, Coord side) const;

    /// Every particle translated by the same lattice vector.
    FermiConfig shifted(const Site& offset) const;

    auto operator<=>(const FermiConfig&) const = default;
    bool operator==(const FermiConfig&) const = default;

    std::string to_string() const;

private:
    std::vector<Site> sites_;
};

struct FermiConfigHash {
    std::size_t operator()(const FermiConfig& x) const noexcept;
};

nlohmann::json to_json(const FermiConfig& x);
FermiConfig config_from_json(const nlohmann::json& j);

/// Finite set of single-particle sites restricting where particles may move.
/// An empty window means the whole lattice Z^d.
class SiteWindow {
public:
    SiteWindow() = default;
    explicit SiteWindow(std::vector<Site> sites);
    /// The box [lower_i, upper_i] in every coordinate.
    static SiteWindow box(const Site& lower, const Site& upper);
    /// The 1-d interval {first, ..., first + count - 1}.
    static SiteWindow interval(Coord first, Coord count);

    bool contains(const Site& s) const;
    bool contains(const FermiConfig& x) const;
    const std::vector<Site>& sites() const { return sites_; }

private:
    std::vector<Site> sites_;  // sorted
};

/// All y obtained from x by moving one particle to a vacant lattice
/// neighbour; with a window, the target site must also lie in it.
std::vector<FermiConfig> neighbors(const FermiConfig& x, const SiteWindow* window = nullptr);

/// Breadth-first-search distance on the configuration graph. Returns nullopt
/// if the distance exceeds `cap`. Throws on mismatched N or d.
std::optional<std::size_t> graph_distance(const FermiConfig& x, const FermiConfig& y,
                                          std::size_t cap);

/// An indexed finite set of configurations, optionally living inside a
/// finite site window (the ambient lattice for the kinetic term).
class ConfigDomain {
public:
    ConfigDomain() = default;
    ConfigDomain(std::vector<FermiConfig> members, std::optional<SiteWindow> ambient = std::nullopt);

    /// All N-particle configurations supported in the window.
    static ConfigDomain all_in_window(const SiteWindow& window, std::size_t particle_count);

    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    const FermiConfig& operator[](std::size_t i) const { return members_[i]; }
    const std::vector<FermiConfig>& members() const { return members_; }
    std::optional<std::size_t> index_of(const FermiConfig& x) const;
    bool contains(const FermiConfig& x) const { return index_of(x).has_value(); }
    const SiteWindow* ambient() const { return ambient_ ? &*ambient_ : nullptr; }

    /// Neighbours of x in the ambient lattice (not restricted to the domain).
    std::vector<FermiConfig> ambient_neighbors(const FermiConfig& x) const {
        return neighbors(x, ambient());
    }

    /// Edges (i, j), i < j, of the configuration graph restricted to the domain.
    std::vector<std::pair<std::size_t, std::size_t>> internal_edges() const;

private:
    std::vector<FermiConfig> members_;
    std::unordered_map<FermiConfig, std::size_t, FermiConfigHash> index_;
    std::optional<SiteWindow> ambient_;
};

struct FermiBall {
    FermiConfig center;
    std::size_t radius = 0;
    ConfigDomain domain;  // members in BFS order, center first
};

/// All configurations within graph distance `radius` of `center`.
FermiBall ball(const FermiConfig& center, std::size_t radius, const SiteWindow* window = nullptr);

struct Boundaries {
    std::vector<FermiConfig> inner;  ///< members with a neighbour outside
    std::vector<FermiConfig> outer;  ///< non-members with a neighbour inside
    std::vector<std::pair<FermiConfig, FermiConfig>> edges;  ///< (inside, outside)
};

/// Inner, outer and edge boundaries of a domain inside its ambient lattice.
Boundaries boundaries(const ConfigDomain& domain);

struct ClusterDecomposition {
    Coord threshold = 0;
    std::vector<std::vector<Site>> clusters;  ///< each sorted; clusters sorted by first site
    std::vector<std::size_t> cardinalities;   ///< sorted descending

    std::size_t count() const { return clusters.size(); }
};

/// Maximal groups of sites connected by links of max-norm length <= R.
ClusterDecomposition r_clusters(const FermiConfig& x, Coord R);

/// Max-norm diameter of a set of sites.
Coord diameter(std::span<const Site> sites);

struct Cube {
    Site lower;
    Coord side = 0;  ///< closed cube lower_i <= s_i <= lower_i + side
    bool contains(const Site& s) const;
};

struct WeakSeparationWitness {
    Cube cube;
    bool swapped = false;  ///< true if the roles of x and y were exchanged
    int n_first = 0;       ///< particles of the "more occupied" config in the cube
    int n_second = 0;
};

/// Cluster-cube search for a weak-separation witness between balls of radius
/// L around x and y: 2L-clusters of x, minimal cubes around their
/// L-neighbourhoods, compare occupation numbers; then the same with x and y
/// swapped.
std::optional<WeakSeparationWitness> weakly_separated(const FermiConfig& x, const FermiConfig& y,
                                                      Coord L);

/// Slow checker: true if some cube Q of side <= 2NL captures strictly more
/// particles of one configuration than of the other and the decomposition
/// condition holds. Searches every cube whose corner lies near the sites.
bool weakly_separated_exhaustive(const FermiConfig& x, const FermiConfig& y, Coord L);

/// Canonical representative of the R-equivalence class of x: clusters
/// translated so that each has its lexicographically smallest site at the
/// origin, listed by (cardinality desc, shape).
std::vector<std::vector<Site>> r_equivalence_key(const FermiConfig& x, Coord R);

struct EquivalenceClasses {
    std::vector<FermiConfig> representatives;
    std::size_t monocluster_count = 0;
};

/// Enumerates R-equivalence classes of N-particle configurations in Z^d.
/// Throws std::length_error if more than `budget` configurations would be
/// scanned.
EquivalenceClasses shift_equivalence_classes(std::size_t N, std::size_t d, Coord R,
                                             std::size_t budget = 5'000'000);

}  // namespace fermiloc

#include "fermiloc/hamiltonian.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

namespace fermiloc {

std::string to_string(SiteNorm n) { return n == SiteNorm::l1 ? "l1" : "max"; }

SiteNorm site_norm_from_string(const std::string& s) {
    if (s == "l1") return SiteNorm::l1;
    if (s == "max") return SiteNorm::max;
    throw std::invalid_argument("unknown site norm '" + s + "' (expected l1 or max)");
}

std::string to_string(KineticConvention c) { return c == KineticConvention::laplacian ? "laplacian" : "adjacency"; }

KineticConvention kinetic_from_string(const std::string& s) {
    if (s == "laplacian") return KineticConvention::laplacian;
    if (s == "adjacency") return KineticConvention::adjacency;
    throw std::invalid_argument("unknown kinetic convention '" + s + "' (expected laplacian or adjacency)");
}

double interaction_value(const Interaction& U, Coord r) {
    if (r < 1) throw std::invalid_argument("interaction_value: distance must be >= 1");
    if (U.radius && r > *U.radius) return 0.0;
    if (U.scale == 0.0) return 0.0;
    const double lr = std::log(static_cast<double>(r));
    return U.scale * std::exp(-2.0 * U.B * lr * lr);
}

double interaction_energy(const Interaction& U, const FermiConfig& x) {
    double e = 0.0;
    const auto& s = x.sites();
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            const Coord r = U.norm == SiteNorm::l1 ? site_l1_distance(s[i], s[j]) : site_distance(s[i], s[j]);
            e += interaction_value(U, r);
        }
    return e;
}

double PotentialModel::site_value(const Site& x) const {
    return site_potential(hull, system, omega, x, effective_generation());
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

FiniteHamiltonian assemble_kinetic(std::shared_ptr<const ConfigDomain> domain, KineticConvention convention) {
    if (!domain || domain->empty()) throw std::invalid_argument("assemble: empty domain");
    const auto n = static_cast<Eigen::Index>(domain->size());
    FiniteHamiltonian H;
    H.convention = convention;
    H.matrix = Eigen::MatrixXd::Zero(n, n);
    H.potential = Eigen::VectorXd::Zero(n);
    H.interaction = Eigen::VectorXd::Zero(n);
    const double hop = convention == KineticConvention::laplacian ? -1.0 : 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& x = (*domain)[static_cast<std::size_t>(i)];
        const auto nb = domain->ambient_neighbors(x);
        if (convention == KineticConvention::laplacian) H.matrix(i, i) = static_cast<double>(nb.size());
        for (const auto& y : nb)
            if (auto j = domain->index_of(y)) H.matrix(i, static_cast<Eigen::Index>(*j)) = hop;
    }
    H.domain = std::move(domain);
    return H;
}

FiniteHamiltonian assemble_with_potential(std::shared_ptr<const ConfigDomain> domain,
                                          const Eigen::VectorXd& potential, double g, const Interaction& U,
                                          KineticConvention convention) {
    FiniteHamiltonian H = assemble_kinetic(std::move(domain), convention);
    if (potential.size() != H.matrix.rows()) throw std::invalid_argument("assemble: potential size mismatch");
    H.g = g;
    H.potential = potential;
    for (Eigen::Index i = 0; i < H.matrix.rows(); ++i) {
        H.interaction(i) = interaction_energy(U, (*H.domain)[static_cast<std::size_t>(i)]);
        H.matrix(i, i) += g * potential(i) + H.interaction(i);
    }
    return H;
}

Eigen::VectorXd domain_potential(const ConfigDomain& domain, const PotentialModel& model) {
    std::map<Site, double> cache;
    Eigen::VectorXd v(static_cast<Eigen::Index>(domain.size()));
    for (std::size_t i = 0; i < domain.size(); ++i) {
        double sum = 0.0;
        for (const auto& s : domain[i].sites()) {
            auto it = cache.find(s);
            if (it == cache.end()) it = cache.emplace(s, model.site_value(s)).first;
            sum += it->second;
        }
        v(static_cast<Eigen::Index>(i)) = sum;
    }
    return v;
}

FiniteHamiltonian assemble(std::shared_ptr<const ConfigDomain> domain, const PotentialModel& model, double g,
                           const Interaction& U, KineticConvention convention) {
    if (!domain || domain->empty()) throw std::invalid_argument("assemble: empty domain");
    const Eigen::VectorXd v = domain_potential(*domain, model);
    return assemble_with_potential(std::move(domain), v, g, U, convention);
}

// ---------------------------------------------------------------------------
// Diagonalization
// ---------------------------------------------------------------------------

namespace {

void require_symmetric(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("diagonalize: matrix is not square");
    if (m.size() == 0) throw std::invalid_argument("diagonalize: empty matrix");
    const double scale = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= 1e-14 * scale)) throw std::invalid_argument("diagonalize: matrix is not symmetric");
}

}  // namespace

Spectrum diagonalize(const Eigen::MatrixXd& matrix) {
    require_symmetric(matrix);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw std::runtime_error("diagonalize: eigensolver did not converge");
    Spectrum s{solver.eigenvalues(), solver.eigenvectors()};
    for (Eigen::Index c = 0; c < s.eigenvectors.cols(); ++c) {
        Eigen::Index peak = 0;
        s.eigenvectors.col(c).cwiseAbs().maxCoeff(&peak);
        if (s.eigenvectors(peak, c) < 0.0) s.eigenvectors.col(c) *= -1.0;
    }
    return s;
}

Eigen::VectorXd eigenvalues(const Eigen::MatrixXd& matrix) {
    require_symmetric(matrix);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalues: eigensolver did not converge");
    return solver.eigenvalues();
}

std::size_t refine_localized(Spectrum& spec, const Eigen::MatrixXd& H, double max_ratio) {
    const Eigen::Index n = H.rows();
    std::vector<std::vector<std::pair<Eigen::Index, double>>> off(static_cast<std::size_t>(n));
    for (Eigen::Index z = 0; z < n; ++z)
        for (Eigen::Index w = 0; w < n; ++w)
            if (w != z && H(z, w) != 0.0) off[static_cast<std::size_t>(z)].emplace_back(w, H(z, w));

    std::size_t refined = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index p = 0;
        spec.eigenvectors.col(k).cwiseAbs().maxCoeff(&p);
        double lambda = spec.eigenvalues(k);
        bool dominant = true;
        for (Eigen::Index z = 0; z < n && dominant; ++z) {
            if (z == p) continue;
            double row = 0.0;
            for (const auto& [w, h] : off[static_cast<std::size_t>(z)]) row += std::abs(h);
            dominant = row <= max_ratio * std::abs(H(z, z) - lambda);
        }
        if (!dominant) continue;

        Eigen::VectorXd psi = Eigen::VectorXd::Zero(n), next(n);
        psi(p) = 1.0;
        bool converged = false;
        for (int it = 0; it < 10 * static_cast<int>(n) + 100 && !converged; ++it) {
            double shift = H(p, p);
            for (const auto& [w, h] : off[static_cast<std::size_t>(p)]) shift += h * psi(w);
            lambda = shift;
            next(p) = 1.0;
            converged = true;
            for (Eigen::Index z = 0; z < n; ++z) {
                if (z == p) continue;
                double s = 0.0;
                for (const auto& [w, h] : off[static_cast<std::size_t>(z)]) s += h * psi(w);
                next(z) = -s / (H(z, z) - lambda);
                if (std::abs(next(z) - psi(z)) > 4 * std::numeric_limits<double>::epsilon() * std::abs(next(z)))
                    converged = false;
            }
            psi.swap(next);
        }
        if (!converged) continue;
        spec.eigenvalues(k) = lambda;
        spec.eigenvectors.col(k) = psi / psi.norm();
        ++refined;
    }
    return refined;
}

double spectral_distance(const Eigen::VectorXd& first, const Eigen::VectorXd& second) {
    if (first.size() == 0 || second.size() == 0) throw std::invalid_argument("spectral_distance: empty spectrum");
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index i = 0, j = 0;
    while (i < first.size() && j < second.size()) {
        best = std::min(best, std::abs(first(i) - second(j)));
        if (first(i) < second(j)) ++i; else ++j;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Covariance and truncation
// ---------------------------------------------------------------------------

CovarianceResult covariance_check(const FermiConfig& u0, const Site& a, std::size_t L, const PotentialModel& model,
                                  double g, const Interaction& U, KineticConvention convention) {
    const FermiConfig u = u0.shifted(a);
    auto shifted_domain = std::make_shared<const ConfigDomain>(ball(u, L).domain);
    auto base_domain = std::make_shared<const ConfigDomain>(ball(u0, L).domain);

    PotentialModel moved = model;
    moved.omega = translate(model.system, model.omega, a);
    const FiniteHamiltonian H1 = assemble(shifted_domain, model, g, U, convention);
    const FiniteHamiltonian H2 = assemble(base_domain, moved, g, U, convention);

    CovarianceResult r;
    Site minus_a(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) minus_a[i] = -a[i];
    for (std::size_t i = 0; i < shifted_domain->size(); ++i) {
        const auto bi = base_domain->index_of((*shifted_domain)[i].shifted(minus_a));
        if (!bi) throw std::logic_error("covariance_check: shifted ball is not a translate");
        for (std::size_t j = 0; j < shifted_domain->size(); ++j) {
            const auto bj = base_domain->index_of((*shifted_domain)[j].shifted(minus_a));
            r.max_entry_deviation = std::max(
                r.max_entry_deviation,
                std::abs(H1.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                         H2.matrix(static_cast<Eigen::Index>(*bi), static_cast<Eigen::Index>(*bj))));
        }
    }
    r.max_eigenvalue_deviation = (eigenvalues(H1.matrix) - eigenvalues(H2.matrix)).cwiseAbs().maxCoeff();
    return r;
}

TruncatedHamiltonian truncated_hamiltonian(std::shared_ptr<const ConfigDomain> domain, const PotentialModel& model,
                                           double g, const Interaction& U, unsigned generation,
                                           std::optional<Coord> R, KineticConvention convention) {
    if (generation < 1 || generation > model.hull.n_max)
        throw std::invalid_argument("truncated_hamiltonian: generation outside [1, n_max]");
    PotentialModel coarse = model;
    coarse.generation = generation;
    const Interaction Ut = R ? U.truncated(*R) : U;

    const FiniteHamiltonian full = assemble(domain, model, g, U, convention);
    TruncatedHamiltonian out{assemble(std::move(domain), coarse, g, Ut, convention)};

    std::size_t particles = out.H.domain->empty() ? 0 : (*out.H.domain)[0].particle_count();
    out.hull_bound = std::abs(g) * static_cast<double>(particles) * hull_tail_bound(generation, model.hull.b);
    out.interaction_bound = (full.interaction - out.H.interaction).cwiseAbs().maxCoeff();
    out.bound = out.hull_bound + out.interaction_bound;
    out.exact_difference = (full.matrix - out.H.matrix).cwiseAbs().maxCoeff();
    return out;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "binary export assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T value{};
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw std::runtime_error("matrix file truncated");
    return value;
}

constexpr char kMagic[4] = {'F', 'L', 'H', 'M'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_matrix_binary(std::ostream& os, const FiniteHamiltonian& H, const std::string& params_json) {
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(H.matrix.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(H.matrix.cols()));
    put<std::uint32_t>(os, H.convention == KineticConvention::laplacian ? 0u : 1u);
    put<double>(os, H.g);
    put<std::uint64_t>(os, params_json.size());
    os.write(params_json.data(), static_cast<std::streamsize>(params_json.size()));
    for (Eigen::Index i = 0; i < H.matrix.rows(); ++i)
        for (Eigen::Index j = 0; j < H.matrix.cols(); ++j) put<double>(os, H.matrix(i, j));
}

MatrixFile read_matrix_binary(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a matrix file");
    if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("unsupported matrix file version");
    MatrixFile f;
    const auto rows = get<std::uint64_t>(is), cols = get<std::uint64_t>(is);
    f.convention = get<std::uint32_t>(is) == 0 ? KineticConvention::laplacian : KineticConvention::adjacency;
    f.g = get<double>(is);
    const auto len = get<std::uint64_t>(is);
    f.params_json.resize(len);
    if (!is.read(f.params_json.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("matrix file truncated");
    f.matrix.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < f.matrix.rows(); ++i)
        for (Eigen::Index j = 0; j < f.matrix.cols(); ++j) f.matrix(i, j) = get<double>(is);
    return f;
}

void write_spectrum_csv(std::ostream& os, const Eigen::VectorXd& eigenvalues) {
    os << "index,eigenvalue\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) os << i << ',' << eigenvalues(i) << '\n';
}

}  // namespace fermiloc

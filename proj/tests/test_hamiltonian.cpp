#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fermiloc/hamiltonian.hpp"
#include "fermiloc/random.hpp"

using namespace fermiloc;

namespace {

std::shared_ptr<const ConfigDomain> path3() {
    return std::make_shared<const ConfigDomain>(ConfigDomain::all_in_window(SiteWindow::interval(0, 3), 2));
}

PotentialModel model_1d(std::uint64_t seed, double omega) {
    return {HaarshHull{0.5, 1, 16, ThetaField(seed)}, ShiftSystem::golden(1, 1), TorusPoint({omega}), 0};
}

Eigen::MatrixXd random_symmetric(std::size_t n, std::uint64_t seed) {
    KeyedStream rng(seed, 3);
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
    return m;
}

}  // namespace

TEST_CASE("interaction") {
    Interaction U;
    U.B = 10.0;
    CHECK(interaction_value(U, 1) == 1.0);
    CHECK(interaction_value(U, 2) == doctest::Approx(std::exp(-20 * std::log(2.0) * std::log(2.0))));
    CHECK(interaction_value(U, 2) == doctest::Approx(6.82e-5).epsilon(1e-3));
    CHECK(interaction_value(U.truncated(3), 4) == 0.0);
    CHECK_THROWS(interaction_value(U, 0));
    CHECK(interaction_energy(U, FermiConfig::from_1d({4})) == 0.0);
    CHECK(interaction_energy(U, FermiConfig::from_1d({0, 1})) == 1.0);
    CHECK(interaction_energy(U, FermiConfig::from_1d({0, 1, 2})) ==
          doctest::Approx(2 * interaction_value(U, 1) + interaction_value(U, 2)));
    CHECK(interaction_energy(U.truncated(0), FermiConfig::from_1d({0, 1, 2})) == 0.0);
    Interaction Um = U;
    Um.norm = SiteNorm::max;
    CHECK(interaction_energy(Um, FermiConfig({{0, 0}, {1, 1}})) == 1.0);
    CHECK(interaction_energy(U, FermiConfig({{0, 0}, {1, 1}})) == interaction_value(U, 2));
}

TEST_CASE("free spectra on the three-configuration path") {
    const auto lap = eigenvalues(assemble_kinetic(path3(), KineticConvention::laplacian).matrix);
    CHECK(lap(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lap(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lap(2) == doctest::Approx(3.0).epsilon(1e-12));
    const auto adj = eigenvalues(assemble_kinetic(path3(), KineticConvention::adjacency).matrix);
    CHECK(adj(0) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::abs(adj(1)) < 1e-12);
    CHECK(adj(2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    auto single = std::make_shared<const ConfigDomain>(std::vector{FermiConfig::from_1d({0, 1})});
    const auto H = assemble(single, model_1d(1, 0.2), 3.0, Interaction::none());
    CHECK(H.size() == 1);
    CHECK(H.matrix(0, 0) == doctest::Approx(2.0 + 3.0 * H.potential(0)));
    CHECK_THROWS(assemble_kinetic(std::make_shared<const ConfigDomain>(), KineticConvention::laplacian));
}

TEST_CASE("assembly structure") {
    auto dom = std::make_shared<const ConfigDomain>(ball(FermiConfig::from_1d({0, 1}), 3).domain);
    Interaction U;
    U.B = 1.0;
    const auto H = assemble(dom, model_1d(2, 0.4), 5.0, U);
    CHECK((H.matrix - H.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < dom->size(); ++i) {
        for (std::size_t j = 0; j < dom->size(); ++j) {
            if (i == j) continue;
            const bool edge = graph_distance((*dom)[i], (*dom)[j], 1) == 1u;
            CHECK(H.matrix(i, j) == (edge ? -1.0 : 0.0));
        }
        const double diag = static_cast<double>(neighbors((*dom)[i]).size()) + 5.0 * H.potential(i) +
                            interaction_energy(U, (*dom)[i]);
        CHECK(H.matrix(i, i) == doctest::Approx(diag));
    }
}

TEST_CASE("diagonalize") {
    Eigen::MatrixXd d = Eigen::Vector3d(1, 2, 3).asDiagonal();
    const auto s = diagonalize(d);
    CHECK(s.eigenvalues(0) == 1.0);
    CHECK((s.eigenvectors - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
    Eigen::MatrixXd x(2, 2);
    x << 0, 1, 1, 0;
    CHECK(eigenvalues(x)(0) == doctest::Approx(-1.0));
    CHECK(eigenvalues(x)(1) == doctest::Approx(1.0));
    Eigen::MatrixXd bad(2, 2);
    bad << 0, 1, 0, 0;
    CHECK_THROWS(diagonalize(bad));

    const auto m = random_symmetric(50, 1);
    const auto r = diagonalize(m);
    const double norm = m.norm();
    for (Eigen::Index k = 0; k < 50; ++k) {
        CHECK((m * r.eigenvectors.col(k) - r.eigenvalues(k) * r.eigenvectors.col(k)).norm() <= 1e-10 * norm);
        Eigen::Index p = 0;
        r.eigenvectors.col(k).cwiseAbs().maxCoeff(&p);
        CHECK(r.eigenvectors(p, k) > 0.0);
    }
    CHECK((r.eigenvectors.transpose() * r.eigenvectors - Eigen::MatrixXd::Identity(50, 50)).norm() < 1e-12);
    CHECK((r.eigenvectors * r.eigenvalues.asDiagonal() * r.eigenvectors.transpose() - m).norm() <= 1e-9 * norm);
}

TEST_CASE("localized refinement") {
    auto dom = std::make_shared<const ConfigDomain>(ConfigDomain::all_in_window(SiteWindow::interval(0, 8), 2));
    Eigen::VectorXd v(dom->size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 100.0 * static_cast<double>(i);
    const auto H = assemble_with_potential(dom, v, 1.0, Interaction::none(), KineticConvention::laplacian);
    auto spec = diagonalize(H);
    const auto plain = spec;
    CHECK(refine_localized(spec, H.matrix) == dom->size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        CHECK((H.matrix * spec.eigenvectors.col(k) - spec.eigenvalues(k) * spec.eigenvectors.col(k)).norm() < 1e-12);
        CHECK(spec.eigenvalues(k) == doctest::Approx(plain.eigenvalues(k)).epsilon(1e-13));
    }
    auto free = diagonalize(assemble_kinetic(dom, KineticConvention::laplacian));
    CHECK(refine_localized(free, assemble_kinetic(dom, KineticConvention::laplacian).matrix) == 0);
}

TEST_CASE("spectral distance") {
    CHECK(spectral_distance(Eigen::Vector2d(1, 3), Eigen::Vector2d(3, 5)) == 0.0);
    CHECK(spectral_distance(Eigen::Vector2d(0, 1), Eigen::VectorXd::Constant(1, 2.5)) == 1.5);
    CHECK_THROWS(spectral_distance(Eigen::VectorXd(), Eigen::Vector2d(0, 1)));
    const auto a = eigenvalues(random_symmetric(20, 2)), b = eigenvalues(random_symmetric(30, 3));
    double brute = 1e300;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        for (Eigen::Index j = 0; j < b.size(); ++j) brute = std::min(brute, std::abs(a(i) - b(j)));
    CHECK(spectral_distance(a, b) == brute);
}

TEST_CASE("covariance relation") {
    Interaction U;
    U.B = 0.5;
    const auto m = model_1d(5, 0.61);
    CHECK(covariance_check(FermiConfig::from_1d({0, 2}), {0}, 3, m, 4.0, U).max_eigenvalue_deviation == 0.0);
    CHECK(covariance_check(FermiConfig::from_1d({0}), {17}, 4, m, 4.0, U).max_eigenvalue_deviation <= 1e-10);
    CHECK(covariance_check(FermiConfig::from_1d({0, 1}), {5}, 3, m, 4.0, U).max_eigenvalue_deviation <= 1e-10);
}

TEST_CASE("perturbation bounds") {
    auto dom = std::make_shared<const ConfigDomain>(ball(FermiConfig::from_1d({0, 1}), 4).domain);
    Interaction U;
    U.B = 0.3;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = model_1d(seed, 0.1 * static_cast<double>(seed));
        const auto H1 = assemble(dom, m, 3.0, U);
        const auto H2 = assemble(dom, model_1d(seed + 100, 0.5), 2.0, U);
        const double weyl = (eigenvalues(H1.matrix) - eigenvalues(H2.matrix)).cwiseAbs().maxCoeff();
        CHECK(weyl <= (H1.matrix - H2.matrix).norm() + 1e-12);

        // each of the two sites gains 0.25
        Eigen::VectorXd shifted = H1.potential.array() + 2 * 0.25;
        const auto H3 = assemble_with_potential(dom, shifted, 3.0, U, KineticConvention::laplacian);
        CHECK((eigenvalues(H3.matrix) - eigenvalues(H1.matrix)).cwiseAbs().maxCoeff() ==
              doctest::Approx(3.0 * 0.5).epsilon(1e-12));
    }
}

TEST_CASE("truncation") {
    auto dom = std::make_shared<const ConfigDomain>(ball(FermiConfig::from_1d({0, 1}), 3).domain);
    Interaction U;
    U.B = 0.2;
    const auto m = model_1d(7, 0.3);
    const auto same = truncated_hamiltonian(dom, m, 2.0, U, m.hull.n_max, std::nullopt);
    CHECK(same.exact_difference == 0.0);
    CHECK((same.H.matrix - assemble(dom, m, 2.0, U).matrix).cwiseAbs().maxCoeff() == 0.0);
    const auto none = truncated_hamiltonian(dom, m, 2.0, U, 3, Coord{0});
    CHECK(none.H.interaction.cwiseAbs().maxCoeff() == 0.0);
    double prev = 1e300;
    for (unsigned gen : {2u, 4u, 6u, 8u}) {
        const auto t = truncated_hamiltonian(dom, m, 2.0, U, gen, Coord{gen});
        const double shift =
            (eigenvalues(t.H.matrix) - eigenvalues(assemble(dom, m, 2.0, U).matrix)).cwiseAbs().maxCoeff();
        CHECK(shift <= t.bound + 1e-12);
        CHECK(t.exact_difference <= t.bound + 1e-12);
        CHECK(t.bound <= prev);
        prev = t.bound;
    }
}

TEST_CASE("binary export round trip") {
    const auto H = assemble_kinetic(path3(), KineticConvention::adjacency);
    std::stringstream ss;
    write_matrix_binary(ss, H, R"({"n":3})");
    const auto back = read_matrix_binary(ss);
    CHECK(back.matrix == H.matrix);
    CHECK(back.convention == KineticConvention::adjacency);
    CHECK(back.params_json == R"({"n":3})");
    std::stringstream truncated(ss.str().substr(0, 10));
    CHECK_THROWS(read_matrix_binary(truncated));
    std::ostringstream csv;
    write_spectrum_csv(csv, Eigen::Vector2d(0.5, 1.5));
    CHECK(csv.str().find("index,eigenvalue") == 0);
}

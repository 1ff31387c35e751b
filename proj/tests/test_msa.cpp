#include <doctest.h>

#include <cmath>

#include "fermiloc/msa.hpp"
#include "fermiloc/random.hpp"

using namespace fermiloc;

namespace {

std::shared_ptr<const ConfigDomain> window(Coord sites) {
    return std::make_shared<const ConfigDomain>(ConfigDomain::all_in_window(SiteWindow::interval(0, sites), 2));
}

PotentialModel model(std::uint64_t seed, double b = 0.25) {
    return {HaarshHull{b, 1, 40, ThetaField(seed)}, ShiftSystem::golden(1, 1), TorusPoint({0.3}), 0};
}

FiniteHamiltonian strong(std::shared_ptr<const ConfigDomain> dom, std::uint64_t seed, double factor = 1.01) {
    const auto V = domain_potential(*dom, model(seed));
    const double sep = separation(std::span<const double>(V.data(), static_cast<std::size_t>(V.size())));
    const double g = factor * 32.0 * std::exp(4.0) / sep;
    return assemble_with_potential(dom, V, g, Interaction::none(), KineticConvention::laplacian);
}

}  // namespace

TEST_CASE("gamma") {
    CHECK(gamma_rate(1.0, 0) == 2.0);
    CHECK(gamma_rate(2.0, 16) == doctest::Approx(2 * 16 * (1 + std::pow(2.0, -0.5))));
    CHECK(gamma_rate(2.0, 16) == doctest::Approx(54.6274).epsilon(1e-6));
    for (double m : {0.1, 1.0, 3.0})
        for (std::uint64_t L = 1; L < 200; L += 7) {
            CHECK(m * L < gamma_rate(m, L));
            CHECK(gamma_rate(m, L) < 2 * m * L + (L == 1 ? 1e-12 : 0.0));
        }
}

TEST_CASE("scale sequence") {
    const auto s = ScaleSequence::build(2, 3, 2.5, 1, 2.0);
    CHECK(s.level(-1).L == 0u);
    CHECK(s.level(0).L == 2u);
    CHECK(s.level(1).L == 4u);
    CHECK(s.level(3).L == 256u);
    for (int j = 1; j <= 3; ++j) {
        CHECK(*s.level(j).L == *s.level(j - 1).L * *s.level(j - 1).L);
        CHECK(s.level(j).log2_delta < s.level(j - 1).log2_delta);
        CHECK(s.level(j).N_tilde == tilde_n_log2(4.0 * s.level(j).log2_L, 1, 2.0));
    }
    CHECK(s.level(0).log2_beta == -2 * 2.5 * s.level(0).N_tilde);
    CHECK(s.level(-1).N_tilde == s.level(0).N_tilde);
    CHECK(s.resonance_threshold(3, 1.0) == 0.0);
    const auto soft = ScaleSequence::build(2, 0, 0.01, 1, 2.0);
    CHECK(soft.resonance_threshold(0, 3.0) == doctest::Approx(3.0 * std::exp2(soft.level(0).log2_delta)));
    CHECK(soft.resonance_threshold(0, 3.0) > 0.0);
}

TEST_CASE("green functions") {
    Eigen::MatrixXd one(1, 1);
    one << 3.0;
    CHECK(green(one, 1.0, {0})(0, 0) == doctest::Approx(0.5));
    const Eigen::MatrixXd d = Eigen::Vector2d(1, 2).asDiagonal();
    const auto G = green_matrix(d, 0.0);
    CHECK(G(0, 0) == 1.0);
    CHECK(G(1, 1) == 0.5);
    CHECK(G(0, 1) == 0.0);
    CHECK_THROWS_AS(green(d, 2.0, {0}), std::domain_error);

    auto dom = std::make_shared<const ConfigDomain>(ball(FermiConfig::from_1d({0, 1}), 5).domain);
    const auto H = assemble(dom, model(3, 0.5), 4.0, Interaction::none());
    const auto Gm = green_matrix(H.matrix, 0.37);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(H.matrix.rows(), H.matrix.cols());
    CHECK(((H.matrix - 0.37 * I) * Gm - I).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((Gm - Gm.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("geometric resolvent equation") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto dom = std::make_shared<const ConfigDomain>(ball(FermiConfig::from_1d({0, 1}), 6).domain);
        REQUIRE(dom->size() <= 200);
        const auto H = assemble(dom, model(seed, 0.5), 3.0, Interaction::none());
        const auto spec = diagonalize(H);
        std::vector<std::size_t> inner;
        std::size_t y = 0;
        for (std::size_t i = 0; i < dom->size(); ++i) {
            if (graph_distance(FermiConfig::from_1d({0, 1}), (*dom)[i], 3)) inner.push_back(i);
            else y = i;
        }
        const auto r = gre_defect(H.matrix, inner, -0.77, 0, y, &spec, std::size_t{3});
        CHECK(r.boundary_edges > 0);
        CHECK(r.green_defect <= 1e-8 * r.green_scale);
        CHECK(r.eigen_defect <= 1e-8 * r.eigen_scale);
    }
}

TEST_CASE("resonance classification") {
    const Eigen::Vector3d spec(0.0, 1.0, 2.0);
    const double thr = 0.01;
    CHECK(classify_resonant(spec, -10 * thr, thr).nonresonant);
    CHECK_FALSE(classify_resonant(spec, 1.0, thr).nonresonant);
    CHECK(classify_resonant(spec, 1.0, thr).distance == 0.0);
    CHECK(classify_resonant(spec, 2.0 + 0.25, 0.25).nonresonant);
    CHECK(classify_resonant(spec, 2.0 + 0.25, 0.25).margin == 0.0);
}

TEST_CASE("singularity classification") {
    const FermiBall b = ball(FermiConfig::from_1d({0, 1}), 0);
    const double m = 1.0;
    const double edge = 2 * 2 * 1 * std::exp(2 * m);
    Spectrum s{Eigen::VectorXd::Constant(1, 5.0), Eigen::MatrixXd::Identity(1, 1)};
    CHECK(singular_threshold(0, 2, 1, m) == doctest::Approx(std::exp(-2 * m) / 4));
    CHECK(singular_threshold(3, 2, 1, m) == doctest::Approx(std::pow(9.0, -2) * std::exp(-gamma_rate(m, 3))));
    CHECK(classify_singular(s, b, 5.0 - 1.001 * edge, m).nonsingular);
    CHECK_FALSE(classify_singular(s, b, 5.0 - 0.999 * edge, m).nonsingular);
    const auto at = classify_singular(s, b, 5.0, m);
    CHECK_FALSE(at.nonsingular);
    CHECK(at.energy_in_spectrum);

    SUBCASE("strong disorder: at most one singular single-site ball") {
        const auto H = strong(window(10), 1);
        SparsenessOptions opt;
        const auto rep = sparseness_scan(H, 0, opt);
        CHECK(rep.energies > 0);
        CHECK(rep.max_singular_per_energy <= 1);
        CHECK(rep.singular_pair_violations == 0);
    }
    SUBCASE("free Hamiltonian: singular pairs reported") {
        const auto dom = window(10);
        const auto H = assemble_kinetic(dom, KineticConvention::laplacian);
        const auto rep = sparseness_scan(H, 1, SparsenessOptions{});
        CHECK(rep.singular_pair_violations > 0);
        CHECK_FALSE(rep.violations.empty());
    }
}

TEST_CASE("non-resonant without singular sub-balls implies non-singular") {
    const auto dom = window(14);
    const auto H = strong(dom, 2, 5.0);
    std::size_t hyp = 0;
    for (double E : {-3.0, 0.5, 7.0, 1e3, 1e5}) {
        const auto c = nr_implies_ns(H, FermiConfig::from_1d({5, 7}), 2, 0, E, 1.0, 1e-9);
        CHECK(c.consistent());
        hyp += c.hypotheses;
    }
    CHECK(hyp > 0);
}

TEST_CASE("dominated functions") {
    CHECK(dominated_bound(7, 1, 0.5, 1.0) == 0.0625);
    const auto dom = ball(FermiConfig::from_1d({0, 1}), 7).domain;
    CHECK(dominated_check(Eigen::VectorXd::Zero(dom.size()), dom, 0, 3, 1, 0.3));
    Eigen::VectorXd spike = Eigen::VectorXd::Zero(dom.size());
    spike(0) = 1.0;
    CHECK_FALSE(dominated_check(spike, dom, 0, 3, 1, 0.3));
    CHECK_THROWS(dominated_check(Eigen::VectorXd::Zero(dom.size()), ball(FermiConfig::from_1d({0, 1}), 2).domain, 0,
                                 3, 1, 0.3));

    SUBCASE("eigenfunction moduli at strong disorder") {
        auto w = window(14);
        const auto H = strong(w, 3, 10.0);
        auto spec = diagonalize(H);
        refine_localized(spec, H.matrix);
        const auto c = *w->index_of(FermiConfig::from_1d({6, 7}));
        Eigen::Index k = 0;
        spec.eigenvectors.row(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff(&k);
        // take an eigenfunction peaked far from the test ball
        const auto far = *w->index_of(FermiConfig::from_1d({0, 13}));
        spec.eigenvectors.row(static_cast<Eigen::Index>(far)).cwiseAbs().maxCoeff(&k);
        const Eigen::VectorXd f = spec.eigenvectors.col(k).cwiseAbs();
        const double q = std::exp(-gamma_rate(1.0, 0));
        CHECK(dominated_check(f, *w, c, 1, 0, q));
    }
}

TEST_CASE("localization reports") {
    auto dom = window(8);
    SUBCASE("zero kinetic term") {
        Eigen::VectorXd v(dom->size());
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::sqrt(2.0 + static_cast<double>(i));
        const Eigen::MatrixXd H = v.asDiagonal();
        const auto rep = localization_report(diagonalize(H), *dom);
        CHECK(rep.bijection);
        for (const auto& s : rep.states) CHECK(s.peak_mass == 1.0);
        CHECK(rep.unimodal_fraction == 1.0);
    }
    SUBCASE("free path") {
        auto path = std::make_shared<const ConfigDomain>(
            ConfigDomain::all_in_window(SiteWindow::interval(0, 30), 1));
        const auto rep = localization_report(diagonalize(assemble_kinetic(path, KineticConvention::laplacian)), *path);
        CHECK(rep.unimodal_fraction < 0.5);
        CHECK_FALSE(rep.bijection);
    }
    SUBCASE("strong disorder") {
        const auto H = strong(dom, 4);
        auto spec = diagonalize(H);
        refine_localized(spec, H.matrix);
        const auto rep = localization_report(spec, *dom);
        CHECK(rep.bijection);
        CHECK(rep.unimodal_fraction == 1.0);
        CHECK(rep.median_rate > 0.0);
        std::vector<std::size_t> centers;
        for (const auto& s : rep.states) {
            CHECK(s.centers.size() == 1);
            centers.push_back(s.centers.front());
        }
        std::sort(centers.begin(), centers.end());
        CHECK(std::adjacent_find(centers.begin(), centers.end()) == centers.end());
    }
}

TEST_CASE("decay fits") {
    const auto f = fit_decay({0, 1, 2, 3}, {1.0, std::exp(-2.0), std::exp(-4.0), std::exp(-6.0)});
    CHECK(f.rate == doctest::Approx(2.0));
    CHECK(f.r_squared == doctest::Approx(1.0));
    CHECK(fit_decay({0, 1, 2}, {1.0, 1e-20, 1e-30}).points == 1);
}

TEST_CASE("correlators") {
    auto dom = window(7);
    const auto H = assemble(dom, model(5, 0.5), 2.0, Interaction::none());
    const auto spec = diagonalize(H);
    const auto same = correlator(spec, 3, 3, {0.0}, {[](double) { return 1.0; }});
    CHECK(same.test_function_sup == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(same.propagator_sup == doctest::Approx(1.0).epsilon(1e-12));
    const auto other = correlator(spec, 3, 4, {0.0});
    CHECK(other.propagator_sup < 1e-12);
    const auto many = correlator(spec, 0, 9, {0.1, 1.0, 10.0, 100.0});
    CHECK(many.propagator_sup <= many.envelope + 1e-12);

    const auto Hs = strong(window(10), 6);
    auto ss = diagonalize(Hs);
    refine_localized(ss, Hs.matrix);
    const auto fit = envelope_decay_fit(ss, *Hs.domain);
    CHECK(fit.rate > 0.0);
}

TEST_CASE("entropy of truncated operators") {
    const auto B = ball(FermiConfig::from_1d({0, 1}), 2);
    PotentialModel flat{HaarshHull{2.5, 1, 24, ThetaField::constant(0.0)}, ShiftSystem::golden(1, 1),
                        TorusPoint({0.0}), 0};
    CHECK(equivalence_entropy_check(B.domain, flat, 2, 1000, 2, 1, 1).distinct == 1);
    const auto m = model(9, 2.5);
    const auto coarse = equivalence_entropy_check(B.domain, m, 1, 100, 2, 1, 1);
    const auto fine = equivalence_entropy_check(B.domain, m, 1, 10000, 2, 1, 1);
    CHECK(coarse.distinct <= fine.distinct);
    CHECK(fine.within_bound);
    CHECK(fine.bound == 2.0 * 256);
    const auto tiny = equivalence_entropy_check(B.domain, m, 6, 4, 2, 1, 1);
    CHECK(tiny.grid_too_coarse);
}

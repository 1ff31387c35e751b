#include "fermiloc/precise.hpp"

#include <algorithm>
#include <boost/multiprecision/mpfr.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "fermiloc/haarsh.hpp"

namespace fermiloc {
namespace {

using mp = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                         boost::multiprecision::et_off>;

}  // namespace
}  // namespace fermiloc

namespace Eigen {

template <>
struct NumTraits<fermiloc::mp> : GenericNumTraits<fermiloc::mp> {
    using mp = fermiloc::mp;
    using Real = mp;
    using NonInteger = mp;
    using Literal = mp;
    using Nested = mp;
    enum {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 10,
        AddCost = 10,
        MulCost = 40
    };
    static Real epsilon() { return std::numeric_limits<mp>::epsilon(); }
    static Real dummy_precision() { return epsilon() * 1024; }
    static Real highest() { return (std::numeric_limits<mp>::max)(); }
    static Real lowest() { return std::numeric_limits<mp>::lowest(); }
    static Real infinity() { return std::numeric_limits<mp>::infinity(); }
    static Real quiet_NaN() { return std::numeric_limits<mp>::quiet_NaN(); }
    static int digits10() { return static_cast<int>(mp::default_precision()); }
};

}  // namespace Eigen

namespace fermiloc {

namespace {

// The MPFR default precision is process wide.
std::mutex& mp_mutex() {
    static std::mutex m;
    return m;
}

void set_bits(unsigned bits) { mp::default_precision(static_cast<unsigned>(std::ceil(bits * 0.30103)) + 2); }

}  // namespace

SeriesHamiltonian series_hamiltonian(std::shared_ptr<const ConfigDomain> domain, const PotentialModel& model,
                                     double g, const Interaction& U, KineticConvention convention) {
    SeriesHamiltonian S;
    const FiniteHamiltonian K = assemble_kinetic(domain, convention);
    S.base = K.matrix;
    S.g = g;
    S.b = model.hull.b;
    S.generations = model.effective_generation();
    std::map<Site, std::vector<double>> cache;
    S.theta.resize(domain->size());
    for (std::size_t i = 0; i < domain->size(); ++i) {
        const auto& x = (*domain)[i];
        S.base(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += interaction_energy(U, x);
        for (const auto& s : x.sites()) {
            auto it = cache.find(s);
            if (it == cache.end())
                it = cache
                         .emplace(s, hull_amplitudes(model.hull, translate(model.system, model.omega, s),
                                                     S.generations))
                         .first;
            S.theta[i].insert(S.theta[i].end(), it->second.begin(), it->second.end());
        }
    }
    return S;
}

struct PreciseSpectrum::Impl {
    SeriesHamiltonian H;
    unsigned bits = 0;
    double log2_scale = 0.0;  // log2 of the Frobenius norm, from doubles
    std::vector<mp> eigenvalues;
};

PreciseSpectrum::PreciseSpectrum(SeriesHamiltonian H) : impl_(std::make_unique<Impl>()) {
    if (H.size() == 0) throw std::invalid_argument("PreciseSpectrum: empty Hamiltonian");
    Eigen::MatrixXd approx = H.base;
    for (std::size_t i = 0; i < H.size(); ++i) {
        double v = 0.0;
        for (std::size_t k = 0; k < H.theta[i].size(); ++k)
            v += coeff_a(static_cast<unsigned>(k % H.generations) + 1, H.b) * H.theta[i][k];
        approx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += H.g * v;
    }
    impl_->log2_scale = std::log2(std::max(1.0, approx.norm()));
    impl_->H = std::move(H);
}

PreciseSpectrum::~PreciseSpectrum() = default;

PreciseSpectrum::PreciseSpectrum(PreciseSpectrum&&) noexcept = default;
PreciseSpectrum& PreciseSpectrum::operator=(PreciseSpectrum&&) noexcept = default;

unsigned PreciseSpectrum::bits() const { return impl_->bits; }

double PreciseSpectrum::log2_error() const {
    if (impl_->bits == 0) return std::numeric_limits<double>::infinity();
    return -static_cast<double>(impl_->bits) + std::log2(static_cast<double>(impl_->H.size())) + impl_->log2_scale + 6;
}

unsigned PreciseSpectrum::useful_bits() const {
    const double deepest = -log2_coeff_a(impl_->H.generations, impl_->H.b);
    return static_cast<unsigned>(std::ceil(deepest + impl_->log2_scale)) + 64;
}

void PreciseSpectrum::ensure(unsigned bits) {
    if (impl_->bits >= bits) return;
    std::lock_guard lock(mp_mutex());
    set_bits(bits);
    const SeriesHamiltonian& H = impl_->H;
    const auto n = static_cast<Eigen::Index>(H.size());
    std::vector<mp> a(H.generations);
    for (unsigned k = 0; k < H.generations; ++k) a[k] = boost::multiprecision::exp2(mp(log2_coeff_a(k + 1, H.b)));
    Eigen::Matrix<mp, Eigen::Dynamic, Eigen::Dynamic> M(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) M(i, j) = mp(H.base(i, j));
    for (Eigen::Index i = 0; i < n; ++i) {
        mp v = 0;
        const auto& th = H.theta[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < th.size(); ++k) v += a[k % H.generations] * mp(th[k]);
        M(i, i) += mp(H.g) * v;
    }
    Eigen::SelfAdjointEigenSolver<decltype(M)> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("PreciseSpectrum: eigensolver failed");
    impl_->eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
    impl_->bits = bits;
}

PreciseDistance precise_log2_distance(PreciseSpectrum& x, PreciseSpectrum& y, double log2_floor,
                                      unsigned start_bits) {
    const unsigned cap = std::max(x.useful_bits(), y.useful_bits());
    PreciseDistance out;
    for (unsigned bits = std::max(start_bits, 64u);; bits *= 2) {
        bits = std::min(bits, cap);
        x.ensure(bits);
        y.ensure(bits);
        out.bits = std::min(x.bits(), y.bits());
        out.log2_error = std::max(x.log2_error(), y.log2_error());
        {
            std::lock_guard lock(mp_mutex());
            set_bits(out.bits);
            const auto& ex = x.impl_->eigenvalues;
            const auto& ey = y.impl_->eigenvalues;
            std::size_t i = 0, j = 0;
            mp best = abs(ex[0] - ey[0]);
            while (i < ex.size() && j < ey.size()) {
                const mp d = ex[i] - ey[j];
                best = std::min(best, mp(abs(d)));
                if (d < 0) ++i;
                else ++j;
            }
            out.log2_distance = best == 0 ? -std::numeric_limits<double>::infinity()
                                          : static_cast<double>(boost::multiprecision::log2(best));
        }
        out.resolved = out.log2_distance > out.log2_error;
        if (out.resolved || out.log2_error < log2_floor || bits >= cap) break;
    }
    if (!out.resolved) out.log2_distance = std::max(out.log2_distance, out.log2_error) + 1;
    return out;
}

}  // namespace fermiloc

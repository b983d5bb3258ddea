#pragma once

// Exact algebra of real-valued trigonometric polynomials on R^N_y x R_tau.
//
// A TrigPoly is a finite sum  sum_k c_k exp(i (omega_k . y + omega0_k tau))
// with Hermitian coefficients. Frequencies are integer combinations of the
// generators of a FrequencyModule; all frequency arithmetic is done on the
// integer coordinates, never on the real values.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <complex>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "homog/errors.hpp"

namespace homog {

using cplx = std::complex<double>;

/// Norm used to decide whether an integer frequency lies inside the cutoff.
enum class CutoffNorm {
    max_coordinate,  // every |coordinate| <= cutoff
    total_degree,    // sum of |coordinates| <= cutoff
};

struct Frequency {
    std::vector<int> spatial;
    std::vector<int> temporal;

    friend bool operator==(const Frequency&, const Frequency&) = default;
    friend auto operator<=>(const Frequency&, const Frequency&) = default;

    [[nodiscard]] bool is_zero() const noexcept { return spatial_is_zero() && temporal_is_zero(); }
    [[nodiscard]] bool spatial_is_zero() const noexcept {
        return std::all_of(spatial.begin(), spatial.end(), [](int c) { return c == 0; });
    }
    [[nodiscard]] bool temporal_is_zero() const noexcept {
        return std::all_of(temporal.begin(), temporal.end(), [](int c) { return c == 0; });
    }

    friend Frequency operator-(Frequency k) {
        for (int& c : k.spatial) c = -c;
        for (int& c : k.temporal) c = -c;
        return k;
    }
    friend Frequency operator+(Frequency a, const Frequency& b) {
        assert(a.spatial.size() == b.spatial.size() && a.temporal.size() == b.temporal.size());
        for (std::size_t i = 0; i < a.spatial.size(); ++i) a.spatial[i] += b.spatial[i];
        for (std::size_t i = 0; i < a.temporal.size(); ++i) a.temporal[i] += b.temporal[i];
        return a;
    }
    friend Frequency operator-(const Frequency& a, const Frequency& b) { return a + (-b); }
};

/// Finitely generated frequency module with a truncation rule.
struct FrequencyModule {
    std::vector<std::vector<double>> spatial_generators;  // each of length N
    std::vector<double> temporal_generators;
    int cutoff = 1;
    CutoffNorm norm = CutoffNorm::max_coordinate;
    double prune_threshold = 1e-15;
    // Informational only: pairs of generator indices (spatial first, then
    // temporal) that the author declares rationally independent.
    std::vector<std::array<std::size_t, 2>> declared_independent;

    friend bool operator==(const FrequencyModule& a, const FrequencyModule& b) {
        return a.spatial_generators == b.spatial_generators &&
               a.temporal_generators == b.temporal_generators && a.cutoff == b.cutoff &&
               a.norm == b.norm && a.prune_threshold == b.prune_threshold;
    }

    [[nodiscard]] std::size_t dim() const {
        return spatial_generators.empty() ? 0 : spatial_generators.front().size();
    }
    [[nodiscard]] std::size_t n_spatial() const { return spatial_generators.size(); }
    [[nodiscard]] std::size_t n_temporal() const { return temporal_generators.size(); }

    void validate() const {
        if (spatial_generators.empty() || temporal_generators.empty())
            throw InputError("frequency module needs at least one spatial and one temporal generator");
        if (cutoff < 1) throw InputError("frequency module cutoff must be positive");
        const std::size_t n = dim();
        if (n == 0) throw InputError("spatial generators must have positive length");
        for (const auto& g : spatial_generators) {
            if (g.size() != n) throw InputError("spatial generators have inconsistent lengths");
            if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }))
                throw InputError("zero spatial generator");
            for (double v : g)
                if (!std::isfinite(v)) throw InputError("non-finite spatial generator");
        }
        for (double t : temporal_generators) {
            if (t == 0.0 || !std::isfinite(t)) throw InputError("zero or non-finite temporal generator");
        }
    }

    [[nodiscard]] Frequency zero() const {
        return Frequency{std::vector<int>(n_spatial(), 0), std::vector<int>(n_temporal(), 0)};
    }

    [[nodiscard]] bool contains(const Frequency& k) const {
        if (k.spatial.size() != n_spatial() || k.temporal.size() != n_temporal()) return false;
        long total = 0;
        long largest = 0;
        for (int c : k.spatial) {
            total += std::abs(c);
            largest = std::max<long>(largest, std::abs(c));
        }
        for (int c : k.temporal) {
            total += std::abs(c);
            largest = std::max<long>(largest, std::abs(c));
        }
        return norm == CutoffNorm::max_coordinate ? largest <= cutoff : total <= cutoff;
    }

    [[nodiscard]] std::vector<double> spatial_omega(const Frequency& k) const {
        std::vector<double> w(dim(), 0.0);
        for (std::size_t g = 0; g < n_spatial(); ++g)
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += k.spatial[g] * spatial_generators[g][i];
        return w;
    }
    [[nodiscard]] double temporal_omega(const Frequency& k) const {
        double w = 0.0;
        for (std::size_t g = 0; g < n_temporal(); ++g) w += k.temporal[g] * temporal_generators[g];
        return w;
    }

    /// Every frequency inside the cutoff, in lexicographic order.
    [[nodiscard]] std::vector<Frequency> enumerate(bool include_zero = true) const {
        const std::size_t ncoord = n_spatial() + n_temporal();
        std::vector<int> c(ncoord, -cutoff);
        std::vector<Frequency> out;
        for (;;) {
            Frequency k{{c.begin(), c.begin() + static_cast<long>(n_spatial())},
                        {c.begin() + static_cast<long>(n_spatial()), c.end()}};
            if (contains(k) && (include_zero || !k.is_zero())) out.push_back(std::move(k));
            std::size_t i = ncoord;
            while (i > 0) {
                --i;
                if (c[i] < cutoff) {
                    ++c[i];
                    break;
                }
                c[i] = -cutoff;
                if (i == 0) return out;
            }
        }
    }

    /// True when every generator is an integer multiple of 2 pi, i.e. every
    /// admissible function is (0,1)^N x (0,1)-periodic.
    [[nodiscard]] bool is_unit_periodic(double tol = 1e-12) const {
        auto integral = [tol](double v) {
            const double q = v / (2.0 * std::numbers::pi);
            return std::abs(q - std::round(q)) <= tol * std::max(1.0, std::abs(q));
        };
        for (const auto& g : spatial_generators)
            for (double v : g)
                if (!integral(v)) return false;
        return std::all_of(temporal_generators.begin(), temporal_generators.end(), integral);
    }
};

using ModulePtr = std::shared_ptr<const FrequencyModule>;

inline ModulePtr make_module(FrequencyModule m) {
    m.validate();
    return std::make_shared<const FrequencyModule>(std::move(m));
}

/// Derivative direction: a spatial coordinate (0-based) or the fast time.
struct Axis {
    enum class Kind { spatial, temporal } kind;
    std::size_t index = 0;
    static Axis spatial(std::size_t i) { return {Kind::spatial, i}; }
    static Axis temporal() { return {Kind::temporal, 0}; }
};

class TrigPoly {
public:
    using Coeffs = std::map<Frequency, cplx>;
    static constexpr double hermitian_tolerance = 1e-12;

    TrigPoly() = default;
    explicit TrigPoly(ModulePtr module) : module_(std::move(module)) { build_cache(); }

    /// Takes raw coefficients, checks Hermitian symmetry, then symmetrizes
    /// and prunes. Frequencies outside the cutoff are rejected.
    TrigPoly(ModulePtr module, Coeffs coeffs, double dropped_mass = 0.0)
        : module_(std::move(module)), coeffs_(std::move(coeffs)), dropped_mass_(dropped_mass) {
        for (const auto& [k, c] : coeffs_)
            if (!module_->contains(k)) throw InputError("trig polynomial frequency outside module cutoff");
        if (hermitian_defect() > hermitian_tolerance * std::max(1.0, max_abs_coeff()))
            throw InputError("coefficients are not Hermitian: the polynomial would not be real-valued");
        normalize();
        build_cache();
    }

    static TrigPoly constant(ModulePtr module, double value) {
        Coeffs c;
        c[module->zero()] = value;
        return TrigPoly(std::move(module), std::move(c));
    }
    /// amplitude * cos(omega_k . y + omega0_k tau)
    static TrigPoly cosine(ModulePtr module, const Frequency& k, double amplitude = 1.0) {
        if (k.is_zero()) return constant(std::move(module), amplitude);
        Coeffs c;
        c[k] += 0.5 * amplitude;
        c[-k] += 0.5 * amplitude;
        return TrigPoly(std::move(module), std::move(c));
    }
    /// amplitude * sin(omega_k . y + omega0_k tau)
    static TrigPoly sine(ModulePtr module, const Frequency& k, double amplitude = 1.0) {
        if (k.is_zero()) return TrigPoly(std::move(module));
        Coeffs c;
        c[k] += cplx(0.0, -0.5 * amplitude);
        c[-k] += cplx(0.0, 0.5 * amplitude);
        return TrigPoly(std::move(module), std::move(c));
    }

    [[nodiscard]] const FrequencyModule& module() const { return *module_; }
    [[nodiscard]] const ModulePtr& module_ptr() const { return module_; }
    [[nodiscard]] bool valid() const { return module_ != nullptr; }
    [[nodiscard]] const Coeffs& coeffs() const { return coeffs_; }
    [[nodiscard]] std::size_t size() const { return coeffs_.size(); }
    [[nodiscard]] bool is_zero() const { return coeffs_.empty(); }
    /// L2 mass of the coefficients discarded by the operation that produced this value.
    [[nodiscard]] double dropped_mass() const { return dropped_mass_; }

    [[nodiscard]] cplx coeff(const Frequency& k) const {
        auto it = coeffs_.find(k);
        return it == coeffs_.end() ? cplx{} : it->second;
    }

    /// max_k |c(-k) - conj(c(k))|
    [[nodiscard]] double hermitian_defect() const {
        double worst = 0.0;
        for (const auto& [k, c] : coeffs_) worst = std::max(worst, std::abs(coeff(-k) - std::conj(c)));
        return worst;
    }

    [[nodiscard]] double max_abs_coeff() const {
        double m = 0.0;
        for (const auto& [k, c] : coeffs_) m = std::max(m, std::abs(c));
        return m;
    }

    /// Upper bound of sup |u| (sum of coefficient magnitudes).
    [[nodiscard]] double sup_bound() const {
        double s = 0.0;
        for (const auto& [k, c] : coeffs_) s += std::abs(c);
        return s;
    }

    [[nodiscard]] bool depends_on_time() const {
        return std::any_of(coeffs_.begin(), coeffs_.end(),
                           [](const auto& kc) { return !kc.first.temporal_is_zero(); });
    }

    [[nodiscard]] double operator()(std::span<const double> y, double tau) const {
        assert(y.size() == module_->dim());
        const std::size_t n = y.size();
        double sum = constant_;
        for (std::size_t t = 0; t < cache_c_.size(); ++t) {
            double phase = cache_omega0_[t] * tau;
            for (std::size_t i = 0; i < n; ++i) phase += cache_omega_[t * n + i] * y[i];
            sum += cache_c_[t].real() * std::cos(phase) - cache_c_[t].imag() * std::sin(phase);
        }
        return sum;
    }

    friend TrigPoly operator+(const TrigPoly& u, const TrigPoly& v) { return combine(u, v, 1.0); }
    friend TrigPoly operator-(const TrigPoly& u, const TrigPoly& v) { return combine(u, v, -1.0); }
    friend TrigPoly operator*(double s, const TrigPoly& u) {
        Coeffs c;
        if (s != 0.0)
            for (const auto& [k, v] : u.coeffs_) c.emplace(k, s * v);
        return TrigPoly(u.module_, std::move(c), 0.0, Trusted{});
    }
    friend TrigPoly operator*(const TrigPoly& u, const TrigPoly& v);
    TrigPoly& operator+=(const TrigPoly& v) { return *this = *this + v; }

private:
    struct Trusted {};
    // Internal constructor for results of exact operations; symmetrizes and
    // prunes without the user-facing Hermitian check.
    TrigPoly(ModulePtr module, Coeffs coeffs, double dropped_mass, Trusted)
        : module_(std::move(module)), coeffs_(std::move(coeffs)), dropped_mass_(dropped_mass) {
        normalize();
        build_cache();
    }

    static void check_same(const TrigPoly& u, const TrigPoly& v) {
        if (!u.module_ || !v.module_) throw InputError("uninitialized trig polynomial");
        if (u.module_ != v.module_ && !(*u.module_ == *v.module_)) throw MismatchedModule();
    }

    static TrigPoly combine(const TrigPoly& u, const TrigPoly& v, double sign) {
        check_same(u, v);
        Coeffs c = u.coeffs_;
        for (const auto& [k, w] : v.coeffs_) c[k] += sign * w;
        return TrigPoly(u.module_, std::move(c), 0.0, Trusted{});
    }

    void normalize() {
        Coeffs sym;
        for (const auto& [k, c] : coeffs_) {
            const Frequency mk = -k;
            if (k == mk) {
                sym[k] = cplx(c.real(), 0.0);
            } else if (k < mk) {
                const cplx avg = 0.5 * (c + std::conj(coeff(mk)));
                sym[k] = avg;
                sym[mk] = std::conj(avg);
            } else if (coeffs_.find(mk) == coeffs_.end()) {
                const cplx avg = 0.5 * std::conj(c);
                sym[mk] = avg;
                sym[k] = std::conj(avg);
            }
        }
        const double prune = module_->prune_threshold;
        std::erase_if(sym, [prune](const auto& kc) { return std::abs(kc.second) < prune; });
        coeffs_ = std::move(sym);
    }

    void build_cache() {
        cache_omega_.clear();
        cache_omega0_.clear();
        cache_c_.clear();
        constant_ = 0.0;
        if (!module_) return;
        for (const auto& [k, c] : coeffs_) {
            if (k.is_zero()) {
                constant_ = c.real();
                continue;
            }
            if (!(k < -k)) continue;
            // c e^{i theta} + conj(c) e^{-i theta} = 2 Re(c e^{i theta})
            const auto w = module_->spatial_omega(k);
            cache_omega_.insert(cache_omega_.end(), w.begin(), w.end());
            cache_omega0_.push_back(module_->temporal_omega(k));
            cache_c_.push_back(2.0 * c);
        }
    }

    ModulePtr module_;
    Coeffs coeffs_;
    double dropped_mass_ = 0.0;
    double constant_ = 0.0;
    std::vector<double> cache_omega_;
    std::vector<double> cache_omega0_;
    std::vector<cplx> cache_c_;

    friend TrigPoly differentiate(const TrigPoly& u, Axis axis);
    friend TrigPoly spatial_mean(const TrigPoly& u);
};

inline TrigPoly operator*(const TrigPoly& u, const TrigPoly& v) {
    TrigPoly::check_same(u, v);
    const FrequencyModule& m = u.module();
    TrigPoly::Coeffs kept;
    TrigPoly::Coeffs dropped;
    for (const auto& [ka, ca] : u.coeffs_) {
        for (const auto& [kb, cb] : v.coeffs_) {
            Frequency k = ka + kb;
            if (m.contains(k))
                kept[std::move(k)] += ca * cb;
            else
                dropped[std::move(k)] += ca * cb;
        }
    }
    double mass = 0.0;
    for (const auto& [k, c] : dropped) mass += std::norm(c);
    return TrigPoly(u.module_, std::move(kept), std::sqrt(mass), TrigPoly::Trusted{});
}

inline double tp_eval(const TrigPoly& u, std::span<const double> y, double tau) { return u(y, tau); }
inline TrigPoly tp_mul(const TrigPoly& u, const TrigPoly& v) { return u * v; }

/// Mean value M(u): the zero-frequency coefficient.
inline double mean_value(const TrigPoly& u) {
    if (!u.valid()) return 0.0;
    return u.coeff(u.module().zero()).real();
}

/// M_y(u): the part of u whose spatial frequency coordinates all vanish.
inline TrigPoly spatial_mean(const TrigPoly& u) {
    TrigPoly::Coeffs c;
    for (const auto& [k, v] : u.coeffs())
        if (k.spatial_is_zero()) c.emplace(k, v);
    return TrigPoly(u.module_ptr(), std::move(c), 0.0, TrigPoly::Trusted{});
}

inline TrigPoly differentiate(const TrigPoly& u, Axis axis) {
    const FrequencyModule& m = u.module();
    if (axis.kind == Axis::Kind::spatial && axis.index >= m.dim())
        throw InputError("spatial derivative index out of range");
    TrigPoly::Coeffs c;
    for (const auto& [k, v] : u.coeffs()) {
        const double w = axis.kind == Axis::Kind::temporal ? m.temporal_omega(k) : m.spatial_omega(k)[axis.index];
        if (w != 0.0) c.emplace(k, cplx(0.0, w) * v);
    }
    return TrigPoly(u.module_ptr(), std::move(c), 0.0, TrigPoly::Trusted{});
}

inline std::vector<TrigPoly> gradient(const TrigPoly& u) {
    std::vector<TrigPoly> g;
    for (std::size_t i = 0; i < u.module().dim(); ++i) g.push_back(differentiate(u, Axis::spatial(i)));
    return g;
}

inline TrigPoly divergence(const std::vector<TrigPoly>& field) {
    if (field.empty()) throw InputError("divergence of an empty field");
    TrigPoly out(field.front().module_ptr());
    for (std::size_t i = 0; i < field.size(); ++i) out += differentiate(field[i], Axis::spatial(i));
    return out;
}

inline TrigPoly laplacian(const TrigPoly& u) { return divergence(gradient(u)); }

struct NormEstimate {
    double value = 0.0;
    double box = 0.0;  // side length of the sampling box [0, box]^{N+1}
    std::size_t samples = 0;
};

/// Quadrature estimate of M(|u|^p)^{1/p} over [0, box]^{N+1}, using a
/// Kronecker (Weyl) low-discrepancy sequence.
inline NormEstimate besicovitch_norm_estimate(const TrigPoly& u, double p, double box = 1000.0,
                                              std::size_t samples = std::size_t{1} << 18) {
    if (p < 1.0) throw InputError("Besicovitch exponent must be >= 1");
    const std::size_t n = u.module().dim();
    // Square roots of the first primes as irrational increments.
    static constexpr std::array<double, 8> primes{2, 3, 5, 7, 11, 13, 17, 19};
    if (n + 1 > primes.size()) throw InputError("dimension too large for the sampler");
    std::vector<double> y(n);
    double acc = 0.0;
    for (std::size_t s = 1; s <= samples; ++s) {
        for (std::size_t i = 0; i < n; ++i) y[i] = box * std::fmod(s * std::sqrt(primes[i]), 1.0);
        const double tau = box * std::fmod(s * std::sqrt(primes[n]), 1.0);
        acc += std::pow(std::abs(u(y, tau)), p);
    }
    return {std::pow(acc / static_cast<double>(samples), 1.0 / p), box, samples};
}

/// ||u||_p. Exact (Parseval) for p = 2, quadrature estimate otherwise.
inline double besicovitch_norm(const TrigPoly& u, double p) {
    if (p < 1.0) throw InputError("Besicovitch exponent must be >= 1");
    if (u.is_zero()) return 0.0;
    if (p == 2.0) {
        double s = 0.0;
        for (const auto& [k, c] : u.coeffs()) s += std::norm(c);
        return std::sqrt(s);
    }
    return besicovitch_norm_estimate(u, p).value;
}

namespace detail {

/// (1/2R) int_{-R}^{R} e^{i w s} ds by composite 5-point Gauss-Legendre.
inline cplx box_average_exp(double w, double R) {
    static constexpr std::array<double, 5> x{0.0, -0.5384693101056831, 0.5384693101056831,
                                             -0.9061798459386640, 0.9061798459386640};
    static constexpr std::array<double, 5> wt{0.5688888888888889, 0.4786286704993665,
                                              0.4786286704993665, 0.2369268850561891,
                                              0.2369268850561891};
    const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil(std::abs(w) * 2.0 * R / std::numbers::pi)));
    const double width = 2.0 * R / static_cast<double>(panels);
    cplx sum{};
    for (std::size_t p = 0; p < panels; ++p) {
        const double mid = -R + (static_cast<double>(p) + 0.5) * width;
        for (std::size_t q = 0; q < x.size(); ++q) {
            const double s = mid + 0.5 * width * x[q];
            sum += wt[q] * cplx(std::cos(w * s), std::sin(w * s));
        }
    }
    return sum * (0.5 * width) / (2.0 * R);
}

}  // namespace detail

/// Box average of u over [-R,R]^N x [-R,R] by numerical quadrature. Each
/// exponential factorizes over the axes, so the quadrature is done per axis.
inline double empirical_mean(const TrigPoly& u, double R) {
    if (!(R > 0.0)) throw InputError("empirical_mean requires R > 0");
    const FrequencyModule& m = u.module();
    cplx total{};
    for (const auto& [k, c] : u.coeffs()) {
        cplx term = c;
        for (double w : m.spatial_omega(k)) term *= detail::box_average_exp(w, R);
        term *= detail::box_average_exp(m.temporal_omega(k), R);
        total += term;
    }
    return total.real();
}

}  // namespace homog

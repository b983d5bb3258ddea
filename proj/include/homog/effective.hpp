#pragma once

// Homogenized model: tensor b and the tabulated scalar functionals
//   F1(r) = M(a D_y w1(r)),  F2(r) = M(d_u g(r) chi),  F3(r) = M(d_u g(r) w1(r)),
//   Mtilde(r) = M(M(., ., r)).

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/corrector.hpp"
#include "homog/errors.hpp"
#include "homog/profile.hpp"
#include "homog/trig_poly.hpp"

namespace homog {

struct NoiseTerm {
    struct Term {
        TrigPoly mu;
        ScalarProfile sigma;
    };
    // channels[l] = terms of M_l(y,tau,u) = sum mu(y,tau) sigma(u)
    std::vector<std::vector<Term>> channels;
    double K = 1.0;

    [[nodiscard]] std::size_t size() const { return channels.size(); }
    [[nodiscard]] bool empty() const { return channels.empty(); }

    [[nodiscard]] double value(std::size_t l, std::span<const double> y, double tau, double u) const {
        double s = 0.0;
        for (const auto& t : channels[l]) s += t.mu(y, tau) * t.sigma(u);
        return s;
    }
    [[nodiscard]] double du(std::size_t l, std::span<const double> y, double tau, double u) const {
        double s = 0.0;
        for (const auto& t : channels[l]) s += t.mu(y, tau) * t.sigma.derivative(u);
        return s;
    }

    /// Sampled growth and Lipschitz bounds; throws AssumptionViolation("A5", ...).
    void validate(std::size_t dim, std::size_t samples = 1000, double box = 100.0,
                  std::uint64_t seed = 0xa5a5) const {
        if (!(K > 0.0)) throw AssumptionViolation("A5", "noise constant K must be positive");
        for (const auto& ch : channels)
            for (const auto& t : ch)
                if (!t.mu.valid()) throw ConfigError("noise factor is not initialized");
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> pos(0.0, box);
        std::normal_distribution<double> amp(0.0, 3.0);
        std::vector<double> y(dim);
        for (std::size_t s = 0; s < samples; ++s) {
            for (auto& v : y) v = pos(rng);
            const double tau = pos(rng);
            const double u = amp(rng);
            double at_zero = 0.0;
            double total = 0.0;
            for (std::size_t l = 0; l < size(); ++l) {
                const double m0 = value(l, y, tau, 0.0);
                const double mu = value(l, y, tau, u);
                at_zero += m0 * m0;
                total += mu * mu;
                const double lip = std::abs(du(l, y, tau, u));
                if (lip > K)
                    throw AssumptionViolation("A5", "channel " + std::to_string(l + 1) + " has sampled |d_u M| = " +
                                                        std::to_string(lip) + " > K = " + std::to_string(K));
            }
            if (at_zero > K)
                throw AssumptionViolation("A5", "sum |M_l(y,tau,0)|^2 = " + std::to_string(at_zero) + " exceeds K");
            if (total > K * (1.0 + u * u) * (1.0 + 1e-12))
                throw AssumptionViolation("A5", "sum |M_l|^2 exceeds K (1 + |u|^2) at u = " + std::to_string(u));
        }
    }
};

/// b_ij = M( sum_k a_ik (delta_kj + d chi_j / d y_k) )
inline Eigen::MatrixXd homogenized_tensor(const CoefficientField& f, const std::vector<TrigPoly>& chi) {
    const std::size_t n = f.dim();
    if (chi.size() != n) throw InputError("corrector count does not match the dimension");
    Eigen::MatrixXd b(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto dchi = gradient(chi[j]);
        for (std::size_t i = 0; i < n; ++i) {
            double s = mean_value(f.a[i][j]);
            for (std::size_t k = 0; k < n; ++k) s += mean_value(f.a[i][k] * dchi[k]);
            b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
        }
    }
    return b;
}

struct Functionals {
    std::vector<double> F1;
    std::vector<double> F2;
    double F3 = 0.0;
};

inline Functionals effective_functionals(const CoefficientField& f, const ReactionTerm& g, const CellSolution& cells,
                                         double r) {
    const std::size_t n = f.dim();
    const ModulePtr& module = f.module_ptr();
    Functionals out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0.0};
    if (g.empty()) return out;
    const TrigPoly w1 = cells.w1(r);
    const TrigPoly dg = g.du_at(module, r);
    const auto dw = gradient(w1);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += mean_value(f.a[i][k] * dw[k]);
        out.F1[i] = s;
        out.F2[i] = mean_value(dg * cells.chi[i]);
    }
    out.F3 = mean_value(dg * w1);
    return out;
}

/// Channel-wise mean value of M(., ., r).
inline std::vector<double> effective_noise(const NoiseTerm& noise, double r) {
    std::vector<double> out(noise.size(), 0.0);
    for (std::size_t l = 0; l < noise.size(); ++l)
        for (const auto& t : noise.channels[l]) out[l] += mean_value(t.mu) * t.sigma(r);
    return out;
}

struct TableLipschitz {
    double F1 = 0.0;
    double F2 = 0.0;
    double F3 = 0.0;
    double Mtilde = 0.0;
};

/// Tabulated homogenized model with piecewise-linear interpolation. Queries
/// outside the grid clamp to the end values and bump a shared counter.
class EffectiveModel {
public:
    struct Lookup {
        std::size_t lo = 0;
        double w = 0.0;  // weight of lo + 1
    };

    EffectiveModel() : out_of_range_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}

    Eigen::MatrixXd b;
    std::vector<double> r_grid;
    std::vector<double> F1;      // points x N
    std::vector<double> F2;      // points x N
    std::vector<double> F3;      // points
    std::vector<double> Mtilde;  // points x m
    std::size_t dim = 1;
    std::size_t channels = 0;
    TableLipschitz lipschitz;
    double F2_bound = 0.0;

    // provenance
    int cutoff = 0;
    std::size_t galerkin_dim = 0;
    double max_cell_residual = 0.0;
    double rcond = 0.0;

    [[nodiscard]] std::size_t points() const { return r_grid.size(); }

    [[nodiscard]] Lookup locate(double r) const {
        const std::size_t n = r_grid.size();
        if (n == 1) return {0, 0.0};
        if (!(r >= r_grid.front())) {
            out_of_range_->fetch_add(1, std::memory_order_relaxed);
            return {0, 0.0};
        }
        if (r > r_grid.back()) {
            out_of_range_->fetch_add(1, std::memory_order_relaxed);
            return {n - 2, 1.0};
        }
        const double h = (r_grid.back() - r_grid.front()) / static_cast<double>(n - 1);
        auto lo = static_cast<std::size_t>((r - r_grid.front()) / h);
        lo = std::min(lo, n - 2);
        if (r < r_grid[lo] && lo > 0) --lo;
        if (r > r_grid[lo + 1] && lo + 2 < n) ++lo;
        const double w = (r - r_grid[lo]) / (r_grid[lo + 1] - r_grid[lo]);
        return {lo, w};
    }

    [[nodiscard]] double f1(const Lookup& q, std::size_t i) const { return lerp(F1, q, dim, i); }
    [[nodiscard]] double f2(const Lookup& q, std::size_t i) const { return lerp(F2, q, dim, i); }
    [[nodiscard]] double f3(const Lookup& q) const { return lerp(F3, q, 1, 0); }
    [[nodiscard]] double mtilde(const Lookup& q, std::size_t l) const { return lerp(Mtilde, q, channels, l); }

    [[nodiscard]] Functionals functionals(double r) const {
        const auto q = locate(r);
        Functionals out{std::vector<double>(dim), std::vector<double>(dim), f3(q)};
        for (std::size_t i = 0; i < dim; ++i) {
            out.F1[i] = f1(q, i);
            out.F2[i] = f2(q, i);
        }
        return out;
    }

    [[nodiscard]] std::uint64_t out_of_range_count() const { return out_of_range_->load(); }
    void reset_out_of_range() const { out_of_range_->store(0); }

    /// Recomputes the Lipschitz estimates and the F2 bound from the tables.
    void refresh_estimates() {
        lipschitz = {};
        F2_bound = 0.0;
        for (std::size_t p = 0; p + 1 < points(); ++p) {
            const double h = r_grid[p + 1] - r_grid[p];
            for (std::size_t i = 0; i < dim; ++i) {
                lipschitz.F1 = std::max(lipschitz.F1, std::abs(F1[(p + 1) * dim + i] - F1[p * dim + i]) / h);
                lipschitz.F2 = std::max(lipschitz.F2, std::abs(F2[(p + 1) * dim + i] - F2[p * dim + i]) / h);
            }
            lipschitz.F3 = std::max(lipschitz.F3, std::abs(F3[p + 1] - F3[p]) / h);
            for (std::size_t l = 0; l < channels; ++l)
                lipschitz.Mtilde =
                    std::max(lipschitz.Mtilde, std::abs(Mtilde[(p + 1) * channels + l] - Mtilde[p * channels + l]) / h);
        }
        for (double v : F2) F2_bound = std::max(F2_bound, std::abs(v));
    }

private:
    static double lerp(const std::vector<double>& t, const Lookup& q, std::size_t stride, std::size_t i) {
        const double a = t[q.lo * stride + i];
        if (q.w == 0.0) return a;
        const double b = t[(q.lo + 1) * stride + i];
        return (1.0 - q.w) * a + q.w * b;
    }

    std::shared_ptr<std::atomic<std::uint64_t>> out_of_range_;
};

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
    std::vector<double> g(points);
    for (std::size_t p = 0; p < points; ++p)
        g[p] = p + 1 == points ? hi : lo + (hi - lo) * static_cast<double>(p) / static_cast<double>(points - 1);
    return g;
}

inline EffectiveModel tabulate(const CoefficientField& f, const ReactionTerm& g, const NoiseTerm& noise,
                               const CellSolution& cells, double r_min, double r_max, std::size_t points) {
    if (!(r_min < r_max)) throw InputError("tabulation range must satisfy r_min < r_max");
    if (points < 9) throw InputError("tabulation needs at least 9 points");
    EffectiveModel m;
    m.dim = f.dim();
    m.channels = noise.size();
    m.b = homogenized_tensor(f, cells.chi);
    m.r_grid = uniform_grid(r_min, r_max, points);
    m.F1.resize(points * m.dim);
    m.F2.resize(points * m.dim);
    m.F3.resize(points);
    m.Mtilde.resize(points * m.channels);
    for (std::size_t p = 0; p < points; ++p) {
        const double r = m.r_grid[p];
        const Functionals fn = effective_functionals(f, g, cells, r);
        for (std::size_t i = 0; i < m.dim; ++i) {
            m.F1[p * m.dim + i] = fn.F1[i];
            m.F2[p * m.dim + i] = fn.F2[i];
        }
        m.F3[p] = fn.F3;
        const auto mt = effective_noise(noise, r);
        for (std::size_t l = 0; l < m.channels; ++l) m.Mtilde[p * m.channels + l] = mt[l];
    }
    m.refresh_estimates();
    m.cutoff = f.module_ptr()->cutoff;
    m.galerkin_dim = cells.galerkin_dim;
    m.max_cell_residual = cells.max_residual();
    m.rcond = cells.rcond;
    return m;
}

}  // namespace homog

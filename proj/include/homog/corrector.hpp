#pragma once

// Reaction term g(y,tau,u) = sum_i gamma_i(y,tau) sigma_i(u) and its
// divergence-form potential G = D_y R with Delta_y R = g, M_y(R) = 0.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "homog/errors.hpp"
#include "homog/profile.hpp"
#include "homog/trig_poly.hpp"

namespace homog {

struct ReactionTerm {
    struct Term {
        TrigPoly gamma;
        ScalarProfile sigma;
    };
    std::vector<Term> terms;

    [[nodiscard]] bool empty() const { return terms.empty(); }

    [[nodiscard]] double value(std::span<const double> y, double tau, double u) const {
        double s = 0.0;
        for (const auto& t : terms) s += t.gamma(y, tau) * t.sigma(u);
        return s;
    }
    [[nodiscard]] double du(std::span<const double> y, double tau, double u) const {
        double s = 0.0;
        for (const auto& t : terms) s += t.gamma(y, tau) * t.sigma.derivative(u);
        return s;
    }

    /// g(., ., r) as a trig polynomial.
    [[nodiscard]] TrigPoly at(const ModulePtr& module, double r) const {
        TrigPoly out(module);
        for (const auto& t : terms) out += t.sigma(r) * t.gamma;
        return out;
    }
    /// d_u g(., ., r) as a trig polynomial.
    [[nodiscard]] TrigPoly du_at(const ModulePtr& module, double r) const {
        TrigPoly out(module);
        for (const auto& t : terms) out += t.sigma.derivative(r) * t.gamma;
        return out;
    }

    /// sup_u |d_u g| bound: sum_i sup|gamma_i| * Lip(sigma_i).
    [[nodiscard]] double derivative_bound() const {
        double c = 0.0;
        for (const auto& t : terms) c += t.gamma.sup_bound() * t.sigma.lipschitz();
        return c;
    }

    /// Checks the centring, g(.,.,0) = 0 and Lipschitz clauses; throws
    /// AssumptionViolation naming the clause.
    void validate() const {
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const auto& t = terms[i];
            const std::string name = "gamma_" + std::to_string(i + 1);
            if (!t.gamma.valid()) throw ConfigError(name + " is not initialized");
            if (!t.sigma.vanishes_at_zero())
                throw AssumptionViolation("A3", "profile of " + name + " does not vanish at u = 0 (g(y,tau,0) != 0)");
            if (!std::isfinite(t.sigma.lipschitz()))
                throw AssumptionViolation("A2", "profile of " + name + " has unbounded derivative");
            const TrigPoly sm = spatial_mean(t.gamma);
            if (!sm.is_zero())
                throw AssumptionViolation("A4", "spatial mean of " + name + " is nonzero (norm " +
                                                    std::to_string(besicovitch_norm(sm, 2.0)) + ")");
            for (const auto& [k, c] : t.gamma.coeffs()) {
                double w2 = 0.0;
                for (double w : t.gamma.module().spatial_omega(k)) w2 += w * w;
                if (w2 == 0.0)
                    throw AssumptionViolation("A4", name + " has a frequency with zero spatial part");
            }
        }
    }
};

/// Solves Delta_y R = gamma with M_y(R) = 0, coefficient-wise:
/// R(k) = -gamma(k) / |omega(k)|^2.
inline TrigPoly solve_poisson(const TrigPoly& gamma) {
    const FrequencyModule& m = gamma.module();
    TrigPoly::Coeffs c;
    for (const auto& [k, v] : gamma.coeffs()) {
        double w2 = 0.0;
        for (double w : m.spatial_omega(k)) w2 += w * w;
        if (k.spatial_is_zero() || w2 == 0.0)
            throw ZeroSpatialFrequency("Poisson inversion undefined: right side has a frequency with zero spatial part");
        c.emplace(k, -v / w2);
    }
    return TrigPoly(gamma.module_ptr(), std::move(c));
}

/// G(y,tau,u) = sum_i P_i(y,tau) sigma_i(u), P_i = D_y R_i.
struct CorrectorG {
    struct Term {
        std::vector<TrigPoly> P;
        std::vector<TrigPoly> P_div;  // div_y of each P_i, kept for evaluation
        ScalarProfile sigma;
    };
    std::vector<Term> terms;
    double bound = 0.0;  // C_G with |G(y,tau,u)| <= C_G |u|
    std::size_t dim = 0;

    [[nodiscard]] std::vector<double> value(std::span<const double> y, double tau, double u) const {
        std::vector<double> out(dim, 0.0);
        for (const auto& t : terms) {
            const double s = t.sigma(u);
            for (std::size_t i = 0; i < dim; ++i) out[i] += t.P[i](y, tau) * s;
        }
        return out;
    }
    [[nodiscard]] std::vector<double> du(std::span<const double> y, double tau, double u) const {
        std::vector<double> out(dim, 0.0);
        for (const auto& t : terms) {
            const double s = t.sigma.derivative(u);
            for (std::size_t i = 0; i < dim; ++i) out[i] += t.P[i](y, tau) * s;
        }
        return out;
    }
    /// div_y G(y,tau,u), evaluated from the exact derivatives of P_i.
    [[nodiscard]] double divergence(std::span<const double> y, double tau, double u) const {
        double s = 0.0;
        for (const auto& t : terms)
            for (const auto& d : t.P_div) s += d(y, tau) * t.sigma(u);
        return s;
    }
};

inline CorrectorG build_G(const ReactionTerm& g, std::size_t dim) {
    CorrectorG G;
    G.dim = dim;
    for (const auto& t : g.terms) {
        const TrigPoly R = solve_poisson(t.gamma);
        CorrectorG::Term term;
        term.P = gradient(R);
        for (std::size_t i = 0; i < term.P.size(); ++i)
            term.P_div.push_back(differentiate(term.P[i], Axis::spatial(i)));
        double sq = 0.0;
        for (const auto& p : term.P) sq += p.sup_bound() * p.sup_bound();
        G.bound += std::sqrt(sq) * t.sigma.lipschitz();
        term.sigma = t.sigma;
        G.terms.push_back(std::move(term));
    }
    return G;
}

/// Smooth macroscopic field with analytic gradient.
struct TestField {
    std::function<double(std::span<const double> x, double t)> value;
    std::function<std::vector<double>(std::span<const double> x, double t)> gradient;
};

struct SamplePoint {
    std::vector<double> x;
    double t = 0.0;
};

/// max over points of | (1/eps) g(x/eps, t/eps^2, u) - [div_x G(x/eps, t/eps^2, u) - d_u G . Du] |,
/// with div_x G expanded by the chain rule as (1/eps) div_y G + d_u G . Du.
inline double reaction_identity_check(const ReactionTerm& g, const CorrectorG& G, double eps, const TestField& u,
                                      std::span<const SamplePoint> points) {
    if (!(eps > 0.0)) throw InputError("reaction_identity_check requires eps > 0");
    double worst = 0.0;
    std::vector<double> y;
    for (const auto& p : points) {
        y.assign(p.x.begin(), p.x.end());
        for (double& v : y) v /= eps;
        const double tau = p.t / (eps * eps);
        const double uv = u.value(p.x, p.t);
        const auto du = u.gradient(p.x, p.t);
        const double lhs = g.value(y, tau, uv) / eps;
        const auto duG = G.du(y, tau, uv);
        double chain = 0.0;
        for (std::size_t i = 0; i < du.size(); ++i) chain += duG[i] * du[i];
        const double div_x = G.divergence(y, tau, uv) / eps + chain;
        const double rhs = div_x - chain;
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

}  // namespace homog

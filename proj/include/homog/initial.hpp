#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "homog/errors.hpp"

namespace homog {

/// Closed-form initial data: a sum of products of per-axis factors, each
/// either sin(k pi x_axis) or a polynomial in x_axis.
struct InitialCondition {
    struct Factor {
        enum class Kind { sine, polynomial } kind = Kind::sine;
        std::size_t axis = 0;
        int k = 1;                  // sine mode
        std::vector<double> coeffs; // polynomial coefficients, lowest degree first
    };
    struct Term {
        double coef = 1.0;
        std::vector<Factor> factors;
    };
    std::vector<Term> terms;

    static InitialCondition zero() { return {}; }
    static InitialCondition sine_mode(double amplitude, std::size_t dim, int k = 1) {
        Term t{amplitude, {}};
        for (std::size_t d = 0; d < dim; ++d) t.factors.push_back({Factor::Kind::sine, d, k, {}});
        return {{t}};
    }

    [[nodiscard]] double value(std::span<const double> x) const {
        double s = 0.0;
        for (const auto& t : terms) {
            double p = t.coef;
            for (const auto& f : t.factors) p *= factor_value(f, x[f.axis]);
            s += p;
        }
        return s;
    }

    [[nodiscard]] std::vector<double> gradient(std::span<const double> x) const {
        std::vector<double> g(x.size(), 0.0);
        for (const auto& t : terms) {
            for (std::size_t d = 0; d < x.size(); ++d) {
                // product rule over the factors acting on axis d
                double sum = 0.0;
                for (std::size_t a = 0; a < t.factors.size(); ++a) {
                    if (t.factors[a].axis != d) continue;
                    double p = t.coef * factor_derivative(t.factors[a], x[d]);
                    for (std::size_t b = 0; b < t.factors.size(); ++b)
                        if (b != a) p *= factor_value(t.factors[b], x[t.factors[b].axis]);
                    sum += p;
                }
                g[d] += sum;
            }
        }
        return g;
    }

    /// max |u0| sampled on a uniform lattice over [0,1]^dim.
    [[nodiscard]] double sampled_sup(std::size_t dim) const {
        const std::size_t n = dim <= 2 ? 129 : 33;
        std::size_t total = 1;
        for (std::size_t d = 0; d < dim; ++d) total *= n;
        std::vector<double> x(dim);
        double sup = 0.0;
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::size_t r = idx;
            for (std::size_t d = 0; d < dim; ++d, r /= n) x[d] = static_cast<double>(r % n) / static_cast<double>(n - 1);
            sup = std::max(sup, std::abs(value(x)));
        }
        return sup;
    }

    /// Rejects data that does not vanish on the boundary of (0,1)^dim.
    void validate(std::size_t dim) const {
        for (const auto& t : terms)
            for (const auto& f : t.factors)
                if (f.axis >= dim) throw ConfigError("initial condition factor refers to a missing axis");
        std::vector<double> x(dim);
        constexpr int samples = 33;
        for (std::size_t d = 0; d < dim; ++d) {
            for (double side : {0.0, 1.0}) {
                for (int s = 0; s < (dim == 1 ? 1 : samples); ++s) {
                    for (std::size_t e = 0; e < dim; ++e) x[e] = static_cast<double>(s) / (samples - 1);
                    x[d] = side;
                    if (std::abs(value(x)) > 1e-12)
                        throw ConfigError("initial condition does not vanish on the boundary");
                }
            }
        }
    }

private:
    static double factor_value(const Factor& f, double x) {
        if (f.kind == Factor::Kind::sine) {
            // exact zeros at the ends of (0,1)
            if (x == 0.0 || x == 1.0) return 0.0;
            return std::sin(f.k * std::numbers::pi * x);
        }
        double v = 0.0;
        for (auto it = f.coeffs.rbegin(); it != f.coeffs.rend(); ++it) v = v * x + *it;
        return v;
    }
    static double factor_derivative(const Factor& f, double x) {
        if (f.kind == Factor::Kind::sine) return f.k * std::numbers::pi * std::cos(f.k * std::numbers::pi * x);
        double v = 0.0;
        for (std::size_t i = f.coeffs.size(); i-- > 1;) v = v * x + static_cast<double>(i) * f.coeffs[i];
        return v;
    }
};

}  // namespace homog

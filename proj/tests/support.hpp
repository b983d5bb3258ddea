#pragma once

// Small builders shared by the test binaries.

#include <cmath>
#include <numbers>
#include <vector>

#include "homog/trig_poly.hpp"

namespace homog::test {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Unit-periodic module on (0,1)^dim x (0,1): generators 2 pi e_i and 2 pi.
inline ModulePtr periodic_module(std::size_t dim, int cutoff) {
    FrequencyModule m;
    for (std::size_t i = 0; i < dim; ++i) {
        std::vector<double> g(dim, 0.0);
        g[i] = two_pi;
        m.spatial_generators.push_back(g);
    }
    m.temporal_generators = {two_pi};
    m.cutoff = cutoff;
    return make_module(m);
}

inline Frequency freq(std::vector<int> s, std::vector<int> t) { return {std::move(s), std::move(t)}; }

inline bool same_poly(const TrigPoly& a, const TrigPoly& b, double tol) {
    for (const auto& [k, c] : a.coeffs())
        if (std::abs(c - b.coeff(k)) > tol) return false;
    for (const auto& [k, c] : b.coeffs())
        if (std::abs(c - a.coeff(k)) > tol) return false;
    return true;
}

/// Midpoint rule for 1 / M(1/a) on one period, independent of the library.
template <typename Fn>
double harmonic_mean(Fn a, std::size_t points = 1 << 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < points; ++i) s += 1.0 / a((static_cast<double>(i) + 0.5) / static_cast<double>(points));
    return static_cast<double>(points) / s;
}

}  // namespace homog::test

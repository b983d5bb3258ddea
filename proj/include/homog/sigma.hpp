#pragma once

// Numerical Sigma-convergence tests: weak pairings against oscillating test
// functions, the norm condition for strong convergence, products, and the
// identification of the two-scale gradient limit Du0 + D_y u1 with
// u1 = chi.Du0 + w1(., ., u0).

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/errors.hpp"
#include "homog/spde.hpp"
#include "homog/trig_poly.hpp"

namespace homog {

/// Smooth closed-form factor f0(x,t) with its spatial gradient.
struct MacroFactor {
    std::string name = "one";
    std::function<double(std::span<const double>, double)> value = [](std::span<const double>, double) {
        return 1.0;
    };
    std::function<std::vector<double>(std::span<const double>, double)> gradient =
        [](std::span<const double> x, double) { return std::vector<double>(x.size(), 0.0); };

    static MacroFactor constant(double c) {
        MacroFactor f;
        f.name = "const";
        f.value = [c](std::span<const double>, double) { return c; };
        return f;
    }
    /// exp(x_1 + ... + x_d) (1 + t)
    static MacroFactor exponential() {
        MacroFactor f;
        f.name = "exp";
        f.value = [](std::span<const double> x, double t) {
            double s = 0.0;
            for (double v : x) s += v;
            return std::exp(s) * (1.0 + t);
        };
        f.gradient = [](std::span<const double> x, double t) {
            double s = 0.0;
            for (double v : x) s += v;
            return std::vector<double>(x.size(), std::exp(s) * (1.0 + t));
        };
        return f;
    }
    /// prod_i sin(k pi x_i)
    static MacroFactor sine(int k = 1) {
        MacroFactor f;
        f.name = "sine";
        const double w = k * std::numbers::pi;
        f.value = [w](std::span<const double> x, double) {
            double p = 1.0;
            for (double v : x) p *= std::sin(w * v);
            return p;
        };
        f.gradient = [w](std::span<const double> x, double) {
            std::vector<double> g(x.size(), w);
            for (std::size_t i = 0; i < x.size(); ++i)
                for (std::size_t j = 0; j < x.size(); ++j)
                    g[i] *= i == j ? std::cos(w * x[j]) : std::sin(w * x[j]);
            return g;
        };
        return f;
    }
};

/// f(x,t,y,tau,omega) = weight(omega) f0(x,t) phi(y,tau).
struct TestFunction {
    MacroFactor macro;
    TrigPoly micro;
    std::vector<double> weights;  // per sample; empty means 1

    [[nodiscard]] double weight(std::size_t s) const { return weights.empty() ? 1.0 : weights.at(s); }
};

/// f0(x,t) Phi(y,tau) with a vector micro part, paired against gradients.
struct VectorTestFunction {
    MacroFactor macro;
    std::vector<TrigPoly> micro;
};

struct PairingResult {
    double mean = 0.0;
    double std_error = 0.0;  // Monte Carlo standard error, 0 for a single sample
};

/// Closed-form field sampled on the snapshot grid.
inline Trajectory synthetic_trajectory(const DomainSpec& d, std::size_t snapshots,
                                       const std::function<double(std::span<const double>, double)>& u) {
    d.validate();
    if (snapshots < 2) throw InputError("synthetic trajectory needs at least 2 snapshots");
    Trajectory tr;
    tr.domain = d;
    for (std::size_t s = 0; s < snapshots; ++s) {
        const double t = d.T * static_cast<double>(s) / static_cast<double>(snapshots - 1);
        tr.times.push_back(t);
        std::vector<double> f(d.node_count());
        for (std::size_t q = 0; q < f.size(); ++q) f[q] = u(d.coord(q), t);
        tr.fields.push_back(std::move(f));
    }
    return tr;
}

inline Trajectory product_trajectory(const Trajectory& a, const Trajectory& b) {
    if (a.fields.size() != b.fields.size() || !(a.domain == b.domain))
        throw InputError("trajectories are not on the same space-time grid");
    Trajectory p = a;
    for (std::size_t s = 0; s < p.fields.size(); ++s)
        for (std::size_t q = 0; q < p.fields[s].size(); ++q) p.fields[s][q] *= b.fields[s][q];
    return p;
}

namespace detail {

inline double trapezoid_weight(std::size_t i, std::size_t n) { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; }

inline std::vector<double> time_weights(const std::vector<double>& times) {
    const std::size_t S = times.size();
    std::vector<double> w(S, 0.0);
    for (std::size_t s = 0; s + 1 < S; ++s) {
        const double dt = times[s + 1] - times[s];
        w[s] += 0.5 * dt;
        w[s + 1] += 0.5 * dt;
    }
    return w;
}

/// Trapezoid weights with the t = 0 value replaced by the linear
/// extrapolation 2 f(t1) - f(t2). Gradients of u_eps have an initial layer of
/// width O(eps^2) that no snapshot grid resolves; this takes the value at 0+.
inline std::vector<double> time_weights_after_layer(const std::vector<double>& times) {
    std::vector<double> w = time_weights(times);
    if (w.size() < 3) return w;
    w[1] += 2.0 * w[0];
    w[2] -= w[0];
    w[0] = 0.0;
    return w;
}

inline std::vector<double> space_weights(const DomainSpec& d) {
    std::vector<double> w(d.node_count());
    const std::size_t n = d.per_axis();
    const double h = d.h();
    for (std::size_t q = 0; q < w.size(); ++q) {
        double v = h * trapezoid_weight(q % n, n);
        if (d.dim == 2) v *= h * trapezoid_weight(q / n, n);
        w[q] = v;
    }
    return w;
}

inline PairingResult summarize(const std::vector<double>& values) {
    PairingResult r;
    const auto n = static_cast<double>(values.size());
    if (values.empty()) return r;
    for (double v : values) r.mean += v;
    r.mean /= n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - r.mean) * (v - r.mean);
        r.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return r;
}

/// int_{Q_T} u f0 phi(x/eps, t/eps^2) for one trajectory.
inline double pair_one(const Trajectory& tr, double eps, const TestFunction& f) {
    if (f.micro.is_zero()) return 0.0;
    const auto tw = time_weights(tr.times);
    const auto sw = space_weights(tr.domain);
    const bool moving = f.micro.depends_on_time();
    std::vector<std::vector<double>> x(sw.size()), y(sw.size());
    for (std::size_t q = 0; q < sw.size(); ++q) {
        x[q] = tr.domain.coord(q);
        y[q] = x[q];
        for (double& v : y[q]) v /= eps;
    }
    std::vector<double> phi(sw.size());
    if (!moving)
        for (std::size_t q = 0; q < sw.size(); ++q) phi[q] = f.micro(y[q], 0.0);
    double total = 0.0;
    for (std::size_t s = 0; s < tr.fields.size(); ++s) {
        const double t = tr.times[s];
        if (moving)
            for (std::size_t q = 0; q < sw.size(); ++q) phi[q] = f.micro(y[q], t / (eps * eps));
        double inner = 0.0;
        for (std::size_t q = 0; q < sw.size(); ++q) inner += sw[q] * tr.fields[s][q] * f.macro.value(x[q], t) * phi[q];
        total += tw[s] * inner;
    }
    return total;
}

}  // namespace detail

/// Monte Carlo average of int u_eps f0 phi(x/eps, t/eps^2) weight.
inline PairingResult weak_sigma_pairing(const std::vector<Trajectory>& samples, double eps, const TestFunction& f) {
    if (!(eps > 0.0)) throw InputError("eps must be positive");
    std::vector<double> v;
    v.reserve(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) v.push_back(f.weight(s) * detail::pair_one(samples[s], eps, f));
    return detail::summarize(v);
}

/// Limit field sum_a c_a(x,t,omega) psi_a(y,tau); each macro part holds one
/// trajectory per sample, or a single shared one.
struct LimitField {
    struct Term {
        std::vector<Trajectory> macro;
        TrigPoly micro;
    };
    std::vector<Term> terms;

    static LimitField macroscopic(std::vector<Trajectory> u0, const ModulePtr& module) {
        return {{{std::move(u0), TrigPoly::constant(module, 1.0)}}};
    }

    [[nodiscard]] std::size_t samples() const {
        std::size_t n = 1;
        for (const auto& t : terms) n = std::max(n, t.macro.size());
        return n;
    }
};

inline const Trajectory& macro_for(const LimitField::Term& t, std::size_t s) {
    return t.macro.size() == 1 ? t.macro.front() : t.macro.at(s);
}

inline LimitField product(const LimitField& u, const LimitField& v) {
    LimitField p;
    const std::size_t n = std::max(u.samples(), v.samples());
    for (const auto& a : u.terms)
        for (const auto& b : v.terms) {
            LimitField::Term t;
            t.micro = a.micro * b.micro;
            for (std::size_t s = 0; s < (a.macro.size() == 1 && b.macro.size() == 1 ? 1 : n); ++s)
                t.macro.push_back(product_trajectory(macro_for(a, s), macro_for(b, s)));
            p.terms.push_back(std::move(t));
        }
    return p;
}

/// sum_a int c_a f0 dx dt * M(psi_a phi), averaged over samples.
inline PairingResult sigma_limit_pairing(const LimitField& u, const TestFunction& f) {
    std::vector<double> v;
    const std::size_t n = u.samples();
    for (std::size_t s = 0; s < n; ++s) {
        double total = 0.0;
        for (const auto& t : u.terms) {
            const double m = mean_value(t.micro * f.micro);
            if (m == 0.0) continue;
            TestFunction macro_only{f.macro, TrigPoly::constant(t.micro.module_ptr(), 1.0), {}};
            total += m * detail::pair_one(macro_for(t, s), 1.0, macro_only);
        }
        v.push_back(f.weight(s) * total);
    }
    return detail::summarize(v);
}

/// ||u||_{L^2(Q_T x Omega)} of the limit, using exact micro means.
inline double limit_norm(const LimitField& u) {
    const LimitField sq = product(u, u);
    TestFunction one{MacroFactor::constant(1.0), TrigPoly::constant(u.terms.front().micro.module_ptr(), 1.0), {}};
    return std::sqrt(std::max(0.0, sigma_limit_pairing(sq, one).mean));
}

inline double sample_norm(const std::vector<Trajectory>& samples) {
    double s = 0.0;
    for (const auto& tr : samples) {
        // trapezoid in space for consistency with the pairings
        const auto sw = detail::space_weights(tr.domain);
        const auto w = detail::time_weights(tr.times);
        double total = 0.0;
        for (std::size_t k = 0; k < tr.fields.size(); ++k) {
            double inner = 0.0;
            for (std::size_t q = 0; q < sw.size(); ++q) inner += sw[q] * tr.fields[k][q] * tr.fields[k][q];
            total += w[k] * inner;
        }
        s += total;
    }
    return std::sqrt(s / static_cast<double>(samples.size()));
}

struct StrongSigmaReport {
    std::vector<double> eps;
    std::vector<double> norms;
    double limit_norm = 0.0;
    std::vector<double> gaps;  // signed: norm(eps) - limit
    bool shrinking = true;     // |gap| non-increasing across the sweep
};

inline StrongSigmaReport strong_sigma_check(const std::vector<std::vector<Trajectory>>& samples,
                                            const std::vector<double>& eps, const LimitField& limit) {
    if (samples.size() != eps.size()) throw InputError("one sample set per eps is required");
    StrongSigmaReport r;
    r.eps = eps;
    r.limit_norm = limit_norm(limit);
    for (const auto& set : samples) {
        r.norms.push_back(sample_norm(set));
        r.gaps.push_back(r.norms.back() - r.limit_norm);
    }
    for (std::size_t k = 1; k < r.gaps.size(); ++k)
        if (std::abs(r.gaps[k]) > std::abs(r.gaps[k - 1])) r.shrinking = false;
    return r;
}

/// Least-squares slope of log|values| against log eps.
inline double loglog_slope(std::span<const double> eps, std::span<const double> values) {
    if (eps.size() != values.size() || eps.size() < 2) throw InputError("slope fit needs matching series of length >= 2");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const auto n = static_cast<double>(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double x = std::log(eps[i]);
        const double y = std::log(std::abs(values[i]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct CorrectorIdentification {
    std::vector<double> eps;
    std::vector<PairingResult> pairing;
    double limit = 0.0;
    std::vector<double> defect;
    double slope = 0.0;
};

namespace detail {

/// Face-midpoint gradient data: for face family i, gradient component i of u
/// and the midpoint value of u, with quadrature weights.
struct FaceSample {
    std::vector<double> x;
    std::size_t axis = 0;
    double weight = 0.0;
    std::size_t lo = 0;
    std::size_t hi = 0;
};

inline std::vector<FaceSample> face_samples(const DomainSpec& d) {
    std::vector<FaceSample> out;
    const std::size_t n = d.cells;
    const double h = d.h();
    if (d.dim == 1) {
        for (std::size_t i = 0; i < n; ++i) out.push_back({{(static_cast<double>(i) + 0.5) * h}, 0, h, i, i + 1});
        return out;
    }
    for (std::size_t j = 0; j <= n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            out.push_back({{(static_cast<double>(i) + 0.5) * h, static_cast<double>(j) * h}, 0,
                           h * h * trapezoid_weight(j, n + 1), d.index(i, j), d.index(i + 1, j)});
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i <= n; ++i)
            out.push_back({{static_cast<double>(i) * h, (static_cast<double>(j) + 0.5) * h}, 1,
                           h * h * trapezoid_weight(i, n + 1), d.index(i, j), d.index(i, j + 1)});
    return out;
}

}  // namespace detail

/// Pairs D u_eps with f0 Phi(x/eps, t/eps^2) and compares with the pairing of
/// Du0 + D_y(chi.Du0 + w1(., ., u0)) computed with exact micro means.
inline CorrectorIdentification corrector_identification(const std::vector<std::vector<Trajectory>>& eps_samples,
                                                        const std::vector<Trajectory>& limit_samples,
                                                        const CellSolution& cells, const std::vector<double>& eps,
                                                        const VectorTestFunction& f) {
    if (eps_samples.size() != eps.size()) throw InputError("one sample set per eps is required");
    if (limit_samples.empty()) throw InputError("corrector identification needs limit trajectories");
    const std::size_t N = cells.chi.size();
    if (f.micro.size() != N) throw InputError("vector test function has the wrong length");
    const DomainSpec& d = limit_samples.front().domain;
    const auto faces = detail::face_samples(d);
    const double h = d.h();

    // Exact means: M(Phi_i), M(d_i chi_j Phi_i), M(d_i w_k Phi_i).
    std::vector<double> m_phi(N);
    std::vector<std::vector<double>> m_chi(N, std::vector<double>(N));
    std::vector<std::vector<double>> m_w(N, std::vector<double>(cells.w_hat.size()));
    for (std::size_t i = 0; i < N; ++i) {
        m_phi[i] = mean_value(f.micro[i]);
        for (std::size_t j = 0; j < N; ++j)
            m_chi[i][j] = mean_value(differentiate(cells.chi[j], Axis::spatial(i)) * f.micro[i]);
        for (std::size_t k = 0; k < cells.w_hat.size(); ++k)
            m_w[i][k] = mean_value(differentiate(cells.w_hat[k], Axis::spatial(i)) * f.micro[i]);
    }

    // Gradient of u0 at face midpoints: component along the face axis is the
    // difference quotient, the transverse one the average of neighbouring quotients.
    auto grad_at = [&](const std::vector<double>& u, const detail::FaceSample& fs) {
        std::vector<double> g(N, 0.0);
        g[fs.axis] = (u[fs.hi] - u[fs.lo]) / h;
        if (N == 2) {
            // centred transverse differences at both end nodes, one-sided on the boundary
            const std::size_t other = 1 - fs.axis;
            const std::size_t stride = other == 0 ? 1 : d.per_axis();
            double acc = 0.0;
            for (std::size_t node : {fs.lo, fs.hi}) {
                const std::size_t pos = other == 0 ? node % d.per_axis() : node / d.per_axis();
                const std::size_t up = pos < d.cells ? node + stride : node;
                const std::size_t down = pos > 0 ? node - stride : node;
                acc += (u[up] - u[down]) / (static_cast<double>((up - down) / stride) * h);
            }
            g[other] = 0.5 * acc;
        }
        return g;
    };

    CorrectorIdentification rep;
    rep.eps = eps;
    {
        double total = 0.0;
        for (const auto& tr : limit_samples) {
            const auto tw = detail::time_weights_after_layer(tr.times);
            double acc = 0.0;
            for (std::size_t s = 0; s < tr.fields.size(); ++s) {
                const auto& u = tr.fields[s];
                double inner = 0.0;
                for (const auto& fs : faces) {
                    const auto g = grad_at(u, fs);
                    const std::size_t i = fs.axis;
                    const double um = 0.5 * (u[fs.lo] + u[fs.hi]);
                    double v = g[i] * m_phi[i];
                    for (std::size_t j = 0; j < N; ++j) v += g[j] * m_chi[i][j];
                    for (std::size_t k = 0; k < cells.w_hat.size(); ++k) v += cells.w_profiles[k](um) * m_w[i][k];
                    inner += fs.weight * f.macro.value(fs.x, tr.times[s]) * v;
                }
                acc += tw[s] * inner;
            }
            total += acc;
        }
        rep.limit = total / static_cast<double>(limit_samples.size());
    }

    for (std::size_t e = 0; e < eps.size(); ++e) {
        const double ep = eps[e];
        std::vector<double> vals;
        for (const auto& tr : eps_samples[e]) {
            const auto tw = detail::time_weights_after_layer(tr.times);
            std::vector<std::vector<double>> y(faces.size());
            for (std::size_t k = 0; k < faces.size(); ++k) {
                y[k] = faces[k].x;
                for (double& v : y[k]) v /= ep;
            }
            double acc = 0.0;
            for (std::size_t s = 0; s < tr.fields.size(); ++s) {
                const auto& u = tr.fields[s];
                const double tau = tr.times[s] / (ep * ep);
                double inner = 0.0;
                for (std::size_t k = 0; k < faces.size(); ++k) {
                    const auto& fs = faces[k];
                    const double du = (u[fs.hi] - u[fs.lo]) / h;
                    inner += fs.weight * f.macro.value(fs.x, tr.times[s]) * du * f.micro[fs.axis](y[k], tau);
                }
                acc += tw[s] * inner;
            }
            vals.push_back(acc);
        }
        rep.pairing.push_back(detail::summarize(vals));
        rep.defect.push_back(std::abs(rep.pairing.back().mean - rep.limit));
    }
    if (eps.size() >= 2) rep.slope = loglog_slope(eps, rep.defect);
    return rep;
}

}  // namespace homog

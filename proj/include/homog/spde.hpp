#pragma once

// Finite-difference simulation of the oscillating problem
//
//   du = ( div(a(x/eps, t/eps^2) Du) + (1/eps) g(x/eps, t/eps^2, u) ) dt + M(x/eps, t/eps^2, u) dW
//
// and of its homogenized limit
//
//   du0 = ( div(b Du0) + div F1(u0) + F2(u0).Du0 + F3(u0) ) dt + Mtilde(u0) dW
//
// on Q = (0,1)^d, d in {1,2}, with homogeneous Dirichlet data. Both use a
// semi-implicit Euler-Maruyama step: diffusion implicit, everything else
// explicit with left-point (Ito) noise.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/corrector.hpp"
#include "homog/effective.hpp"
#include "homog/errors.hpp"
#include "homog/initial.hpp"
#include "homog/wiener.hpp"

namespace homog {

struct DomainSpec {
    std::size_t dim = 1;
    double T = 1.0;
    std::size_t cells = 64;  // grid cells per axis, h = 1 / cells

    [[nodiscard]] double h() const { return 1.0 / static_cast<double>(cells); }
    [[nodiscard]] std::size_t per_axis() const { return cells + 1; }
    [[nodiscard]] std::size_t node_count() const { return dim == 1 ? per_axis() : per_axis() * per_axis(); }

    void validate() const {
        if (dim != 1 && dim != 2) throw ConfigError("domain dimension must be 1 or 2");
        if (cells < 2) throw ConfigError("domain needs at least 2 cells per axis");
        if (!(T > 0.0)) throw ConfigError("time horizon must be positive");
    }

    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j = 0) const { return i + per_axis() * j; }

    [[nodiscard]] std::vector<double> coord(std::size_t node) const {
        std::vector<double> x(dim);
        x[0] = static_cast<double>(node % per_axis()) * h();
        if (dim == 2) x[1] = static_cast<double>(node / per_axis()) * h();
        return x;
    }

    [[nodiscard]] bool is_boundary(std::size_t node) const {
        const std::size_t i = node % per_axis();
        const std::size_t j = node / per_axis();
        if (i == 0 || i == cells) return true;
        return dim == 2 && (j == 0 || j == cells);
    }

    friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

struct ProblemSpec {
    DomainSpec domain;
    CoefficientField a;
    ReactionTerm g;
    NoiseTerm noise;
    InitialCondition u0;
    std::vector<double> eps_list;

    void validate() const {
        domain.validate();
        if (a.dim() != domain.dim) throw ConfigError("coefficient dimension must equal the domain dimension");
        validate_coefficient(a);
        g.validate();
        noise.validate(domain.dim);
        u0.validate(domain.dim);
        for (std::size_t i = 0; i < eps_list.size(); ++i) {
            if (!(eps_list[i] > 0.0)) throw ConfigError("eps values must be positive");
            if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ConfigError("eps list must be strictly decreasing");
        }
    }
};

struct Trajectory {
    DomainSpec domain;
    std::vector<double> times;
    std::vector<std::vector<double>> fields;  // node values, boundary included
    std::vector<double> energy;               // |u|^2 at the snapshot times
    double sup_energy = 0.0;                  // max over every step of |u|^2
    double int_energy = 0.0;                  // trapezoid over every step of ||u||^2
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::size_t refine_factor = 1;
    std::size_t steps = 0;
    double eps = 0.0;  // 0 for the homogenized problem
};

/// Convention for the first-order drift of the homogenized equation.
enum class DriftConvention {
    asymptotic,  // + F2(u).Du + F3(u), from the two-scale expansion
    as_printed,  // - F2(u).Du - F3(u)
};

struct SimulationOptions {
    double dt = 1e-3;                 // base step; the Wiener path is generated on this grid
    std::size_t snapshot_every = 1;   // base steps between stored snapshots
    bool force_dt = false;            // skip the eps^2/10 clamp (rejected if dt > eps^2/2)
    double blowup = 1e6;
    DriftConvention drift = DriftConvention::asymptotic;
};

namespace detail {

inline double l2_norm_sq(const DomainSpec& d, const std::vector<double>& u) {
    double s = 0.0;
    for (double v : u) s += v * v;  // boundary values vanish
    return s * std::pow(d.h(), static_cast<double>(d.dim));
}

inline double h1_seminorm_sq(const DomainSpec& d, const std::vector<double>& u) {
    const std::size_t n = d.cells;
    const double h = d.h();
    double s = 0.0;
    if (d.dim == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = (u[i + 1] - u[i]) / h;
            s += g * g;
        }
        return s * h;
    }
    for (std::size_t j = 0; j <= n; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const double gx = (u[d.index(i + 1, j)] - u[d.index(i, j)]) / h;
            const double gy = (u[d.index(j, i + 1)] - u[d.index(j, i)]) / h;
            s += gx * gx + gy * gy;
        }
    return s * h * h;
}

/// Implicit operator I - dt div(c D .) with c given on cell faces.
///
/// 1D faces: fx[i] sits between nodes i and i+1 (i = 0..n-1).
/// 2D faces: fx[i + n j] between (i,j),(i+1,j); fy[i + (n+1) j] between (i,j),(i,j+1).
class ImplicitDiffusion {
public:
    explicit ImplicitDiffusion(const DomainSpec& d) : d_(d) {}

    void set(const std::vector<double>& fx, const std::vector<double>& fy, double dt) {
        if (ready_ && fx == fx_ && fy == fy_ && dt == dt_) return;
        fx_ = fx;
        fy_ = fy;
        dt_ = dt;
        ready_ = true;
        if (d_.dim == 2) factor_2d();
    }

    /// In: u holds the right side at interior nodes. Out: the new level, boundary zero.
    void solve(std::vector<double>& u) const {
        if (d_.dim == 1)
            solve_1d(u);
        else
            solve_2d(u);
    }

private:
    void solve_1d(std::vector<double>& u) const {
        const std::size_t n = d_.cells;
        const double s = dt_ / (d_.h() * d_.h());
        // Thomas algorithm on interior nodes 1..n-1
        std::vector<double> cp(n + 1, 0.0);
        std::vector<double> dp(n + 1, 0.0);
        for (std::size_t i = 1; i < n; ++i) {
            const double lower = -s * fx_[i - 1];
            const double upper = -s * fx_[i];
            const double diag = 1.0 + s * (fx_[i - 1] + fx_[i]);
            const double denom = diag - (i > 1 ? lower * cp[i - 1] : 0.0);
            cp[i] = upper / denom;
            dp[i] = (u[i] - (i > 1 ? lower * dp[i - 1] : 0.0)) / denom;
        }
        u[0] = 0.0;
        u[n] = 0.0;
        for (std::size_t i = n - 1; i >= 1; --i) {
            u[i] = dp[i] - (i + 1 < n ? cp[i] * u[i + 1] : 0.0);
        }
    }

    [[nodiscard]] std::size_t unknown(std::size_t i, std::size_t j) const { return (i - 1) + (d_.cells - 1) * (j - 1); }

    void factor_2d() {
        const std::size_t n = d_.cells;
        const double s = dt_ / (d_.h() * d_.h());
        const auto m = static_cast<Eigen::Index>((n - 1) * (n - 1));
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(m) * 5);
        for (std::size_t j = 1; j < n; ++j)
            for (std::size_t i = 1; i < n; ++i) {
                const std::size_t r = unknown(i, j);
                const double ce = fx_[i + n * j], cw = fx_[i - 1 + n * j];
                const double cn = fy_[i + (n + 1) * j], cs = fy_[i + (n + 1) * (j - 1)];
                trip.emplace_back(r, r, 1.0 + s * (ce + cw + cn + cs));
                if (i + 1 < n) trip.emplace_back(r, unknown(i + 1, j), -s * ce);
                if (i > 1) trip.emplace_back(r, unknown(i - 1, j), -s * cw);
                if (j + 1 < n) trip.emplace_back(r, unknown(i, j + 1), -s * cn);
                if (j > 1) trip.emplace_back(r, unknown(i, j - 1), -s * cs);
            }
        Eigen::SparseMatrix<double> A(m, m);
        A.setFromTriplets(trip.begin(), trip.end());
        ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(A);
        if (ldlt_->info() != Eigen::Success) throw SolverError("implicit diffusion factorization failed");
    }

    void solve_2d(std::vector<double>& u) const {
        const std::size_t n = d_.cells;
        Eigen::VectorXd rhs(static_cast<Eigen::Index>((n - 1) * (n - 1)));
        for (std::size_t j = 1; j < n; ++j)
            for (std::size_t i = 1; i < n; ++i) rhs(static_cast<Eigen::Index>(unknown(i, j))) = u[d_.index(i, j)];
        const Eigen::VectorXd x = ldlt_->solve(rhs);
        std::fill(u.begin(), u.end(), 0.0);
        for (std::size_t j = 1; j < n; ++j)
            for (std::size_t i = 1; i < n; ++i) u[d_.index(i, j)] = x(static_cast<Eigen::Index>(unknown(i, j)));
    }

    DomainSpec d_;
    std::vector<double> fx_;
    std::vector<double> fy_;
    double dt_ = 0.0;
    bool ready_ = false;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

/// Face midpoints for each face family.
inline std::vector<std::vector<double>> face_points(const DomainSpec& d, std::size_t family) {
    const std::size_t n = d.cells;
    const double h = d.h();
    std::vector<std::vector<double>> pts;
    if (d.dim == 1) {
        for (std::size_t i = 0; i < n; ++i) pts.push_back({(static_cast<double>(i) + 0.5) * h});
        return pts;
    }
    if (family == 0) {
        for (std::size_t j = 0; j <= n; ++j)
            for (std::size_t i = 0; i < n; ++i)
                pts.push_back({(static_cast<double>(i) + 0.5) * h, static_cast<double>(j) * h});
    } else {
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i <= n; ++i)
                pts.push_back({static_cast<double>(i) * h, (static_cast<double>(j) + 0.5) * h});
    }
    return pts;
}

/// Values of a trig polynomial at fixed points y = x / eps; cached when the
/// polynomial does not depend on the fast time.
class PointSampler {
public:
    PointSampler(const TrigPoly& p, const std::vector<std::vector<double>>& x, double eps)
        : poly_(&p), cached_(!p.depends_on_time()) {
        y_ = x;
        for (auto& v : y_)
            for (double& c : v) c /= eps;
        values_.resize(y_.size());
        if (cached_) fill(0.0);
    }
    const std::vector<double>& at(double tau) {
        if (!cached_) fill(tau);
        return values_;
    }
    [[nodiscard]] bool time_dependent() const { return !cached_; }

private:
    void fill(double tau) {
        for (std::size_t i = 0; i < y_.size(); ++i) values_[i] = (*poly_)(y_[i], tau);
    }
    const TrigPoly* poly_;
    bool cached_;
    std::vector<std::vector<double>> y_;
    std::vector<double> values_;
};

/// div(c D u) contributions of the off-diagonal coefficients, centred differences.
/// cxy[i + n j]: c_12 on x-faces; cyx[i + (n+1) j]: c_21 on y-faces.
inline void add_cross_terms(const DomainSpec& d, const std::vector<double>& u, const std::vector<double>& cxy,
                            const std::vector<double>& cyx, double scale, std::vector<double>& out) {
    const std::size_t n = d.cells;
    const double h = d.h();
    auto U = [&](std::size_t i, std::size_t j) { return u[d.index(i, j)]; };
    for (std::size_t j = 1; j < n; ++j)
        for (std::size_t i = 1; i < n; ++i) {
            const double dy_e = (U(i, j + 1) + U(i + 1, j + 1) - U(i, j - 1) - U(i + 1, j - 1)) / (4.0 * h);
            const double dy_w = (U(i - 1, j + 1) + U(i, j + 1) - U(i - 1, j - 1) - U(i, j - 1)) / (4.0 * h);
            const double dx_n = (U(i + 1, j) + U(i + 1, j + 1) - U(i - 1, j) - U(i - 1, j + 1)) / (4.0 * h);
            const double dx_s = (U(i + 1, j - 1) + U(i + 1, j) - U(i - 1, j - 1) - U(i - 1, j)) / (4.0 * h);
            const double v = (cxy[i + n * j] * dy_e - cxy[i - 1 + n * j] * dy_w) / h +
                             (cyx[i + (n + 1) * j] * dx_n - cyx[i + (n + 1) * (j - 1)] * dx_s) / h;
            out[d.index(i, j)] += scale * v;
        }
}

class EnergyTracker {
public:
    explicit EnergyTracker(const DomainSpec& d) : d_(d) {}
    void record(const std::vector<double>& u, double dt) {
        const double e = l2_norm_sq(d_, u);
        const double g = h1_seminorm_sq(d_, u);
        if (started_) integral_ += 0.5 * dt * (g + last_grad_);
        sup_ = std::max(sup_, e);
        last_grad_ = g;
        last_energy_ = e;
        started_ = true;
    }
    [[nodiscard]] double sup() const { return sup_; }
    [[nodiscard]] double integral() const { return integral_; }
    [[nodiscard]] double last_energy() const { return last_energy_; }

private:
    DomainSpec d_;
    bool started_ = false;
    double sup_ = 0.0;
    double integral_ = 0.0;
    double last_grad_ = 0.0;
    double last_energy_ = 0.0;
};

inline void check_finite(const std::vector<double>& u, double limit, double t) {
    for (double v : u)
        if (!std::isfinite(v) || std::abs(v) > limit)
            throw Blowup("solution exceeded " + std::to_string(limit) + " in magnitude at t = " + std::to_string(t));
}

inline std::vector<double> sample_initial(const DomainSpec& d, const InitialCondition& u0) {
    std::vector<double> u(d.node_count(), 0.0);
    for (std::size_t q = 0; q < u.size(); ++q)
        if (!d.is_boundary(q)) u[q] = u0.value(d.coord(q));
    return u;
}

}  // namespace detail

/// Step used for the oscillating problem and the matching refinement factor
/// of the base Wiener path.
struct EpsStep {
    double dt = 0.0;
    std::size_t factor = 1;
};

inline EpsStep eps_step(double eps, const SimulationOptions& opts) {
    if (opts.force_dt) {
        if (opts.dt > 0.5 * eps * eps)
            throw StiffnessRejected("forced dt = " + std::to_string(opts.dt) + " exceeds eps^2/2 = " +
                                    std::to_string(0.5 * eps * eps));
        return {opts.dt, 1};
    }
    const double target = std::min(opts.dt, eps * eps / 10.0);
    const auto factor = static_cast<std::size_t>(std::ceil(opts.dt / target * (1.0 - 1e-12)));
    return {opts.dt / static_cast<double>(std::max<std::size_t>(factor, 1)), std::max<std::size_t>(factor, 1)};
}

inline Trajectory simulate_eps(const ProblemSpec& p, double eps, const WienerPath& base, const SimulationOptions& opts) {
    const DomainSpec& d = p.domain;
    if (!(eps > 0.0)) throw InputError("eps must be positive");
    if (base.channels() != p.noise.size()) throw InputError("Wiener path channel count does not match the noise");
    if (std::abs(base.dt() - opts.dt) > 1e-15 * opts.dt) throw InputError("Wiener path step must equal the base dt");
    const EpsStep st = eps_step(eps, opts);
    const WienerPath w = base.refine(st.factor);
    const double dt = st.dt;
    const std::size_t steps = w.steps();
    const std::size_t N = d.dim;
    const std::size_t nodes = d.node_count();

    std::vector<std::vector<double>> node_x(nodes);
    for (std::size_t q = 0; q < nodes; ++q) node_x[q] = d.coord(q);

    // Face samplers for the diffusion coefficient.
    std::vector<std::vector<std::vector<double>>> fpts;
    for (std::size_t f = 0; f < N; ++f) fpts.push_back(detail::face_points(d, f));
    std::vector<detail::PointSampler> diag_faces;
    for (std::size_t f = 0; f < N; ++f) diag_faces.emplace_back(p.a.a[f][f], fpts[f], eps);
    const bool cross = N == 2 && !p.a.is_diagonal();
    std::vector<detail::PointSampler> cross_faces;
    if (cross) {
        cross_faces.emplace_back(p.a.a[0][1], fpts[0], eps);
        cross_faces.emplace_back(p.a.a[1][0], fpts[1], eps);
    }
    std::vector<detail::PointSampler> gamma_nodes;
    for (const auto& t : p.g.terms) gamma_nodes.emplace_back(t.gamma, node_x, eps);
    std::vector<std::vector<detail::PointSampler>> mu_nodes(p.noise.size());
    for (std::size_t l = 0; l < p.noise.size(); ++l)
        for (const auto& t : p.noise.channels[l]) mu_nodes[l].emplace_back(t.mu, node_x, eps);

    Trajectory tr;
    tr.domain = d;
    tr.seed = base.seed();
    tr.dt = dt;
    tr.refine_factor = st.factor;
    tr.steps = steps;
    tr.eps = eps;

    std::vector<double> u = detail::sample_initial(d, p.u0);
    detail::EnergyTracker energy(d);
    energy.record(u, dt);
    tr.times.push_back(0.0);
    tr.fields.push_back(u);
    tr.energy.push_back(energy.last_energy());

    detail::ImplicitDiffusion implicit(d);
    const std::size_t snap = opts.snapshot_every * st.factor;
    std::vector<double> rhs(nodes);
    const double inv_eps = 1.0 / eps;
    const double inv_eps2 = 1.0 / (eps * eps);

    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        const double tau = t * inv_eps2;
        const double tau_mid = (t + 0.5 * dt) * inv_eps2;

        const std::vector<double>& fx = diag_faces[0].at(tau_mid);
        static const std::vector<double> none;
        const std::vector<double>& fy = N == 2 ? diag_faces[1].at(tau_mid) : none;
        implicit.set(fx, fy, dt);

        rhs = u;
        for (std::size_t k = 0; k < gamma_nodes.size(); ++k) {
            const auto& gv = gamma_nodes[k].at(tau);
            const ScalarProfile& s = p.g.terms[k].sigma;
            for (std::size_t q = 0; q < nodes; ++q)
                if (gv[q] != 0.0) rhs[q] += dt * inv_eps * gv[q] * s(u[q]);
        }
        for (std::size_t l = 0; l < mu_nodes.size(); ++l) {
            const double dW = w.increment(n, l);
            for (std::size_t k = 0; k < mu_nodes[l].size(); ++k) {
                const auto& mv = mu_nodes[l][k].at(tau);
                const ScalarProfile& s = p.noise.channels[l][k].sigma;
                for (std::size_t q = 0; q < nodes; ++q) rhs[q] += mv[q] * s(u[q]) * dW;
            }
        }
        if (cross) detail::add_cross_terms(d, u, cross_faces[0].at(tau), cross_faces[1].at(tau), dt, rhs);

        implicit.solve(rhs);
        u.swap(rhs);
        detail::check_finite(u, opts.blowup, t + dt);
        energy.record(u, dt);
        if ((n + 1) % snap == 0) {
            tr.times.push_back(static_cast<double>((n + 1) / st.factor) * opts.dt);
            tr.fields.push_back(u);
            tr.energy.push_back(energy.last_energy());
        }
    }
    tr.sup_energy = energy.sup();
    tr.int_energy = energy.integral();
    return tr;
}

inline Trajectory simulate_homogenized(const EffectiveModel& model, const DomainSpec& d, const InitialCondition& u0,
                                       const WienerPath& path, const SimulationOptions& opts) {
    d.validate();
    if (model.dim != d.dim) throw InputError("effective model dimension does not match the domain");
    if (path.channels() != model.channels) throw InputError("Wiener path channel count does not match the model");
    if (path.dt() > opts.dt * (1.0 + 1e-12)) throw InputError("Wiener path is coarser than the requested dt");
    const auto factor = static_cast<std::size_t>(std::llround(opts.dt / path.dt()));
    if (factor == 0 || std::abs(static_cast<double>(factor) * path.dt() - opts.dt) > 1e-12 * opts.dt)
        throw InputError("simulation dt must be a multiple of the Wiener path step");
    const WienerPath& w = path;
    const double dt = path.dt();
    const std::size_t steps = w.steps();
    const std::size_t N = d.dim;
    const std::size_t n = d.cells;
    const std::size_t nodes = d.node_count();
    const double h = d.h();
    const double sign = opts.drift == DriftConvention::asymptotic ? 1.0 : -1.0;

    std::vector<double> fx(N == 1 ? n : n * (n + 1), model.b(0, 0));
    std::vector<double> fy(N == 2 ? n * (n + 1) : 0, N == 2 ? model.b(1, 1) : 0.0);
    const bool cross = N == 2 && (model.b(0, 1) != 0.0 || model.b(1, 0) != 0.0);
    std::vector<double> cxy, cyx;
    if (cross) {
        cxy.assign(n * (n + 1), model.b(0, 1));
        cyx.assign(n * (n + 1), model.b(1, 0));
    }

    Trajectory tr;
    tr.domain = d;
    tr.seed = path.seed();
    tr.dt = dt;
    tr.refine_factor = path.factor();
    tr.steps = steps;

    std::vector<double> u = detail::sample_initial(d, u0);
    detail::EnergyTracker energy(d);
    energy.record(u, dt);
    tr.times.push_back(0.0);
    tr.fields.push_back(u);
    tr.energy.push_back(energy.last_energy());

    detail::ImplicitDiffusion implicit(d);
    implicit.set(fx, fy, dt);
    const std::size_t snap = opts.snapshot_every * factor;
    std::vector<double> rhs(nodes);
    std::vector<EffectiveModel::Lookup> look(nodes);
    const std::size_t pa = d.per_axis();

    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t q = 0; q < nodes; ++q) look[q] = model.locate(u[q]);
        rhs = u;
        for (std::size_t q = 0; q < nodes; ++q) {
            if (d.is_boundary(q)) continue;
            double drift = sign * model.f3(look[q]);
            for (std::size_t ax = 0; ax < N; ++ax) {
                const std::size_t stride = ax == 0 ? 1 : pa;
                const std::size_t qp = q + stride;
                const std::size_t qm = q - stride;
                drift += (model.f1(look[qp], ax) - model.f1(look[qm], ax)) / (2.0 * h);
                const double c = sign * model.f2(look[q], ax);
                const double grad = c > 0.0 ? (u[qp] - u[q]) / h : (u[q] - u[qm]) / h;
                drift += c * grad;
            }
            rhs[q] += dt * drift;
            for (std::size_t l = 0; l < model.channels; ++l) rhs[q] += model.mtilde(look[q], l) * w.increment(s, l);
        }
        if (cross) detail::add_cross_terms(d, u, cxy, cyx, dt, rhs);
        implicit.solve(rhs);
        u.swap(rhs);
        detail::check_finite(u, opts.blowup, static_cast<double>(s + 1) * dt);
        energy.record(u, dt);
        if ((s + 1) % snap == 0) {
            tr.times.push_back(static_cast<double>((s + 1) / factor) * opts.dt);
            tr.fields.push_back(u);
            tr.energy.push_back(energy.last_energy());
        }
    }
    tr.sup_energy = energy.sup();
    tr.int_energy = energy.integral();
    return tr;
}

struct EnergyDiagnostics {
    double sup_energy = 0.0;       // sup_t |u(t)|^2
    double integrated_grad = 0.0;  // int_0^T ||u(t)||^2 dt
};

inline EnergyDiagnostics energy_diagnostics(const Trajectory& tr) { return {tr.sup_energy, tr.int_energy}; }

/// Discrete Dirichlet sine coefficients, orthonormal for the h-weighted inner
/// product, with the matching eigenvalues of -Delta_h.
class SineBasis {
public:
    explicit SineBasis(const DomainSpec& d) : d_(d) {
        const std::size_t n = d.cells;
        const double h = d.h();
        table_.resize((n - 1) * (n - 1));
        for (std::size_t k = 1; k < n; ++k)
            for (std::size_t i = 1; i < n; ++i)
                table_[(k - 1) * (n - 1) + (i - 1)] =
                    std::sqrt(2.0) * std::sin(static_cast<double>(k * i) * std::numbers::pi * h);
        lambda_.resize(n - 1);
        for (std::size_t k = 1; k < n; ++k) {
            const double s = std::sin(static_cast<double>(k) * std::numbers::pi * h / 2.0);
            lambda_[k - 1] = 4.0 * s * s / (h * h);
        }
    }

    [[nodiscard]] std::vector<double> coefficients(const std::vector<double>& u) const {
        const std::size_t m = d_.cells - 1;
        const double h = d_.h();
        if (d_.dim == 1) {
            std::vector<double> c(m, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i) s += table_[k * m + i] * u[i + 1];
                c[k] = s * h;
            }
            return c;
        }
        // separable transform: rows then columns
        std::vector<double> tmp(m * m, 0.0), c(m * m, 0.0);
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < m; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i) s += table_[k * m + i] * u[d_.index(i + 1, j + 1)];
                tmp[k + m * j] = s * h;
            }
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t l = 0; l < m; ++l) {
                double s = 0.0;
                for (std::size_t j = 0; j < m; ++j) s += table_[l * m + j] * tmp[k + m * j];
                c[k + m * l] = s * h;
            }
        return c;
    }

    [[nodiscard]] double eigenvalue(std::size_t idx) const {
        const std::size_t m = d_.cells - 1;
        if (d_.dim == 1) return lambda_[idx];
        return lambda_[idx % m] + lambda_[idx / m];
    }

    /// |v|^2_{H^-1} from sine coefficients.
    [[nodiscard]] double dual_norm_sq(const std::vector<double>& c) const {
        double s = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * c[k] / eigenvalue(k);
        return s;
    }

private:
    DomainSpec d_;
    std::vector<double> table_;
    std::vector<double> lambda_;
};

/// sup over representable |theta| <= delta of int_0^T |u(t+theta) - u(t)|^2_{H^-1} dt,
/// with u extended by zero outside [0,T] and the time integral by trapezoid
/// on the snapshot times.
inline double time_increment_diagnostic(const Trajectory& tr, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
    const std::size_t S = tr.fields.size();
    if (S < 2) return 0.0;
    const double step = tr.times[1] - tr.times[0];
    const auto max_shift = static_cast<std::size_t>(std::floor(delta / step + 1e-9));
    const SineBasis basis(tr.domain);
    std::vector<std::vector<double>> coef(S);
    for (std::size_t s = 0; s < S; ++s) coef[s] = basis.coefficients(tr.fields[s]);
    const std::vector<double> zero(coef.front().size(), 0.0);
    double best = 0.0;
    for (std::size_t shift = 1; shift <= max_shift; ++shift) {
        for (int dir : {1, -1}) {
            double integral = 0.0;
            for (std::size_t s = 0; s < S; ++s) {
                const long other = static_cast<long>(s) + dir * static_cast<long>(shift);
                const auto& a = (other < 0 || other >= static_cast<long>(S)) ? zero : coef[static_cast<std::size_t>(other)];
                std::vector<double> diff(a.size());
                for (std::size_t k = 0; k < a.size(); ++k) diff[k] = a[k] - coef[s][k];
                const double w = (s == 0 || s + 1 == S) ? 0.5 : 1.0;
                integral += w * step * basis.dual_norm_sq(diff);
            }
            best = std::max(best, integral);
        }
    }
    return best;
}

/// Discrete ||u - v||_{L^2(Q_T)} on matching snapshot grids.
inline double l2_qt_distance(const Trajectory& a, const Trajectory& b) {
    if (a.fields.size() != b.fields.size() || !(a.domain == b.domain))
        throw InputError("trajectories are not on the same space-time grid");
    const std::size_t S = a.fields.size();
    if (S < 2) return 0.0;
    double total = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        std::vector<double> diff(a.fields[s].size());
        for (std::size_t q = 0; q < diff.size(); ++q) diff[q] = a.fields[s][q] - b.fields[s][q];
        const double w = (s == 0 || s + 1 == S) ? 0.5 : 1.0;
        const double step = s + 1 < S ? a.times[s + 1] - a.times[s] : a.times[s] - a.times[s - 1];
        total += w * step * detail::l2_norm_sq(a.domain, diff);
    }
    return std::sqrt(total);
}

}  // namespace homog

#pragma once

// Space-time cell problems on the truncated zero-mean trig space:
//
//   d chi_j / d tau - div_y(a D_y chi_j) = div_y(a e_j)
//   d w     / d tau - div_y(a D_y w)     = gamma
//
// discretized by Galerkin projection onto the nonzero frequencies inside the
// module cutoff. The time derivative is the diagonal operator i omega0.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "homog/corrector.hpp"
#include "homog/errors.hpp"
#include "homog/trig_poly.hpp"

namespace homog {

struct CoefficientField {
    std::vector<std::vector<TrigPoly>> a;  // N x N, a[i][j] = a_ij
    double lambda = 1.0;                   // ellipticity constant

    [[nodiscard]] std::size_t dim() const { return a.size(); }
    [[nodiscard]] const ModulePtr& module_ptr() const { return a.front().front().module_ptr(); }

    [[nodiscard]] Eigen::MatrixXd value(std::span<const double> y, double tau) const {
        const std::size_t n = dim();
        Eigen::MatrixXd m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m(i, j) = a[i][j](y, tau);
        return m;
    }

    [[nodiscard]] bool depends_on_time() const {
        for (const auto& row : a)
            for (const auto& e : row)
                if (e.depends_on_time()) return true;
        return false;
    }

    [[nodiscard]] bool is_diagonal() const {
        for (std::size_t i = 0; i < dim(); ++i)
            for (std::size_t j = 0; j < dim(); ++j)
                if (i != j && !a[i][j].is_zero()) return false;
        return true;
    }

    /// Identity matrix field on the given module.
    static CoefficientField identity(const ModulePtr& module, double lambda = 0.5) {
        CoefficientField f;
        f.lambda = lambda;
        const std::size_t n = module->dim();
        f.a.assign(n, std::vector<TrigPoly>(n, TrigPoly(module)));
        for (std::size_t i = 0; i < n; ++i) f.a[i][i] = TrigPoly::constant(module, 1.0);
        return f;
    }
};

struct EllipticityReport {
    double min_quadratic_ratio = 0.0;  // min over samples of a zeta.zeta / |zeta|^2
    double max_abs_entry = 0.0;        // max over samples of |a_ij|
    std::size_t samples = 0;
};

/// Samples a(y,tau) zeta.zeta / |zeta|^2 and |a_ij| at random (y,tau,zeta).
/// The sampling box is [0, box)^{N+1}; the generator is seeded so the result
/// is reproducible.
inline EllipticityReport sample_ellipticity(const CoefficientField& f, std::size_t samples = 1000,
                                            double box = 100.0, std::uint64_t seed = 0x5eed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, box);
    std::normal_distribution<double> dir(0.0, 1.0);
    const std::size_t n = f.dim();
    EllipticityReport r;
    r.min_quadratic_ratio = std::numeric_limits<double>::infinity();
    std::vector<double> y(n);
    Eigen::VectorXd z(n);
    for (std::size_t s = 0; s < samples; ++s) {
        for (auto& v : y) v = pos(rng);
        const double tau = pos(rng);
        const Eigen::MatrixXd m = f.value(y, tau);
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = dir(rng);
        r.min_quadratic_ratio = std::min(r.min_quadratic_ratio, z.dot(m * z) / z.squaredNorm());
        // The symmetric part's smallest eigenvalue is the worst direction at this point.
        const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
        r.min_quadratic_ratio = std::min(r.min_quadratic_ratio, es.eigenvalues().minCoeff());
        r.max_abs_entry = std::max(r.max_abs_entry, m.cwiseAbs().maxCoeff());
    }
    r.samples = samples;
    return r;
}

inline void validate_coefficient(const CoefficientField& f) {
    if (f.a.empty()) throw ConfigError("coefficient field is empty");
    for (const auto& row : f.a) {
        if (row.size() != f.a.size()) throw ConfigError("coefficient field must be square");
        for (const auto& e : row)
            if (!e.valid()) throw ConfigError("coefficient entry is not initialized");
    }
    if (f.dim() != f.module_ptr()->dim())
        throw ConfigError("coefficient dimension does not match the frequency module");
    if (!(f.lambda > 0.0)) throw AssumptionViolation("A1", "ellipticity constant must be positive");
    const auto rep = sample_ellipticity(f);
    if (rep.min_quadratic_ratio < f.lambda)
        throw AssumptionViolation("A1", "sampled a zeta.zeta / |zeta|^2 = " + std::to_string(rep.min_quadratic_ratio) +
                                            " is below Lambda = " + std::to_string(f.lambda));
    if (rep.max_abs_entry >= 1.0 / f.lambda)
        throw AssumptionViolation("A1", "sampled |a_ij| = " + std::to_string(rep.max_abs_entry) +
                                            " is not below 1/Lambda = " + std::to_string(1.0 / f.lambda));
}

/// div_y(a e_j) = sum_i d a_ij / d y_i
inline TrigPoly chi_source(const CoefficientField& f, std::size_t j) {
    TrigPoly s(f.module_ptr());
    for (std::size_t i = 0; i < f.dim(); ++i) s += differentiate(f.a[i][j], Axis::spatial(i));
    return s;
}

/// max over nonzero frequencies k in the cutoff of |(d_tau u - div(a D u) - source)^(k)|,
/// computed with exact trig-polynomial algebra (independent of the Galerkin matrix).
inline double cell_residual(const CoefficientField& f, const TrigPoly& u, const TrigPoly& source) {
    const std::size_t n = f.dim();
    const auto du = gradient(u);
    TrigPoly r = differentiate(u, Axis::temporal()) - source;
    for (std::size_t i = 0; i < n; ++i) {
        TrigPoly flux(u.module_ptr());
        for (std::size_t j = 0; j < n; ++j) flux += f.a[i][j] * du[j];
        r = r - differentiate(flux, Axis::spatial(i));
    }
    double worst = 0.0;
    for (const auto& [k, c] : r.coeffs())
        if (!k.is_zero()) worst = std::max(worst, std::abs(c));
    return worst;
}

struct CellSolverOptions {
    enum class Method { automatic, direct, iterative };
    Method method = Method::automatic;
    std::size_t direct_threshold = 4000;
    double iterative_tolerance = 1e-12;
    int max_iterations = 20000;
    double min_rcond = 1e-14;
    double max_dropped_fraction = 0.1;
};

/// Galerkin matrix of d_tau - div_y(a D_y .) on the zero-mean truncated
/// space, factorized once and reused for every right-hand side.
class CellOperator {
public:
    CellOperator(const CoefficientField& f, ModulePtr module, CellSolverOptions opts = {})
        : module_(std::move(module)), opts_(opts) {
        const FrequencyModule& m = *module_;
        check_fits(f, m);
        basis_ = m.enumerate(false);
        for (std::size_t i = 0; i < basis_.size(); ++i) index_.emplace(basis_[i], static_cast<Eigen::Index>(i));
        const auto n = static_cast<Eigen::Index>(basis_.size());

        std::vector<std::vector<double>> omega;
        omega.reserve(basis_.size());
        for (const auto& k : basis_) omega.push_back(m.spatial_omega(k));

        // Frequencies carried by any entry of a.
        std::map<Frequency, Eigen::MatrixXcd> ahat;
        const std::size_t N = f.dim();
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j)
                for (const auto& [q, c] : f.a[i][j].coeffs()) {
                    auto [it, fresh] = ahat.try_emplace(q, Eigen::MatrixXcd::Zero(N, N));
                    it->second(i, j) = c;
                }

        std::vector<Eigen::Triplet<cplx>> trip;
        for (Eigen::Index col = 0; col < n; ++col) {
            const Frequency& kp = basis_[col];
            trip.emplace_back(col, col, cplx(0.0, m.temporal_omega(kp)));
            for (const auto& [q, aq] : ahat) {
                auto it = index_.find(kp + q);
                if (it == index_.end()) continue;
                const auto& wk = omega[it->second];
                const auto& wkp = omega[col];
                cplx v{};
                for (std::size_t i = 0; i < N; ++i)
                    for (std::size_t j = 0; j < N; ++j) v += wk[i] * aq(i, j) * wkp[j];
                trip.emplace_back(it->second, col, v);
            }
        }

        const bool direct = opts_.method == CellSolverOptions::Method::direct ||
                            (opts_.method == CellSolverOptions::Method::automatic &&
                             basis_.size() <= opts_.direct_threshold);
        sparse_.resize(n, n);
        sparse_.setFromTriplets(trip.begin(), trip.end());
        if (direct) {
            direct_ = true;
            lu_.compute(Eigen::MatrixXcd(sparse_));
            rcond_ = lu_.rcond();
            if (!(rcond_ > opts_.min_rcond))
                throw SingularSystem("cell Galerkin matrix is numerically singular", rcond_);
        } else {
            direct_ = false;
            iterative_.setTolerance(opts_.iterative_tolerance);
            iterative_.setMaxIterations(opts_.max_iterations);
            iterative_.compute(sparse_);
            if (iterative_.info() != Eigen::Success)
                throw SingularSystem("incomplete factorization of the cell Galerkin matrix failed",
                                     std::numeric_limits<double>::quiet_NaN());
        }
    }

    [[nodiscard]] std::size_t dim() const { return basis_.size(); }
    [[nodiscard]] const std::vector<Frequency>& basis() const { return basis_; }
    [[nodiscard]] double rcond() const { return rcond_; }
    [[nodiscard]] bool direct() const { return direct_; }
    [[nodiscard]] const ModulePtr& module_ptr() const { return module_; }

    /// Solves d_tau u - div(a D u) = source for zero-mean u.
    [[nodiscard]] TrigPoly solve(const TrigPoly& source) const {
        const double scale = std::max(1.0, source.max_abs_coeff());
        if (std::abs(mean_value(source)) > 1e-12 * scale)
            throw InputError("cell problem right side must have zero mean");
        Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis_.size()));
        for (const auto& [k, c] : source.coeffs()) {
            if (k.is_zero()) continue;
            auto it = index_.find(k);
            if (it == index_.end()) throw InputError("cell problem right side exceeds the module cutoff");
            rhs(it->second) = c;
        }
        Eigen::VectorXcd x;
        if (direct_) {
            x = lu_.solve(rhs);
        } else {
            x = iterative_.solve(rhs);
            if (iterative_.info() != Eigen::Success)
                throw NoConvergence("BiCGSTAB did not reach tolerance on the cell problem (error " +
                                    std::to_string(iterative_.error()) + ")");
        }
        TrigPoly::Coeffs c;
        for (std::size_t i = 0; i < basis_.size(); ++i) c.emplace(basis_[i], x(static_cast<Eigen::Index>(i)));
        return TrigPoly(module_, std::move(c));
    }

private:
    void check_fits(const CoefficientField& f, const FrequencyModule& m) const {
        for (const auto& row : f.a)
            for (const auto& e : row) {
                if (!(e.module() == m)) throw MismatchedModule();
                for (const auto& [k, c] : e.coeffs()) {
                    for (int v : k.spatial)
                        if (std::abs(v) >= m.cutoff)
                            throw InputError("coefficient frequencies must lie strictly inside the cutoff");
                    for (int v : k.temporal)
                        if (std::abs(v) >= m.cutoff)
                            throw InputError("coefficient frequencies must lie strictly inside the cutoff");
                }
                const TrigPoly sq = e * e;
                const double kept = std::pow(besicovitch_norm(sq, 2.0), 2);
                const double lost = sq.dropped_mass() * sq.dropped_mass();
                if (kept + lost > 0.0 && lost / (kept + lost) > opts_.max_dropped_fraction)
                    throw TruncationOverflow("coefficient self-convolution drops " +
                                             std::to_string(100.0 * lost / (kept + lost)) + "% of its L2 mass");
            }
    }

    ModulePtr module_;
    CellSolverOptions opts_;
    std::vector<Frequency> basis_;
    std::map<Frequency, Eigen::Index> index_;
    Eigen::SparseMatrix<cplx> sparse_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<cplx>, Eigen::IncompleteLUT<cplx>> iterative_;
    double rcond_ = std::numeric_limits<double>::quiet_NaN();
    bool direct_ = true;
};

/// chi_j for each direction j.
inline std::vector<TrigPoly> solve_chi(const CoefficientField& f, const ModulePtr& module,
                                       const CellSolverOptions& opts = {}) {
    const CellOperator op(f, module, opts);
    std::vector<TrigPoly> chi;
    for (std::size_t j = 0; j < f.dim(); ++j) chi.push_back(op.solve(chi_source(f, j)));
    return chi;
}

/// w1(., ., r) = sum_i sigma_i(r) w_i, where w_i solves the cell problem with source gamma_i.
inline TrigPoly solve_w1(const CoefficientField& f, const ReactionTerm& g, double r, const ModulePtr& module,
                         const CellSolverOptions& opts = {}) {
    const CellOperator op(f, module, opts);
    TrigPoly w(module);
    for (const auto& t : g.terms) w += t.sigma(r) * op.solve(t.gamma);
    return w;
}

struct CellSolution {
    std::vector<TrigPoly> chi;
    std::vector<TrigPoly> w_hat;  // one per reaction term
    std::vector<ScalarProfile> w_profiles;
    std::vector<std::pair<double, TrigPoly>> w1_table;
    std::vector<double> chi_residuals;
    std::vector<double> w_residuals;
    std::size_t galerkin_dim = 0;
    double rcond = 0.0;
    bool direct = true;

    [[nodiscard]] TrigPoly w1(double r) const {
        TrigPoly w(chi.front().module_ptr());
        for (std::size_t i = 0; i < w_hat.size(); ++i) w += w_profiles[i](r) * w_hat[i];
        return w;
    }
    [[nodiscard]] double max_residual() const {
        double m = 0.0;
        for (double v : chi_residuals) m = std::max(m, v);
        for (double v : w_residuals) m = std::max(m, v);
        return m;
    }
};

/// Solves every cell problem with a single factorization. Residuals are
/// relative to the largest source coefficient.
inline CellSolution solve_cells(const CoefficientField& f, const ReactionTerm& g, const ModulePtr& module,
                                std::span<const double> r_grid = {}, const CellSolverOptions& opts = {}) {
    const CellOperator op(f, module, opts);
    CellSolution s;
    s.galerkin_dim = op.dim();
    s.rcond = op.rcond();
    s.direct = op.direct();
    for (std::size_t j = 0; j < f.dim(); ++j) {
        const TrigPoly src = chi_source(f, j);
        s.chi.push_back(op.solve(src));
        s.chi_residuals.push_back(cell_residual(f, s.chi.back(), src) / std::max(1.0, src.max_abs_coeff()));
    }
    for (const auto& t : g.terms) {
        s.w_hat.push_back(op.solve(t.gamma));
        s.w_profiles.push_back(t.sigma);
        s.w_residuals.push_back(cell_residual(f, s.w_hat.back(), t.gamma) /
                                std::max(1.0, t.gamma.max_abs_coeff()));
    }
    for (double r : r_grid) s.w1_table.emplace_back(r, s.w1(r));
    return s;
}

}  // namespace homog

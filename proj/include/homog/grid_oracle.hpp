#pragma once

// Real-space oracle for the chi cell problem when a is (0,1)^N x (0,1)
// periodic: implicit Euler on a uniform periodic grid, iterating the period
// map to its fixed point. Supports N = 1, and N = 2 with diagonal a.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "homog/cell.hpp"
#include "homog/errors.hpp"

namespace homog {

struct GridOracleOptions {
    std::size_t cells = 256;         // grid points per axis
    std::size_t steps = 1024;        // implicit Euler steps per unit period
    double tolerance = 1e-11;        // RMS change between successive period maps
    std::size_t max_periods = 10000;
    std::uint64_t initial_seed = 0;  // 0: start from zero; otherwise random start
};

struct GridOracleResult {
    std::size_t cells = 0;
    std::size_t steps = 0;
    std::size_t periods = 0;
    // fields[j][s] holds chi_j on the grid at tau = s / steps, s = 0..steps-1,
    // flattened with the first axis fastest.
    std::vector<std::vector<std::vector<double>>> fields;
    Eigen::MatrixXd b;  // discrete space-time mean of a (I + D chi) on the faces
};

namespace detail {

class PeriodicGrid {
public:
    PeriodicGrid(std::size_t n, std::size_t dim) : n_(n), dim_(dim) {}
    [[nodiscard]] std::size_t size() const { return dim_ == 1 ? n_ : n_ * n_; }
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const { return (i % n_) + n_ * (j % n_); }
    [[nodiscard]] std::size_t n() const { return n_; }
    [[nodiscard]] std::size_t dim() const { return dim_; }

private:
    std::size_t n_;
    std::size_t dim_;
};

}  // namespace detail

inline GridOracleResult grid_cell_oracle(const CoefficientField& f, const GridOracleOptions& opts = {}) {
    const FrequencyModule& m = *f.module_ptr();
    const std::size_t N = f.dim();
    if (!m.is_unit_periodic()) throw InputError("grid oracle needs a (0,1)-periodic coefficient field");
    if (N > 2 || (N == 2 && !f.is_diagonal()))
        throw InputError("grid oracle supports N = 1, or N = 2 with diagonal coefficients");
    if (opts.cells < 4 || opts.steps < 1) throw InputError("grid oracle resolution too small");

    const std::size_t n = opts.cells;
    const detail::PeriodicGrid grid(n, N);
    const std::size_t total = grid.size();
    const double h = 1.0 / static_cast<double>(n);
    const double dtau = 1.0 / static_cast<double>(opts.steps);
    const bool time_dependent = f.depends_on_time();

    // Face coefficients at time level tau: face[d][node] = a_dd at node + h/2 e_d.
    auto faces = [&](double tau) {
        std::vector<std::vector<double>> face(N, std::vector<double>(total));
        std::vector<double> y(N);
        for (std::size_t q = 0; q < total; ++q) {
            const std::size_t i = q % n;
            const std::size_t j = q / n;
            for (std::size_t d = 0; d < N; ++d) {
                y[0] = (static_cast<double>(i) + (d == 0 ? 0.5 : 0.0)) * h;
                if (N == 2) y[1] = (static_cast<double>(j) + (d == 1 ? 0.5 : 0.0)) * h;
                face[d][q] = f.a[d][d](y, tau);
            }
        }
        return face;
    };

    auto right = [&](std::size_t q, std::size_t d) {
        const std::size_t i = q % n, j = q / n;
        return d == 0 ? grid.index(i + 1, j) : grid.index(i, j + 1);
    };
    auto left = [&](std::size_t q, std::size_t d) {
        const std::size_t i = q % n, j = q / n;
        return d == 0 ? grid.index(i + n - 1, j) : grid.index(i, j + n - 1);
    };

    using SpMat = Eigen::SparseMatrix<double>;
    auto assemble = [&](const std::vector<std::vector<double>>& face) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(total * (1 + 4 * N));
        for (std::size_t q = 0; q < total; ++q) {
            double diag = 1.0 / dtau;
            for (std::size_t d = 0; d < N; ++d) {
                const double ar = face[d][q] / (h * h);
                const double al = face[d][left(q, d)] / (h * h);
                diag += ar + al;
                trip.emplace_back(q, right(q, d), -ar);
                trip.emplace_back(q, left(q, d), -al);
            }
            trip.emplace_back(q, q, diag);
        }
        SpMat A(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(total));
        A.setFromTriplets(trip.begin(), trip.end());
        A.makeCompressed();
        return A;
    };

    // Per-step factorizations repeat every period; cache them.
    const std::size_t levels = time_dependent ? opts.steps : 1;
    std::vector<std::vector<std::vector<double>>> face_at(levels);
    std::vector<std::unique_ptr<Eigen::SparseLU<SpMat>>> lu(levels);
    for (std::size_t s = 0; s < levels; ++s) {
        face_at[s] = faces(static_cast<double>(s + 1) * dtau);
        lu[s] = std::make_unique<Eigen::SparseLU<SpMat>>();
        lu[s]->compute(assemble(face_at[s]));
        if (lu[s]->info() != Eigen::Success) throw SingularSystem("grid oracle factorization failed", 0.0);
    }

    GridOracleResult res;
    res.cells = n;
    res.steps = opts.steps;
    res.fields.resize(N);
    res.b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));

    for (std::size_t dir = 0; dir < N; ++dir) {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
        if (opts.initial_seed != 0) {
            std::mt19937_64 rng(opts.initial_seed + dir);
            std::normal_distribution<double> nd(0.0, 1.0);
            for (Eigen::Index q = 0; q < u.size(); ++q) u(q) = nd(rng);
            u.array() -= u.mean();
        }
        std::vector<Eigen::VectorXd> history(opts.steps);
        std::size_t period = 0;
        for (;;) {
            if (period >= opts.max_periods)
                throw NoConvergence("grid oracle period map did not converge within " +
                                    std::to_string(opts.max_periods) + " periods");
            const Eigen::VectorXd start = u;
            for (std::size_t s = 0; s < opts.steps; ++s) {
                history[s] = u;  // level s, tau = s * dtau
                const auto& face = face_at[time_dependent ? s : 0];
                // Source div_h(a e_dir) with a at the new time level.
                Eigen::VectorXd rhs = u / dtau;
                for (std::size_t q = 0; q < total; ++q)
                    rhs(static_cast<Eigen::Index>(q)) += (face[dir][q] - face[dir][left(q, dir)]) / h;
                u = lu[time_dependent ? s : 0]->solve(rhs);
            }
            ++period;
            const double change = std::sqrt((u - start).squaredNorm() / static_cast<double>(total));
            if (change < opts.tolerance) break;
        }
        res.periods = std::max(res.periods, period);
        auto& out = res.fields[dir];
        out.resize(opts.steps);
        for (std::size_t s = 0; s < opts.steps; ++s) {
            const Eigen::VectorXd& v = s == 0 ? u : history[s];
            out[s].assign(v.data(), v.data() + v.size());
        }
        // b_{d,dir} = space-time mean of a_dd (delta_{d,dir} + D_d chi_dir) on d-faces,
        // using the level reached by each implicit step.
        for (std::size_t d = 0; d < N; ++d) {
            double acc = 0.0;
            for (std::size_t s = 0; s < opts.steps; ++s) {
                const auto& face = face_at[time_dependent ? s : 0];
                const auto& v = out[(s + 1) % opts.steps];
                for (std::size_t q = 0; q < total; ++q)
                    acc += face[d][q] * ((d == dir ? 1.0 : 0.0) + (v[right(q, d)] - v[q]) / h);
            }
            res.b(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(dir)) =
                acc / static_cast<double>(total * opts.steps);
        }
    }
    return res;
}

}  // namespace homog

#include "catch_amalgamated.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "homog/effective.hpp"
#include "homog/grid_oracle.hpp"
#include "support.hpp"

using namespace homog;
using namespace homog::test;
using Catch::Approx;

namespace {

CoefficientField scalar_field(const TrigPoly& a, double lambda) { return {{{a}}, lambda}; }

TrigPoly laminate(const ModulePtr& m) {
    return TrigPoly::constant(m, 2.0) + TrigPoly::cosine(m, freq({1}, {0}));
}

// a(y, tau) = 2 + cos(2 pi y) + 0.5 cos(2 pi (y - tau))
TrigPoly travelling(const ModulePtr& m) {
    return laminate(m) + TrigPoly::cosine(m, freq({1}, {-1}), 0.5);
}

// chi sampled on the oracle grid, RMS over space and the stored time levels.
double grid_distance(const TrigPoly& chi, const GridOracleResult& g) {
    const std::size_t n = g.cells;
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < g.steps; ++k) {
        const double tau = static_cast<double>(k) / static_cast<double>(g.steps);
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double> y{static_cast<double>(i) / static_cast<double>(n)};
            const double d = chi(y, tau) - g.fields[0][k][i];
            s += d * d;
            ++count;
        }
    }
    return std::sqrt(s / static_cast<double>(count));
}

}  // namespace

TEST_CASE("solve_chi with constant identity coefficient gives zero", "[cell]") {
    for (std::size_t dim : {1u, 2u}) {
        const auto m = periodic_module(dim, 3);
        const auto chi = solve_chi(CoefficientField::identity(m), m);
        REQUIRE(chi.size() == dim);
        for (const auto& c : chi) CHECK(c.is_zero());
    }
}

TEST_CASE("1D laminate flux is the harmonic mean", "[cell]") {
    const auto m = periodic_module(1, 16);
    const CoefficientField f = scalar_field(laminate(m), 0.3);
    const auto chi = solve_chi(f, m);
    const double oracle = harmonic_mean([](double y) { return 2.0 + std::cos(two_pi * y); });
    CHECK(oracle == Approx(std::sqrt(3.0)).epsilon(1e-12));
    const TrigPoly flux = f.a[0][0] * (TrigPoly::constant(m, 1.0) + differentiate(chi[0], Axis::spatial(0)));
    CHECK(std::abs(mean_value(flux) - oracle) <= 1e-6);
    // a (1 + chi') is constant up to truncation
    for (const auto& [k, c] : flux.coeffs())
        if (!k.is_zero()) CHECK(std::abs(c) <= 1e-6);
    CHECK(mean_value(chi[0]) == 0.0);
}

TEST_CASE("solve_w1 examples", "[cell]") {
    const auto m = periodic_module(1, 4);
    const CoefficientField id = CoefficientField::identity(m);
    const ReactionTerm none;
    CHECK(solve_w1(id, none, 1.0, m).is_zero());

    const ReactionTerm g{{{TrigPoly::cosine(m, freq({1}, {0})), ScalarProfile::tanh_saturating()}}};
    CHECK(solve_w1(id, g, 0.0, m).is_zero());

    const ReactionTerm lin{{{TrigPoly::cosine(m, freq({1}, {0})), ScalarProfile::linear()}}};
    const TrigPoly w = solve_w1(id, lin, 1.0, m);
    // -w'' = cos(2 pi y) forces w = +cos(2 pi y) / (4 pi^2)
    CHECK(same_poly(w, TrigPoly::cosine(m, freq({1}, {0}), 1.0 / (two_pi * two_pi)), 1e-15));
    CHECK(same_poly(-1.0 * laplacian(w), TrigPoly::cosine(m, freq({1}, {0})), 1e-14));
}

TEST_CASE("cell residuals", "[cell]") {
    const auto m = periodic_module(1, 8);
    const CoefficientField f = scalar_field(travelling(m), 0.3);
    const auto chi = solve_chi(f, m);
    const TrigPoly src = chi_source(f, 0);
    CHECK(cell_residual(f, chi[0], src) <= 1e-10);

    const CoefficientField id = CoefficientField::identity(m);
    CHECK(cell_residual(id, TrigPoly(m), chi_source(id, 0)) == 0.0);

    // perturb one coefficient (and its conjugate partner to stay real)
    const TrigPoly bump = TrigPoly::cosine(m, freq({2}, {1}), 2e-3);
    CHECK(cell_residual(f, chi[0] + bump, src) > 1e-6);
}

TEST_CASE("solutions have zero mean and solve paths agree", "[cell][property]") {
    const auto m = periodic_module(2, 3);
    const TrigPoly a11 = TrigPoly::constant(m, 2.0) + TrigPoly::cosine(m, freq({1, 0}, {0}), 0.6) +
                         TrigPoly::cosine(m, freq({0, 1}, {1}), 0.3);
    const TrigPoly a22 = TrigPoly::constant(m, 1.5) + TrigPoly::sine(m, freq({1, 1}, {0}), 0.4);
    const TrigPoly a12 = TrigPoly::cosine(m, freq({0, 1}, {0}), 0.2);
    const CoefficientField f{{{a11, a12}, {TrigPoly(m), a22}}, 0.2};
    const ReactionTerm g{{{TrigPoly::cosine(m, freq({1, 0}, {1})), ScalarProfile::tanh_saturating()}}};

    CellSolverOptions direct, iterative;
    direct.method = CellSolverOptions::Method::direct;
    iterative.method = CellSolverOptions::Method::iterative;
    const CellSolution a = solve_cells(f, g, m, {}, direct);
    const CellSolution b = solve_cells(f, g, m, {}, iterative);
    CHECK(a.direct);
    CHECK_FALSE(b.direct);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(mean_value(a.chi[j]) == 0.0);
        CHECK(besicovitch_norm(a.chi[j] - b.chi[j], 2.0) <= 1e-9);
    }
    CHECK(mean_value(a.w_hat[0]) == 0.0);
    CHECK(besicovitch_norm(a.w_hat[0] - b.w_hat[0], 2.0) <= 1e-9);
    CHECK(a.max_residual() <= 1e-10);
    CHECK(b.max_residual() <= 1e-10);

    // bitwise determinism along a fixed path
    const CellSolution c = solve_cells(f, g, m, {}, direct);
    for (std::size_t j = 0; j < 2; ++j) CHECK(c.chi[j].coeffs() == a.chi[j].coeffs());
}

TEST_CASE("time derivative is skew-adjoint on zero-mean polynomials", "[cell][property]") {
    const auto m = periodic_module(1, 3);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> coord(-3, 3);
    std::normal_distribution<double> amp(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        TrigPoly u(m), v(m);
        for (int t = 0; t < 3; ++t) {
            const Frequency k{{coord(rng)}, {coord(rng)}};
            const Frequency q{{coord(rng)}, {coord(rng)}};
            if (!k.is_zero()) u += TrigPoly::cosine(m, k, amp(rng)) + TrigPoly::sine(m, k, amp(rng));
            if (!q.is_zero()) v += TrigPoly::cosine(m, q, amp(rng)) + TrigPoly::sine(m, q, amp(rng));
        }
        const double s = mean_value(u * differentiate(v, Axis::temporal())) +
                         mean_value(v * differentiate(u, Axis::temporal()));
        CHECK(std::abs(s) <= 1e-12);
    }
}

TEST_CASE("energy bound from testing the cell equation with chi", "[cell][property]") {
    const auto m = periodic_module(1, 8);
    const CoefficientField f = scalar_field(travelling(m), 0.3);
    const auto chi = solve_chi(f, m);
    const TrigPoly dchi = differentiate(chi[0], Axis::spatial(0));
    // M(a chi' chi') = -M(a chi') because M(chi d_tau chi) = 0
    const double lhs = mean_value(f.a[0][0] * dchi * dchi);
    const double rhs = mean_value(f.a[0][0] * dchi);
    CHECK(lhs == Approx(-rhs).epsilon(1e-9));
    CHECK(lhs <= std::abs(rhs) * (1.0 + 1e-9));
}

TEST_CASE("Galerkin refuses coefficients reaching the cutoff", "[cell]") {
    const auto m = periodic_module(1, 2);
    const CoefficientField f = scalar_field(TrigPoly::constant(m, 2.0) + TrigPoly::cosine(m, freq({2}, {0})), 0.3);
    CHECK_THROWS_AS(solve_chi(f, m), InputError);
}

TEST_CASE("grid oracle examples", "[cell][oracle]") {
    const auto m = periodic_module(1, 16);
    SECTION("identity gives the zero field") {
        GridOracleOptions o;
        o.cells = 32;
        o.steps = 8;
        const auto g = grid_cell_oracle(CoefficientField::identity(m), o);
        for (const auto& level : g.fields[0])
            for (double v : level) CHECK(std::abs(v) <= 1e-14);
    }
    SECTION("laminate at resolution 256 reproduces sqrt(3)") {
        GridOracleOptions o;
        o.cells = 256;
        o.steps = 1;
        const auto g = grid_cell_oracle(scalar_field(laminate(m), 0.3), o);
        CHECK(std::abs(g.b(0, 0) - std::sqrt(3.0)) <= 2e-4);
    }
    SECTION("two random starts reach the same fixed point") {
        const CoefficientField f = scalar_field(travelling(m), 0.3);
        GridOracleOptions o;
        o.cells = 64;
        o.steps = 64;
        o.initial_seed = 1;
        const auto a = grid_cell_oracle(f, o);
        o.initial_seed = 977;
        const auto b = grid_cell_oracle(f, o);
        double worst = 0.0;
        for (std::size_t k = 0; k < o.steps; ++k)
            for (std::size_t i = 0; i < o.cells; ++i)
                worst = std::max(worst, std::abs(a.fields[0][k][i] - b.fields[0][k][i]));
        CHECK(worst <= 1e-9);
    }
    SECTION("non-periodic modules are refused") {
        FrequencyModule qm;
        qm.spatial_generators = {{1.0}};
        qm.temporal_generators = {1.0};
        qm.cutoff = 3;
        const auto q = make_module(qm);
        CHECK_THROWS_AS(grid_cell_oracle(scalar_field(TrigPoly::constant(q, 1.0), 0.5)), InputError);
    }
}

TEST_CASE("spectral and grid backends agree", "[cell][oracle]") {
    const auto m = periodic_module(1, 16);
    SECTION("time-independent laminate") {
        const CoefficientField f = scalar_field(laminate(m), 0.3);
        const auto chi = solve_chi(f, m);
        GridOracleOptions o;
        o.cells = 256;
        o.steps = 1;
        CHECK(grid_distance(chi[0], grid_cell_oracle(f, o)) <= 1e-4);
    }
    SECTION("travelling-wave coefficient") {
        const CoefficientField f = scalar_field(travelling(m), 0.3);
        const auto chi = solve_chi(f, m);
        GridOracleOptions o;
        o.cells = 256;
        o.steps = 2048;
        CHECK(grid_distance(chi[0], grid_cell_oracle(f, o)) <= 1e-4);
    }
}

TEST_CASE("laminate tensor is computed well inside one second", "[cell]") {
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = periodic_module(1, 16);
    const CoefficientField f = scalar_field(laminate(m), 0.3);
    const Eigen::MatrixXd b = homogenized_tensor(f, solve_chi(f, m));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(std::abs(b(0, 0) - std::sqrt(3.0)) <= 1e-6);
    CHECK(secs < 1.0);
}

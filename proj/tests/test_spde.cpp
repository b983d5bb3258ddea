#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "homog/spde.hpp"
#include "support.hpp"

using namespace homog;
using namespace homog::test;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

ProblemSpec heat_problem(std::size_t dim, std::size_t cells, double T) {
    const auto m = periodic_module(dim, 2);
    ProblemSpec p;
    p.domain = {dim, T, cells};
    p.a = CoefficientField::identity(m);
    p.u0 = InitialCondition::sine_mode(1.0, dim);
    p.eps_list = {0.5};
    return p;
}

SimulationOptions options(double dt, std::size_t snapshot_every = 1) {
    SimulationOptions o;
    o.dt = dt;
    o.snapshot_every = snapshot_every;
    return o;
}

std::size_t steps_for(double T, double dt) { return static_cast<std::size_t>(std::llround(T / dt)); }

// Max nodal error of the final field against amplitude * sin(pi x).
double sine_error(const Trajectory& tr, double amplitude) {
    const auto& u = tr.fields.back();
    double worst = 0.0;
    for (std::size_t q = 0; q < u.size(); ++q)
        worst = std::max(worst, std::abs(u[q] - amplitude * std::sin(pi * tr.domain.coord(q)[0])));
    return worst;
}

Trajectory heat_run(std::size_t cells, double dt, double T, std::size_t snapshot_every = 0) {
    const ProblemSpec p = heat_problem(1, cells, T);
    const auto w = WienerPath::generate(0, 1, dt, steps_for(T, dt));
    return simulate_eps(p, 0.5, w, options(dt, snapshot_every == 0 ? steps_for(T, dt) : snapshot_every));
}

// Homogenized model with b = 1 and the given constant tables.
EffectiveModel constant_model(double F3, double Mtilde, std::size_t channels) {
    EffectiveModel e;
    e.dim = 1;
    e.channels = channels;
    e.b = Eigen::MatrixXd::Identity(1, 1);
    e.r_grid = uniform_grid(-4.0, 4.0, 9);
    e.F1.assign(9, 0.0);
    e.F2.assign(9, 0.0);
    e.F3.assign(9, F3);
    e.Mtilde.assign(9 * channels, Mtilde);
    e.refresh_estimates();
    return e;
}

}  // namespace

TEST_CASE("heat eigenfunction decay", "[spde]") {
    const double T = 0.1;
    const Trajectory tr = heat_run(256, 1e-5, T);
    CHECK(sine_error(tr, std::exp(-pi * pi * T)) < 1e-3);
    CHECK(tr.times.back() == Approx(T).epsilon(1e-12));
}

TEST_CASE("zero data stays zero", "[spde]") {
    ProblemSpec p = heat_problem(1, 32, 0.05);
    p.u0 = InitialCondition::zero();
    const auto w = WienerPath::generate(0, 1, 1e-3, 50);
    const Trajectory tr = simulate_eps(p, 0.5, w, options(1e-3));
    for (const auto& f : tr.fields)
        for (double v : f) CHECK(v == 0.0);
    const auto en = energy_diagnostics(tr);
    CHECK(en.sup_energy == 0.0);
    CHECK(en.integrated_grad == 0.0);
    for (double d : {0.02, 0.01}) CHECK(time_increment_diagnostic(tr, d) == 0.0);
}

namespace {

ProblemSpec noisy_problem() {
    const auto m = periodic_module(1, 4);
    ProblemSpec p;
    p.domain = {1, 0.0625, 64};
    p.a = {{{TrigPoly::constant(m, 2.0) + TrigPoly::cosine(m, freq({1}, {0}))}}, 0.3};
    p.g = {{{TrigPoly::cosine(m, freq({1}, {0})), ScalarProfile::tanh_saturating()}}};
    p.noise = {{{{TrigPoly::constant(m, 1.0) + TrigPoly::cosine(m, freq({0}, {1}), 0.5),
                  ScalarProfile::tanh_saturating()}}},
               4.0};
    p.u0 = InitialCondition::sine_mode(1.0, 1);
    p.eps_list = {0.25};
    return p;
}

}  // namespace

TEST_CASE("identical seed and step give bit-identical trajectories", "[spde]") {
    const ProblemSpec p = noisy_problem();
    const double dt = 1.0 / 4096.0;
    const auto w1 = WienerPath::generate(1, 42, dt, steps_for(p.domain.T, dt));
    const auto w2 = WienerPath::generate(1, 42, dt, steps_for(p.domain.T, dt));
    const Trajectory a = simulate_eps(p, 0.25, w1, options(dt, 16));
    const Trajectory b = simulate_eps(p, 0.25, w2, options(dt, 16));
    REQUIRE(a.fields.size() == b.fields.size());
    for (std::size_t s = 0; s < a.fields.size(); ++s) CHECK(a.fields[s] == b.fields[s]);
    CHECK(a.sup_energy == b.sup_energy);
    CHECK(a.int_energy == b.int_energy);

    const auto w3 = WienerPath::generate(1, 43, dt, steps_for(p.domain.T, dt));
    const Trajectory c = simulate_eps(p, 0.25, w3, options(dt, 16));
    CHECK(c.fields.back() != a.fields.back());
}

TEST_CASE("Dirichlet boundary is exactly zero", "[spde][property]") {
    const ProblemSpec p = noisy_problem();
    const double dt = 1.0 / 4096.0;
    const auto w = WienerPath::generate(1, 7, dt, steps_for(p.domain.T, dt));
    const Trajectory tr = simulate_eps(p, 0.25, w, options(dt, 4));
    for (const auto& f : tr.fields) {
        CHECK(f.front() == 0.0);
        CHECK(f.back() == 0.0);
        for (double v : f) CHECK(std::isfinite(v));
    }
    ProblemSpec p2 = heat_problem(2, 16, 0.02);
    const auto w2 = WienerPath::generate(0, 1, 1e-3, 20);
    const Trajectory t2 = simulate_eps(p2, 0.5, w2, options(1e-3));
    for (const auto& f : t2.fields)
        for (std::size_t q = 0; q < f.size(); ++q)
            if (p2.domain.is_boundary(q)) CHECK(f[q] == 0.0);
}

TEST_CASE("Brownian bridge refinement sums back exactly", "[spde][property]") {
    const auto w = WienerPath::generate(2, 99, 1e-3, 200);
    for (std::size_t factor : {2u, 3u, 16u}) {
        const auto r = w.refine(factor);
        CHECK(r.steps() == 200 * factor);
        CHECK(r.dt() == Approx(1e-3 / static_cast<double>(factor)).epsilon(1e-15));
        for (std::size_t n = 0; n < 200; ++n)
            for (std::size_t l = 0; l < 2; ++l) {
                double s = 0.0;
                for (std::size_t j = 0; j < factor; ++j) s += r.increment(n * factor + j, l);
                CHECK(s == w.increment(n, l));
            }
        const auto again = w.refine(factor);
        for (std::size_t n = 0; n < r.steps(); ++n) CHECK(again.increment(n, 0) == r.increment(n, 0));
    }
    // increments have the right variance
    const auto big = WienerPath::generate(1, 5, 0.01, 40000).refine(4);
    double ss = 0.0;
    for (std::size_t n = 0; n < big.steps(); ++n) ss += big.increment(n, 0) * big.increment(n, 0);
    CHECK(ss / static_cast<double>(big.steps()) == Approx(0.0025).epsilon(0.02));
}

TEST_CASE("step clamp and stiffness rejection", "[spde]") {
    SimulationOptions o = options(1e-3);
    const EpsStep s = eps_step(0.05, o);
    CHECK(s.dt <= 0.05 * 0.05 / 10.0);
    CHECK(s.dt * static_cast<double>(s.factor) == Approx(1e-3).epsilon(1e-14));
    CHECK(eps_step(0.5, o).factor == 1);
    o.force_dt = true;
    CHECK_THROWS_AS(eps_step(0.04, o), StiffnessRejected);
    CHECK(eps_step(0.05, o).dt == 1e-3);
}

TEST_CASE("blowup is reported as a solver failure", "[spde]") {
    const auto m = periodic_module(1, 2);
    ProblemSpec p;
    p.domain = {1, 1.0, 16};
    p.a = CoefficientField::identity(m);
    p.u0 = InitialCondition::sine_mode(1.0, 1);
    p.eps_list = {1.0};
    SimulationOptions o = options(1e-2, 1);
    o.blowup = 0.5;  // the initial amplitude already exceeds this after one step
    p.u0 = InitialCondition::sine_mode(2.0, 1);
    const auto w = WienerPath::generate(0, 1, 1e-2, 100);
    CHECK_THROWS_AS(simulate_eps(p, 1.0, w, o), Blowup);
}

TEST_CASE("energy diagnostics on the heat trajectory", "[spde]") {
    const double T = 0.1;
    const Trajectory tr = heat_run(256, 1e-5, T);
    const auto en = energy_diagnostics(tr);
    // ||u(t)||^2 = int (pi e^{-pi^2 t} cos(pi x))^2 dx = (pi^2 / 2) e^{-2 pi^2 t}
    const double exact = (1.0 - std::exp(-2.0 * pi * pi * T)) / 4.0;
    CHECK(std::abs(en.integrated_grad - exact) < 1e-3);
    // parabolic decay: the supremum is the initial energy |u0|^2 = 1/2
    CHECK(en.sup_energy == tr.energy.front());
    CHECK(en.sup_energy == Approx(0.5).epsilon(1e-6));
}

TEST_CASE("time increment diagnostic is monotone in delta", "[spde]") {
    const Trajectory tr = heat_run(64, 1e-4, 0.1, 10);
    double prev = std::numeric_limits<double>::infinity();
    for (double d : {0.04, 0.02, 0.01, 0.005}) {
        const double v = time_increment_diagnostic(tr, d);
        CHECK(v > 0.0);
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("heat scheme is first order in dt and second order in h", "[spde][property]") {
    const double T = 0.1;
    SECTION("dt: compare against the exact semi-discrete solution") {
        auto err = [&](double dt) {
            const std::size_t cells = 32;
            const Trajectory tr = heat_run(cells, dt, T);
            const double h = 1.0 / cells;
            const double lam = 4.0 * std::pow(std::sin(pi * h / 2.0), 2) / (h * h);
            return sine_error(tr, std::exp(-lam * T));
        };
        const double ratio = err(2e-3) / err(1e-3);
        CHECK(ratio == Approx(2.0).epsilon(0.3));
    }
    SECTION("h: tiny dt against the continuous solution") {
        auto err = [&](std::size_t cells) { return sine_error(heat_run(cells, 2e-6, T), std::exp(-pi * pi * T)); };
        const double ratio = err(16) / err(32);
        CHECK(ratio == Approx(4.0).epsilon(0.3));
    }
}

TEST_CASE("homogenized solver with zero tables matches the heat solver bitwise", "[spde]") {
    const double T = 0.05, dt = 1e-4;
    const ProblemSpec p = heat_problem(1, 64, T);
    const auto w = WienerPath::generate(0, 3, dt, steps_for(T, dt));
    const Trajectory a = simulate_eps(p, 0.5, w, options(dt, 10));
    const Trajectory b = simulate_homogenized(constant_model(0.0, 0.0, 0), p.domain, p.u0, w, options(dt, 10));
    REQUIRE(a.fields.size() == b.fields.size());
    for (std::size_t s = 0; s < a.fields.size(); ++s) CHECK(a.fields[s] == b.fields[s]);
    CHECK(l2_qt_distance(a, b) == 0.0);
}

TEST_CASE("constant F3 forcing against an independent explicit solver", "[spde]") {
    const double T = 0.1, c = 1.0;
    const std::size_t cells = 64;
    const double dt = 2e-6;
    const DomainSpec d{1, T, cells};
    const auto w = WienerPath::generate(0, 1, dt, steps_for(T, dt));
    const Trajectory tr =
        simulate_homogenized(constant_model(c, 0.0, 0), d, InitialCondition::zero(), w, options(dt, steps_for(T, dt)));

    // explicit reference u_t = u_xx + c on a grid four times finer
    const std::size_t n = 4 * cells;
    const double h = 1.0 / static_cast<double>(n);
    const double k = 0.25 * h * h;
    const auto steps = static_cast<std::size_t>(std::ceil(T / k));
    const double kk = T / static_cast<double>(steps);
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t i = 1; i < n; ++i) v[i] = u[i] + kk * ((u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h) + c);
        std::swap(u, v);
    }
    double worst = 0.0;
    for (std::size_t i = 1; i < cells; ++i) worst = std::max(worst, std::abs(tr.fields.back()[i] - u[4 * i]));
    CHECK(worst < 1e-4);
    // sign convention: positive F3 raises the solution
    CHECK(tr.fields.back()[cells / 2] > 0.0);
}

TEST_CASE("stochastic heat variance matches the discrete eigen-expansion", "[spde]") {
    const std::size_t cells = 16, S = 10000;
    const double dt = 1e-3, T = 0.05, sigma = 0.8;
    const std::size_t steps = steps_for(T, dt);
    const DomainSpec d{1, T, cells};
    const EffectiveModel model = constant_model(0.0, sigma, 1);

    // closed form: u_n = sum_j dW_j G^{n-j+1} sigma 1, G = (I + dt A)^{-1}
    const double h = d.h();
    std::vector<double> var(cells + 1, 0.0);
    for (std::size_t i = 1; i < cells; ++i) {
        double acc = 0.0;
        for (std::size_t j = 1; j <= steps; ++j) {
            double g = 0.0;
            for (std::size_t kx = 1; kx < cells; ++kx) {
                const double lam = 4.0 * std::pow(std::sin(kx * pi * h / 2.0), 2) / (h * h);
                double proj = 0.0;  // <1, e_k> with e_k orthonormal in R^{cells-1}
                for (std::size_t q = 1; q < cells; ++q) proj += std::sqrt(2.0 * h) * std::sin(kx * q * pi * h);
                g += std::pow(1.0 + dt * lam, -static_cast<double>(j)) * proj * std::sqrt(2.0 * h) *
                     std::sin(kx * i * pi * h);
            }
            acc += g * g;
        }
        var[i] = sigma * sigma * dt * acc;
    }

    std::vector<double> sum(cells + 1, 0.0), sum2(cells + 1, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        const auto w = WienerPath::generate(1, 1000 + s, dt, steps);
        const Trajectory tr = simulate_homogenized(model, d, InitialCondition::zero(), w, options(dt, steps));
        for (std::size_t i = 0; i <= cells; ++i) {
            sum[i] += tr.fields.back()[i];
            sum2[i] += tr.fields.back()[i] * tr.fields.back()[i];
        }
    }
    for (std::size_t i = 2; i < cells - 1; i += 3) {
        const double mean = sum[i] / S;
        const double v = sum2[i] / S - mean * mean;
        CHECK(v == Approx(var[i]).epsilon(0.05));
    }
}

TEST_CASE("trajectory helpers", "[spde]") {
    const Trajectory a = heat_run(32, 1e-3, 0.05);
    CHECK(l2_qt_distance(a, a) == 0.0);
    Trajectory b = a;
    for (auto& f : b.fields)
        for (std::size_t q = 1; q + 1 < f.size(); ++q) f[q] += 0.1;
    // constant shift 0.1 on interior nodes over Q_T = (0,1) x (0,0.05)
    CHECK(l2_qt_distance(a, b) == Approx(0.1 * std::sqrt(0.05)).epsilon(0.05));
}

#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "homog/corrector.hpp"

using namespace homog;
using Catch::Approx;

namespace {

ModulePtr unit_module(std::size_t dim, int cutoff = 4) {
    FrequencyModule m;
    for (std::size_t i = 0; i < dim; ++i) {
        std::vector<double> g(dim, 0.0);
        g[i] = 1.0;
        m.spatial_generators.push_back(g);
    }
    m.temporal_generators = {1.0};
    m.cutoff = cutoff;
    return make_module(m);
}

Frequency freq(std::vector<int> s, std::vector<int> t) { return {std::move(s), std::move(t)}; }

bool same(const TrigPoly& a, const TrigPoly& b, double tol = 1e-14) {
    for (const auto& [k, c] : a.coeffs())
        if (std::abs(c - b.coeff(k)) > tol) return false;
    for (const auto& [k, c] : b.coeffs())
        if (std::abs(c - a.coeff(k)) > tol) return false;
    return true;
}

}  // namespace

TEST_CASE("solve_poisson examples", "[corrector]") {
    const auto m1 = unit_module(1);
    const TrigPoly c = TrigPoly::cosine(m1, freq({1}, {0}));
    CHECK(same(solve_poisson(c), TrigPoly::cosine(m1, freq({1}, {0}), -1.0)));

    const TrigPoly ct = TrigPoly::cosine(m1, freq({1}, {1}));
    CHECK(same(solve_poisson(ct), TrigPoly::cosine(m1, freq({1}, {1}), -1.0)));

    const auto m2 = unit_module(2);
    const TrigPoly g = TrigPoly::cosine(m2, freq({2, 0}, {0})) + TrigPoly::cosine(m2, freq({0, 1}, {0}));
    const TrigPoly R = solve_poisson(g);
    CHECK(same(R, TrigPoly::cosine(m2, freq({2, 0}, {0}), -0.25) + TrigPoly::cosine(m2, freq({0, 1}, {0}), -1.0)));
    CHECK(same(laplacian(R), g));
}

TEST_CASE("solve_poisson rejects zero spatial frequencies", "[corrector]") {
    const auto m = unit_module(1);
    CHECK_THROWS_AS(solve_poisson(TrigPoly::cosine(m, freq({0}, {1}))), ZeroSpatialFrequency);
    CHECK_THROWS_AS(solve_poisson(TrigPoly::constant(m, 1.0)), ZeroSpatialFrequency);
}

TEST_CASE("build_G examples", "[corrector]") {
    const auto m1 = unit_module(1);
    ReactionTerm g1{{{TrigPoly::cosine(m1, freq({1}, {0})), ScalarProfile::linear()}}};
    const CorrectorG G1 = build_G(g1, 1);
    REQUIRE(G1.terms.size() == 1);
    CHECK(same(G1.terms[0].P[0], TrigPoly::sine(m1, freq({1}, {0}))));
    const std::vector<double> y{0.3};
    CHECK(G1.value(y, 0.0, 2.0)[0] == Approx(std::sin(0.3) * 2.0).epsilon(1e-14));

    const CorrectorG G0 = build_G(ReactionTerm{}, 1);
    CHECK(G0.terms.empty());
    CHECK(G0.bound == 0.0);
    CHECK(G0.value(y, 0.0, 5.0)[0] == 0.0);

    const auto m2 = unit_module(2);
    ReactionTerm g2{{{TrigPoly::cosine(m2, freq({1, 0}, {0})) + TrigPoly::cosine(m2, freq({0, 1}, {0})),
                      ScalarProfile::tanh_saturating()}}};
    const CorrectorG G2 = build_G(g2, 2);
    CHECK(same(G2.terms[0].P[0], TrigPoly::sine(m2, freq({1, 0}, {0}))));
    CHECK(same(G2.terms[0].P[1], TrigPoly::sine(m2, freq({0, 1}, {0}))));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(-20.0, 20.0);
    for (int s = 0; s < 100; ++s) {
        const std::vector<double> yy{pos(rng), pos(rng)};
        const double tau = pos(rng), u = pos(rng) / 5.0;
        // div_y G by central differences of the closed form against g
        const double hstep = 1e-5;
        double div = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            auto yp = yy, ym = yy;
            yp[i] += hstep;
            ym[i] -= hstep;
            div += (G2.value(yp, tau, u)[i] - G2.value(ym, tau, u)[i]) / (2.0 * hstep);
        }
        CHECK(std::abs(div - g2.value(yy, tau, u)) <= 1e-8);
        CHECK(std::abs(G2.divergence(yy, tau, u) - g2.value(yy, tau, u)) <= 1e-10);
    }
}

TEST_CASE("G growth bound holds at sampled points", "[corrector][property]") {
    const auto m = unit_module(2, 3);
    ReactionTerm g{{{TrigPoly::cosine(m, freq({1, 2}, {1}), 0.7) + TrigPoly::sine(m, freq({0, 3}, {0}), 0.4),
                     ScalarProfile::tanh_saturating(1.5, 0.5)},
                    {TrigPoly::cosine(m, freq({2, -1}, {0}), 0.3), ScalarProfile::rational_saturating(2.0)}}};
    const CorrectorG G = build_G(g, 2);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(-30.0, 30.0);
    std::normal_distribution<double> amp(0.0, 4.0);
    for (int s = 0; s < 1000; ++s) {
        const std::vector<double> y{pos(rng), pos(rng)};
        const double tau = pos(rng), u = amp(rng);
        const auto v = G.value(y, tau, u);
        CHECK(std::hypot(v[0], v[1]) <= G.bound * std::abs(u) * (1.0 + 1e-12) + 1e-15);
    }
}

TEST_CASE("Poisson round trip and zero spatial mean on a random corpus", "[corrector][property]") {
    std::mt19937_64 rng(99);
    const auto m = unit_module(2, 3);
    std::uniform_int_distribution<int> coord(-3, 3);
    std::normal_distribution<double> amp(0.0, 1.0);
    for (int c = 0; c < 50; ++c) {
        TrigPoly g(m);
        for (int t = 0; t < 4; ++t) {
            Frequency k{{coord(rng), coord(rng)}, {coord(rng)}};
            if (k.spatial_is_zero()) k.spatial[0] = 1;
            g += TrigPoly::cosine(m, k, amp(rng)) + TrigPoly::sine(m, k, amp(rng));
        }
        const TrigPoly R = solve_poisson(g);
        CHECK(same(laplacian(R), g, 1e-13));
        CHECK(spatial_mean(R).is_zero());
    }
}

TEST_CASE("reaction identity examples", "[corrector]") {
    const auto m = unit_module(1);
    const ReactionTerm g{{{TrigPoly::cosine(m, freq({1}, {0})), ScalarProfile::linear()}}};
    const CorrectorG G = build_G(g, 1);
    const TestField u{[](std::span<const double> x, double) { return x[0] * (1.0 - x[0]); },
                      [](std::span<const double> x, double) { return std::vector<double>{1.0 - 2.0 * x[0]}; }};
    std::vector<SamplePoint> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({{(i + 0.5) / 50.0}, 0.01 * i});
    CHECK(reaction_identity_check(g, G, 0.1, u, pts) <= 1e-10);

    const ReactionTerm none;
    CHECK(reaction_identity_check(none, build_G(none, 1), 0.1, u, pts) == 0.0);

    const ReactionTerm gt{{{TrigPoly::cosine(m, freq({1}, {0})), ScalarProfile::tanh_saturating()}}};
    const TestField zero{[](std::span<const double>, double) { return 0.0; },
                         [](std::span<const double>, double) { return std::vector<double>{0.0}; }};
    CHECK(reaction_identity_check(gt, build_G(gt, 1), 0.1, zero, pts) == 0.0);
}

TEST_CASE("reaction identity against an independent finite-difference divergence", "[corrector]") {
    // div_x [G(x/eps, t/eps^2, u(x))] computed by differencing the composite
    // function directly, then compared with (1/eps) g + d_u G . Du.
    const auto m = unit_module(1, 3);
    const ReactionTerm g{{{TrigPoly::cosine(m, freq({2}, {1})) + TrigPoly::sine(m, freq({1}, {0}), 0.5),
                           ScalarProfile::tanh_saturating()}}};
    const CorrectorG G = build_G(g, 1);
    const double eps = 0.2;
    auto uf = [](double x) { return std::sin(std::numbers::pi * x) * 1.5; };
    auto du = [](double x) { return 1.5 * std::numbers::pi * std::cos(std::numbers::pi * x); };
    for (int i = 1; i < 20; ++i) {
        const double x = i / 20.0, t = 0.013 * i;
        const double tau = t / (eps * eps);
        auto composite = [&](double xx) {
            const std::vector<double> y{xx / eps};
            return G.value(y, tau, uf(xx))[0];
        };
        const double hstep = 1e-6;
        const double div_x = (composite(x + hstep) - composite(x - hstep)) / (2.0 * hstep);
        const std::vector<double> y{x / eps};
        const double lhs = g.value(y, tau, uf(x)) / eps;
        const double rhs = div_x - G.du(y, tau, uf(x))[0] * du(x);
        CHECK(std::abs(lhs - rhs) <= 1e-6);
    }
}

TEST_CASE("ReactionTerm validation names the clause", "[corrector]") {
    const auto m = unit_module(1);
    const ReactionTerm centred_violation{
        {{TrigPoly::constant(m, 1.0) + TrigPoly::cosine(m, freq({1}, {0})), ScalarProfile::linear()}}};
    try {
        centred_violation.validate();
        FAIL("expected an A4 violation");
    } catch (const AssumptionViolation& e) {
        CHECK(std::string(e.what()).find("A4") != std::string::npos);
    }
    const ReactionTerm not_zero{{{TrigPoly::cosine(m, freq({1}, {0})), ScalarProfile::constant(1.0)}}};
    try {
        not_zero.validate();
        FAIL("expected an A3 violation");
    } catch (const AssumptionViolation& e) {
        CHECK(std::string(e.what()).find("A3") != std::string::npos);
    }
}

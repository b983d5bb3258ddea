#include "catch_amalgamated.hpp"

#include <atomic>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "homog/harness.hpp"
#include "support.hpp"

using namespace homog;
using namespace homog::test;
using Catch::Approx;

namespace {

std::string config_path(const std::string& name) { return std::string(HOMOG_CONFIG_DIR) + "/" + name + ".json"; }
std::string data_path(const std::string& name) { return std::string(HOMOG_TEST_DATA) + "/" + name + ".json"; }

std::string violation_clause(const std::string& name) {
    try {
        validate_assumptions(load_config(data_path(name)));
    } catch (const AssumptionViolation& e) {
        return e.clause();
    }
    return "";
}

}  // namespace

TEST_CASE("shipped configs parse and pass validation", "[harness]") {
    for (const char* name : {"heat_trivial", "laminate_1d", "laminate_1d_noise", "laminate_2d", "quasi_periodic_1d"}) {
        INFO(name);
        const RunConfig cfg = load_config(config_path(name));
        const ValidationReport r = validate_assumptions(cfg);
        CHECK(r.min_ellipticity_ratio >= r.lambda);
        CHECK(r.passed.size() >= 5);
    }
    const ValidationReport q = validate_assumptions(load_config(config_path("quasi_periodic_1d")));
    CHECK(q.classification == "quasi-periodic");
    const ValidationReport p = validate_assumptions(load_config(config_path("laminate_1d")));
    CHECK(p.classification == "periodic");
    CHECK(p.periodic_mode);
}

TEST_CASE("violating configs name the failed clause", "[harness]") {
    CHECK(violation_clause("violate_a1") == "A1");
    CHECK(violation_clause("violate_a3") == "A3");
    CHECK(violation_clause("violate_a4") == "A4");
    CHECK(violation_clause("violate_a5") == "A5");
    CHECK(violation_clause("violate_a6") == "A6");
}

TEST_CASE("reaction with nonzero mean is an A4 violation", "[harness]") {
    // g = (1 + cos(2 pi y)) u
    RunConfig cfg = load_config(config_path("laminate_1d"));
    const auto& m = cfg.module;
    cfg.problem.g.terms = {{TrigPoly::constant(m, 1.0) + TrigPoly::cosine(m, freq({1}, {0})), ScalarProfile::linear()}};
    try {
        validate_assumptions(cfg);
        FAIL("no violation raised");
    } catch (const AssumptionViolation& e) {
        CHECK(e.clause() == "A4");
    }
}

TEST_CASE("config errors", "[harness]") {
    CHECK_THROWS_AS(load_config(data_path("zero_samples")), ConfigError);
    CHECK_THROWS_AS(load_config(data_path("does_not_exist")), ConfigError);
    CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
    CHECK_THROWS_AS(parse_config("{}"), ConfigError);

    const std::string base = read_file(config_path("laminate_1d"));
    json j = json::parse(base);
    j["eps"] = {0.1, 0.2};
    CHECK_THROWS_AS(parse_config(j.dump()), ConfigError);
    j = json::parse(base);
    j["dt"] = 0.0;
    CHECK_THROWS_AS(parse_config(j.dump()), ConfigError);
    j = json::parse(base);
    j["schema"] = "other/2";
    CHECK_THROWS_AS(parse_config(j.dump()), ConfigError);
    j = json::parse(base);
    j["cell_solver"] = {{"method", "magic"}};
    CHECK_THROWS_AS(parse_config(j.dump()), ConfigError);
}

TEST_CASE("table range defaults to twice the initial amplitude", "[harness]") {
    json j = json::parse(read_file(config_path("laminate_1d")));
    j.erase("table");
    j["initial"][0]["coef"] = 1.5;
    const RunConfig cfg = parse_config(j.dump());
    CHECK(cfg.r_max == Approx(3.0).epsilon(1e-12));
    CHECK(cfg.r_min == -cfg.r_max);
    j["initial"] = json::array();
    CHECK(parse_config(j.dump()).r_max == 1.0);
}

TEST_CASE("cutoff override reaches the module", "[harness]") {
    CHECK(load_config(config_path("laminate_1d"), 5).module->cutoff == 5);
}

TEST_CASE("config hash tracks the bytes", "[harness]") {
    const std::string text = read_file(config_path("heat_trivial"));
    CHECK(parse_config(text).hash == parse_config(text).hash);
    CHECK(parse_config(text).hash != parse_config(text + "\n").hash);
}

TEST_CASE("heat configuration has an eps-independent error", "[harness]") {
    RunConfig cfg = load_config(config_path("heat_trivial"));
    const ConvergenceReport rep = run_convergence(cfg, 1);
    REQUIRE(rep.per_eps.size() == cfg.problem.eps_list.size());
    // both runs solve the same heat equation on the same grid
    for (const auto& sm : rep.per_eps) CHECK(sm.mean_err < 1e-3);
    const double first = rep.per_eps.front().mean_err;
    for (const auto& sm : rep.per_eps) CHECK(sm.mean_err == Approx(first).margin(1e-12));
    CHECK(rep.b(0, 0) == Approx(1.0).margin(1e-14));
}

TEST_CASE("reports are reproducible across runs and thread counts", "[harness]") {
    RunConfig cfg = load_config(config_path("laminate_1d_noise"));
    cfg.samples = 3;
    cfg.problem.eps_list = {0.25, 0.125};
    const std::string a = convergence_csv(run_convergence(cfg, 1));
    const std::string b = convergence_csv(run_convergence(cfg, 1));
    const std::string c = convergence_csv(run_convergence(cfg, 3));
    CHECK(a == b);
    CHECK(a == c);
    cfg.base_seed += 1;
    CHECK(convergence_csv(run_convergence(cfg, 2)) != a);
}

TEST_CASE("probability trend allows one small inversion", "[harness]") {
    CHECK(probability_trend({0.5, 0.4, 0.3}, {0.05, 0.05, 0.05}).ok);
    const TrendCheck one = probability_trend({0.5, 0.52, 0.3}, {0.05, 0.05, 0.05});
    CHECK(one.ok);
    CHECK(one.inversions == 1);
    CHECK_FALSE(probability_trend({0.1, 0.6, 0.3}, {0.01, 0.01, 0.01}).ok);
    CHECK_FALSE(probability_trend({0.3, 0.31, 0.3, 0.31}, {0.05, 0.05, 0.05, 0.05}).ok);
    CHECK(probability_trend({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}).ok);
}

TEST_CASE("trajectory files round trip", "[harness]") {
    const DomainSpec d{2, 0.5, 8};
    const Trajectory tr = synthetic_trajectory(d, 4, [](std::span<const double> x, double t) { return x[0] - x[1] * t; });
    const auto path = std::filesystem::temp_directory_path() / "homog_test_trajectory.bin";
    write_trajectory(path, tr);
    const Trajectory back = read_trajectory(path);
    std::filesystem::remove(path);
    CHECK(back.domain.dim == d.dim);
    CHECK(back.domain.cells == d.cells);
    CHECK(back.times == tr.times);
    CHECK(back.fields == tr.fields);
    CHECK_THROWS_AS(read_trajectory(path), ConfigError);
}

TEST_CASE("plot data reshapes report rows", "[harness]") {
    const std::string csv = "eps,sample,err,sup_energy\n0.5,0,0.1,2\n0.25,0,0.05,3\n";
    CHECK(plot_data(csv) ==
          "eps,key,metric,value\n0.5,0,err,0.1\n0.5,0,sup_energy,2\n0.25,0,err,0.05\n0.25,0,sup_energy,3\n");
    CHECK_THROWS_AS(plot_data("x,y\n1,2\n"), ConfigError);
    CHECK_THROWS_AS(plot_data("eps,a,b\n1,2\n"), ConfigError);
}

TEST_CASE("parallel_for rethrows the lowest failing job", "[harness]") {
    std::atomic<int> done{0};
    try {
        parallel_for(16, 4, [&](std::size_t j) {
            ++done;
            if (j == 11 || j == 5) throw std::runtime_error(std::to_string(j));
        });
        FAIL("nothing thrown");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "5");
    }
    CHECK(done == 16);
}

// homog: command-line front end.
//
//   homog validate  <cfg>
//   homog cell      <cfg>
//   homog effective <cfg>
//   homog simulate  <cfg> --eps <v> [--seed <s>]
//   homog converge  <cfg>
//   homog sigma     <cfg>
//   homog plot-data <report>
//
// Exit status: 0 ok, 1 invalid input or failed assumption, 2 solver failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "homog/homog.hpp"

namespace fs = std::filesystem;
using namespace homog;

namespace {

struct Globals {
    std::string out;
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    std::optional<std::uint64_t> seed;
    std::optional<int> cutoff;
};

fs::path output_dir(const Globals& g, const RunConfig& cfg) {
    if (!g.out.empty()) return g.out;
    if (const char* env = std::getenv("HOMOG_OUT_DIR"); env != nullptr && *env != '\0') return fs::path(env) / cfg.name;
    return cfg.output_dir;
}

RunConfig load(const std::string& path, const Globals& g) {
    RunConfig cfg = load_config(path, g.cutoff);
    if (g.seed) cfg.base_seed = *g.seed;
    return cfg;
}

void print_matrix(const char* name, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::printf("%s[%ld] =", name, static_cast<long>(i));
        for (Eigen::Index j = 0; j < m.cols(); ++j) std::printf(" %.10f", m(i, j));
        std::printf("\n");
    }
}

int cmd_validate(const std::string& path, const Globals& g) {
    const RunConfig cfg = load(path, g);
    const ValidationReport r = validate_assumptions(cfg);
    std::printf("config %s (%s)\n", cfg.name.c_str(), cfg.hash.c_str());
    std::printf("classification: %s%s\n", r.classification.c_str(), r.periodic_mode ? " (periodic checks run)" : "");
    for (const auto& c : r.passed) std::printf("  ok  %s  %s\n", c.clause.c_str(), c.detail.c_str());
    std::printf("ellipticity margin: %.6g\n", r.min_ellipticity_ratio - r.lambda);
    return 0;
}

int cmd_cell(const std::string& path, const Globals& g) {
    const RunConfig cfg = load(path, g);
    validate_assumptions(cfg);
    const ModelBundle mb = build_model(cfg);
    print_matrix("b", mb.model.b);
    for (std::size_t j = 0; j < mb.cells.chi_residuals.size(); ++j)
        std::printf("chi_%zu residual %.3e\n", j + 1, mb.cells.chi_residuals[j]);
    for (std::size_t k = 0; k < mb.cells.w_residuals.size(); ++k)
        std::printf("w_%zu residual %.3e\n", k + 1, mb.cells.w_residuals[k]);
    std::printf("galerkin dimension %zu, %s solve, rcond %.3e, %.3f s\n", mb.cells.galerkin_dim,
                mb.cells.direct ? "direct" : "iterative", mb.cells.rcond, mb.seconds);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (mb.model.b + mb.model.b.transpose()));
    std::printf("b ellipticity margin: %.6g (min eigenvalue %.6g, Lambda %.6g)\n",
                es.eigenvalues().minCoeff() - cfg.problem.a.lambda, es.eigenvalues().minCoeff(), cfg.problem.a.lambda);
    const fs::path dir = output_dir(g, cfg);
    write_text(dir / "cells.json", cell_solution_json(mb.cells).dump(2) + "\n");
    return 0;
}

int cmd_effective(const std::string& path, const Globals& g) {
    const RunConfig cfg = load(path, g);
    validate_assumptions(cfg);
    const ModelBundle mb = build_model(cfg);
    const fs::path file = output_dir(g, cfg) / "effective.json";
    json j = effective_model_json(mb.model);
    j["config_hash"] = cfg.hash;
    write_text(file, j.dump(2) + "\n");
    print_matrix("b", mb.model.b);
    std::printf("Lipschitz estimates: F1 %.4g, F2 %.4g, F3 %.4g, Mtilde %.4g\n", mb.model.lipschitz.F1,
                mb.model.lipschitz.F2, mb.model.lipschitz.F3, mb.model.lipschitz.Mtilde);
    std::printf("wrote %s\n", file.string().c_str());
    return 0;
}

int cmd_simulate(const std::string& path, double eps, const Globals& g) {
    const RunConfig cfg = load(path, g);
    validate_assumptions(cfg);
    const ModelBundle mb = build_model(cfg);
    const std::uint64_t seed = g.seed.value_or(cfg.base_seed);
    const WienerPath w = WienerPath::generate(cfg.problem.noise.size(), seed, cfg.dt, cfg.base_steps());
    const SimulationOptions opts = cfg.simulation();
    const Trajectory tr = simulate_eps(cfg.problem, eps, w, opts);
    const Trajectory h0 = simulate_homogenized(mb.model, cfg.problem.domain, cfg.problem.u0, w, opts);
    const fs::path dir = output_dir(g, cfg);
    write_trajectory(dir / ("eps_" + fmt17(eps) + "_seed_" + std::to_string(seed) + ".bin"), tr);
    write_trajectory(dir / ("limit_seed_" + std::to_string(seed) + ".bin"), h0);
    const auto en = energy_diagnostics(tr);
    std::printf("eps %.6g seed %llu: dt %.4g (refinement %zu), %zu steps\n", eps, static_cast<unsigned long long>(seed),
                tr.dt, tr.refine_factor, tr.steps);
    std::printf("sup |u|^2 = %.6g, int ||u||^2 dt = %.6g\n", en.sup_energy, en.integrated_grad);
    for (double d : cfg.increment_deltas)
        std::printf("time increment diagnostic(%.4g) / delta = %.6g\n", d, time_increment_diagnostic(tr, d) / d);
    std::printf("||u_eps - u_0||_L2(Q_T) = %.6e\n", l2_qt_distance(tr, h0));
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
}

int cmd_converge(const std::string& path, const Globals& g) {
    const RunConfig cfg = load(path, g);
    const ConvergenceReport rep = run_convergence(cfg, g.threads);
    const fs::path dir = output_dir(g, cfg);
    write_text(dir / "convergence.csv", convergence_csv(rep));
    write_text(dir / "manifest.json", convergence_manifest(cfg, rep, g.threads).dump(2) + "\n");
    std::printf("%-10s %-12s %-12s", "eps", "mean err", "std err");
    for (double d : cfg.deltas) std::printf(" P(err>%-5g)", d);
    std::printf("\n");
    for (const auto& sm : rep.per_eps) {
        std::printf("%-10.5g %-12.5e %-12.5e", sm.eps, sm.mean_err, sm.std_err);
        for (double p : sm.prob) std::printf(" %-11.4f", p);
        std::printf("\n");
    }
    std::printf("log-log slope %.3f, mean err %s\n", rep.slope, rep.mean_decreasing ? "decreasing" : "not decreasing");
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
}

int cmd_sigma(const std::string& path, const Globals& g) {
    const RunConfig cfg = load(path, g);
    const SigmaReport rep = run_sigma(cfg, g.threads);
    const fs::path dir = output_dir(g, cfg);
    write_text(dir / "sigma.csv", sigma_csv(rep));
    write_text(dir / "sigma.json", sigma_manifest(cfg, rep).dump(2) + "\n");
    for (const auto& [id, s] : rep.slopes) std::printf("slope %-26s %.3f\n", id.c_str(), s);
    for (const auto& [id, pass] : rep.checks) std::printf("%s %s\n", pass ? "ok  " : "FAIL", id.c_str());
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
}

int cmd_plot_data(const std::string& report, const Globals& g) {
    fs::path p = report;
    if (fs::is_directory(p)) p = fs::exists(p / "convergence.csv") ? p / "convergence.csv" : p / "sigma.csv";
    const std::string tidy = plot_data(read_file(p.string()));
    if (g.out.empty()) {
        std::fwrite(tidy.data(), 1, tidy.size(), stdout);
    } else {
        const fs::path file = fs::path(g.out) / (p.stem().string() + "_tidy.csv");
        write_text(file, tidy);
        std::printf("wrote %s\n", file.string().c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic homogenization experiments"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    int cutoff = 0;
    app.add_option("--out", g.out, "Output directory (overrides HOMOG_OUT_DIR and the config)");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed, "Base seed (simulate: the path seed)");
    auto* cutoff_opt = app.add_option("--cutoff", cutoff, "Frequency cutoff override")->check(CLI::PositiveNumber);

    std::string cfg_path;
    double eps = 0.0;
    auto sub = [&](const char* name, const char* help) {
        auto* s = app.add_subcommand(name, help);
        s->fallthrough();
        s->add_option("config", cfg_path, name == std::string("plot-data") ? "Report CSV or directory" : "Config file")
            ->required();
        return s;
    };
    auto* validate = sub("validate", "Check assumptions A1-A6");
    auto* cell = sub("cell", "Solve the cell problems and print b");
    auto* effective = sub("effective", "Write the tabulated homogenized model");
    auto* simulate = sub("simulate", "One eps trajectory and its homogenized partner");
    simulate->add_option("--eps", eps, "Scale parameter")->required()->check(CLI::PositiveNumber);
    auto* converge = sub("converge", "eps-sweep convergence experiment");
    auto* sigma = sub("sigma", "Sigma-convergence battery");
    auto* plot = sub("plot-data", "Emit tidy CSV for plotting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    if (seed_opt->count() > 0) g.seed = seed;
    if (cutoff_opt->count() > 0) g.cutoff = cutoff;

    try {
        if (*validate) return cmd_validate(cfg_path, g);
        if (*cell) return cmd_cell(cfg_path, g);
        if (*effective) return cmd_effective(cfg_path, g);
        if (*simulate) return cmd_simulate(cfg_path, eps, g);
        if (*converge) return cmd_converge(cfg_path, g);
        if (*sigma) return cmd_sigma(cfg_path, g);
        if (*plot) return cmd_plot_data(cfg_path, g);
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 2;
    }
    return 1;
}

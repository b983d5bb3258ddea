#pragma once

// Experiment orchestration: assumption checks, the eps-sweep convergence
// experiment, the Sigma-convergence battery, and their on-disk reports.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "homog/cell.hpp"
#include "homog/config.hpp"
#include "homog/corrector.hpp"
#include "homog/effective.hpp"
#include "homog/errors.hpp"
#include "homog/sigma.hpp"
#include "homog/spde.hpp"
#include "homog/wiener.hpp"

namespace homog {

// ---------------------------------------------------------------- threads

/// Runs fn(0..jobs-1) on `threads` workers. Exceptions are captured per job
/// and the one with the lowest index is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs) return;
            try {
                fn(j);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, jobs));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Rethrows the active exception with a location prefix, keeping its exit class.
[[noreturn]] inline void rethrow_at(const std::string& where) {
    try {
        throw;
    } catch (const AssumptionViolation& e) {
        throw AssumptionViolation(e.clause(), where + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(where + ": " + e.what());
    } catch (const SolverError& e) {
        throw SolverError(where + ": " + e.what());
    } catch (const std::exception& e) {
        throw SolverError(where + ": " + e.what());
    }
}

// ------------------------------------------------------------- validation

struct ValidationCheck {
    std::string clause;
    std::string detail;
};

struct ValidationReport {
    std::string classification;  // "periodic" or "quasi-periodic"
    bool periodic_mode = false;  // A6 checked
    double min_ellipticity_ratio = 0.0;
    double lambda = 0.0;
    std::vector<ValidationCheck> passed;
};

namespace detail {

inline bool unit_periodic_frequency(const FrequencyModule& m, const Frequency& k) {
    auto integral = [](double w) {
        const double q = w / (2.0 * std::numbers::pi);
        return std::abs(q - std::round(q)) <= 1e-12 * std::max(1.0, std::abs(q));
    };
    for (double w : m.spatial_omega(k))
        if (!integral(w)) return false;
    return integral(m.temporal_omega(k));
}

inline void require_periodic(const TrigPoly& u, const std::string& name) {
    for (const auto& [k, c] : u.coeffs())
        if (!unit_periodic_frequency(u.module(), k))
            throw AssumptionViolation("A6", name + " is not (0,1)^N x (0,1)-periodic");
}

/// Largest |int_{(0,1)^N} u(y,tau) dy| coefficient over the temporal frequencies.
inline double cell_integral_defect(const TrigPoly& u) {
    std::map<double, cplx> by_time;
    for (const auto& [k, c] : u.coeffs()) {
        cplx f = c;
        for (double w : u.module().spatial_omega(k)) f *= w == 0.0 ? cplx(1.0) : (std::exp(cplx(0.0, w)) - 1.0) / cplx(0.0, w);
        by_time[u.module().temporal_omega(k)] += f;
    }
    double worst = 0.0;
    for (const auto& [w0, v] : by_time) worst = std::max(worst, std::abs(v));
    return worst;
}

}  // namespace detail

/// Runs every modelling check; throws AssumptionViolation naming the first
/// failed clause.
inline ValidationReport validate_assumptions(const RunConfig& cfg) {
    ValidationReport r;
    const ProblemSpec& p = cfg.problem;
    p.domain.validate();
    if (p.a.dim() != p.domain.dim) throw ConfigError("coefficient dimension must equal the domain dimension");
    validate_coefficient(p.a);
    const auto ell = sample_ellipticity(p.a);
    r.min_ellipticity_ratio = ell.min_quadratic_ratio;
    r.lambda = p.a.lambda;
    r.passed.push_back({"A1", "min sampled a zeta.zeta/|zeta|^2 = " + std::to_string(ell.min_quadratic_ratio) +
                                  " >= Lambda = " + std::to_string(p.a.lambda)});
    p.g.validate();
    r.passed.push_back({"A2", "reaction profiles Lipschitz, bound " + std::to_string(p.g.derivative_bound())});
    r.passed.push_back({"A3", "g(y,tau,0) = 0"});
    r.passed.push_back({"A4", "reaction coefficients have zero spatial mean"});
    p.noise.validate(p.domain.dim);
    r.passed.push_back({"A5", "noise growth and Lipschitz bounds hold with K = " + std::to_string(p.noise.K)});
    p.u0.validate(p.domain.dim);

    r.classification = cfg.module->is_unit_periodic() ? "periodic" : "quasi-periodic";
    r.periodic_mode = cfg.periodic_declared || cfg.module->is_unit_periodic();
    if (r.periodic_mode) {
        for (std::size_t i = 0; i < p.a.dim(); ++i)
            for (std::size_t j = 0; j < p.a.dim(); ++j)
                detail::require_periodic(p.a.a[i][j], "a_" + std::to_string(i + 1) + std::to_string(j + 1));
        for (std::size_t i = 0; i < p.g.terms.size(); ++i)
            detail::require_periodic(p.g.terms[i].gamma, "gamma_" + std::to_string(i + 1));
        for (std::size_t l = 0; l < p.noise.size(); ++l)
            for (const auto& t : p.noise.channels[l]) detail::require_periodic(t.mu, "M_" + std::to_string(l + 1));
        // terms sharing a profile may cancel, so integrate their sum
        std::vector<std::pair<ScalarProfile, TrigPoly>> groups;
        for (const auto& t : p.g.terms) {
            auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == t.sigma; });
            if (it == groups.end())
                groups.emplace_back(t.sigma, t.gamma);
            else
                it->second += t.gamma;
        }
        for (const auto& [profile, gamma] : groups) {
            const double d = detail::cell_integral_defect(gamma);
            if (d > 1e-12)
                throw AssumptionViolation("A6", "cell integral of g over Y is nonzero (" + std::to_string(d) + ")");
        }
        r.passed.push_back({"A6", "coefficients are Y x Z-periodic and g integrates to zero over Y"});
    }
    return r;
}

// ------------------------------------------------------------------ model

struct ModelBundle {
    CellSolution cells;
    EffectiveModel model;
    double seconds = 0.0;
};

inline ModelBundle build_model(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelBundle b;
    const auto grid = uniform_grid(cfg.r_min, cfg.r_max, cfg.r_points);
    b.cells = solve_cells(cfg.problem.a, cfg.problem.g, cfg.module, {}, cfg.cell);
    b.model = tabulate(cfg.problem.a, cfg.problem.g, cfg.problem.noise, b.cells, cfg.r_min, cfg.r_max, cfg.r_points);
    b.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return b;
}

inline std::uint64_t sample_seed(const RunConfig& cfg, std::size_t s) { return cfg.base_seed ^ static_cast<std::uint64_t>(s); }

inline WienerPath sample_path(const RunConfig& cfg, std::size_t s) {
    return WienerPath::generate(cfg.problem.noise.size(), sample_seed(cfg, s), cfg.dt, cfg.base_steps());
}

// ------------------------------------------------------------ convergence

struct ConvergenceRow {
    double eps = 0.0;
    std::size_t sample = 0;
    double err = 0.0;
    double sup_energy = 0.0;
    double int_energy = 0.0;
    std::vector<double> increments;  // diagnostic(delta) per configured increment delta
};

struct EpsSummary {
    double eps = 0.0;
    double mean_err = 0.0;
    double std_err = 0.0;      // sample standard deviation
    double se_mean = 0.0;      // standard error of the mean
    std::vector<double> prob;  // P(err > delta) per configured delta
    std::vector<double> prob_se;
    double mean_sup_energy = 0.0;
    double mean_int_energy = 0.0;
    std::vector<double> increment_ratio;  // mean diagnostic(delta) / delta
    double seconds = 0.0;
};

struct TrendCheck {
    bool ok = true;
    std::size_t inversions = 0;
    std::string detail;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;  // ordered by (eps, sample)
    std::vector<EpsSummary> per_eps;
    std::vector<double> deltas;
    std::vector<double> increment_deltas;
    double slope = 0.0;
    std::vector<TrendCheck> probability_trend;  // per delta
    bool mean_decreasing = true;
    double sup_energy_ratio = 0.0;  // max/min over eps of mean sup energy
    double int_energy_ratio = 0.0;
    double increment_spread = 0.0;  // max/min of all increment ratios
    double increment_constant = 0.0;
    std::uint64_t out_of_range = 0;
    Eigen::MatrixXd b;
    double max_cell_residual = 0.0;
    double model_seconds = 0.0;
    double homogenized_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Non-increasing sequence test allowing one inversion within two standard
/// errors of the difference.
inline TrendCheck probability_trend(const std::vector<double>& p, const std::vector<double>& se) {
    TrendCheck t;
    for (std::size_t k = 1; k < p.size(); ++k) {
        if (p[k] <= p[k - 1]) continue;
        ++t.inversions;
        const double tol = 2.0 * std::sqrt(se[k] * se[k] + se[k - 1] * se[k - 1]);
        if (p[k] - p[k - 1] > tol) {
            t.ok = false;
            t.detail += "inversion at index " + std::to_string(k) + " exceeds two standard errors; ";
        }
    }
    if (t.inversions > 1) {
        t.ok = false;
        t.detail += std::to_string(t.inversions) + " inversions; ";
    }
    return t;
}

inline ConvergenceReport run_convergence(const RunConfig& cfg, std::size_t threads = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.check();
    validate_assumptions(cfg);
    ConvergenceReport rep;
    const ModelBundle mb = build_model(cfg);
    rep.b = mb.model.b;
    rep.max_cell_residual = mb.cells.max_residual();
    rep.model_seconds = mb.seconds;
    rep.deltas = cfg.deltas;
    rep.increment_deltas = cfg.increment_deltas;
    mb.model.reset_out_of_range();

    const std::size_t S = cfg.samples;
    const auto& eps = cfg.problem.eps_list;
    const std::size_t E = eps.size();
    const SimulationOptions opts = cfg.simulation();

    std::vector<Trajectory> limit(S);
    const auto th = std::chrono::steady_clock::now();
    parallel_for(S, threads, [&](std::size_t s) {
        try {
            limit[s] = simulate_homogenized(mb.model, cfg.problem.domain, cfg.problem.u0, sample_path(cfg, s), opts);
        } catch (...) {
            rethrow_at("homogenized run, sample " + std::to_string(s));
        }
    });
    rep.homogenized_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - th).count();

    rep.rows.resize(E * S);
    std::vector<double> job_seconds(E * S, 0.0);
    parallel_for(E * S, threads, [&](std::size_t job) {
        const std::size_t e = job / S;
        const std::size_t s = job % S;
        try {
            const auto tj = std::chrono::steady_clock::now();
            const Trajectory tr = simulate_eps(cfg.problem, eps[e], sample_path(cfg, s), opts);
            ConvergenceRow& row = rep.rows[job];
            row.eps = eps[e];
            row.sample = s;
            row.err = l2_qt_distance(tr, limit[s]);
            const auto en = energy_diagnostics(tr);
            row.sup_energy = en.sup_energy;
            row.int_energy = en.integrated_grad;
            for (double d : cfg.increment_deltas) row.increments.push_back(time_increment_diagnostic(tr, d));
            job_seconds[job] = std::chrono::duration<double>(std::chrono::steady_clock::now() - tj).count();
        } catch (...) {
            rethrow_at("eps = " + std::to_string(eps[e]) + ", sample " + std::to_string(s));
        }
    });

    for (std::size_t e = 0; e < E; ++e) {
        EpsSummary sm;
        sm.eps = eps[e];
        const auto n = static_cast<double>(S);
        sm.prob.assign(cfg.deltas.size(), 0.0);
        sm.increment_ratio.assign(cfg.increment_deltas.size(), 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            const auto& row = rep.rows[e * S + s];
            sm.mean_err += row.err;
            sm.mean_sup_energy += row.sup_energy;
            sm.mean_int_energy += row.int_energy;
            for (std::size_t k = 0; k < cfg.deltas.size(); ++k) sm.prob[k] += row.err > cfg.deltas[k] ? 1.0 : 0.0;
            for (std::size_t k = 0; k < cfg.increment_deltas.size(); ++k)
                sm.increment_ratio[k] += row.increments[k] / cfg.increment_deltas[k];
            sm.seconds += job_seconds[e * S + s];
        }
        sm.mean_err /= n;
        sm.mean_sup_energy /= n;
        sm.mean_int_energy /= n;
        for (double& v : sm.increment_ratio) v /= n;
        for (double& p : sm.prob) {
            p /= n;
            sm.prob_se.push_back(std::sqrt(p * (1.0 - p) / n));
        }
        double ss = 0.0;
        for (std::size_t s = 0; s < S; ++s) ss += std::pow(rep.rows[e * S + s].err - sm.mean_err, 2);
        sm.std_err = S > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        sm.se_mean = sm.std_err / std::sqrt(n);
        rep.per_eps.push_back(std::move(sm));
    }

    std::vector<double> means;
    for (const auto& sm : rep.per_eps) means.push_back(sm.mean_err);
    for (std::size_t k = 1; k < means.size(); ++k)
        if (!(means[k] < means[k - 1])) rep.mean_decreasing = false;
    rep.slope = E >= 2 && std::all_of(means.begin(), means.end(), [](double v) { return v > 0.0; })
                    ? loglog_slope(eps, means)
                    : 0.0;
    for (std::size_t k = 0; k < cfg.deltas.size(); ++k) {
        std::vector<double> p, se;
        for (const auto& sm : rep.per_eps) {
            p.push_back(sm.prob[k]);
            se.push_back(sm.prob_se[k]);
        }
        rep.probability_trend.push_back(probability_trend(p, se));
    }
    auto ratio = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *lo > 0.0 ? *hi / *lo : (*hi > 0.0 ? INFINITY : 1.0);
    };
    std::vector<double> sup, integ, inc;
    for (const auto& sm : rep.per_eps) {
        sup.push_back(sm.mean_sup_energy);
        integ.push_back(sm.mean_int_energy);
        inc.insert(inc.end(), sm.increment_ratio.begin(), sm.increment_ratio.end());
    }
    rep.sup_energy_ratio = ratio(sup);
    rep.int_energy_ratio = ratio(integ);
    if (!inc.empty()) {
        rep.increment_spread = ratio(inc);
        rep.increment_constant = *std::max_element(inc.begin(), inc.end());
    }
    rep.out_of_range = mb.model.out_of_range_count();
    rep.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ------------------------------------------------------------------ sigma

struct SigmaRow {
    double eps = 0.0;
    std::string test_id;
    double pairing = 0.0;
    double limit = 0.0;
    double defect = 0.0;
    double std_error = 0.0;
};

struct SigmaReport {
    std::vector<SigmaRow> rows;
    std::map<std::string, double> slopes;
    std::map<std::string, bool> checks;
    StrongSigmaReport strong;
    CorrectorIdentification corrector;
    double seconds = 0.0;
};

namespace detail {

inline void add_series(SigmaReport& rep, const std::string& id, const std::vector<double>& eps,
                       const std::vector<PairingResult>& pairing, double limit) {
    std::vector<double> defects;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        const double d = std::abs(pairing[k].mean - limit);
        rep.rows.push_back({eps[k], id, pairing[k].mean, limit, d, pairing[k].std_error});
        defects.push_back(d);
    }
    if (eps.size() >= 2 && std::all_of(defects.begin(), defects.end(), [](double v) { return v > 0.0; }))
        rep.slopes[id] = loglog_slope(eps, defects);
}

}  // namespace detail

/// Synthetic oscillation pairings on a fine 1D grid over Q_T = (0,1)^2.
inline void synthetic_sigma_battery(SigmaReport& rep, const std::vector<double>& eps, std::size_t cells = 2048) {
    FrequencyModule fm;
    fm.spatial_generators = {{2.0 * std::numbers::pi}};
    fm.temporal_generators = {2.0 * std::numbers::pi};
    fm.cutoff = 4;
    const ModulePtr m = make_module(fm);
    const Frequency k1{{1}, {0}};
    const DomainSpec d{1, 1.0, cells};
    const MacroFactor f0 = MacroFactor::exponential();
    const TestFunction cos_test{f0, TrigPoly::cosine(m, k1), {}};
    const TestFunction one_test{f0, TrigPoly::constant(m, 1.0), {}};

    std::vector<PairingResult> flat, osc, prod;
    std::vector<std::vector<Trajectory>> strong_sets;
    for (double e : eps) {
        const Trajectory ones = synthetic_trajectory(d, 2, [](std::span<const double>, double) { return 1.0; });
        const Trajectory c = synthetic_trajectory(
            d, 2, [e](std::span<const double> x, double) { return std::cos(2.0 * std::numbers::pi * x[0] / e); });
        const Trajectory v = synthetic_trajectory(
            d, 2, [e](std::span<const double> x, double) { return 1.0 + std::cos(2.0 * std::numbers::pi * x[0] / e); });
        flat.push_back(weak_sigma_pairing({ones}, e, cos_test));
        osc.push_back(weak_sigma_pairing({c}, e, cos_test));
        prod.push_back(weak_sigma_pairing({product_trajectory(c, v)}, e, one_test));
        strong_sets.push_back({synthetic_trajectory(d, 2, [e](std::span<const double> x, double) {
            return std::exp(x[0]) * std::cos(2.0 * std::numbers::pi * x[0] / e);
        })});
    }
    const Trajectory ones = synthetic_trajectory(d, 2, [](std::span<const double>, double) { return 1.0; });
    const LimitField lim_one = LimitField::macroscopic({ones}, m);
    const LimitField lim_cos{{{{ones}, TrigPoly::cosine(m, k1)}}};
    const LimitField lim_v{{{{ones}, TrigPoly::constant(m, 1.0) + TrigPoly::cosine(m, k1)}}};

    detail::add_series(rep, "flat_oscillation", eps, flat, sigma_limit_pairing(lim_one, cos_test).mean);
    detail::add_series(rep, "cos_squared", eps, osc, sigma_limit_pairing(lim_cos, cos_test).mean);
    detail::add_series(rep, "product", eps, prod, sigma_limit_pairing(product(lim_cos, lim_v), one_test).mean);
    const Trajectory ex = synthetic_trajectory(d, 2, [](std::span<const double> x, double) { return std::exp(x[0]); });
    rep.strong = strong_sigma_check(strong_sets, eps, LimitField{{{{ex}, TrigPoly::cosine(m, k1)}}});
    std::vector<double> gaps;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        rep.rows.push_back({eps[k], "strong_norm", rep.strong.norms[k], rep.strong.limit_norm, std::abs(rep.strong.gaps[k]), 0.0});
        gaps.push_back(rep.strong.gaps[k]);
    }
    if (std::all_of(gaps.begin(), gaps.end(), [](double g) { return g != 0.0; }))
        rep.slopes["strong_norm"] = loglog_slope(eps, gaps);
}

/// Full battery: synthetic pairings plus corrector identification on the
/// configured problem with shared-seed eps and homogenized runs.
inline SigmaReport run_sigma(const RunConfig& cfg, std::size_t threads = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.check();
    validate_assumptions(cfg);
    SigmaReport rep;
    const auto& eps = cfg.problem.eps_list;
    synthetic_sigma_battery(rep, eps);

    const ModelBundle mb = build_model(cfg);
    const std::size_t S = cfg.samples;
    const std::size_t E = eps.size();
    const SimulationOptions opts = cfg.simulation();
    std::vector<Trajectory> limit(S);
    parallel_for(S, threads, [&](std::size_t s) {
        try {
            limit[s] = simulate_homogenized(mb.model, cfg.problem.domain, cfg.problem.u0, sample_path(cfg, s), opts);
        } catch (...) {
            rethrow_at("homogenized run, sample " + std::to_string(s));
        }
    });
    std::vector<std::vector<Trajectory>> runs(E, std::vector<Trajectory>(S));
    parallel_for(E * S, threads, [&](std::size_t job) {
        const std::size_t e = job / S, s = job % S;
        try {
            runs[e][s] = simulate_eps(cfg.problem, eps[e], sample_path(cfg, s), opts);
        } catch (...) {
            rethrow_at("eps = " + std::to_string(eps[e]) + ", sample " + std::to_string(s));
        }
    });

    // Phi_i = 1 + cos(first spatial generator . y)
    const std::size_t N = cfg.problem.domain.dim;
    Frequency k1 = cfg.module->zero();
    k1.spatial[0] = 1;
    VectorTestFunction vf{MacroFactor::exponential(), {}};
    for (std::size_t i = 0; i < N; ++i)
        vf.micro.push_back(TrigPoly::constant(cfg.module, 1.0) + TrigPoly::cosine(cfg.module, k1));
    rep.corrector = corrector_identification(runs, limit, mb.cells, eps, vf);
    for (std::size_t k = 0; k < E; ++k)
        rep.rows.push_back({eps[k], "corrector_identification", rep.corrector.pairing[k].mean, rep.corrector.limit,
                            rep.corrector.defect[k], rep.corrector.pairing[k].std_error});
    if (E >= 2) rep.slopes["corrector_identification"] = rep.corrector.slope;

    // u_eps against sin(pi x) cos(k1.y): the limit pairing vanishes
    const TestFunction wf{MacroFactor::sine(1), TrigPoly::cosine(cfg.module, k1), {}};
    std::vector<PairingResult> weak;
    for (std::size_t e = 0; e < E; ++e) weak.push_back(weak_sigma_pairing(runs[e], eps[e], wf));
    detail::add_series(rep, "solution_weak", eps, weak,
                       sigma_limit_pairing(LimitField::macroscopic(limit, cfg.module), wf).mean);

    for (const char* id : {"cos_squared", "product"}) {
        auto it = rep.slopes.find(id);
        rep.checks[std::string(id) + "_slope_ge_0.8"] = it != rep.slopes.end() && it->second >= 0.8;
    }
    if (E >= 2) {
        // defect at the smallest eps against the one two halvings earlier, when present
        const auto& d = rep.corrector.defect;
        const std::size_t last = E - 1;
        const std::size_t ref = last >= 2 ? last - 2 : 0;
        rep.checks["corrector_defect_halved"] = d[last] <= 0.5 * d[ref];
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------- writers

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

inline std::string convergence_csv(const ConvergenceReport& rep) {
    std::string s = "eps,sample,err,sup_energy,int_energy\n";
    for (const auto& r : rep.rows)
        s += fmt17(r.eps) + "," + std::to_string(r.sample) + "," + fmt17(r.err) + "," + fmt17(r.sup_energy) + "," +
             fmt17(r.int_energy) + "\n";
    return s;
}

inline std::string sigma_csv(const SigmaReport& rep) {
    std::string s = "eps,test_id,pairing,limit,defect\n";
    for (const auto& r : rep.rows)
        s += fmt17(r.eps) + "," + r.test_id + "," + fmt17(r.pairing) + "," + fmt17(r.limit) + "," + fmt17(r.defect) + "\n";
    return s;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

inline json base_manifest(const RunConfig& cfg, const std::string& kind) {
    return {{"schema", manifest_schema},
            {"kind", kind},
            {"config", cfg.name},
            {"config_hash", cfg.hash},
            {"code_version", code_version},
            {"base_seed", cfg.base_seed},
            {"samples", cfg.samples},
            {"eps", cfg.problem.eps_list},
            {"cutoff", cfg.module->cutoff},
            {"dt", cfg.dt},
            {"cells", cfg.problem.domain.cells},
            {"T", cfg.problem.domain.T}};
}

inline json convergence_manifest(const RunConfig& cfg, const ConvergenceReport& rep, std::size_t threads) {
    json m = base_manifest(cfg, "convergence");
    m["threads"] = threads;
    m["b"] = matrix_json(rep.b);
    m["max_cell_residual"] = rep.max_cell_residual;
    m["deltas"] = rep.deltas;
    m["increment_deltas"] = rep.increment_deltas;
    json per = json::array();
    for (const auto& sm : rep.per_eps)
        per.push_back({{"eps", sm.eps},
                       {"mean_err", sm.mean_err},
                       {"std_err", sm.std_err},
                       {"se_mean", sm.se_mean},
                       {"prob_exceed", sm.prob},
                       {"prob_se", sm.prob_se},
                       {"mean_sup_energy", sm.mean_sup_energy},
                       {"mean_int_energy", sm.mean_int_energy},
                       {"increment_ratio", sm.increment_ratio},
                       {"wall_seconds", sm.seconds}});
    m["per_eps"] = per;
    m["slope"] = rep.slope;
    json trend = json::array();
    for (const auto& t : rep.probability_trend)
        trend.push_back({{"ok", t.ok}, {"inversions", t.inversions}, {"detail", t.detail}});
    m["probability_trend"] = trend;
    m["mean_decreasing"] = rep.mean_decreasing;
    m["sup_energy_ratio"] = rep.sup_energy_ratio;
    m["int_energy_ratio"] = rep.int_energy_ratio;
    m["increment_spread"] = rep.increment_spread;
    m["increment_constant"] = rep.increment_constant;
    m["out_of_table_range"] = rep.out_of_range;
    m["wall_seconds"] = {{"model", rep.model_seconds}, {"homogenized", rep.homogenized_seconds}, {"total", rep.total_seconds}};
    m["note"] = "only the listed eps values are tested; subsequence effects are not distinguished";
    return m;
}

inline json sigma_manifest(const RunConfig& cfg, const SigmaReport& rep) {
    json m = base_manifest(cfg, "sigma");
    m["slopes"] = rep.slopes;
    m["checks"] = rep.checks;
    m["strong"] = {{"norms", rep.strong.norms}, {"limit_norm", rep.strong.limit_norm}, {"gaps", rep.strong.gaps},
                   {"shrinking", rep.strong.shrinking}};
    m["corrector_identification"] = {{"limit", rep.corrector.limit}, {"defect", rep.corrector.defect},
                                     {"slope", rep.corrector.slope}};
    m["wall_seconds"] = rep.seconds;
    return m;
}

/// Little-endian snapshot file:
///   "HOMOGTRJ" | u32 version | u32 dims | u64 cells | f64 h | f64 dt | u64 nodes | u64 snapshots
///   then per snapshot: f64 time, nodes x f64 values (first axis fastest).
inline void write_trajectory(const std::filesystem::path& path, const Trajectory& tr) {
    static_assert(std::endian::native == std::endian::little, "snapshot writer assumes a little-endian host");
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    auto put = [&out](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
    out.write("HOMOGTRJ", 8);
    put(std::uint32_t{1});
    put(static_cast<std::uint32_t>(tr.domain.dim));
    put(static_cast<std::uint64_t>(tr.domain.cells));
    put(tr.domain.h());
    put(tr.dt);
    put(static_cast<std::uint64_t>(tr.domain.node_count()));
    put(static_cast<std::uint64_t>(tr.fields.size()));
    for (std::size_t s = 0; s < tr.fields.size(); ++s) {
        put(tr.times[s]);
        out.write(reinterpret_cast<const char*>(tr.fields[s].data()),
                  static_cast<std::streamsize>(tr.fields[s].size() * sizeof(double)));
    }
}

inline Trajectory read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    auto get = [&in](auto& v) { in.read(reinterpret_cast<char*>(&v), sizeof v); };
    char magic[8];
    in.read(magic, 8);
    if (std::string(magic, 8) != "HOMOGTRJ") throw ConfigError("not a trajectory file");
    std::uint32_t version = 0, dims = 0;
    std::uint64_t cells = 0, nodes = 0, snaps = 0;
    double h = 0.0;
    Trajectory tr;
    get(version);
    get(dims);
    get(cells);
    get(h);
    get(tr.dt);
    get(nodes);
    get(snaps);
    if (!in || version != 1) throw ConfigError("unsupported trajectory file");
    tr.domain.dim = dims;
    tr.domain.cells = cells;
    for (std::uint64_t s = 0; s < snaps; ++s) {
        double t = 0.0;
        get(t);
        std::vector<double> f(nodes);
        in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(nodes * sizeof(double)));
        tr.times.push_back(t);
        tr.fields.push_back(std::move(f));
    }
    if (!in) throw ConfigError("truncated trajectory file");
    if (!tr.times.empty()) tr.domain.T = tr.times.back();
    return tr;
}

/// Long-format rows "eps,key,metric,value" from a convergence or sigma CSV.
inline std::string plot_data(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string header;
    std::getline(in, header);
    std::vector<std::string> cols;
    {
        std::stringstream hs(header);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    if (cols.size() < 3 || cols[0] != "eps") throw ConfigError("unrecognised report header '" + header + "'");
    std::string out = "eps,key,metric,value\n";
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> v;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) v.push_back(c);
        if (v.size() != cols.size()) throw ConfigError("malformed report row '" + line + "'");
        for (std::size_t k = 2; k < cols.size(); ++k) out += v[0] + "," + v[1] + "," + cols[k] + "," + v[k] + "\n";
    }
    return out;
}

}  // namespace homog

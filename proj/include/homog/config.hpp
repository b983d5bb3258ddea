#pragma once

// JSON run configuration. Trig polynomials are written as coefficient tables:
//
//   [ {"spatial": [1], "temporal": [0], "re": 0.5, "im": 0.0}, ... ]
//
// with the shorthands {"spatial": [1], "temporal": [0], "cos": A} and
// {"..., "sin": A} for A cos(w.y + w0 tau) and A sin(w.y + w0 tau), and
// {"const": c} for a constant.

#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "homog/cell.hpp"
#include "homog/corrector.hpp"
#include "homog/effective.hpp"
#include "homog/errors.hpp"
#include "homog/initial.hpp"
#include "homog/profile.hpp"
#include "homog/spde.hpp"
#include "homog/trig_poly.hpp"

namespace homog {

using json = nlohmann::json;

inline constexpr const char* config_schema = "homog.config/1";
inline constexpr const char* manifest_schema = "homog.manifest/1.0.0";
inline constexpr const char* code_version = "0.1.0";

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct RunConfig {
    std::string name = "run";
    ModulePtr module;
    bool periodic_declared = false;
    ProblemSpec problem;
    std::size_t samples = 1;
    std::uint64_t base_seed = 0;
    double dt = 1.0 / 16384.0;
    std::size_t snapshot_every = 16;
    double r_min = -2.0;
    double r_max = 2.0;
    std::size_t r_points = 129;
    std::vector<double> deltas{0.1, 0.05};
    std::vector<double> increment_deltas{0.02, 0.01, 0.005};
    std::string output_dir = "out";
    CellSolverOptions cell;
    std::string hash;  // FNV-1a of the config bytes

    [[nodiscard]] SimulationOptions simulation() const {
        SimulationOptions o;
        o.dt = dt;
        o.snapshot_every = snapshot_every;
        return o;
    }
    [[nodiscard]] std::size_t base_steps() const {
        const auto n = static_cast<std::size_t>(std::llround(problem.domain.T / dt));
        return n;
    }

    /// Structural invariants that do not involve the modelling assumptions.
    void check() const {
        if (samples < 1) throw ConfigError("samples must be at least 1");
        if (problem.eps_list.empty()) throw ConfigError("eps list is empty");
        for (std::size_t i = 0; i < problem.eps_list.size(); ++i) {
            if (!(problem.eps_list[i] > 0.0)) throw ConfigError("eps values must be positive");
            if (i > 0 && !(problem.eps_list[i] < problem.eps_list[i - 1]))
                throw ConfigError("eps list must be strictly decreasing");
        }
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        if (snapshot_every < 1) throw ConfigError("snapshot_every must be at least 1");
        const double steps = problem.domain.T / dt;
        if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
            throw ConfigError("T must be an integer multiple of dt");
        if (base_steps() % snapshot_every != 0) throw ConfigError("T / dt must be a multiple of snapshot_every");
        if (!(r_min < r_max) || r_points < 9) throw ConfigError("table needs r_min < r_max and at least 9 points");
        for (double d : deltas)
            if (!(d > 0.0)) throw ConfigError("probability thresholds must be positive");
        for (double d : increment_deltas)
            if (!(d > 0.0 && d < 1.0)) throw ConfigError("increment deltas must lie in (0,1)");
    }
};

namespace io {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline Frequency parse_frequency(const json& rec, const FrequencyModule& m) {
    Frequency k = m.zero();
    if (rec.contains("spatial")) k.spatial = rec.at("spatial").get<std::vector<int>>();
    if (rec.contains("temporal")) k.temporal = rec.at("temporal").get<std::vector<int>>();
    if (k.spatial.size() != m.n_spatial() || k.temporal.size() != m.n_temporal())
        throw ConfigError("frequency coordinates do not match the module generators");
    return k;
}

inline TrigPoly parse_trig_poly(const json& j, const ModulePtr& module) {
    if (j.is_number()) return TrigPoly::constant(module, j.get<double>());
    if (j.is_object()) return parse_trig_poly(json::array({j}), module);
    if (!j.is_array()) throw ConfigError("trig polynomial must be a number or an array of coefficient records");
    TrigPoly sum(module);
    TrigPoly::Coeffs raw;
    for (const auto& rec : j) {
        if (rec.contains("const")) {
            sum += TrigPoly::constant(module, rec.at("const").get<double>());
            continue;
        }
        const Frequency k = parse_frequency(rec, *module);
        if (!module->contains(k)) throw ConfigError("frequency outside the module cutoff");
        if (rec.contains("cos"))
            sum += TrigPoly::cosine(module, k, rec.at("cos").get<double>());
        else if (rec.contains("sin"))
            sum += TrigPoly::sine(module, k, rec.at("sin").get<double>());
        else
            raw[k] += cplx(get_or(rec, "re", 0.0), get_or(rec, "im", 0.0));
    }
    if (!raw.empty()) sum += TrigPoly(module, std::move(raw));
    return sum;
}

inline json trig_poly_json(const TrigPoly& u) {
    json arr = json::array();
    for (const auto& [k, c] : u.coeffs())
        arr.push_back({{"spatial", k.spatial}, {"temporal", k.temporal}, {"re", c.real()}, {"im", c.imag()}});
    return arr;
}

inline ScalarProfile parse_profile(const json& j) {
    const auto kind = ScalarProfile::parse_kind(j.at("kind").get<std::string>());
    return {kind, get_or(j, "scale", 1.0), get_or(j, "width", 1.0)};
}

inline json profile_json(const ScalarProfile& p) {
    return {{"kind", std::string(ScalarProfile::kind_name(p.kind()))}, {"scale", p.scale()}, {"width", p.width()}};
}

inline FrequencyModule parse_module(const json& j, std::optional<int> cutoff_override) {
    FrequencyModule m;
    double unit = 1.0;
    const std::string u = get_or<std::string>(j, "generator_unit", "1");
    if (u == "2pi")
        unit = 2.0 * std::numbers::pi;
    else if (u == "pi")
        unit = std::numbers::pi;
    else if (u != "1")
        throw ConfigError("generator_unit must be \"1\", \"pi\" or \"2pi\"");
    m.spatial_generators = j.at("spatial_generators").get<std::vector<std::vector<double>>>();
    m.temporal_generators = j.at("temporal_generators").get<std::vector<double>>();
    for (auto& g : m.spatial_generators)
        for (double& v : g) v *= unit;
    for (double& v : m.temporal_generators) v *= unit;
    m.cutoff = cutoff_override.value_or(get_or(j, "cutoff", 8));
    const std::string norm = get_or<std::string>(j, "norm", "max_coordinate");
    if (norm == "max_coordinate")
        m.norm = CutoffNorm::max_coordinate;
    else if (norm == "total_degree")
        m.norm = CutoffNorm::total_degree;
    else
        throw ConfigError("unknown cutoff norm '" + norm + "'");
    if (j.contains("declared_independent"))
        m.declared_independent = j.at("declared_independent").get<std::vector<std::array<std::size_t, 2>>>();
    m.validate();
    return m;
}

inline InitialCondition parse_initial(const json& j) {
    InitialCondition u0;
    if (j.is_null()) return u0;
    for (const auto& t : j) {
        InitialCondition::Term term;
        term.coef = get_or(t, "coef", 1.0);
        for (const auto& f : t.at("factors")) {
            InitialCondition::Factor fac;
            const std::string kind = f.at("kind").get<std::string>();
            if (kind == "sine")
                fac.kind = InitialCondition::Factor::Kind::sine;
            else if (kind == "polynomial")
                fac.kind = InitialCondition::Factor::Kind::polynomial;
            else
                throw ConfigError("initial factor kind must be sine or polynomial");
            fac.axis = get_or<std::size_t>(f, "axis", 0);
            fac.k = get_or(f, "k", 1);
            if (f.contains("coeffs")) fac.coeffs = f.at("coeffs").get<std::vector<double>>();
            term.factors.push_back(std::move(fac));
        }
        u0.terms.push_back(std::move(term));
    }
    return u0;
}

}  // namespace io

/// Parses a configuration without checking the modelling assumptions.
inline RunConfig parse_config(const std::string& text, std::optional<int> cutoff_override = {}) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        RunConfig c;
        c.hash = hex64(fnv1a(text));
        if (io::get_or<std::string>(j, "schema", config_schema) != config_schema)
            throw ConfigError("unsupported config schema");
        c.name = io::get_or<std::string>(j, "name", "run");
        c.module = make_module(io::parse_module(j.at("module"), cutoff_override));
        c.periodic_declared = io::get_or(j, "periodic", false);

        const auto& dom = j.at("domain");
        c.problem.domain.dim = io::get_or<std::size_t>(dom, "dim", 1);
        c.problem.domain.T = dom.at("T").get<double>();
        c.problem.domain.cells = dom.at("cells").get<std::size_t>();

        const auto& co = j.at("coefficient");
        c.problem.a.lambda = co.at("lambda").get<double>();
        for (const auto& row : co.at("a")) {
            std::vector<TrigPoly> r;
            for (const auto& e : row) r.push_back(io::parse_trig_poly(e, c.module));
            c.problem.a.a.push_back(std::move(r));
        }
        if (j.contains("reaction"))
            for (const auto& t : j.at("reaction"))
                c.problem.g.terms.push_back({io::parse_trig_poly(t.at("gamma"), c.module), io::parse_profile(t.at("profile"))});
        if (j.contains("noise")) {
            const auto& nz = j.at("noise");
            c.problem.noise.K = io::get_or(nz, "K", 1.0);
            for (const auto& ch : nz.at("channels")) {
                std::vector<NoiseTerm::Term> terms;
                for (const auto& t : ch)
                    terms.push_back({io::parse_trig_poly(t.at("mu"), c.module), io::parse_profile(t.at("profile"))});
                c.problem.noise.channels.push_back(std::move(terms));
            }
        }
        c.problem.u0 = io::parse_initial(j.value("initial", json()));
        c.problem.eps_list = j.at("eps").get<std::vector<double>>();

        const auto samples = j.value("samples", 1LL);
        if (samples < 0) throw ConfigError("samples must be at least 1");
        c.samples = static_cast<std::size_t>(samples);
        c.base_seed = j.value("base_seed", std::uint64_t{0});
        c.dt = j.value("dt", c.dt);
        c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
        // default table range [-2 max|u0|, 2 max|u0|]; the model clamps and counts beyond it
        const double sup = c.problem.u0.sampled_sup(c.problem.domain.dim);
        c.r_max = sup > 0.0 ? 2.0 * sup : 1.0;
        c.r_min = -c.r_max;
        if (j.contains("table")) {
            const auto& t = j.at("table");
            c.r_min = t.value("r_min", c.r_min);
            c.r_max = t.value("r_max", c.r_max);
            c.r_points = t.value("points", c.r_points);
        }
        c.deltas = j.value("deltas", c.deltas);
        c.increment_deltas = j.value("increment_deltas", c.increment_deltas);
        c.output_dir = j.value("output", c.output_dir);
        if (j.contains("cell_solver")) {
            const auto& s = j.at("cell_solver");
            const std::string method = s.value("method", std::string("auto"));
            if (method == "auto")
                c.cell.method = CellSolverOptions::Method::automatic;
            else if (method == "direct")
                c.cell.method = CellSolverOptions::Method::direct;
            else if (method == "iterative")
                c.cell.method = CellSolverOptions::Method::iterative;
            else
                throw ConfigError("cell_solver.method must be auto, direct or iterative");
            c.cell.iterative_tolerance = s.value("tolerance", c.cell.iterative_tolerance);
        }
        c.check();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline RunConfig load_config(const std::string& path, std::optional<int> cutoff_override = {}) {
    return parse_config(read_file(path), cutoff_override);
}

inline json effective_model_json(const EffectiveModel& m) {
    json b = json::array();
    for (Eigen::Index i = 0; i < m.b.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.b.cols(); ++j) row.push_back(m.b(i, j));
        b.push_back(row);
    }
    return {{"schema", "homog.effective/1"},
            {"dim", m.dim},
            {"channels", m.channels},
            {"b", b},
            {"r", m.r_grid},
            {"F1", m.F1},
            {"F2", m.F2},
            {"F3", m.F3},
            {"Mtilde", m.Mtilde},
            {"lipschitz", {{"F1", m.lipschitz.F1}, {"F2", m.lipschitz.F2}, {"F3", m.lipschitz.F3}, {"Mtilde", m.lipschitz.Mtilde}}},
            {"F2_bound", m.F2_bound},
            {"cutoff", m.cutoff},
            {"galerkin_dim", m.galerkin_dim},
            {"max_cell_residual", m.max_cell_residual},
            {"rcond", m.rcond}};
}

inline EffectiveModel effective_model_from_json(const json& j) {
    EffectiveModel m;
    m.dim = j.at("dim").get<std::size_t>();
    m.channels = j.at("channels").get<std::size_t>();
    const auto b = j.at("b").get<std::vector<std::vector<double>>>();
    m.b.resize(static_cast<Eigen::Index>(m.dim), static_cast<Eigen::Index>(m.dim));
    for (std::size_t i = 0; i < m.dim; ++i)
        for (std::size_t k = 0; k < m.dim; ++k) m.b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = b.at(i).at(k);
    m.r_grid = j.at("r").get<std::vector<double>>();
    m.F1 = j.at("F1").get<std::vector<double>>();
    m.F2 = j.at("F2").get<std::vector<double>>();
    m.F3 = j.at("F3").get<std::vector<double>>();
    m.Mtilde = j.at("Mtilde").get<std::vector<double>>();
    m.cutoff = j.value("cutoff", 0);
    m.galerkin_dim = j.value("galerkin_dim", std::size_t{0});
    m.max_cell_residual = j.value("max_cell_residual", 0.0);
    m.rcond = j.value("rcond", 0.0);
    m.refresh_estimates();
    return m;
}

inline json cell_solution_json(const CellSolution& s) {
    json chi = json::array();
    for (const auto& c : s.chi) chi.push_back(io::trig_poly_json(c));
    json w = json::array();
    for (std::size_t i = 0; i < s.w_hat.size(); ++i)
        w.push_back({{"profile", io::profile_json(s.w_profiles[i])}, {"w", io::trig_poly_json(s.w_hat[i])}});
    return {{"chi", chi},
            {"w", w},
            {"chi_residuals", s.chi_residuals},
            {"w_residuals", s.w_residuals},
            {"galerkin_dim", s.galerkin_dim},
            {"rcond", s.rcond},
            {"direct", s.direct}};
}

}  // namespace homog

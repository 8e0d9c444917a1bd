#pragma once

// JSON experiment configuration: parsing with key-level diagnostics, defaults
// per experiment, validation and a loadable echo of the effective config.

#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxlase/collision.hpp"
#include "fluxlase/core_model.hpp"
#include "fluxlase/error.hpp"
#include "fluxlase/presets.hpp"

namespace fluxlase::io {

using json = nlohmann::ordered_json;

enum class Experiment { relax, steady, lase_broad, lase_flux, budget, calibrate };

inline const char* to_string(Experiment e) {
    switch (e) {
        case Experiment::relax: return "relax";
        case Experiment::steady: return "steady";
        case Experiment::lase_broad: return "lase-broad";
        case Experiment::lase_flux: return "lase-flux";
        case Experiment::budget: return "budget";
        case Experiment::calibrate: return "calibrate";
    }
    return "?";
}

inline Experiment experiment_from_string(const std::string& s) {
    for (auto e : {Experiment::relax, Experiment::steady, Experiment::lase_broad, Experiment::lase_flux,
                   Experiment::budget, Experiment::calibrate})
        if (s == to_string(e)) return e;
    throw ConfigError("experiment: unknown value '" + s +
                          "' (expected relax, steady, lase-broad, lase-flux, budget or calibrate)",
                      "experiment");
}

inline bool is_laser(Experiment e) { return e == Experiment::lase_broad || e == Experiment::lase_flux; }

struct GridBlock {
    double omega_min = presets::kRelaxOmegaMin;
    double omega_max = presets::kRelaxOmegaMax;
    std::size_t m = presets::kRelaxNodes;
    SpectralGrid grid() const { return {omega_min, omega_max, m}; }
};

/// Finite-flux sequence for the steady experiment: relax under zero flux, then
/// impose Q = q_values[k], P = p at both edges in turn, each stage starting
/// from the previous endpoint.
struct SteadyBlock {
    std::vector<double> q_values{0.5, 1.0, 2.0};
    double p = 0.0;
};

struct PumpBlock {
    double lambda = presets::kLaserLambda;
    /// Flux mode only. Unset means "match the broad pump lambda".
    std::optional<double> q_inject;
    double omega_L = presets::kLaserOmegaL;
};

struct LaserBlock {
    double e0 = presets::kLaserSeedField;
    double collision_max_change = 5e-2;
};

struct BudgetBlock {
    double omega_L = 1.0;
    double omega_0 = 2.0;
    double omega_R = 3.0;
    double q0 = 1.0;
};

struct CalibrateBlock {
    double target_fs = 100.0;
    double threshold = 1e-3;
};

struct RunBlock {
    double t_end = 2.0;           // fs
    double dt = 0.0;              // fs; 0 = automatic first step (adaptive runs)
    bool adaptive = true;
    double max_change = 5e-3;     // per-step occupation change bound (adaptive runs)
    double dt_max = 5.0;          // fs
    double snapshot_every = 0.0;  // fs; 0 = first and last only
    double sample_every = 0.0;    // fs, laser field samples; 0 = every step
    double steady_window = 0.0;   // fs, laser steady check; 0 = last 10 % of the run
    std::string output_dir = "out";
};

struct ExperimentConfig {
    Experiment experiment = Experiment::relax;
    GridBlock grid;
    MaterialParams params = presets::relax_params();
    presets::InitialShape initial = presets::relax_initial();
    BoundaryFluxes bc = BoundaryFluxes::zero();
    SteadyBlock steady;
    PumpBlock pump;
    LaserBlock laser;
    BudgetBlock budget;
    CalibrateBlock calibrate;
    RunBlock run;

    void validate() const;
};

/// Defaults for one experiment before any user overrides.
inline ExperimentConfig defaults_for(Experiment e) {
    ExperimentConfig c;
    c.experiment = e;
    switch (e) {
        case Experiment::relax:
            c.run.t_end = 2.0;
            c.run.snapshot_every = 0.05;
            break;
        case Experiment::steady:
            c.run.t_end = 20.0;
            c.run.snapshot_every = 0.5;
            break;
        case Experiment::calibrate:
            c.run.t_end = 0.0;
            break;
        case Experiment::budget:
            c.run.t_end = 0.0;
            break;
        case Experiment::lase_broad:
        case Experiment::lase_flux:
            c.grid = {presets::kLaserOmegaL, presets::kLaserOmega0, presets::kLaserNodes};
            c.params = presets::laser_params();
            c.initial = presets::laser_initial();
            c.run.t_end = presets::kLaserTEnd;
            c.run.dt = presets::kLaserDt;
            c.run.adaptive = false;
            c.run.snapshot_every = 4000.0;
            c.run.sample_every = 10.0;
            break;
    }
    return c;
}

namespace detail {

/// Reads one JSON object, remembering the key path for diagnostics and
/// rejecting keys nobody asked for.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where() + " must be an object", path_);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    void number(const std::string& key, double& out) {
        if (!has(key)) return;
        const auto& v = obj_.at(key);
        if (!v.is_number()) throw ConfigError(key_path(key) + " must be a number", key_path(key));
        out = v.get<double>();
    }

    void count(const std::string& key, std::size_t& out) {
        if (!has(key)) return;
        const auto& v = obj_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError(key_path(key) + " must be a non-negative integer", key_path(key));
        out = static_cast<std::size_t>(v.get<long long>());
    }

    void boolean(const std::string& key, bool& out) {
        if (!has(key)) return;
        const auto& v = obj_.at(key);
        if (!v.is_boolean()) throw ConfigError(key_path(key) + " must be true or false", key_path(key));
        out = v.get<bool>();
    }

    void string(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const auto& v = obj_.at(key);
        if (!v.is_string()) throw ConfigError(key_path(key) + " must be a string", key_path(key));
        out = v.get<std::string>();
    }

    void numbers(const std::string& key, std::vector<double>& out) {
        if (!has(key)) return;
        const auto& v = obj_.at(key);
        if (!v.is_array()) throw ConfigError(key_path(key) + " must be an array of numbers", key_path(key));
        out.clear();
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(key_path(key) + " must be an array of numbers", key_path(key));
            out.push_back(x.get<double>());
        }
    }

    std::optional<ObjectReader> child(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return ObjectReader(obj_.at(key), key_path(key));
    }

    /// Call after all reads.
    void reject_unknown() const {
        for (const auto& item : obj_.items())
            if (!seen_.count(item.key()))
                throw ConfigError("unknown key " + key_path(item.key()), key_path(item.key()));
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key + " " + what, key);
}

/// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
    using detail::require;
    require(grid.m >= 8, "grid.m", "must be >= 8");
    require(std::isfinite(grid.omega_min) && std::isfinite(grid.omega_max), "grid.omega_min", "must be finite");
    require(grid.omega_min < grid.omega_max, "grid.omega_min", "must be < grid.omega_max");
    params.validate();
    grid.grid().require_above_band_edge(params);

    require(std::isfinite(initial.a) && std::isfinite(initial.b), "initial.a", "and initial.b must be finite");
    require(initial.bump_width > 0.0, "initial.bump_width", "must be > 0");
    require(bc.finite(), "bc.q_left", "and the other boundary fluxes must be finite");

    require(run.t_end >= 0.0, "run.t_end", "must be >= 0");
    require(run.dt >= 0.0, "run.dt", "must be >= 0");
    require(run.adaptive || run.dt > 0.0 || run.t_end == 0.0, "run.dt", "must be > 0 for fixed stepping");
    require(run.max_change > 0.0 && run.max_change < 1.0, "run.max_change", "must lie in (0,1)");
    require(run.dt_max > 0.0, "run.dt_max", "must be > 0");
    require(run.snapshot_every >= 0.0, "run.snapshot_every", "must be >= 0");
    require(run.sample_every >= 0.0, "run.sample_every", "must be >= 0");
    require(run.steady_window >= 0.0, "run.steady_window", "must be >= 0");
    require(!run.output_dir.empty(), "run.output_dir", "must not be empty");

    switch (experiment) {
        case Experiment::relax:
            require(run.t_end > 0.0, "run.t_end", "must be > 0");
            break;
        case Experiment::steady:
            require(run.t_end > 0.0, "run.t_end", "must be > 0");
            require(!steady.q_values.empty(), "steady.q_values", "must not be empty");
            for (double q : steady.q_values) require(std::isfinite(q), "steady.q_values", "must be finite");
            require(std::isfinite(steady.p), "steady.p", "must be finite");
            break;
        case Experiment::lase_broad:
        case Experiment::lase_flux:
            require(run.t_end > 0.0, "run.t_end", "must be > 0");
            require(run.dt > 0.0, "run.dt", "must be > 0");
            require(pump.lambda >= 0.0, "pump.lambda", "must be >= 0");
            require(std::isfinite(pump.omega_L), "pump.omega_L", "must be finite");
            if (experiment == Experiment::lase_flux) {
                require(pump.omega_L < grid.omega_max, "pump.omega_L", "must be < the injection edge grid.omega_max");
                require(pump.omega_L >= grid.omega_min, "pump.omega_L", "must be >= grid.omega_min");
                if (pump.q_inject) require(std::isfinite(*pump.q_inject), "pump.q_inject", "must be finite");
            }
            require(laser.e0 > 0.0, "laser.e0", "must be > 0");
            require(laser.collision_max_change > 0.0 && laser.collision_max_change < 1.0,
                    "laser.collision_max_change", "must lie in (0,1)");
            break;
        case Experiment::budget:
            require(budget.omega_L < budget.omega_0, "budget.omega_L", "must be < budget.omega_0");
            require(budget.omega_0 < budget.omega_R, "budget.omega_0", "must be < budget.omega_R");
            require(budget.q0 >= 0.0, "budget.q0", "must be >= 0");
            break;
        case Experiment::calibrate:
            require(calibrate.target_fs > 0.0, "calibrate.target_fs", "must be > 0");
            require(calibrate.threshold > 0.0, "calibrate.threshold", "must be > 0");
            break;
    }
}

/// Builds a validated config from a parsed JSON document.
inline ExperimentConfig config_from_json(const json& doc) {
    detail::ObjectReader root(doc, "");
    std::string name;
    root.string("experiment", name);
    if (name.empty()) throw ConfigError("missing key experiment", "experiment");
    ExperimentConfig c = defaults_for(experiment_from_string(name));

    if (auto g = root.child("grid")) {
        g->number("omega_min", c.grid.omega_min);
        g->number("omega_max", c.grid.omega_max);
        g->count("m", c.grid.m);
        g->reject_unknown();
    }
    if (auto p = root.child("params")) {
        auto& q = c.params;
        p->number("alpha", q.alpha);
        p->number("beta", q.beta);
        p->number("s", q.s);
        p->number("I", q.I);
        p->number("mu0", q.mu0);
        p->number("eps_gap", q.eps_gap);
        p->number("Omega", q.Omega);
        p->number("gamma_E", q.gamma_E);
        p->number("gamma_P", q.gamma_P);
        p->number("gamma_k", q.gamma_k);
        p->number("Lambda", q.Lambda);
        p->number("hbar", q.hbar);
        p->number("eps0", q.eps0);
        p->reject_unknown();
    }
    if (auto i = root.child("initial")) {
        i->number("a", c.initial.a);
        i->number("b", c.initial.b);
        i->number("bump_amplitude", c.initial.bump_amplitude);
        i->number("bump_center", c.initial.bump_center);
        i->number("bump_width", c.initial.bump_width);
        i->reject_unknown();
    }
    if (auto b = root.child("bc")) {
        b->number("q_left", c.bc.q_left);
        b->number("p_left", c.bc.p_left);
        b->number("q_right", c.bc.q_right);
        b->number("p_right", c.bc.p_right);
        b->reject_unknown();
    }
    if (auto s = root.child("steady")) {
        s->numbers("q_values", c.steady.q_values);
        s->number("p", c.steady.p);
        s->reject_unknown();
    }
    if (auto p = root.child("pump")) {
        p->number("lambda", c.pump.lambda);
        double q = 0.0;
        if (p->has("q_inject")) {
            p->number("q_inject", q);
            c.pump.q_inject = q;
        }
        p->number("omega_L", c.pump.omega_L);
        p->reject_unknown();
    }
    if (auto l = root.child("laser")) {
        l->number("e0", c.laser.e0);
        l->number("collision_max_change", c.laser.collision_max_change);
        l->reject_unknown();
    }
    if (auto b = root.child("budget")) {
        b->number("omega_L", c.budget.omega_L);
        b->number("omega_0", c.budget.omega_0);
        b->number("omega_R", c.budget.omega_R);
        b->number("q0", c.budget.q0);
        b->reject_unknown();
    }
    if (auto k = root.child("calibrate")) {
        k->number("target_fs", c.calibrate.target_fs);
        k->number("threshold", c.calibrate.threshold);
        k->reject_unknown();
    }
    if (auto r = root.child("run")) {
        r->number("t_end", c.run.t_end);
        r->number("dt", c.run.dt);
        r->boolean("adaptive", c.run.adaptive);
        r->number("max_change", c.run.max_change);
        r->number("dt_max", c.run.dt_max);
        r->number("snapshot_every", c.run.snapshot_every);
        r->number("sample_every", c.run.sample_every);
        r->number("steady_window", c.run.steady_window);
        r->string("output_dir", c.run.output_dir);
        r->reject_unknown();
    }
    root.reject_unknown();
    c.validate();
    return c;
}

/// Parses JSON text; syntax errors carry line and column.
inline ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError("config parse error at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + e.what());
    }
    return config_from_json(doc);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Full effective config; loading it back yields the same config.
inline json to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = to_string(c.experiment);
    j["grid"] = {{"omega_min", c.grid.omega_min}, {"omega_max", c.grid.omega_max}, {"m", c.grid.m}};
    const auto& p = c.params;
    j["params"] = {{"alpha", p.alpha},     {"beta", p.beta},       {"s", p.s},
                   {"I", p.I},             {"mu0", p.mu0},         {"eps_gap", p.eps_gap},
                   {"Omega", p.Omega},     {"gamma_E", p.gamma_E}, {"gamma_P", p.gamma_P},
                   {"gamma_k", p.gamma_k}, {"Lambda", p.Lambda},   {"hbar", p.hbar},
                   {"eps0", p.eps0}};
    j["initial"] = {{"a", c.initial.a},
                    {"b", c.initial.b},
                    {"bump_amplitude", c.initial.bump_amplitude},
                    {"bump_center", c.initial.bump_center},
                    {"bump_width", c.initial.bump_width}};
    j["bc"] = {{"q_left", c.bc.q_left}, {"p_left", c.bc.p_left}, {"q_right", c.bc.q_right}, {"p_right", c.bc.p_right}};
    j["steady"] = {{"q_values", c.steady.q_values}, {"p", c.steady.p}};
    j["pump"] = {{"lambda", c.pump.lambda}};
    if (c.pump.q_inject) j["pump"]["q_inject"] = *c.pump.q_inject;
    j["pump"]["omega_L"] = c.pump.omega_L;
    j["laser"] = {{"e0", c.laser.e0}, {"collision_max_change", c.laser.collision_max_change}};
    j["budget"] = {{"omega_L", c.budget.omega_L}, {"omega_0", c.budget.omega_0},
                   {"omega_R", c.budget.omega_R}, {"q0", c.budget.q0}};
    j["calibrate"] = {{"target_fs", c.calibrate.target_fs}, {"threshold", c.calibrate.threshold}};
    j["run"] = {{"t_end", c.run.t_end},
                {"dt", c.run.dt},
                {"adaptive", c.run.adaptive},
                {"max_change", c.run.max_change},
                {"dt_max", c.run.dt_max},
                {"snapshot_every", c.run.snapshot_every},
                {"sample_every", c.run.sample_every},
                {"steady_window", c.run.steady_window},
                {"output_dir", c.run.output_dir}};
    return j;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_json(a) == to_json(b); }

}  // namespace fluxlase::io

#pragma once

// JSON experiment files. One file holds everything a run needs:
//
//   pack        PackConfig, field names as in the struct, SI units
//   aux         nominal auxiliary load seen by the controller feedforward
//   controller  ControllerSettings plus enabled / fixed_m
//   design      DesignInputs (optional)
//   scenario    array of ScenarioStep
//   simulation  duration, dt, trace stride, coupling flag, metrics window
//   analyze     duty grid and fixed-m settling for gain curves
//   sweep       sweep kind and its ranges
//   assertions  optional metric limits checked by `simulate`
//
// Unknown keys are rejected so that a misspelled field cannot silently fall
// back to its default.

#include "rbsim/controller.hpp"
#include "rbsim/design.hpp"
#include "rbsim/errors.hpp"
#include "rbsim/simulator.hpp"
#include "rbsim/types.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace rbsim {

struct SimulationSettings {
    double duration = 0.0;
    double dt = 0.0; // 0: simulator default
    std::size_t trace_stride = 1;
    bool aux_string_coupling = true;
    double v_min_constant_power = 1.0;
    double window = 0.1; // trailing fraction of each segment used for metrics
};

struct AnalyzeSettings {
    std::vector<double> d_grid;  // explicit grid; overrides the range below when non-empty
    double d_start = 0.05;
    double d_stop = 0.95;
    double d_step = 0.05;
    double v_m = 0.0;            // 0: mean module open-circuit voltage
    double sim_duration = 0.05;  // fixed-m run length for --simulate
    double sim_window = 0.2;
    long base_level = -1;        // integer part of m(n-1) for --simulate; -1: (n-1)/2
    // The closed-form model ignores the string path, so the comparison runs decoupled by default.
    bool aux_string_coupling = false;
};

enum class SweepKind { deviation_bound, dt_refinement, duty_grid };

struct SweepSettings {
    SweepKind kind = SweepKind::deviation_bound;
    std::size_t n_min = 2;
    std::size_t n_max = 12;
    std::size_t refs_per_n = 100;
    double v_m = 0.0;   // 0: mean module open-circuit voltage
    double d_star_min = 0.05;
    double d_star_max = 0.5;
    std::size_t dt_levels = 3;
};

/// Limits checked against every segment's trailing-window metrics.
struct Assertions {
    std::optional<double> dc1_ripple_pct_max;
    std::optional<double> dc2_ripple_pct_max;
    std::optional<double> dc2_err_pct_max;
    std::optional<double> dc2_max_dev_pct_max;
    std::optional<double> dc1_max_dev_pct_max;

    bool empty() const {
        return !dc1_ripple_pct_max && !dc2_ripple_pct_max && !dc2_err_pct_max &&
               !dc2_max_dev_pct_max && !dc1_max_dev_pct_max;
    }
};

struct ExperimentConfig {
    PackConfig pack;
    double aux_r_load = 0.0; // 0: taken from the first resistive load2 in the scenario
    double aux_delta_vr = 0.0;
    ControllerSettings controller;
    bool controller_enabled = true;
    double fixed_m = 0.0;
    std::optional<DesignInputs> design;
    FrequencyBasis frequency_basis = FrequencyBasis::per_carrier;
    std::vector<ScenarioStep> scenario;
    SimulationSettings simulation;
    AnalyzeSettings analyze;
    SweepSettings sweep;
    Assertions assertions;

    ControllerConfig controller_config() const {
        ControllerConfig cc;
        cc.n_modules = pack.n_modules;
        cc.aux = aux_params_from(pack, aux_r_load, aux_delta_vr);
        cc.settings = controller;
        return cc;
    }

    SimOptions sim_options() const {
        SimOptions o;
        o.dt = simulation.dt;
        o.aux_string_coupling = simulation.aux_string_coupling;
        o.v_min_constant_power = simulation.v_min_constant_power;
        o.trace_stride = simulation.trace_stride;
        return o;
    }
};

namespace detail {

using nlohmann::json;

// Reads fields from one JSON object and remembers which keys were consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <class T>
    void get(const std::string& key, T& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <class T>
    void get(const std::string& key, std::optional<T>& out) {
        if (!j_.contains(key)) return;
        T v{};
        get(key, v);
        out = v;
    }

    template <class T>
    T require(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing required field '" + key + "'");
        T v{};
        get(key, v);
        return v;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(where_ + ": unknown field '" + it.key() + "'");
    }

    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline LoadSpec parse_load(const json& j, const std::string& where) {
    if (j.is_string() && j.get<std::string>() == "open") return LoadSpec::open();
    ObjectReader r(j, where);
    const auto kind = r.require<std::string>("kind");
    LoadSpec l;
    if (kind == "open") {
        l = LoadSpec::open();
    } else {
        const auto value = r.require<double>("value");
        if (!(value > 0.0)) throw ConfigError(where + ".value: must be > 0");
        if (kind == "resistive") l = LoadSpec::resistive(value);
        else if (kind == "constant_power") l = LoadSpec::constant_power(value);
        else throw ConfigError(where + ".kind: expected resistive, constant_power or open");
    }
    r.finish();
    return l;
}

inline ModuleParams parse_module(const json& j, const std::string& where) {
    ObjectReader r(j, where);
    ModuleParams m;
    m.v_oc = r.require<double>("v_oc");
    r.get("r_bt", m.r_bt);
    r.get("r_ds", m.r_ds);
    r.get("r_d", m.r_d);
    r.finish();
    return m;
}

inline PackConfig parse_pack(const json& j) {
    ObjectReader r(j, "pack");
    PackConfig p;
    p.n_modules = r.require<std::size_t>("n_modules");
    p.f_sw = r.require<double>("f_sw");
    p.l_dc = r.require<double>("l_dc");
    r.get("r_ldc", p.r_ldc);
    p.c_dc1 = r.require<double>("c_dc1");
    p.c_dc2 = r.require<double>("c_dc2");
    p.c_dc3 = r.require<double>("c_dc3");
    p.turns_ratio = r.require<double>("turns_ratio");
    r.get("r_l1", p.r_l1);
    r.get("r_l2", p.r_l2);
    r.get("r_cdc2", p.r_cdc2);
    r.get("v_fd", p.v_fd);
    r.get("r_fd", p.r_fd);
    r.get("l_m", p.l_m);
    r.get("bypass_includes_rds", p.bypass_includes_rds);
    if (!r.has("modules")) throw ConfigError("pack: missing required field 'modules'");
    const auto& mods = r.raw("modules");
    if (mods.is_array()) {
        for (std::size_t k = 0; k < mods.size(); ++k)
            p.modules.push_back(parse_module(mods[k], "pack.modules[" + std::to_string(k) + "]"));
    } else {
        // A single object stands for n_modules identical modules.
        p.modules.assign(p.n_modules, parse_module(mods, "pack.modules"));
    }
    r.finish();
    return p;
}

inline Fidelity parse_fidelity(const std::string& s, const std::string& where) {
    if (s == "full") return Fidelity::full;
    if (s == "ideal") return Fidelity::ideal;
    throw ConfigError(where + ": expected full or ideal");
}

inline void parse_controller(const json& j, ExperimentConfig& cfg) {
    ObjectReader r(j, "controller");
    auto& s = cfg.controller;
    r.get("enabled", cfg.controller_enabled);
    r.get("fixed_m", cfg.fixed_m);
    r.get("kp", s.kp);
    r.get("ki", s.ki);
    r.get("hys_band_frac", s.hys_band_frac);
    r.get("hys_release_frac", s.hys_release_frac);
    r.get("anti_windup_limit", s.anti_windup_limit);
    r.get("d_min", s.d_min);
    r.get("d_max", s.d_max);
    r.get("control_period", s.control_period);
    r.get("selection_hysteresis_frac", s.selection_hysteresis_frac);
    if (r.has("feedforward_fidelity"))
        s.feedforward_fidelity = parse_fidelity(r.require<std::string>("feedforward_fidelity"),
                                                "controller.feedforward_fidelity");
    r.finish();
    if (!(s.d_min > 0.0 && s.d_min < s.d_max && s.d_max < 1.0))
        throw ConfigError("controller: need 0 < d_min < d_max < 1");
    if (s.hys_release_frac > s.hys_band_frac)
        throw ConfigError("controller: hys_release_frac must not exceed hys_band_frac");
    if (!(cfg.fixed_m >= 0.0 && cfg.fixed_m <= 1.0))
        throw ConfigError("controller.fixed_m: must lie in [0, 1]");
}

inline DesignInputs parse_design(const json& j, ExperimentConfig& cfg) {
    ObjectReader r(j, "design");
    DesignInputs d;
    d.v_dc2_ref = r.require<double>("v_dc2_ref");
    d.v_m_min = r.require<double>("v_m_min");
    d.v_m_max = r.require<double>("v_m_max");
    d.v_m_rated = r.require<double>("v_m_rated");
    d.v_fd = cfg.pack.v_fd;
    r.get("v_fd", d.v_fd);
    d.delta_vr_target = r.require<double>("delta_vr_target");
    r.get("r_eq_estimate", d.r_eq_estimate);
    d.p_max2 = r.require<double>("p_max2");
    d.n_modules = cfg.pack.n_modules;
    r.get("n_modules", d.n_modules);
    d.f_sw = cfg.pack.f_sw;
    r.get("f_sw", d.f_sw);
    if (r.has("frequency_basis")) {
        const auto b = r.require<std::string>("frequency_basis");
        if (b == "per_carrier") cfg.frequency_basis = FrequencyBasis::per_carrier;
        else if (b == "effective") cfg.frequency_basis = FrequencyBasis::effective;
        else throw ConfigError("design.frequency_basis: expected per_carrier or effective");
    }
    r.finish();
    if (!(d.v_m_min <= d.v_m_rated && d.v_m_rated <= d.v_m_max))
        throw ConfigError("design: need v_m_min <= v_m_rated <= v_m_max");
    if (!(d.v_m_min > 0.0 && d.v_dc2_ref > 0.0 && d.p_max2 > 0.0 && d.f_sw > 0.0 &&
          d.delta_vr_target > 0.0))
        throw ConfigError("design: voltages, power, frequency and ripple target must be > 0");
    if (d.r_eq_estimate < 0.0) throw ConfigError("design.r_eq_estimate: must be >= 0");
    if (d.n_modules < 2) throw ConfigError("design.n_modules: need >=2 modules");
    return d;
}

inline std::vector<ScenarioStep> parse_scenario(const json& j) {
    if (!j.is_array()) throw ConfigError("scenario: expected an array of steps");
    std::vector<ScenarioStep> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "scenario[" + std::to_string(i) + "]";
        ObjectReader r(j[i], where);
        ScenarioStep s;
        r.get("t_start", s.t_start);
        s.v_dc1_ref = r.require<double>("v_dc1_ref");
        r.get("v_dc2_ref", s.v_dc2_ref);
        if (r.has("load1")) s.load1 = parse_load(r.raw("load1"), where + ".load1");
        if (r.has("load2")) s.load2 = parse_load(r.raw("load2"), where + ".load2");
        r.finish();
        if (!(s.v_dc1_ref > 0.0)) throw ConfigError(where + ".v_dc1_ref: must be > 0");
        if (s.v_dc2_ref < 0.0) throw ConfigError(where + ".v_dc2_ref: must be >= 0");
        if (!out.empty() && s.t_start < out.back().t_start)
            throw ConfigError(where + ": steps must be sorted by t_start");
        out.push_back(s);
    }
    return out;
}

inline void parse_simulation(const json& j, SimulationSettings& s) {
    ObjectReader r(j, "simulation");
    r.get("duration", s.duration);
    r.get("dt", s.dt);
    r.get("trace_stride", s.trace_stride);
    r.get("aux_string_coupling", s.aux_string_coupling);
    r.get("v_min_constant_power", s.v_min_constant_power);
    r.get("window", s.window);
    r.finish();
    if (s.dt < 0.0) throw ConfigError("simulation.dt: must be >= 0");
    if (s.trace_stride == 0) throw ConfigError("simulation.trace_stride: must be >= 1");
    if (!(s.window > 0.0 && s.window <= 1.0)) throw ConfigError("simulation.window: must lie in (0, 1]");
}

inline void parse_analyze(const json& j, AnalyzeSettings& a) {
    ObjectReader r(j, "analyze");
    r.get("d_grid", a.d_grid);
    r.get("d_start", a.d_start);
    r.get("d_stop", a.d_stop);
    r.get("d_step", a.d_step);
    r.get("v_m", a.v_m);
    r.get("sim_duration", a.sim_duration);
    r.get("sim_window", a.sim_window);
    r.get("base_level", a.base_level);
    r.get("aux_string_coupling", a.aux_string_coupling);
    r.finish();
    if (a.d_grid.empty() && !(a.d_step > 0.0)) throw ConfigError("analyze.d_step: must be > 0");
}

inline void parse_sweep(const json& j, SweepSettings& s) {
    ObjectReader r(j, "sweep");
    if (r.has("kind")) {
        const auto k = r.require<std::string>("kind");
        if (k == "deviation_bound") s.kind = SweepKind::deviation_bound;
        else if (k == "dt_refinement") s.kind = SweepKind::dt_refinement;
        else if (k == "duty_grid") s.kind = SweepKind::duty_grid;
        else throw ConfigError("sweep.kind: expected deviation_bound, dt_refinement or duty_grid");
    }
    r.get("n_min", s.n_min);
    r.get("n_max", s.n_max);
    r.get("refs_per_n", s.refs_per_n);
    r.get("v_m", s.v_m);
    r.get("d_star_min", s.d_star_min);
    r.get("d_star_max", s.d_star_max);
    r.get("dt_levels", s.dt_levels);
    r.finish();
    if (s.n_min < 2 || s.n_max < s.n_min) throw ConfigError("sweep: need 2 <= n_min <= n_max");
    if (!(s.d_star_min > 0.0 && s.d_star_min <= s.d_star_max && s.d_star_max < 1.0))
        throw ConfigError("sweep: need 0 < d_star_min <= d_star_max < 1");
    if (s.dt_levels < 2) throw ConfigError("sweep.dt_levels: need at least 2 levels");
}

inline void parse_assertions(const json& j, Assertions& a) {
    ObjectReader r(j, "assertions");
    r.get("dc1_ripple_pct_max", a.dc1_ripple_pct_max);
    r.get("dc2_ripple_pct_max", a.dc2_ripple_pct_max);
    r.get("dc2_err_pct_max", a.dc2_err_pct_max);
    r.get("dc2_max_dev_pct_max", a.dc2_max_dev_pct_max);
    r.get("dc1_max_dev_pct_max", a.dc1_max_dev_pct_max);
    r.finish();
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    detail::ObjectReader r(j, "config");
    ExperimentConfig cfg;
    if (!r.has("pack")) throw ConfigError("config: missing required section 'pack'");
    cfg.pack = detail::parse_pack(r.raw("pack"));
    if (r.has("aux")) {
        detail::ObjectReader a(r.raw("aux"), "aux");
        a.get("r_load", cfg.aux_r_load);
        a.get("delta_vr", cfg.aux_delta_vr);
        a.finish();
    }
    if (r.has("controller")) detail::parse_controller(r.raw("controller"), cfg);
    if (r.has("design")) cfg.design = detail::parse_design(r.raw("design"), cfg);
    if (r.has("scenario")) cfg.scenario = detail::parse_scenario(r.raw("scenario"));
    if (r.has("simulation")) detail::parse_simulation(r.raw("simulation"), cfg.simulation);
    if (r.has("analyze")) detail::parse_analyze(r.raw("analyze"), cfg.analyze);
    if (r.has("sweep")) detail::parse_sweep(r.raw("sweep"), cfg.sweep);
    if (r.has("assertions")) detail::parse_assertions(r.raw("assertions"), cfg.assertions);
    r.finish();

    if (cfg.aux_r_load <= 0.0) {
        for (const auto& s : cfg.scenario)
            if (s.load2.kind == LoadKind::resistive) {
                cfg.aux_r_load = s.load2.value;
                break;
            }
    }
    if (cfg.aux_r_load <= 0.0) cfg.aux_r_load = 1.0;
    // Without an explicit duration the last segment gets the mean segment length.
    if (cfg.simulation.duration <= 0.0 && cfg.scenario.size() > 1) {
        const double last = cfg.scenario.back().t_start;
        cfg.simulation.duration = last + last / static_cast<double>(cfg.scenario.size() - 1);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j);
}

inline ExperimentConfig config_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(j);
}

} // namespace rbsim

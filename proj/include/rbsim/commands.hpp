#pragma once

// The four command-line workflows. Each takes a parsed experiment config,
// writes its artifacts under the output directory, and returns the process
// exit code: 0 ok, 1 runtime fault, 2 infeasible design, 3 assertion violated.
//
// Every text artifact starts with the run manifest as '#' comment lines; JSON
// artifacts carry it as a "manifest" object instead. Nothing time- or
// host-dependent goes into any artifact, so identical inputs give identical bytes.

#include "rbsim/config.hpp"
#include "rbsim/controller.hpp"
#include "rbsim/design.hpp"
#include "rbsim/errors.hpp"
#include "rbsim/pack.hpp"
#include "rbsim/psc.hpp"
#include "rbsim/simulator.hpp"
#include "rbsim/steady_state.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace rbsim {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_fault = 1, exit_infeasible = 2, exit_assertion = 3 };

struct RunManifest {
    std::string config_path;
    std::string command;
    std::string out_dir;
    std::uint64_t seed = 1;
    std::string tool_version = kToolVersion;

    std::string header() const {
        return "# tool: rbsim " + tool_version + "\n# command: " + command +
               "\n# config: " + config_path + "\n# out: " + out_dir +
               "\n# seed: " + std::to_string(seed) + "\n";
    }

    nlohmann::json to_json() const {
        return {{"tool", "rbsim " + tool_version}, {"command", command},
                {"config", config_path},           {"out", out_dir},
                {"seed", seed}};
    }
};

struct CommandOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_dir = ".";
    bool simulate = false;
    std::optional<double> dt;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::ostream* log = &std::cerr;
};

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
    if (!out) throw Error("write failed for " + p.string());
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    write_file(p, j.dump(2) + "\n");
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Results land in
// index order, so the output never depends on scheduling.
template <class R, class F>
std::vector<R> parallel_map(std::size_t count, unsigned jobs, F fn) {
    std::vector<R> out(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n_threads =
        static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), std::max<std::size_t>(1, count)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// Portable uniform double in [0, 1) from a 64-bit engine.
inline double unit_uniform(std::uint64_t& state) {
    // splitmix64
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

inline nlohmann::json port_json(const PortMetrics& p) {
    return {{"mean", p.mean},
            {"ripple_pct", p.ripple_pct},
            {"max_dev_pct", p.max_dev_pct},
            {"mean_err_pct", p.mean_err_pct}};
}

} // namespace detail

// ---------------------------------------------------------------- design

inline std::string design_report_text(const DesignInputs& d, const DesignOutputs& o,
                                      const PackConfig& pack, const ValidationReport& rep) {
    using detail::num;
    std::string s;
    auto row = [&](const std::string& k, const std::string& v) {
        std::string key = k;
        key.resize(std::max<std::size_t>(key.size(), 26), ' ');
        s += key + v + "\n";
    };
    s += "inputs\n";
    row("  v_dc2_ref [V]", num(d.v_dc2_ref));
    row("  v_m min/rated/max [V]", num(d.v_m_min) + " / " + num(d.v_m_rated) + " / " + num(d.v_m_max));
    row("  v_fd [V]", num(d.v_fd));
    row("  delta_vr_target [V]", num(d.delta_vr_target));
    row("  r_eq_estimate [-]", num(d.r_eq_estimate));
    row("  p_max2 [W]", num(d.p_max2));
    row("  n_modules", std::to_string(d.n_modules));
    row("  f_sw [Hz]", num(d.f_sw));
    s += "outputs\n";
    row("  turns_lo", num(o.turns_lo));
    row("  turns_hi", num(o.turns_hi));
    row("  turns_recommended", num(o.turns_recommended));
    row("  c_dc2_min [F]", num(o.c_dc2_min));
    row("  c_dc3_min [F]", num(o.c_dc3_min));
    row("  delta_v_max [V]", num(o.delta_v_max));
    s += "configured pack\n";
    row("  turns_ratio", num(pack.turns_ratio));
    row("  c_dc2 [F]", num(pack.c_dc2));
    row("  c_dc3 [F]", num(pack.c_dc3));
    for (const auto& i : rep.issues)
        s += std::string(i.severity == ValidationIssue::Severity::error ? "error: " : "warning: ") +
             i.field + ": " + i.message + "\n";
    return s;
}

inline int cmd_design(const ExperimentConfig& cfg, const CommandOptions& opt) {
    if (!cfg.design) throw ConfigError("design: config has no 'design' section");
    const RunManifest man{opt.config_path.string(), "design", opt.out_dir.string(), opt.seed};
    const auto& d = *cfg.design;
    nlohmann::json j{{"manifest", man.to_json()},
                     {"inputs",
                      {{"v_dc2_ref", d.v_dc2_ref}, {"v_m_min", d.v_m_min}, {"v_m_max", d.v_m_max},
                       {"v_m_rated", d.v_m_rated}, {"v_fd", d.v_fd},
                       {"delta_vr_target", d.delta_vr_target}, {"r_eq_estimate", d.r_eq_estimate},
                       {"p_max2", d.p_max2}, {"n_modules", d.n_modules}, {"f_sw", d.f_sw}}},
                     {"frequency_basis",
                      cfg.frequency_basis == FrequencyBasis::per_carrier ? "per_carrier" : "effective"}};
    try {
        const auto out = run_design(d, cfg.frequency_basis);
        const auto rep = validate_config(cfg.pack, d);
        j["outputs"] = {{"turns_lo", out.turns_lo},
                        {"turns_hi", out.turns_hi},
                        {"turns_recommended", out.turns_recommended},
                        {"c_dc2_min", out.c_dc2_min},
                        {"c_dc3_min", out.c_dc3_min},
                        {"delta_v_max", out.delta_v_max}};
        nlohmann::json issues = nlohmann::json::array();
        for (const auto& i : rep.issues)
            issues.push_back({{"severity", i.severity == ValidationIssue::Severity::error ? "error" : "warning"},
                              {"field", i.field},
                              {"message", i.message}});
        j["validation"] = issues;
        const std::string text = design_report_text(d, out, cfg.pack, rep);
        detail::write_file(opt.out_dir / "design_report.txt", man.header() + text);
        detail::write_json(opt.out_dir / "design.json", j);
        *opt.log << text;
        return exit_ok;
    } catch (const InfeasibleDesignError& e) {
        j["infeasible"] = {{"turns_lo", e.lo}, {"turns_hi", e.hi}, {"message", e.what()}};
        detail::write_file(opt.out_dir / "design_report.txt",
                           man.header() + std::string(e.what()) + "\n");
        detail::write_json(opt.out_dir / "design.json", j);
        *opt.log << e.what() << "\n";
        return exit_infeasible;
    }
}

// ---------------------------------------------------------------- analyze

struct GainRow {
    double d = 0.0;
    double v_dc2_ideal = 0.0;
    double v_dc2_full = 0.0;
    double r_eq = 0.0;
    // Filled only for simulated rows.
    double v_dc2_sim = std::numeric_limits<double>::quiet_NaN();
    double v_m_sim = std::numeric_limits<double>::quiet_NaN();
    double v_dc2_full_at_sim = std::numeric_limits<double>::quiet_NaN();
    double sim_err_pct = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<double> duty_grid(const AnalyzeSettings& a) {
    std::vector<double> g = a.d_grid;
    if (g.empty()) {
        const auto steps = static_cast<long>(std::floor((a.d_stop - a.d_start) / a.d_step + 1e-9));
        for (long i = 0; i <= steps; ++i) g.push_back(a.d_start + static_cast<double>(i) * a.d_step);
    }
    for (double d : g)
        if (!(d > 0.0 && d < 1.0)) throw ConfigError("analyze: duty grid must lie strictly inside (0, 1)");
    return g;
}

/// Modulation index that realizes duty d on the configured base level.
inline double fixed_m_for_duty(double d, std::size_t n, long base_level) {
    const long steps = static_cast<long>(n) - 1;
    const long k = base_level < 0 ? steps / 2 : std::min(base_level, steps - 1);
    return (static_cast<double>(k) + d) / static_cast<double>(steps);
}

struct SimulatedGain {
    double v_dc2 = 0.0;
    double v_m = 0.0;
};

/// Fixed-m run at duty d; returns mean V_dc2 and mean module voltage over the trailing window.
inline SimulatedGain simulate_gain_point(const ExperimentConfig& cfg, double d,
                                         std::optional<double> dt) {
    const auto& a = cfg.analyze;
    const double m = fixed_m_for_duty(d, cfg.pack.n_modules, a.base_level);
    const AuxParams p = aux_params_from(cfg.pack, cfg.aux_r_load, cfg.aux_delta_vr);
    const double v_m0 = a.v_m > 0.0 ? a.v_m : cfg.pack.mean_v_oc();
    ScenarioStep st;
    st.v_dc1_ref = average_dc_link(m, cfg.pack.n_modules, v_m0);
    st.v_dc2_ref = aux_output_voltage(d, v_m0, p, Fidelity::full);
    st.load1 = cfg.scenario.empty() ? LoadSpec::open() : cfg.scenario.front().load1;
    st.load2 = LoadSpec::resistive(cfg.aux_r_load);
    SimOptions o = cfg.sim_options();
    if (dt) o.dt = *dt;
    o.trace_stride = 1;
    o.aux_string_coupling = a.aux_string_coupling;
    ControllerConfig cc = cfg.controller_config();
    const Trace tr = run_scenario(cfg.pack, {st}, {false, m}, cc, a.sim_duration, o);
    const auto met = steady_state_metrics(tr, a.sim_window);
    const std::size_t n = tr.records.size();
    const auto len = static_cast<std::size_t>(std::ceil(a.sim_window * static_cast<double>(n)));
    double vm = 0.0;
    for (std::size_t i = n - std::min(n, len); i < n; ++i) vm += tr.records[i].v_m_bar;
    return {met.dc2.mean, vm / static_cast<double>(std::min(n, len))};
}

inline std::vector<GainRow> gain_table(const ExperimentConfig& cfg, bool simulate,
                                       std::optional<double> dt, unsigned jobs) {
    const auto grid = duty_grid(cfg.analyze);
    const AuxParams p = aux_params_from(cfg.pack, cfg.aux_r_load, cfg.aux_delta_vr);
    const double v_m = cfg.analyze.v_m > 0.0 ? cfg.analyze.v_m : cfg.pack.mean_v_oc();
    std::vector<GainRow> rows;
    for (double d : grid) {
        GainRow r;
        r.d = d;
        r.v_dc2_ideal = aux_output_voltage(d, v_m, p.lossless(), Fidelity::ideal);
        r.v_dc2_full = aux_output_voltage(d, v_m, p, Fidelity::full);
        r.r_eq = equivalent_resistance(d, branch_of(d), p);
        rows.push_back(r);
    }
    if (simulate) {
        const auto sims = detail::parallel_map<SimulatedGain>(
            grid.size(), jobs, [&](std::size_t i) { return simulate_gain_point(cfg, grid[i], dt); });
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto& r = rows[i];
            r.v_dc2_sim = sims[i].v_dc2;
            r.v_m_sim = sims[i].v_m;
            r.v_dc2_full_at_sim = aux_output_voltage(r.d, r.v_m_sim, p, Fidelity::full);
            r.sim_err_pct = 100.0 * (r.v_dc2_sim - r.v_dc2_full_at_sim) / r.v_dc2_full_at_sim;
        }
    }
    return rows;
}

inline std::string gain_csv(const std::vector<GainRow>& rows, bool simulated) {
    using detail::num;
    std::string s = "d,v_dc2_ideal,v_dc2_full,r_eq";
    if (simulated) s += ",v_dc2_sim,v_m_sim,v_dc2_full_at_sim,sim_err_pct";
    s += "\n";
    for (const auto& r : rows) {
        s += num(r.d) + "," + num(r.v_dc2_ideal) + "," + num(r.v_dc2_full) + "," + num(r.r_eq);
        if (simulated)
            s += "," + num(r.v_dc2_sim) + "," + num(r.v_m_sim) + "," + num(r.v_dc2_full_at_sim) +
                 "," + num(r.sim_err_pct);
        s += "\n";
    }
    return s;
}

inline int cmd_analyze(const ExperimentConfig& cfg, const CommandOptions& opt) {
    const RunManifest man{opt.config_path.string(), opt.simulate ? "analyze --simulate" : "analyze",
                          opt.out_dir.string(), opt.seed};
    const auto rows = gain_table(cfg, opt.simulate, opt.dt, opt.jobs);
    detail::write_file(opt.out_dir / "gain.csv", man.header() + gain_csv(rows, opt.simulate));
    return exit_ok;
}

// ---------------------------------------------------------------- simulate

inline std::string trace_csv(const Trace& tr) {
    using detail::num;
    std::string s = "t,v_str,v_dc1,i_l,v_in,v_dc2,i_load2,m,d_star\n";
    s.reserve(s.size() + tr.records.size() * 120);
    for (const auto& r : tr.records) {
        s += num(r.t) + "," + num(r.v_str) + "," + num(r.v_dc1) + "," + num(r.i_l) + "," +
             num(r.v_in) + "," + num(r.v_dc2) + "," + num(r.i_load2) + "," + num(r.m) + "," +
             num(r.d_star) + "\n";
    }
    return s;
}

inline std::string control_csv(const Trace& tr) {
    using detail::num;
    std::string s = "t,d_star,m,error,candidate_count\n";
    for (const auto& r : tr.control)
        s += num(r.t) + "," + num(r.d_star) + "," + num(r.m) + "," + num(r.error) + "," +
             std::to_string(r.candidate_count) + "\n";
    return s;
}

struct AssertionViolation {
    std::size_t segment = 0;
    std::string metric;
    double value = 0.0;
    double limit = 0.0;
};

/// Auxiliary metrics are only checked on segments where the port is on.
inline std::vector<AssertionViolation> check_assertions(const std::vector<SteadyMetrics>& segs,
                                                        const std::vector<ScenarioStep>& sched,
                                                        const Assertions& a) {
    std::vector<AssertionViolation> v;
    auto check = [&](std::size_t seg, const char* name, const std::optional<double>& lim, double x) {
        if (lim && !(x < *lim)) v.push_back({seg, name, x, *lim});
    };
    for (const auto& m : segs) {
        check(m.segment, "dc1_ripple_pct", a.dc1_ripple_pct_max, m.dc1.ripple_pct);
        check(m.segment, "dc1_max_dev_pct", a.dc1_max_dev_pct_max, m.dc1.max_dev_pct);
        if (sched[m.segment].v_dc2_ref > 0.0) {
            check(m.segment, "dc2_ripple_pct", a.dc2_ripple_pct_max, m.dc2.ripple_pct);
            check(m.segment, "dc2_err_pct", a.dc2_err_pct_max, m.dc2.mean_err_pct);
            check(m.segment, "dc2_max_dev_pct", a.dc2_max_dev_pct_max, m.dc2.max_dev_pct);
        }
    }
    return v;
}

inline Trace run_configured_scenario(const ExperimentConfig& cfg, std::optional<double> dt) {
    if (cfg.scenario.empty()) throw ConfigError("simulate: config has no 'scenario' steps");
    if (!(cfg.simulation.duration > 0.0))
        throw ConfigError("simulate: simulation.duration must be > 0");
    SimOptions o = cfg.sim_options();
    if (dt) o.dt = *dt;
    return run_scenario(cfg.pack, cfg.scenario, {cfg.controller_enabled, cfg.fixed_m},
                        cfg.controller_config(), cfg.simulation.duration, o);
}

inline nlohmann::json metrics_json(const Trace& tr, const std::vector<SteadyMetrics>& segs,
                                   double window) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : segs) {
        const auto& st = tr.segments[m.segment];
        arr.push_back({{"segment", m.segment},
                       {"t_begin", m.t_begin},
                       {"t_end", m.t_end},
                       {"v_dc1_ref", st.v_dc1_ref},
                       {"v_dc2_ref", st.v_dc2_ref},
                       {"dc1", detail::port_json(m.dc1)},
                       {"dc2", detail::port_json(m.dc2)}});
    }
    return {{"dt", tr.dt},
            {"trace_stride", tr.stride},
            {"window", window},
            {"unreachable_steps", tr.unreachable_steps},
            {"saturated_steps", tr.saturated_steps},
            {"segments", arr}};
}

inline int cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opt) {
    const RunManifest man{opt.config_path.string(), "simulate", opt.out_dir.string(), opt.seed};
    const Trace tr = run_configured_scenario(cfg, opt.dt);
    const auto segs = segment_metrics(tr, cfg.simulation.window);
    const auto viol = check_assertions(segs, tr.segments, cfg.assertions);

    nlohmann::json j = metrics_json(tr, segs, cfg.simulation.window);
    j["manifest"] = man.to_json();
    nlohmann::json va = nlohmann::json::array();
    for (const auto& v : viol)
        va.push_back({{"segment", v.segment}, {"metric", v.metric}, {"value", v.value}, {"limit", v.limit}});
    j["assertion_violations"] = va;

    detail::write_file(opt.out_dir / "trace.csv", man.header() + trace_csv(tr));
    detail::write_file(opt.out_dir / "control.csv", man.header() + control_csv(tr));
    detail::write_json(opt.out_dir / "metrics.json", j);
    for (const auto& v : viol)
        *opt.log << "assertion: segment " << v.segment << " " << v.metric << " = "
                 << detail::num(v.value) << " (limit " << detail::num(v.limit) << ")\n";
    return viol.empty() ? exit_ok : exit_assertion;
}

// ---------------------------------------------------------------- sweep

struct DeviationRow {
    std::size_t n = 0;
    double v_dc1_ref = 0.0;
    double d_star = 0.0;
    double m = 0.0;
    double v_dc1 = 0.0;
    double deviation = 0.0;
    double bound = 0.0;           // half the v_m/(n-1) granularity
    double candidate_bound = 0.0; // exact worst case for this duty family
};

/// Random achievable references and duties per n; the selection stage of the
/// controller picks m and the realized dc-link deviation is compared with both bounds.
inline std::vector<DeviationRow> deviation_sweep(const SweepSettings& s, double v_m,
                                                 std::uint64_t seed, unsigned jobs) {
    const std::size_t count = s.n_max - s.n_min + 1;
    const auto per_n = detail::parallel_map<std::vector<DeviationRow>>(count, jobs, [&](std::size_t i) {
        const std::size_t n = s.n_min + i;
        std::uint64_t state = seed * 0x100000001b3ULL + n;
        std::vector<DeviationRow> rows;
        for (std::size_t r = 0; r < s.refs_per_n; ++r) {
            DeviationRow row;
            row.n = n;
            row.v_dc1_ref = v_m * (1.0 + static_cast<double>(n - 1) * detail::unit_uniform(state));
            row.d_star = s.d_star_min + (s.d_star_max - s.d_star_min) * detail::unit_uniform(state);
            const auto cands = candidate_modulation_indices(row.d_star, n);
            row.m = select_modulation_index(cands, row.v_dc1_ref, v_m, n);
            row.v_dc1 = average_dc_link(row.m, n, v_m);
            row.deviation = std::abs(row.v_dc1 - row.v_dc1_ref);
            row.bound = dc_link_deviation_bound(n, v_m);
            row.candidate_bound = candidate_deviation_bound(row.d_star, v_m);
            rows.push_back(row);
        }
        return rows;
    });
    std::vector<DeviationRow> out;
    for (const auto& v : per_n) out.insert(out.end(), v.begin(), v.end());
    return out;
}

struct DtLevelResult {
    double dt = 0.0;
    std::vector<SteadyMetrics> segments;
};

inline std::vector<DtLevelResult> dt_refinement(const ExperimentConfig& cfg,
                                                std::optional<double> dt, unsigned jobs) {
    const double base = dt ? *dt : (cfg.simulation.dt > 0.0 ? cfg.simulation.dt : default_dt(cfg.pack));
    return detail::parallel_map<DtLevelResult>(cfg.sweep.dt_levels, jobs, [&](std::size_t k) {
        const double h = base / std::pow(2.0, static_cast<double>(k));
        // Scaling the stride with the refinement keeps the sample instants aligned.
        ExperimentConfig c = cfg;
        c.simulation.trace_stride = cfg.simulation.trace_stride << k;
        const Trace tr = run_configured_scenario(c, h);
        return DtLevelResult{h, segment_metrics(tr, cfg.simulation.window)};
    });
}

/// Largest change between the two finest levels: relative for means, absolute
/// (percentage points) for metrics that are already percentages.
struct DtDrift {
    double mean_rel_pct = 0.0;
    double pct_metric_abs = 0.0;
};

inline DtDrift dt_drift(const DtLevelResult& coarse, const DtLevelResult& fine,
                        const std::vector<ScenarioStep>& sched) {
    DtDrift d;
    const std::size_t n = std::min(coarse.segments.size(), fine.segments.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = coarse.segments[i];
        const auto& b = fine.segments[i];
        auto rel = [](double x, double y) { return 100.0 * std::abs(x - y) / std::max(std::abs(y), 1e-12); };
        d.mean_rel_pct = std::max(d.mean_rel_pct, rel(a.dc1.mean, b.dc1.mean));
        d.pct_metric_abs = std::max({d.pct_metric_abs, std::abs(a.dc1.ripple_pct - b.dc1.ripple_pct),
                                     std::abs(a.dc1.max_dev_pct - b.dc1.max_dev_pct)});
        if (sched[a.segment].v_dc2_ref > 0.0) {
            d.mean_rel_pct = std::max(d.mean_rel_pct, rel(a.dc2.mean, b.dc2.mean));
            d.pct_metric_abs =
                std::max({d.pct_metric_abs, std::abs(a.dc2.ripple_pct - b.dc2.ripple_pct),
                          std::abs(a.dc2.mean_err_pct - b.dc2.mean_err_pct),
                          std::abs(a.dc2.max_dev_pct - b.dc2.max_dev_pct)});
        }
    }
    return d;
}

inline int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opt) {
    using detail::num;
    const RunManifest man{opt.config_path.string(), "sweep", opt.out_dir.string(), opt.seed};
    nlohmann::json summary{{"manifest", man.to_json()}};
    std::string csv;
    int code = exit_ok;

    switch (cfg.sweep.kind) {
    case SweepKind::deviation_bound: {
        const double v_m = cfg.sweep.v_m > 0.0 ? cfg.sweep.v_m : cfg.pack.mean_v_oc();
        const auto rows = deviation_sweep(cfg.sweep, v_m, opt.seed, opt.jobs);
        csv = "n,v_dc1_ref,d_star,m,v_dc1,deviation,bound,candidate_bound,within_bound,within_candidate_bound\n";
        std::size_t over = 0, over_cand = 0;
        for (const auto& r : rows) {
            const bool in = r.deviation <= r.bound + 1e-9;
            const bool in_c = r.deviation <= r.candidate_bound + 1e-9;
            over += in ? 0 : 1;
            over_cand += in_c ? 0 : 1;
            csv += std::to_string(r.n) + "," + num(r.v_dc1_ref) + "," + num(r.d_star) + "," +
                   num(r.m) + "," + num(r.v_dc1) + "," + num(r.deviation) + "," + num(r.bound) +
                   "," + num(r.candidate_bound) + "," + (in ? "1" : "0") + "," + (in_c ? "1" : "0") + "\n";
        }
        summary["kind"] = "deviation_bound";
        summary["rows"] = rows.size();
        summary["rows_over_bound"] = over;
        summary["rows_over_candidate_bound"] = over_cand;
        if (over > 0) code = exit_assertion;
        break;
    }
    case SweepKind::dt_refinement: {
        const auto levels = dt_refinement(cfg, opt.dt, opt.jobs);
        csv = "level,dt,segment,dc1_mean,dc1_ripple_pct,dc1_max_dev_pct,dc2_mean,dc2_ripple_pct,"
              "dc2_mean_err_pct,dc2_max_dev_pct\n";
        for (std::size_t k = 0; k < levels.size(); ++k)
            for (const auto& m : levels[k].segments)
                csv += std::to_string(k) + "," + num(levels[k].dt) + "," + std::to_string(m.segment) +
                       "," + num(m.dc1.mean) + "," + num(m.dc1.ripple_pct) + "," +
                       num(m.dc1.max_dev_pct) + "," + num(m.dc2.mean) + "," + num(m.dc2.ripple_pct) +
                       "," + num(m.dc2.mean_err_pct) + "," + num(m.dc2.max_dev_pct) + "\n";
        const auto drift = dt_drift(levels[levels.size() - 2], levels.back(), cfg.scenario);
        summary["kind"] = "dt_refinement";
        summary["mean_drift_rel_pct"] = drift.mean_rel_pct;
        summary["pct_metric_drift_abs"] = drift.pct_metric_abs;
        if (drift.mean_rel_pct >= 0.2 || drift.pct_metric_abs >= 0.2) code = exit_assertion;
        break;
    }
    case SweepKind::duty_grid: {
        csv = gain_csv(gain_table(cfg, true, opt.dt, opt.jobs), true);
        summary["kind"] = "duty_grid";
        break;
    }
    }
    detail::write_file(opt.out_dir / "sweep.csv", man.header() + csv);
    detail::write_json(opt.out_dir / "sweep_summary.json", summary);
    return code;
}

/// Dispatches by command name. Library errors map to exit code 1.
inline int run_command(const std::string& command, const CommandOptions& opt) {
    try {
        const ExperimentConfig cfg = load_config(opt.config_path);
        std::filesystem::create_directories(opt.out_dir);
        if (command == "design") return cmd_design(cfg, opt);
        if (command == "analyze") return cmd_analyze(cfg, opt);
        if (command == "simulate") return cmd_simulate(cfg, opt);
        if (command == "sweep") return cmd_sweep(cfg, opt);
        *opt.log << "unknown command: " << command << "\n";
        return exit_fault;
    } catch (const InfeasibleDesignError& e) {
        *opt.log << "error: " << e.what() << "\n";
        return exit_infeasible;
    } catch (const std::exception& e) {
        *opt.log << "error: " << e.what() << "\n";
        return exit_fault;
    }
}

} // namespace rbsim

#pragma once

// Fixed-step switch-level simulation of the dual-port circuit.
//
//   string ──L_dc/R_ldc──┬── C_dc1 ── load 1
//      │
//      └── C_dc2 (ESR) ── primary (r_l1, L_m) ═ secondary (r_l2) ── bridge ── C_dc3 ── load 2
//
// The main branch (L_dc, C_dc1) uses semi-implicit Euler. The primary loop is
// stiff (milliohm resistances against large capacitors) and is solved
// implicitly each step together with C_dc2, C_dc3 and the magnetizing branch;
// for a given bridge state the loop is linear, so the three candidate states
// (off, forward, reverse) are tried and the self-consistent one kept.
//
// The string EMF within a step is weighted by the exact fraction of the step
// each module is inserted, so the realized duty does not depend on where the
// switching edges fall relative to the step grid.

#include "rbsim/controller.hpp"
#include "rbsim/errors.hpp"
#include "rbsim/pack.hpp"
#include "rbsim/psc.hpp"
#include "rbsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rbsim {

enum class BridgeState { off, forward, reverse };

struct SimState {
    double t = 0.0;
    double i_l = 0.0;
    double v_c1 = 0.0;
    double v_c2 = 0.0;
    double v_c3 = 0.0;
    double i_m = 0.0; // magnetizing current, primary side
    BridgeState bridge = BridgeState::off;
};

struct SimOptions {
    double dt = 0.0; // 0: 1 / (200 (n-1) f_sw)
    // Aux primary current flows through the string resistance. Off reproduces
    // the decoupled algebra of the closed-form model.
    bool aux_string_coupling = true;
    double v_min_constant_power = 1.0;
    std::size_t trace_stride = 1;
};

struct PortLoads {
    LoadSpec load1 = LoadSpec::open();
    LoadSpec load2 = LoadSpec::open();
};

/// Instantaneous quantities of the step that produced a state.
struct StepProbe {
    double v_str = 0.0;
    double v_in = 0.0;
    double i_1 = 0.0; // primary (coupling capacitor) current
    double i_2 = 0.0; // secondary current, signed by bridge direction
    double i_str = 0.0;
    double i_load1 = 0.0;
    double i_load2 = 0.0;
    double v_m_bar = 0.0; // mean module operating voltage at the present string current
    double p_emf = 0.0;   // power delivered by the module EMFs
    double p_load1 = 0.0;
    double p_load2 = 0.0;
};

inline double default_dt(const PackConfig& c) {
    return 1.0 / (200.0 * effective_switching_frequency(c.n_modules, c.f_sw));
}

inline double max_dt(const PackConfig& c) {
    return 1.0 / (50.0 * effective_switching_frequency(c.n_modules, c.f_sw));
}

inline SimState init_state(const PackConfig& c, const PortLoads& loads, double m0,
                           double v_dc2_ref) {
    SimState s;
    const double v_m = c.mean_v_oc();
    s.v_c1 = average_dc_link(m0, c.n_modules, v_m);
    s.v_c2 = s.v_c1;
    s.v_c3 = std::max(0.0, v_dc2_ref);
    s.i_l = loads.load1.kind == LoadKind::open ? 0.0 : loads.load1.current(s.v_c1);
    const double i2 = (loads.load2.kind == LoadKind::open || s.v_c3 <= 0.0)
                          ? 0.0
                          : loads.load2.current(s.v_c3);
    // The coupling capacitor blocks dc, so the magnetizing branch carries the
    // mean of the reflected rectified current with opposite sign.
    const double d = effective_duty(m0, c.n_modules);
    if (d > 0.0 && d < 0.5) s.i_m = -c.turns_ratio * i2;
    else if (d > 0.5) s.i_m = c.turns_ratio * i2;
    return s;
}

inline SimState step(const SimState& s, ModulationCommand cmd, const PackConfig& c,
                     const PortLoads& loads, double dt, const SimOptions& opt = {},
                     StepProbe* probe = nullptr) {
    if (!(dt > 0.0) || dt > max_dt(c) * (1.0 + 1e-12))
        throw ConfigError("time step must satisfy 0 < dt <= 1/(50 (n-1) f_sw)");

    const auto frac = insertion_fractions(cmd.m, s.t, s.t + dt, c.n_modules, c.f_sw);
    const StringThevenin th = string_thevenin(c, frac);
    const double z_str = opt.aux_string_coupling ? th.r : 0.0;

    // Primary loop, everything implicit: v_p(1 + z a) = v_th - z (i_m + n i2).
    const double n = c.turns_ratio;
    const double a = dt / c.l_m;
    const double z = c.r_eq1() + z_str + dt / c.c_dc2;
    const double v_th = th.emf - th.r * s.i_l - s.v_c2;
    const double v_p_open = (v_th - z * s.i_m) / (1.0 + z * a);

    // Output capacitor after the step: v3' = v3_0 + beta |i2|.
    double v3_0 = s.v_c3;
    double beta = dt / c.c_dc3;
    switch (loads.load2.kind) {
    case LoadKind::resistive: {
        const double alpha = 1.0 / (1.0 + dt / (loads.load2.value * c.c_dc3));
        v3_0 = alpha * s.v_c3;
        beta *= alpha;
        break;
    }
    case LoadKind::constant_power:
        if (s.v_c3 < opt.v_min_constant_power)
            throw SimulationFault("auxiliary constant-power load below minimum voltage", s.t);
        v3_0 = s.v_c3 - dt * loads.load2.value / (s.v_c3 * c.c_dc3);
        break;
    case LoadKind::open: break;
    }

    const double g = n * n * z / (1.0 + z * a) + c.r_eq2() + beta;
    const double clamp_v = v3_0 + 2.0 * c.v_fd;
    double i2 = 0.0;
    BridgeState bridge = BridgeState::off;
    if (const double fwd = (n * v_p_open - clamp_v) / g; fwd > 0.0) {
        i2 = fwd;
        bridge = BridgeState::forward;
    } else if (const double rev = (n * v_p_open + clamp_v) / g; rev < 0.0) {
        i2 = rev;
        bridge = BridgeState::reverse;
    }

    const double v_p = v_p_open - z * n * i2 / (1.0 + z * a);
    const double i_1 = s.i_m + a * v_p + n * i2;

    SimState next;
    next.t = s.t + dt;
    next.i_m = s.i_m + a * v_p;
    next.v_c2 = s.v_c2 + dt * i_1 / c.c_dc2;
    next.v_c3 = v3_0 + beta * std::abs(i2);
    next.bridge = bridge;

    const double i_str_model = s.i_l + (opt.aux_string_coupling ? i_1 : 0.0);
    const double v_str = th.voltage(i_str_model);
    next.i_l = s.i_l + dt * (v_str - c.r_ldc * s.i_l - s.v_c1) / c.l_dc;

    switch (loads.load1.kind) {
    case LoadKind::resistive:
        next.v_c1 = (s.v_c1 + dt * next.i_l / c.c_dc1) / (1.0 + dt / (loads.load1.value * c.c_dc1));
        break;
    case LoadKind::constant_power:
        if (s.v_c1 < opt.v_min_constant_power)
            throw SimulationFault("dc-link constant-power load below minimum voltage", s.t);
        next.v_c1 = s.v_c1 + dt * (next.i_l - loads.load1.value / s.v_c1) / c.c_dc1;
        break;
    case LoadKind::open: next.v_c1 = s.v_c1 + dt * next.i_l / c.c_dc1; break;
    }

    if (!std::isfinite(next.i_l) || !std::isfinite(next.v_c1) || !std::isfinite(next.v_c2) ||
        !std::isfinite(next.v_c3) || !std::isfinite(next.i_m))
        throw SimulationFault("non-finite state", s.t);

    if (probe) {
        probe->v_str = v_str;
        probe->v_in = v_str - s.v_c2;
        probe->i_1 = i_1;
        probe->i_2 = i2;
        probe->i_str = s.i_l + i_1;
        probe->i_load1 =
            loads.load1.kind == LoadKind::open ? 0.0 : loads.load1.current(next.v_c1);
        probe->i_load2 =
            loads.load2.kind == LoadKind::open ? 0.0 : loads.load2.current(next.v_c3);
        double vm = 0.0;
        for (const auto& mp : c.modules) vm += mp.v_oc - mp.r_bt * i_str_model;
        probe->v_m_bar = vm / static_cast<double>(c.modules.size());
        probe->p_emf = th.emf * (s.i_l + i_1);
        probe->p_load1 = probe->i_load1 * next.v_c1;
        probe->p_load2 = probe->i_load2 * next.v_c3;
    }
    return next;
}

struct ScenarioStep {
    double t_start = 0.0;
    double v_dc1_ref = 0.0;
    double v_dc2_ref = 0.0;
    LoadSpec load1 = LoadSpec::open();
    LoadSpec load2 = LoadSpec::open();
};

struct TraceRecord {
    double t = 0.0;
    double v_str = 0.0;
    double v_dc1 = 0.0;
    double i_l = 0.0;
    double v_in = 0.0;
    double v_dc2 = 0.0;
    double i_load2 = 0.0;
    double m = 0.0;
    double d_star = 0.0;
    // Not part of the CSV; used by steady-state checks.
    double v_c2 = 0.0;
    double i_1 = 0.0;
    double i_2 = 0.0;
    double v_m_bar = 0.0;
    double e_emf = 0.0; // cumulative energies [J]
    double e_load1 = 0.0;
    double e_load2 = 0.0;
};

struct ControlRecord {
    double t = 0.0;
    double d_star = 0.0;
    double m = 0.0;
    double error = 0.0;
    std::size_t candidate_count = 0;
};

struct Trace {
    std::vector<TraceRecord> records;
    std::vector<ControlRecord> control;
    std::vector<ScenarioStep> segments;
    double dt = 0.0;
    std::size_t stride = 1;
    std::size_t unreachable_steps = 0;
    std::size_t saturated_steps = 0;
    SimState final_state;
};

struct ControlMode {
    bool enabled = true;
    double fixed_m = 0.0;
};

namespace detail {
inline std::size_t segment_index(const std::vector<ScenarioStep>& sched, double t) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < sched.size(); ++i)
        if (sched[i].t_start <= t) idx = i;
    return idx;
}
} // namespace detail

inline Trace run_scenario(const PackConfig& c, const std::vector<ScenarioStep>& schedule,
                          const ControlMode& mode, const ControllerConfig& ctrl, double duration,
                          const SimOptions& opt = {}) {
    if (schedule.empty()) throw ConfigError("scenario schedule is empty");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i].t_start < schedule[i - 1].t_start)
            throw ConfigError("scenario steps must be sorted by t_start");
    const auto report = validate_config(c);
    if (!report.ok()) throw ConfigError("invalid pack configuration: " + report.issues.front().field +
                                        " " + report.issues.front().message);

    const double dt = opt.dt > 0.0 ? opt.dt : default_dt(c);
    const double period = ctrl.settings.control_period > 0.0
                              ? ctrl.settings.control_period
                              : 1.0 / effective_switching_frequency(c.n_modules, c.f_sw);
    const auto control_every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(period / dt)));
    const auto n_steps = static_cast<std::size_t>(std::llround(duration / dt));
    const std::size_t stride = std::max<std::size_t>(1, opt.trace_stride);

    Trace trace;
    trace.dt = dt;
    trace.stride = stride;
    trace.segments = schedule;
    trace.records.reserve(n_steps / stride + 1);

    std::size_t seg = 0;
    PortLoads loads{schedule[0].load1, schedule[0].load2};
    ControlRefs refs{schedule[0].v_dc1_ref, schedule[0].v_dc2_ref};
    ControlState cstate = make_control_state(ctrl.settings);

    double m = mode.fixed_m;
    double d_star = effective_duty(m, c.n_modules);
    if (mode.enabled) {
        Measurements meas{refs.v_dc2_ref, c.mean_v_oc(), refs.v_dc1_ref};
        const auto out = control_step(meas, refs, cstate, ctrl, period);
        m = out.command.m;
        d_star = out.d_star;
    }
    SimState s = init_state(c, loads, m, refs.v_dc2_ref);

    double acc_v2 = 0.0, acc_vm = 0.0;
    std::size_t acc_n = 0;
    double e_emf = 0.0, e_l1 = 0.0, e_l2 = 0.0;
    StepProbe probe;

    for (std::size_t k = 0; k < n_steps; ++k) {
        if (seg + 1 < schedule.size() && s.t + 0.5 * dt >= schedule[seg + 1].t_start) {
            ++seg;
            loads = {schedule[seg].load1, schedule[seg].load2};
            refs = {schedule[seg].v_dc1_ref, schedule[seg].v_dc2_ref};
        }

        if (mode.enabled && k > 0 && k % control_every == 0) {
            Measurements meas{acc_v2 / static_cast<double>(acc_n),
                              acc_vm / static_cast<double>(acc_n), s.v_c1};
            const auto out = control_step(meas, refs, cstate, ctrl, period);
            m = out.command.m;
            d_star = out.d_star;
            trace.unreachable_steps += out.unreachable ? 1 : 0;
            trace.saturated_steps += out.saturated ? 1 : 0;
            trace.control.push_back({s.t, d_star, m, out.error, out.candidate_count});
            acc_v2 = acc_vm = 0.0;
            acc_n = 0;
        }

        s = step(s, {m}, c, loads, dt, opt, &probe);

        acc_v2 += s.v_c3;
        acc_vm += probe.v_m_bar;
        ++acc_n;
        e_emf += probe.p_emf * dt;
        e_l1 += probe.p_load1 * dt;
        e_l2 += probe.p_load2 * dt;

        if (k % stride == 0) {
            TraceRecord r;
            r.t = s.t;
            r.v_str = probe.v_str;
            r.v_dc1 = s.v_c1;
            r.i_l = s.i_l;
            r.v_in = probe.v_in;
            r.v_dc2 = s.v_c3;
            r.i_load2 = probe.i_load2;
            r.m = m;
            r.d_star = d_star;
            r.v_c2 = s.v_c2;
            r.i_1 = probe.i_1;
            r.i_2 = probe.i_2;
            r.v_m_bar = probe.v_m_bar;
            r.e_emf = e_emf;
            r.e_load1 = e_l1;
            r.e_load2 = e_l2;
            trace.records.push_back(r);
        }
    }
    trace.final_state = s;
    return trace;
}

struct PortMetrics {
    double mean = 0.0;
    double ripple_pct = 0.0;  // peak-to-peak, % of mean
    double max_dev_pct = 0.0; // max |v - ref|, % of ref (NaN without a reference)
    double mean_err_pct = 0.0; // |mean - ref|, % of ref (NaN without a reference)
};

struct SteadyMetrics {
    std::size_t segment = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
    PortMetrics dc1;
    PortMetrics dc2;
};

namespace detail {
template <class Get>
PortMetrics port_metrics(const std::vector<TraceRecord>& recs, std::size_t b, std::size_t e,
                         double ref, Get get) {
    PortMetrics pm;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    double max_dev = 0.0;
    for (std::size_t i = b; i < e; ++i) {
        const double v = get(recs[i]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        max_dev = std::max(max_dev, std::abs(v - ref));
    }
    pm.mean = sum / static_cast<double>(e - b);
    pm.ripple_pct = pm.mean != 0.0 ? 100.0 * (hi - lo) / std::abs(pm.mean) : 0.0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    pm.max_dev_pct = ref > 0.0 ? 100.0 * max_dev / ref : nan;
    pm.mean_err_pct = ref > 0.0 ? 100.0 * std::abs(pm.mean - ref) / ref : nan;
    return pm;
}

inline SteadyMetrics window_metrics(const Trace& tr, std::size_t b, std::size_t e) {
    if (e <= b) throw DomainError("metrics window is empty");
    const auto& recs = tr.records;
    const double t0 = recs[b].t;
    const double t1 = recs[e - 1].t;
    const std::size_t seg = segment_index(tr.segments, t0 - 0.5 * tr.dt);
    for (std::size_t i = seg + 1; i < tr.segments.size(); ++i)
        if (tr.segments[i].t_start > t0 - 0.5 * tr.dt && tr.segments[i].t_start <= t1)
            throw DomainError("metrics window spans a reference step");
    const auto& sg = tr.segments[seg];
    SteadyMetrics m;
    m.segment = seg;
    m.t_begin = t0;
    m.t_end = t1;
    m.dc1 = port_metrics(recs, b, e, sg.v_dc1_ref, [](const TraceRecord& r) { return r.v_dc1; });
    m.dc2 = port_metrics(recs, b, e, sg.v_dc2_ref, [](const TraceRecord& r) { return r.v_dc2; });
    return m;
}
} // namespace detail

/// Metrics over the trailing `window` fraction of the whole trace.
inline SteadyMetrics steady_state_metrics(const Trace& tr, double window) {
    if (!(window > 0.0 && window <= 1.0)) throw DomainError("window must lie in (0, 1]");
    const std::size_t n = tr.records.size();
    const auto len = static_cast<std::size_t>(std::ceil(window * static_cast<double>(n)));
    return detail::window_metrics(tr, n - std::min(n, len), n);
}

/// Metrics over the trailing `window` fraction of every scenario segment.
inline std::vector<SteadyMetrics> segment_metrics(const Trace& tr, double window) {
    if (!(window > 0.0 && window <= 1.0)) throw DomainError("window must lie in (0, 1]");
    std::vector<SteadyMetrics> out;
    const auto& recs = tr.records;
    std::size_t b = 0;
    for (std::size_t s = 0; s < tr.segments.size(); ++s) {
        const double t_end = s + 1 < tr.segments.size() ? tr.segments[s + 1].t_start
                                                         : std::numeric_limits<double>::infinity();
        std::size_t e = b;
        while (e < recs.size() && recs[e].t <= t_end - 0.5 * tr.dt) ++e;
        if (e > b) {
            const auto len = static_cast<std::size_t>(
                std::ceil(window * static_cast<double>(e - b)));
            out.push_back(detail::window_metrics(tr, e - std::min(e - b, len), e));
        }
        b = e;
    }
    return out;
}

} // namespace rbsim

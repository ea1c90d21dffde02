#pragma once

// Dual-objective modulation-index selection.
//
// The auxiliary output only depends on D, and D only on the fractional part of
// m(N-1), so every duty D* is realized by 2(N-1) modulation indices (N-1 for D*
// and N-1 for 1-D*). The controller fixes D* from the auxiliary feedback and
// then spends the remaining freedom on the dc link: it picks the candidate whose
// average string voltage lands closest to the dc-link reference.

#include "rbsim/errors.hpp"
#include "rbsim/psc.hpp"
#include "rbsim/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rbsim {

struct ControlRefs {
    double v_dc1_ref = 0.0;
    double v_dc2_ref = 0.0; // 0 switches the auxiliary objective off
};

struct Measurements {
    double v_dc2 = 0.0;
    double v_m_bar = 0.0;
    double v_dc1 = 0.0; // monitoring only
};

struct ControllerSettings {
    double kp = 0.02;             // duty per volt
    double ki = 2.0;              // duty per volt-second
    double hys_band_frac = 0.005; // latch engages above this |error| / ref
    double hys_release_frac = 0.0005;
    double anti_windup_limit = 0.25; // duty
    double d_min = 0.05;
    double d_max = 0.95;
    double control_period = 0.0; // 0: one effective switching period
    // A new candidate must beat the one nearest the previous m by this
    // fraction of v_dc1_ref; stops chatter between near-equidistant levels.
    double selection_hysteresis_frac = 0.02;
    Fidelity feedforward_fidelity = Fidelity::full;
};

/// Mutable controller memory; control_step is its only mutator.
struct ControlState {
    double integrator = 0.0; // volt-seconds
    bool hysteresis_active = false;
    double d_star = 0.5;
    double m_selected = 0.0;
    bool has_selection = false;
    double kp = 0.02;
    double ki = 2.0;
    double hys_band = 0.0;    // volts
    double hys_release = 0.0; // volts
    double anti_windup_limit = 0.25;
};

inline ControlState make_control_state(const ControllerSettings& s) {
    ControlState st;
    st.kp = s.kp;
    st.ki = s.ki;
    st.anti_windup_limit = s.anti_windup_limit;
    return st;
}

struct ControllerConfig {
    std::size_t n_modules = 2;
    AuxParams aux;
    ControllerSettings settings;
};

inline double feedforward_duty(const ControlRefs& refs, double v_m_bar, const AuxParams& p,
                               Fidelity fidelity = Fidelity::full) {
    return invert_gain(refs.v_dc2_ref, v_m_bar, p, fidelity).d_low;
}

inline std::vector<double> candidate_modulation_indices(double d_star, std::size_t n) {
    if (!(d_star > 0.0 && d_star < 1.0)) throw DomainError("d_star must lie in (0, 1)");
    const double steps = static_cast<double>(n - 1);
    std::vector<double> c;
    c.reserve(2 * (n - 1));
    for (std::size_t k = 0; k + 1 < n; ++k) {
        c.push_back((static_cast<double>(k) + d_star) / steps);
        c.push_back((static_cast<double>(k) + 1.0 - d_star) / steps);
    }
    std::erase_if(c, [](double m) { return m < 0.0 || m > 1.0; });
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end(), [](double a, double b) { return b - a < 1e-12; }),
            c.end());
    return c;
}

/// Candidate closest to the dc-link reference; ties go to the smaller m.
inline double select_modulation_index(const std::vector<double>& cands, double v_dc1_ref,
                                      double v_m_bar, std::size_t n) {
    if (cands.empty()) throw DomainError("no modulation-index candidates");
    const double tie = 1e-12 * std::max(1.0, std::abs(v_dc1_ref));
    double best = cands.front();
    double best_err = std::abs(average_dc_link(best, n, v_m_bar) - v_dc1_ref);
    for (double m : cands) {
        const double err = std::abs(average_dc_link(m, n, v_m_bar) - v_dc1_ref);
        if (err < best_err - tie) {
            best = m;
            best_err = err;
        }
    }
    return best;
}

/// Worst-case |average_dc_link - ref| over [v_m, n v_m] once the duty family
/// is fixed: candidate levels sit at (1+k+d) v_m and (2+k-d) v_m, d = min(D*, 1-D*).
inline double candidate_deviation_bound(double d_star, double v_m) {
    if (!(d_star > 0.0 && d_star < 1.0)) throw DomainError("d_star must lie in (0, 1)");
    const double d = std::min(d_star, 1.0 - d_star);
    return std::max(d, 0.5 - d) * v_m;
}

/// PI with a hysteresis latch on its input. The latch engages when |error|
/// exceeds hys_band and releases once it falls under hys_release; while
/// released the error reads as zero and the integrator is frozen.
inline double pi_step(ControlState& s, double error, double dt) {
    if (!s.hysteresis_active && std::abs(error) > s.hys_band)
        s.hysteresis_active = true;
    else if (s.hysteresis_active && std::abs(error) < s.hys_release)
        s.hysteresis_active = false;

    const double e = s.hysteresis_active ? error : 0.0;
    s.integrator += e * dt;
    if (s.ki > 0.0) {
        const double lim = s.anti_windup_limit / s.ki;
        s.integrator = std::clamp(s.integrator, -lim, lim);
    }
    return s.kp * e + s.ki * s.integrator;
}

struct ControlOutput {
    ModulationCommand command;
    double d_star = 0.0;
    double error = 0.0;
    std::size_t candidate_count = 0;
    bool unreachable = false;
    bool saturated = false;
    bool aux_disabled = false;
};

inline ControlOutput control_step(const Measurements& meas, const ControlRefs& refs,
                                  ControlState& state, const ControllerConfig& cfg, double dt) {
    const std::size_t n = cfg.n_modules;
    const auto& s = cfg.settings;
    ControlOutput out;
    out.saturated = refs.v_dc1_ref < meas.v_m_bar ||
                    refs.v_dc1_ref > static_cast<double>(n) * meas.v_m_bar;

    if (refs.v_dc2_ref <= 0.0) {
        // Auxiliary port off: the dc link gets the full continuous range of m.
        const double m = (refs.v_dc1_ref / meas.v_m_bar - 1.0) / static_cast<double>(n - 1);
        state.m_selected = std::clamp(m, 0.0, 1.0);
        state.has_selection = true;
        state.integrator = 0.0;
        state.hysteresis_active = false;
        out.command.m = state.m_selected;
        out.d_star = state.d_star;
        out.aux_disabled = true;
        return out;
    }

    out.error = refs.v_dc2_ref - meas.v_dc2;
    state.hys_band = s.hys_band_frac * refs.v_dc2_ref;
    state.hys_release = s.hys_release_frac * refs.v_dc2_ref;

    double d_ff = 0.0;
    try {
        d_ff = feedforward_duty(refs, meas.v_m_bar, cfg.aux, s.feedforward_fidelity);
    } catch (const UnreachableError&) {
        out.unreachable = true;
        out.command.m = state.m_selected;
        out.d_star = state.d_star;
        return out;
    }

    // Positive error needs more gain, which on the canonical D <= 0.5 branch means less duty.
    const double integ_before = state.integrator;
    const double correction = pi_step(state, out.error, dt);
    const double d_raw = d_ff - correction;
    const double d_hi = std::min(s.d_max, 0.5);
    const double d = std::clamp(d_raw, s.d_min, d_hi);
    // Conditional integration: no accumulation while the duty sits on a clamp
    // and the error keeps pushing into it.
    if ((d_raw < s.d_min && out.error > 0.0) || (d_raw > d_hi && out.error < 0.0))
        state.integrator = integ_before;
    state.d_star = d;

    const auto cands = candidate_modulation_indices(d, n);
    double m_sel = select_modulation_index(cands, refs.v_dc1_ref, meas.v_m_bar, n);
    if (state.has_selection && s.selection_hysteresis_frac > 0.0) {
        auto dist = [&](double m) { return std::abs(m - state.m_selected); };
        const double prev = *std::min_element(cands.begin(), cands.end(), [&](double a, double b) {
            return dist(a) < dist(b);
        });
        auto dc_err = [&](double m) {
            return std::abs(average_dc_link(m, n, meas.v_m_bar) - refs.v_dc1_ref);
        };
        if (dc_err(prev) <= dc_err(m_sel) + s.selection_hysteresis_frac * refs.v_dc1_ref)
            m_sel = prev;
    }
    state.m_selected = m_sel;
    state.has_selection = true;
    out.command.m = state.m_selected;
    out.d_star = d;
    out.candidate_count = cands.size();
    return out;
}

} // namespace rbsim

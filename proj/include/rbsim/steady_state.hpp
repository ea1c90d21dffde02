#pragma once

// Closed-form steady-state model of the isolated auxiliary port.
//
// The string voltage splits into a dc base level plus a one-module-tall pulse
// train of duty D at (N-1) f_sw. The coupling capacitor removes the dc part, so
// the transformer sees +(1-D)(V_m - dVr) for a fraction D of the period and
// -D(V_m - dVr) for the rest. Only the larger of the two pulses forward-biases
// the bridge, which gives the two symmetric gain branches D <= 0.5 and D > 0.5.

#include "rbsim/errors.hpp"
#include "rbsim/psc.hpp"
#include "rbsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>

namespace rbsim {

struct AuxParams {
    double turns_ratio = 1.0;
    double r_eq1 = 0.0; // r_cdc2 + r_l1
    double r_eq2 = 0.0; // r_l2 + 2 r_fd
    double v_fd = 0.0;
    double r_load = 1.0;
    double delta_vr = 0.0;

    /// Series parasitics referred to the secondary.
    double referred_resistance() const { return turns_ratio * turns_ratio * r_eq1 + r_eq2; }

    AuxParams lossless() const {
        AuxParams p = *this;
        p.r_eq1 = 0.0;
        p.r_eq2 = 0.0;
        p.v_fd = 0.0;
        p.delta_vr = 0.0;
        return p;
    }
};

inline AuxParams aux_params_from(const PackConfig& c, double r_load, double delta_vr = 0.0) {
    return {c.turns_ratio, c.r_eq1(), c.r_eq2(), c.v_fd, r_load, delta_vr};
}

enum class Branch { low, high };
enum class Fidelity { ideal, full };

inline Branch branch_of(double d) { return d <= 0.5 ? Branch::low : Branch::high; }

struct PulseVoltages {
    double plus = 0.0;
    double minus = 0.0; // negative
};

inline PulseVoltages pulse_voltages(double d, double v_m, double delta_vr) {
    if (!(d >= 0.0 && d < 1.0)) throw DomainError("duty must lie in [0, 1)");
    if (delta_vr >= v_m) throw DomainError("coupling ripple exceeds module voltage");
    const double amp = v_m - delta_vr;
    return {(1.0 - d) * amp, -d * amp};
}

/// Dimensionless lumped resistance over the conduction interval.
inline double equivalent_resistance(double d, Branch branch, const AuxParams& p) {
    if (!(d >= 0.0 && d <= 1.0)) throw DomainError("duty must lie in [0, 1]");
    const double conduction = branch == Branch::low ? d : 1.0 - d;
    if (conduction <= 0.0) throw DomainError("no conduction interval at this duty");
    return p.referred_resistance() / (conduction * p.r_load);
}

inline double aux_output_voltage(double d, double v_m, const AuxParams& p, Fidelity fidelity) {
    if (!(d > 0.0 && d < 1.0)) throw DomainError("duty must lie in (0, 1)");
    const Branch br = branch_of(d);
    const double r_eq = equivalent_resistance(d, br, p);
    const double pulse = br == Branch::low ? 1.0 - d : d;
    if (fidelity == Fidelity::ideal) return pulse * p.turns_ratio * v_m / (r_eq + 1.0);
    return (pulse * p.turns_ratio * (v_m - p.delta_vr) - 2.0 * p.v_fd) / (r_eq + 1.0);
}

/// Same as aux_output_voltage, but for a constant-power load, where r_load
/// depends on the output voltage itself. Solved by fixed-point iteration.
inline double aux_output_voltage_constant_power(double d, double v_m, AuxParams p, double power,
                                                Fidelity fidelity) {
    if (!(power > 0.0)) throw DomainError("constant-power load must be > 0");
    double v = aux_output_voltage(d, v_m, p.lossless(), Fidelity::ideal);
    for (int it = 0; it < 50; ++it) {
        p.r_load = v * v / power;
        const double next = aux_output_voltage(d, v_m, p, fidelity);
        if (!(next > 0.0)) throw DomainError("constant-power load collapses the auxiliary output");
        if (std::abs(next - v) <= 1e-9) return next;
        v = next;
    }
    throw DomainError("constant-power operating point did not converge in 50 iterations");
}

struct GainInversion {
    double d_low = 0.5;
    double d_high = 0.5;
};

namespace detail {

// Maximizer of a unimodal function on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int i = 0; i < 200 && b - a > 1e-14; ++i) {
        if (fc < fd) {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        }
    }
    return 0.5 * (a + b);
}

// Root of f(x) = target on [a, b] with f monotone between the endpoints.
inline double bisect(const std::function<double(double)>& f, double target, double a, double b) {
    double fa = f(a) - target;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (a + b);
        const double fm = f(mid) - target;
        if (fm == 0.0 || b - a < 1e-15) return mid;
        if ((fa < 0.0) == (fm < 0.0)) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

constexpr double kDutyEdge = 1e-9;

} // namespace detail

/// Achievable auxiliary voltage band [gain at D=0.5, peak gain].
struct GainBand {
    double lo = 0.0;
    double hi = 0.0;
    double d_peak_low = 0.0;
    double d_peak_high = 1.0;
};

inline GainBand gain_band(double v_m, const AuxParams& p, Fidelity fidelity) {
    auto g = [&](double d) { return aux_output_voltage(d, v_m, p, fidelity); };
    GainBand band;
    band.lo = g(0.5);
    band.d_peak_low = detail::golden_max(g, detail::kDutyEdge, 0.5);
    band.d_peak_high = detail::golden_max(g, 0.5, 1.0 - detail::kDutyEdge);
    band.hi = std::max(g(band.d_peak_low), g(band.d_peak_high));
    return band;
}

/// Both duties that deliver `target`: one on each side of D = 0.5.
inline GainInversion invert_gain(double target, double v_m, const AuxParams& p, Fidelity fidelity) {
    const GainBand band = gain_band(v_m, p, fidelity);
    const double slack = 1e-12 * std::max(1.0, std::abs(band.hi));
    if (target < band.lo - slack || target > band.hi + slack)
        throw UnreachableError(target, band.lo, band.hi);

    if (fidelity == Fidelity::ideal) {
        // (1-d) n v_m / (1 + k/(d R)) = V  <=>  a d^2 - (a - V) d + V k / R = 0, larger root.
        const double a = p.turns_ratio * v_m;
        const double c = p.referred_resistance() / p.r_load;
        const double disc = std::max(0.0, (a - target) * (a - target) - 4.0 * a * target * c);
        double d_low = ((a - target) + std::sqrt(disc)) / (2.0 * a);
        d_low = std::clamp(d_low, detail::kDutyEdge, 0.5);
        return {d_low, 1.0 - d_low};
    }

    auto g = [&](double d) { return aux_output_voltage(d, v_m, p, fidelity); };
    if (target <= band.lo) return {0.5, 0.5};
    return {detail::bisect(g, target, band.d_peak_low, 0.5),
            detail::bisect(g, target, 0.5, band.d_peak_high)};
}

/// Charge-balance estimate of the coupling-capacitor ripple.
inline double coupling_ripple_estimate(double p_aux, double c, double v, double f_eff) {
    return p_aux / (f_eff * c * v);
}

struct SteadyStateSolution {
    double d = 0.0;
    double v_base = 0.0;
    double v_p_plus = 0.0;
    double v_p_minus = 0.0;
    double r_eq = 0.0;
    double v_dc1 = 0.0;
    double v_dc2 = 0.0;
};

inline SteadyStateSolution solve_operating_point(double m, std::size_t n, double v_m,
                                                 const AuxParams& p, Fidelity fidelity) {
    SteadyStateSolution s;
    s.d = effective_duty(m, n);
    s.v_base = static_cast<double>(base_level(m, n)) * v_m;
    const auto pv = pulse_voltages(s.d, v_m, p.delta_vr);
    s.v_p_plus = pv.plus;
    s.v_p_minus = pv.minus;
    s.v_dc1 = average_dc_link(m, n, v_m);
    if (s.d > 0.0) {
        s.r_eq = equivalent_resistance(s.d, branch_of(s.d), p);
        s.v_dc2 = aux_output_voltage(s.d, v_m, p, fidelity);
    } else {
        s.r_eq = std::numeric_limits<double>::infinity();
        s.v_dc2 = 0.0;
    }
    return s;
}

} // namespace rbsim

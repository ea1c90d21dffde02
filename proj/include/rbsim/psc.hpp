#pragma once

// Phase-shifted-carrier modulation for a string of N half-bridge modules.
//
// Module 0 is hard-wired inserted; the remaining N-1 modules each own one
// symmetric triangular carrier in [0, 1], all sharing period 1/f_sw and shifted
// by 1/((N-1) f_sw) from one another. Carrier k sits at its minimum when
// f_sw * t + k/(N-1) is an integer. Module k+1 is inserted while m > carrier_k.

#include "rbsim/errors.hpp"
#include "rbsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rbsim {

namespace detail {

inline double triangle(double phase) {
    const double frac = phase - std::floor(phase);
    return frac < 0.5 ? 2.0 * frac : 2.0 * (1.0 - frac);
}

// Measure (in carrier cycles) of {x in [0, phase] : m > triangle(x)}.
inline double inserted_measure(double phase, double m) {
    const double whole = std::floor(phase);
    const double frac = phase - whole;
    const double half = 0.5 * m;
    const double g = std::min(frac, half) + std::max(0.0, frac - (1.0 - half));
    return whole * m + g;
}

inline double carrier_phase(std::size_t k, double t, double f_sw, std::size_t n) {
    return f_sw * t + static_cast<double>(k) / static_cast<double>(n - 1);
}

} // namespace detail

inline double carrier_value(std::size_t k, double t, double f_sw, std::size_t n) {
    if (n < 2 || k >= n - 1) throw DomainError("carrier index out of range");
    return detail::triangle(detail::carrier_phase(k, t, f_sw, n));
}

inline SwitchPattern switch_pattern(ModulationCommand cmd, double t, std::size_t n, double f_sw) {
    SwitchPattern p;
    p.timestamp = t;
    p.inserted.assign(n, false);
    if (n == 0) return p;
    p.inserted[0] = true;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        p.inserted[k + 1] = cmd.m >= 1.0 || cmd.m > carrier_value(k, t, f_sw, n);
    }
    return p;
}

inline SwitchPattern switch_pattern(ModulationCommand cmd, double t, const PackConfig& config) {
    return switch_pattern(cmd, t, config.n_modules, config.f_sw);
}

/// Fraction of [t0, t1] each module spends inserted. Exact for the triangular
/// carriers, so a fixed-step integrator sees the true duty regardless of where
/// switching edges fall relative to the step grid.
inline std::vector<double> insertion_fractions(double m, double t0, double t1, std::size_t n,
                                               double f_sw) {
    std::vector<double> frac(n, 0.0);
    if (n == 0) return frac;
    frac[0] = 1.0;
    if (m >= 1.0) {
        std::fill(frac.begin(), frac.end(), 1.0);
        return frac;
    }
    if (m <= 0.0) return frac;
    const double span = f_sw * (t1 - t0);
    if (span <= 0.0) {
        const auto p = switch_pattern({m}, t0, n, f_sw);
        for (std::size_t i = 0; i < n; ++i) frac[i] = p.inserted[i] ? 1.0 : 0.0;
        return frac;
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double a = detail::carrier_phase(k, t0, f_sw, n);
        const double b = a + span;
        frac[k + 1] = (detail::inserted_measure(b, m) - detail::inserted_measure(a, m)) / span;
    }
    return frac;
}

/// Fractional part of m(N-1): the high-fraction of the one-module pulse.
inline double effective_duty(double m, std::size_t n) {
    const double x = m * static_cast<double>(n - 1);
    return x - std::floor(x);
}

/// Modules inserted during the low phase of the pulse train.
inline std::size_t base_level(double m, std::size_t n) {
    return static_cast<std::size_t>(std::floor(m * static_cast<double>(n - 1) + 1.0));
}

inline double average_dc_link(double m, std::size_t n, double v_m) {
    return (1.0 + m * static_cast<double>(n - 1)) * v_m;
}

inline double effective_switching_frequency(std::size_t n, double f_sw) {
    return static_cast<double>(n - 1) * f_sw;
}

} // namespace rbsim

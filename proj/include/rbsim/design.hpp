#pragma once

// Sizing rules for the auxiliary port: transformer ratio window, coupling and
// output capacitor minimums, and the dc-link deviation bound.

#include "rbsim/errors.hpp"

#include <cstddef>

namespace rbsim {

struct DesignInputs {
    double v_dc2_ref = 0.0;
    double v_m_min = 0.0;
    double v_m_max = 0.0;
    double v_m_rated = 0.0;
    double v_fd = 0.0;
    double delta_vr_target = 0.0;
    double r_eq_estimate = 0.0; // dimensionless, at the nominal D = 0.5 point
    double p_max2 = 0.0;
    std::size_t n_modules = 0;
    double f_sw = 0.0;
};

struct DesignOutputs {
    double turns_lo = 0.0;
    double turns_hi = 0.0;
    double turns_recommended = 0.0;
    double c_dc2_min = 0.0;
    double c_dc3_min = 0.0;
    double delta_v_max = 0.0;
};

struct TurnsBounds {
    double lo = 0.0;
    double hi = 0.0;
};

/// Which frequency the sizing formulas divide by. The (N-1) factor is already
/// explicit in them, so the per-carrier frequency is the default reading.
enum class FrequencyBasis { per_carrier, effective };

inline TurnsBounds turns_ratio_bounds(const DesignInputs& d, bool practical) {
    const double num = (d.r_eq_estimate + 1.0) * (d.v_dc2_ref - d.v_fd);
    const double v_lo = practical ? d.v_m_min : d.v_m_rated;
    const double v_hi = practical ? d.v_m_max : d.v_m_rated;
    const TurnsBounds b{num / (0.95 * (v_lo - d.delta_vr_target)),
                        num / (0.5 * (v_hi - d.delta_vr_target))};
    if (b.lo > b.hi) throw InfeasibleDesignError(b.lo, b.hi);
    return b;
}

/// Upper practical bound: puts D = 0.5 at the highest module voltage.
inline double recommended_turns_ratio(const DesignInputs& d) {
    return turns_ratio_bounds(d, true).hi;
}

namespace detail {
inline double sizing_frequency(const DesignInputs& d, FrequencyBasis basis) {
    return basis == FrequencyBasis::effective ? static_cast<double>(d.n_modules - 1) * d.f_sw
                                              : d.f_sw;
}
} // namespace detail

inline double size_coupling_capacitor(const DesignInputs& d, double turns,
                                      FrequencyBasis basis = FrequencyBasis::per_carrier) {
    return d.p_max2 * turns /
           (static_cast<double>(d.n_modules - 1) * d.v_dc2_ref * d.delta_vr_target *
            detail::sizing_frequency(d, basis));
}

inline double size_output_capacitor(const DesignInputs& d,
                                     FrequencyBasis basis = FrequencyBasis::per_carrier) {
    return d.p_max2 / (static_cast<double>(d.n_modules - 1) * d.v_dc2_ref * d.delta_vr_target *
                       detail::sizing_frequency(d, basis));
}

/// Half of the dc-link granularity v_m/(n-1).
inline double dc_link_deviation_bound(std::size_t n, double v_m) {
    if (n < 2) throw DomainError("deviation bound needs at least two modules");
    return 0.5 * v_m / static_cast<double>(n - 1);
}

inline DesignOutputs run_design(const DesignInputs& d,
                                FrequencyBasis basis = FrequencyBasis::per_carrier) {
    const auto b = turns_ratio_bounds(d, true);
    DesignOutputs out;
    out.turns_lo = b.lo;
    out.turns_hi = b.hi;
    out.turns_recommended = b.hi;
    out.c_dc2_min = size_coupling_capacitor(d, out.turns_recommended, basis);
    out.c_dc3_min = size_output_capacitor(d, basis);
    out.delta_v_max = dc_link_deviation_bound(d.n_modules, d.v_m_rated);
    return out;
}

} // namespace rbsim

#pragma once

#include <cstddef>
#include <vector>

namespace rbsim {

/// One battery module: constant EMF behind a series resistance, plus its half-bridge.
struct ModuleParams {
    double v_oc = 0.0; // open-circuit voltage [V]
    double r_bt = 0.0; // internal resistance [ohm]
    double r_ds = 0.0; // switch on-resistance [ohm]
    double r_d = 0.0;  // diode/body resistance [ohm]
};

/// Electrical parameterization of the pack, both filter stages and the transformer.
struct PackConfig {
    std::size_t n_modules = 0;
    double f_sw = 0.0; // per-carrier frequency [Hz]
    double l_dc = 0.0;
    double r_ldc = 0.0;
    double c_dc1 = 0.0;
    double c_dc2 = 0.0;
    double c_dc3 = 0.0;
    double turns_ratio = 0.0; // N2/N1
    double r_l1 = 0.0;
    double r_l2 = 0.0;
    double r_cdc2 = 0.0;
    double v_fd = 0.0;
    double r_fd = 0.0;
    std::vector<ModuleParams> modules;

    // Transformer magnetizing inductance seen from the primary [H].
    double l_m = 1e-3;
    // A bypassed half-bridge still conducts through its low-side switch.
    bool bypass_includes_rds = true;

    double r_eq1() const { return r_cdc2 + r_l1; }
    double r_eq2() const { return r_l2 + 2.0 * r_fd; }

    double mean_v_oc() const {
        if (modules.empty()) return 0.0;
        double s = 0.0;
        for (const auto& m : modules) s += m.v_oc;
        return s / static_cast<double>(modules.size());
    }

    double mean_r_bt() const {
        if (modules.empty()) return 0.0;
        double s = 0.0;
        for (const auto& m : modules) s += m.r_bt;
        return s / static_cast<double>(modules.size());
    }
};

enum class LoadKind { resistive, constant_power, open };

/// Port load. `value` is ohms for resistive, watts for constant-power, ignored when open.
struct LoadSpec {
    LoadKind kind = LoadKind::resistive;
    double value = 1.0;

    static LoadSpec resistive(double ohms) { return {LoadKind::resistive, ohms}; }
    static LoadSpec constant_power(double watts) { return {LoadKind::constant_power, watts}; }
    static LoadSpec open() { return {LoadKind::open, 0.0}; }

    /// Current drawn at port voltage v.
    double current(double v) const {
        switch (kind) {
        case LoadKind::resistive: return v / value;
        case LoadKind::constant_power: return value / v;
        case LoadKind::open: return 0.0;
        }
        return 0.0;
    }
};

/// Per-module insert/bypass state. Index 0 is the permanently inserted base module.
struct SwitchPattern {
    std::vector<bool> inserted;
    double timestamp = 0.0;

    std::size_t inserted_count() const {
        std::size_t c = 0;
        for (bool b : inserted) c += b ? 1 : 0;
        return c;
    }
};

struct ModulationCommand {
    double m = 0.0;
};

} // namespace rbsim

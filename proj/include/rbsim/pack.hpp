#pragma once

#include "rbsim/design.hpp"
#include "rbsim/errors.hpp"
#include "rbsim/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rbsim {

/// Terminal voltage of an inserted module carrying current i (discharge positive).
inline double module_terminal_voltage(const ModuleParams& p, double i) {
    return p.v_oc - (p.r_bt + p.r_ds) * i;
}

/// Thevenin view of the string for a given insertion state: v = emf - r * i.
struct StringThevenin {
    double emf = 0.0;
    double r = 0.0;

    double voltage(double i) const { return emf - r * i; }
};

/// Weighted by per-module insertion fraction in [0, 1]; a boolean pattern is the 0/1 case.
inline StringThevenin string_thevenin(const PackConfig& config, std::span<const double> inserted) {
    if (inserted.size() != config.n_modules || config.modules.size() != config.n_modules)
        throw ConfigError("switch pattern length does not match n_modules");
    StringThevenin th;
    for (std::size_t k = 0; k < config.n_modules; ++k) {
        const auto& mp = config.modules[k];
        const double a = inserted[k];
        const double bypass_r = config.bypass_includes_rds ? mp.r_ds : 0.0;
        th.emf += a * mp.v_oc;
        th.r += a * (mp.r_bt + mp.r_ds) + (1.0 - a) * bypass_r;
    }
    return th;
}

inline double string_voltage(const PackConfig& config, const SwitchPattern& pattern, double i) {
    std::vector<double> a(pattern.inserted.size());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = pattern.inserted[k] ? 1.0 : 0.0;
    return string_thevenin(config, a).voltage(i);
}

struct ValidationIssue {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const {
        for (const auto& i : issues)
            if (i.severity == ValidationIssue::Severity::error) return false;
        return true;
    }

    std::size_t warning_count() const {
        std::size_t c = 0;
        for (const auto& i : issues) c += i.severity == ValidationIssue::Severity::warning ? 1 : 0;
        return c;
    }
};

/// Checks every parameter invariant. With design inputs, also warns when the
/// configured turns ratio falls outside the practical design window.
inline ValidationReport validate_config(const PackConfig& c,
                                        const std::optional<DesignInputs>& design = std::nullopt) {
    ValidationReport rep;
    auto error = [&](std::string field, std::string msg) {
        rep.issues.push_back({ValidationIssue::Severity::error, std::move(field), std::move(msg)});
    };
    auto positive = [&](const char* field, double v) {
        if (!(v > 0.0)) error(field, "must be > 0");
    };
    auto non_negative = [&](const std::string& field, double v) {
        if (!(v >= 0.0)) error(field, "must be >= 0");
    };

    if (c.n_modules < 2) error("n_modules", "need >=2 modules");
    if (c.modules.size() != c.n_modules)
        error("modules", "expected " + std::to_string(c.n_modules) + " entries, got " +
                             std::to_string(c.modules.size()));
    positive("f_sw", c.f_sw);
    positive("turns_ratio", c.turns_ratio);
    positive("l_dc", c.l_dc);
    positive("c_dc1", c.c_dc1);
    positive("c_dc2", c.c_dc2);
    positive("c_dc3", c.c_dc3);
    positive("l_m", c.l_m);
    non_negative("r_ldc", c.r_ldc);
    non_negative("r_l1", c.r_l1);
    non_negative("r_l2", c.r_l2);
    non_negative("r_cdc2", c.r_cdc2);
    non_negative("r_fd", c.r_fd);
    non_negative("v_fd", c.v_fd);
    for (std::size_t k = 0; k < c.modules.size(); ++k) {
        const auto& m = c.modules[k];
        const std::string prefix = "modules[" + std::to_string(k) + "].";
        if (!(m.v_oc > 0.0)) error(prefix + "v_oc", "must be > 0");
        non_negative(prefix + "r_bt", m.r_bt);
        non_negative(prefix + "r_ds", m.r_ds);
        non_negative(prefix + "r_d", m.r_d);
    }

    if (design && rep.ok()) {
        try {
            const auto b = turns_ratio_bounds(*design, true);
            if (c.turns_ratio < b.lo || c.turns_ratio > b.hi)
                rep.issues.push_back({ValidationIssue::Severity::warning, "turns_ratio",
                                      "turns_ratio " + std::to_string(c.turns_ratio) +
                                          " outside practical window [" + std::to_string(b.lo) +
                                          ", " + std::to_string(b.hi) + "]"});
        } catch (const InfeasibleDesignError& e) {
            rep.issues.push_back({ValidationIssue::Severity::warning, "design", e.what()});
        }
    }
    return rep;
}

} // namespace rbsim

#include "rbsim/config.hpp"
#include "rbsim/pack.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rbsim;

namespace {

PackConfig uniform_pack(std::size_t n, ModuleParams m) {
    PackConfig c;
    c.n_modules = n;
    c.f_sw = 10e3;
    c.l_dc = 200e-6;
    c.c_dc1 = 100e-6;
    c.c_dc2 = 940e-6;
    c.c_dc3 = 2.7e-3;
    c.turns_ratio = 0.94;
    c.modules.assign(n, m);
    return c;
}

SwitchPattern pattern(std::initializer_list<bool> bits) {
    SwitchPattern p;
    p.inserted = bits;
    return p;
}

bool has_error(const ValidationReport& r, const std::string& field) {
    for (const auto& i : r.issues)
        if (i.field == field && i.severity == ValidationIssue::Severity::error) return true;
    return false;
}

} // namespace

TEST(ModuleTerminalVoltage, ZeroCurrent) {
    EXPECT_DOUBLE_EQ(module_terminal_voltage({24, 0.02, 0.001, 0.001}, 0.0), 24.0);
}

TEST(ModuleTerminalVoltage, LinearDrop) {
    EXPECT_NEAR(module_terminal_voltage({24, 0.02, 0.001, 0.001}, 10.0), 23.79, 1e-12);
    EXPECT_NEAR(module_terminal_voltage({91, 0.005, 0.001, 0.001}, 100.0), 90.4, 1e-12);
}

TEST(StringVoltage, AllBypassedAtZeroCurrent) {
    const auto c = uniform_pack(5, {24, 0.02, 0.001, 0.001});
    EXPECT_DOUBLE_EQ(string_voltage(c, pattern({false, false, false, false, false}), 0.0), 0.0);
}

TEST(StringVoltage, AllInsertedSumsOpenCircuit) {
    const auto c = uniform_pack(5, {24, 0.02, 0.001, 0.001});
    EXPECT_DOUBLE_EQ(string_voltage(c, pattern({true, true, true, true, true}), 0.0), 120.0);
}

TEST(StringVoltage, ThreeOfFiveHandSum) {
    const auto c = uniform_pack(5, {24, 0.02, 0.001, 0.001});
    const double i = 4.0;
    const double expected = 3.0 * module_terminal_voltage(c.modules[0], i) - 2.0 * 0.001 * i;
    EXPECT_NEAR(string_voltage(c, pattern({true, true, false, true, false}), i), expected, 1e-12);
    EXPECT_NEAR(expected, 71.74, 1e-12);
}

TEST(StringVoltage, BypassResistanceIsConfigurable) {
    auto c = uniform_pack(3, {24, 0.02, 0.001, 0.001});
    c.bypass_includes_rds = false;
    EXPECT_NEAR(string_voltage(c, pattern({true, false, false}), 10.0), 24.0 - 0.21, 1e-12);
}

TEST(StringVoltage, LengthMismatchIsConfigError) {
    const auto c = uniform_pack(5, {24, 0.02, 0.001, 0.001});
    EXPECT_THROW(string_voltage(c, pattern({true, true}), 0.0), ConfigError);
}

TEST(StringVoltage, HeterogeneousAllInsertedEqualsSumOfEmf) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> v(10, 100), r(0, 0.05);
    for (int trial = 0; trial < 50; ++trial) {
        PackConfig c = uniform_pack(8, {});
        double sum = 0.0;
        for (auto& m : c.modules) {
            m = {v(rng), r(rng), r(rng), r(rng)};
            sum += m.v_oc;
        }
        SwitchPattern p;
        p.inserted.assign(8, true);
        EXPECT_DOUBLE_EQ(string_voltage(c, p, 0.0), sum);
    }
}

TEST(StringVoltage, AffineDecreasingInCurrent) {
    std::mt19937 rng(11);
    std::bernoulli_distribution coin(0.5);
    const auto c = uniform_pack(6, {48, 0.01, 0.002, 0.001});
    for (int trial = 0; trial < 50; ++trial) {
        SwitchPattern p;
        p.inserted.resize(6);
        for (std::size_t k = 0; k < 6; ++k) p.inserted[k] = coin(rng);
        const double v0 = string_voltage(c, p, 0.0);
        const double v1 = string_voltage(c, p, 10.0);
        const double v2 = string_voltage(c, p, 20.0);
        EXPECT_LT(v1, v0);
        EXPECT_NEAR(v2 - v1, v1 - v0, 1e-9);
    }
}

TEST(ValidateConfig, ShippedConfigsAreAccepted) {
    for (const char* name : {"pack10_48v.json", "pack5_12v.json"}) {
        const auto cfg = load_config(std::string(RBSIM_CONFIG_DIR) + "/" + name);
        const auto rep = validate_config(cfg.pack, cfg.design);
        EXPECT_TRUE(rep.ok()) << name;
        EXPECT_EQ(rep.warning_count(), 0u) << name;
    }
}

TEST(ValidateConfig, SingleModuleRejected) {
    const auto rep = validate_config(uniform_pack(1, {24, 0, 0, 0}));
    ASSERT_FALSE(rep.ok());
    EXPECT_TRUE(has_error(rep, "n_modules"));
    EXPECT_EQ(rep.issues.front().message, "need >=2 modules");
}

TEST(ValidateConfig, NegativeCapacitanceRejected) {
    auto c = uniform_pack(5, {24, 0, 0, 0});
    c.c_dc2 = -1e-6;
    const auto rep = validate_config(c);
    EXPECT_FALSE(rep.ok());
    EXPECT_TRUE(has_error(rep, "c_dc2"));
}

TEST(ValidateConfig, CollectsEveryProblem) {
    auto c = uniform_pack(5, {24, 0, 0, 0});
    c.f_sw = 0.0;
    c.turns_ratio = -1.0;
    c.modules[2].r_bt = -0.1;
    c.modules.pop_back();
    const auto rep = validate_config(c);
    EXPECT_TRUE(has_error(rep, "f_sw"));
    EXPECT_TRUE(has_error(rep, "turns_ratio"));
    EXPECT_TRUE(has_error(rep, "modules[2].r_bt"));
    EXPECT_TRUE(has_error(rep, "modules"));
}

TEST(ValidateConfig, WarnsWhenTurnsOutsideDesignWindow) {
    auto c = uniform_pack(5, {24, 0.02, 0.001, 0.001});
    DesignInputs d{12, 22, 25.2, 24, 0.4, 0.075, 0.022, 36, 5, 10e3};
    c.turns_ratio = 2.0;
    const auto rep = validate_config(c, d);
    EXPECT_TRUE(rep.ok());
    EXPECT_EQ(rep.warning_count(), 1u);
    EXPECT_EQ(rep.issues.front().field, "turns_ratio");
}

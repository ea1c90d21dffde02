#include "rbsim/config.hpp"
#include "rbsim/steady_state.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rbsim;

namespace {

AuxParams pack10_aux() {
    const auto cfg = load_config(std::string(RBSIM_CONFIG_DIR) + "/pack10_48v.json");
    return aux_params_from(cfg.pack, cfg.aux_r_load);
}

AuxParams lossless(double turns, double r_load = 10.0) {
    AuxParams p;
    p.turns_ratio = turns;
    p.r_load = r_load;
    return p;
}

} // namespace

TEST(PulseVoltages, Examples) {
    auto p = pulse_voltages(0.3, 91, 0);
    EXPECT_NEAR(p.plus, 63.7, 1e-12);
    EXPECT_NEAR(p.minus, -27.3, 1e-12);
    p = pulse_voltages(0.5, 100, 0);
    EXPECT_DOUBLE_EQ(p.plus, 50.0);
    EXPECT_DOUBLE_EQ(p.minus, -50.0);
    p = pulse_voltages(0.3, 91, 2);
    EXPECT_NEAR(p.plus, 62.3, 1e-12);
    EXPECT_NEAR(p.minus, -26.7, 1e-12);
}

TEST(PulseVoltages, SpanIsRippleReducedModuleVoltage) {
    for (double d = 0.0; d < 1.0; d += 0.07) {
        const auto p = pulse_voltages(d, 48, 1.5);
        EXPECT_NEAR(p.plus - p.minus, 46.5, 1e-12);
    }
}

TEST(PulseVoltages, RippleAtModuleVoltageThrows) {
    EXPECT_THROW(pulse_voltages(0.3, 91, 91), DomainError);
    EXPECT_THROW(pulse_voltages(1.0, 91, 0), DomainError);
}

TEST(EquivalentResistance, Example) {
    AuxParams p{1.13, 0.05, 0.05, 0.0, 46.0, 0.0};
    EXPECT_NEAR(equivalent_resistance(0.5, Branch::low, p), (1.13 * 1.13 * 0.05 + 0.05) / 23.0, 1e-15);
    EXPECT_NEAR(equivalent_resistance(0.5, Branch::low, p), 0.00495, 1e-6);
}

TEST(EquivalentResistance, LosslessIsZero) {
    for (double d : {0.1, 0.5, 0.9}) {
        EXPECT_EQ(equivalent_resistance(d, Branch::low, lossless(1.0)), 0.0);
        EXPECT_EQ(equivalent_resistance(d, Branch::high, lossless(1.0)), 0.0);
    }
}

TEST(EquivalentResistance, InverseInConductionInterval) {
    AuxParams p{1.13, 0.05, 0.05, 0.0, 46.0, 0.0};
    EXPECT_NEAR(equivalent_resistance(0.1, Branch::low, p) / equivalent_resistance(0.5, Branch::low, p),
                5.0, 1e-12);
    EXPECT_NEAR(equivalent_resistance(0.9, Branch::high, p), equivalent_resistance(0.1, Branch::low, p),
                1e-15);
}

TEST(EquivalentResistance, NoConductionIntervalThrows) {
    AuxParams p{1.13, 0.05, 0.05, 0.0, 46.0, 0.0};
    EXPECT_THROW(equivalent_resistance(0.0, Branch::low, p), DomainError);
    EXPECT_THROW(equivalent_resistance(1.0, Branch::high, p), DomainError);
}

TEST(AuxOutputVoltage, IdealLosslessExamples) {
    EXPECT_NEAR(aux_output_voltage(0.5, 77.0, lossless(1.2), Fidelity::ideal), 0.5 * 1.2 * 77.0, 1e-12);
    EXPECT_NEAR(aux_output_voltage(0.3, 91.0, lossless(1.13), Fidelity::ideal), 71.981, 1e-9);
}

TEST(AuxOutputVoltage, DomainIsOpenInterval) {
    EXPECT_THROW(aux_output_voltage(0.0, 91, lossless(1), Fidelity::full), DomainError);
    EXPECT_THROW(aux_output_voltage(1.0, 91, lossless(1), Fidelity::full), DomainError);
}

TEST(AuxOutputVoltage, IdealLosslessBranchSymmetry) {
    for (double d = 0.01; d < 0.5; d += 0.01)
        EXPECT_NEAR(aux_output_voltage(d, 91, lossless(1.13), Fidelity::ideal),
                    aux_output_voltage(1.0 - d, 91, lossless(1.13), Fidelity::ideal), 1e-9);
}

TEST(AuxOutputVoltage, IdealLosslessRange) {
    for (double d = 0.001; d < 1.0; d += 0.001) {
        const double g = aux_output_voltage(d, 91, lossless(1.13), Fidelity::ideal) / (1.13 * 91);
        EXPECT_GE(g, 0.5 - 1e-12);
        EXPECT_LE(g, 1.0 + 1e-12);
    }
}

TEST(AuxOutputVoltage, FullBelowIdealAndGapGrowsTowardEdges) {
    const auto p = pack10_aux();
    const double v_m = 91.0;
    auto gap = [&](double d) {
        return aux_output_voltage(d, v_m, p.lossless(), Fidelity::ideal) -
               aux_output_voltage(d, v_m, p, Fidelity::full);
    };
    for (double d = 0.02; d < 0.99; d += 0.02) EXPECT_GT(gap(d), 0.0) << d;
    for (double d = 0.5; d > 0.03; d -= 0.01) EXPECT_LE(gap(d), gap(d - 0.01) + 1e-12) << d;
    for (double d = 0.5; d < 0.97; d += 0.01) EXPECT_LE(gap(d), gap(d + 0.01) + 1e-12) << d;
}

TEST(AuxOutputVoltage, ConstantPowerIsSelfConsistent) {
    auto p = pack10_aux();
    const double power = 5000.0;
    const double v = aux_output_voltage_constant_power(0.4, 91.0, p, power, Fidelity::full);
    p.r_load = v * v / power;
    EXPECT_NEAR(aux_output_voltage(0.4, 91.0, p, Fidelity::full), v, 1e-8);
}

TEST(InvertGain, BandMinimumIsDoubleRoot) {
    const auto r = invert_gain(0.5 * 1.13 * 91, 91, lossless(1.13), Fidelity::ideal);
    EXPECT_NEAR(r.d_low, 0.5, 1e-9);
    EXPECT_NEAR(r.d_high, 0.5, 1e-9);
}

TEST(InvertGain, IdealLosslessSymmetry) {
    const auto r = invert_gain(0.75 * 1.13 * 91, 91, lossless(1.13), Fidelity::ideal);
    EXPECT_NEAR(r.d_low, 0.25, 1e-12);
    EXPECT_NEAR(r.d_high, 0.75, 1e-12);
}

TEST(InvertGain, FullFidelityTenModuleTarget) {
    const auto p = pack10_aux();
    const auto r = invert_gain(48.0, 91.0, p, Fidelity::full);
    EXPECT_LE(r.d_low, 0.5);
    EXPECT_GT(r.d_high, 0.5);
    EXPECT_NEAR(aux_output_voltage(r.d_low, 91.0, p, Fidelity::full), 48.0, 1e-9);
    EXPECT_NEAR(aux_output_voltage(r.d_high, 91.0, p, Fidelity::full), 48.0, 1e-9);
}

TEST(InvertGain, UnreachableCarriesBand) {
    const auto p = pack10_aux();
    try {
        invert_gain(500.0, 91.0, p, Fidelity::full);
        FAIL() << "expected UnreachableError";
    } catch (const UnreachableError& e) {
        EXPECT_DOUBLE_EQ(e.target, 500.0);
        EXPECT_NEAR(e.band_lo, aux_output_voltage(0.5, 91.0, p, Fidelity::full), 1e-12);
        EXPECT_GT(e.band_hi, e.band_lo);
    }
    EXPECT_THROW(invert_gain(1.0, 91.0, p, Fidelity::full), UnreachableError);
}

TEST(InvertGain, RoundTripOnRandomTargets) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        AuxParams p{0.5 + u(rng), 0.05 * u(rng), 0.05 * u(rng), 0.8 * u(rng), 0.5 + 10 * u(rng), 0.0};
        const double v_m = 20.0 + 80.0 * u(rng);
        for (auto fid : {Fidelity::ideal, Fidelity::full}) {
            const auto band = gain_band(v_m, p, fid);
            const double target = band.lo + (band.hi - band.lo) * u(rng);
            const auto r = invert_gain(target, v_m, p, fid);
            EXPECT_NEAR(aux_output_voltage(r.d_low, v_m, p, fid), target, 1e-9);
            EXPECT_NEAR(aux_output_voltage(r.d_high, v_m, p, fid), target, 1e-9);
        }
    }
}

TEST(CouplingRipple, Proportionality) {
    EXPECT_EQ(coupling_ripple_estimate(0.0, 348e-6, 48, 45e3), 0.0);
    const double a = coupling_ripple_estimate(5000, 348e-6, 48, 45e3);
    EXPECT_NEAR(coupling_ripple_estimate(5000, 696e-6, 48, 45e3), 0.5 * a, 1e-15);
    EXPECT_NEAR(a, 5000.0 / (45e3 * 348e-6 * 48), 1e-12);
}

TEST(SolveOperatingPoint, ConsistentDecomposition) {
    const auto p = pack10_aux();
    const auto s = solve_operating_point(0.478, 10, 91.0, p, Fidelity::full);
    EXPECT_NEAR(s.d, 0.302, 1e-12);
    EXPECT_NEAR(s.v_base, 5 * 91.0, 1e-12);
    EXPECT_NEAR(s.v_base + s.d * 91.0, s.v_dc1, 1e-9);
    EXPECT_NEAR(s.v_p_plus - s.v_p_minus, 91.0, 1e-12);
    EXPECT_NEAR(s.v_dc2, aux_output_voltage(0.302, 91.0, p, Fidelity::full), 1e-9);
    const auto z = solve_operating_point(0.5, 5, 91.0, p, Fidelity::full);
    EXPECT_EQ(z.v_dc2, 0.0);
}

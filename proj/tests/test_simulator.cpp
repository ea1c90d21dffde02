#include "rbsim/config.hpp"
#include "rbsim/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rbsim;

namespace {

ExperimentConfig shipped(int which) {
    return load_config(std::string(RBSIM_CONFIG_DIR) + (which == 1 ? "/pack10_48v.json" : "/pack5_12v.json"));
}

Trace fixed_run(const ExperimentConfig& cfg, double m, const ScenarioStep& seg, double duration,
                SimOptions opt) {
    return run_scenario(cfg.pack, {seg}, {false, m}, cfg.controller_config(), duration, opt);
}

double mean_of(const std::vector<TraceRecord>& r, std::size_t from, double TraceRecord::*f) {
    double s = 0.0;
    for (std::size_t i = from; i < r.size(); ++i) s += r[i].*f;
    return s / static_cast<double>(r.size() - from);
}

Trace synthetic(const std::vector<double>& v1, double ref1, double dt) {
    Trace tr;
    tr.dt = dt;
    tr.segments = {ScenarioStep{0.0, ref1, 0.0}};
    for (std::size_t i = 0; i < v1.size(); ++i) {
        TraceRecord r;
        r.t = (i + 1) * dt;
        r.v_dc1 = v1[i];
        tr.records.push_back(r);
    }
    return tr;
}

} // namespace

TEST(InitState, SeedsAverageOperatingPoint) {
    const auto cfg = shipped(2);
    const PortLoads loads{LoadSpec::resistive(5.5), LoadSpec::resistive(4.0)};
    auto s = init_state(cfg.pack, loads, 0.5, 12.0);
    EXPECT_DOUBLE_EQ(s.v_c1, 72.0);
    EXPECT_DOUBLE_EQ(s.v_c2, 72.0);
    EXPECT_DOUBLE_EQ(s.v_c3, 12.0);
    EXPECT_DOUBLE_EQ(s.i_l, 72.0 / 5.5);
    EXPECT_EQ(s.i_m, 0.0);
    s = init_state(cfg.pack, loads, 0.3, 12.0);
    EXPECT_NEAR(s.i_m, -0.94 * 3.0, 1e-12);
    s = init_state(cfg.pack, {LoadSpec::open(), LoadSpec::open()}, 0.3, 0.0);
    EXPECT_EQ(s.i_l, 0.0);
    EXPECT_EQ(s.v_c3, 0.0);
}

TEST(Step, RejectsTooLargeTimeStep) {
    const auto cfg = shipped(2);
    const SimState s;
    EXPECT_THROW(step(s, {0.5}, cfg.pack, {}, max_dt(cfg.pack) * 1.01), ConfigError);
    EXPECT_THROW(step(s, {0.5}, cfg.pack, {}, 0.0), ConfigError);
    EXPECT_NO_THROW(step(s, {0.5}, cfg.pack, {}, max_dt(cfg.pack)));
}

TEST(Step, DefaultTimeStepResolvesPulses) {
    const auto cfg = shipped(1);
    EXPECT_DOUBLE_EQ(default_dt(cfg.pack), 1.0 / (200.0 * 9.0 * 5000.0));
    EXPECT_DOUBLE_EQ(max_dt(cfg.pack), 4.0 * default_dt(cfg.pack));
}

TEST(RunScenario, IntegerIndexSettlesToResistiveDivider) {
    const auto cfg = shipped(2);
    SimOptions opt;
    opt.trace_stride = 10;
    const auto tr = fixed_run(cfg, 0.5, {0.0, 72.0, 0.0, LoadSpec::resistive(5.5), LoadSpec::open()}, 0.02,
                              opt);
    // Three inserted modules, two bypassed, no pulse train.
    const double r_str = 3.0 * (0.02 + 0.001) + 2.0 * 0.001;
    const double expect = 72.0 * 5.5 / (5.5 + r_str + cfg.pack.r_ldc);
    EXPECT_NEAR(tr.records.back().v_dc1, expect, 1e-3 * expect);
    EXPECT_NEAR(tr.records.back().v_dc2, 0.0, 1e-9);
}

TEST(RunScenario, MeasuredPulseDutyMatchesModulation) {
    const auto cfg = shipped(1);
    SimOptions opt;
    opt.aux_string_coupling = false;
    const double m = 0.478;
    const auto tr =
        fixed_run(cfg, m, {0.0, 500.0, 0.0, LoadSpec::resistive(1.2), LoadSpec::open()}, 2e-3, opt);
    const double threshold = 5.5 * 91.0 - 10.0; // between the 5- and 6-module levels under load
    std::size_t high = 0;
    const std::size_t from = tr.records.size() / 2;
    for (std::size_t i = from; i < tr.records.size(); ++i) high += tr.records[i].v_str > threshold;
    const double duty = static_cast<double>(high) / static_cast<double>(tr.records.size() - from);
    EXPECT_NEAR(duty, 0.302, 0.01);
}

TEST(RunScenario, CouplingCapacitorChargeBalance) {
    const auto cfg = shipped(2);
    SimOptions opt;
    opt.aux_string_coupling = false;
    const auto tr = fixed_run(cfg, 0.3, {0.0, 80.0, 12.0, LoadSpec::resistive(5.5), LoadSpec::resistive(4.0)},
                              0.03, opt);
    const std::size_t from = tr.records.size() * 2 / 3;
    double mean = 0.0, rms = 0.0;
    for (std::size_t i = from; i < tr.records.size(); ++i) {
        mean += tr.records[i].i_1;
        rms += tr.records[i].i_1 * tr.records[i].i_1;
    }
    const double n = static_cast<double>(tr.records.size() - from);
    mean /= n;
    rms = std::sqrt(rms / n);
    EXPECT_LT(std::abs(mean), 0.02 * rms);
}

TEST(RunScenario, EnergyAccountingIsConsistent) {
    const auto cfg = shipped(2);
    const auto tr = fixed_run(cfg, 0.3, {0.0, 80.0, 12.0, LoadSpec::resistive(5.5), LoadSpec::resistive(4.0)},
                              0.03, {});
    const auto& last = tr.records.back();
    const double delivered = last.e_load1 + last.e_load2;
    EXPECT_GT(last.e_load2, 0.0);
    EXPECT_LT(delivered, last.e_emf * 1.01);
    EXPECT_GT(delivered, last.e_emf * 0.9);
}

TEST(RunScenario, HalvingTimeStepBarelyMovesMeans) {
    const auto cfg = shipped(2);
    const ScenarioStep seg{0.0, 80.0, 12.0, LoadSpec::resistive(5.5), LoadSpec::resistive(4.0)};
    SimOptions a;
    a.trace_stride = 4;
    SimOptions b = a;
    b.dt = 0.5 * default_dt(cfg.pack);
    b.trace_stride = 8;
    const auto ta = fixed_run(cfg, 0.3, seg, 0.03, a);
    const auto tb = fixed_run(cfg, 0.3, seg, 0.03, b);
    for (auto f : {&TraceRecord::v_dc1, &TraceRecord::v_dc2}) {
        const double ma = mean_of(ta.records, ta.records.size() * 2 / 3, f);
        const double mb = mean_of(tb.records, tb.records.size() * 2 / 3, f);
        EXPECT_LT(std::abs(ma - mb) / mb, 2e-3);
    }
}

TEST(RunScenario, ConstantPowerCollapseFaults) {
    const auto cfg = shipped(2);
    EXPECT_THROW(fixed_run(cfg, 0.0, {0.0, 24.0, 0.0, LoadSpec::constant_power(1e6), LoadSpec::open()},
                           0.01, {}),
                 SimulationFault);
}

TEST(RunScenario, ScheduleErrors) {
    const auto cfg = shipped(2);
    EXPECT_THROW(run_scenario(cfg.pack, {}, {false, 0.5}, cfg.controller_config(), 1e-3), ConfigError);
    EXPECT_THROW(run_scenario(cfg.pack, {{0.01, 80.0}, {0.0, 80.0}}, {false, 0.5}, cfg.controller_config(),
                              1e-3),
                 ConfigError);
    auto bad = cfg.pack;
    bad.c_dc1 = -1.0;
    EXPECT_THROW(run_scenario(bad, {{0.0, 80.0}}, {false, 0.5}, cfg.controller_config(), 1e-3),
                 ConfigError);
}

TEST(RunScenario, ClosedLoopTracksAuxReference) {
    const auto cfg = shipped(2);
    SimOptions opt;
    opt.trace_stride = 20;
    const auto tr = run_scenario(cfg.pack, {cfg.scenario[0]}, {true, 0.0}, cfg.controller_config(), 0.05,
                                 opt);
    const auto m = steady_state_metrics(tr, 0.2);
    EXPECT_LT(m.dc2.mean_err_pct, 0.5);
    EXPECT_EQ(tr.unreachable_steps, 0u);
    EXPECT_FALSE(tr.control.empty());
}

TEST(Metrics, ConstantTrace) {
    const auto tr = synthetic(std::vector<double>(100, 50.0), 49.0, 1e-3);
    const auto m = steady_state_metrics(tr, 0.5);
    EXPECT_DOUBLE_EQ(m.dc1.mean, 50.0);
    EXPECT_DOUBLE_EQ(m.dc1.ripple_pct, 0.0);
    EXPECT_NEAR(m.dc1.max_dev_pct, 100.0 / 49.0, 1e-12);
    EXPECT_NEAR(m.dc1.mean_err_pct, 100.0 / 49.0, 1e-12);
    EXPECT_TRUE(std::isnan(m.dc2.max_dev_pct));
}

TEST(Metrics, SinusoidRipple) {
    std::vector<double> v;
    const double a = 2.0, v0 = 100.0;
    for (int i = 0; i < 4000; ++i) v.push_back(v0 + a * std::sin(2.0 * M_PI * i / 400.0 + 0.3));
    const auto m = steady_state_metrics(synthetic(v, v0, 1e-4), 1.0);
    EXPECT_NEAR(m.dc1.ripple_pct, 100.0 * 2.0 * a / v0, 1e-3);
    EXPECT_NEAR(m.dc1.mean, v0, 1e-9);
    EXPECT_NEAR(m.dc1.max_dev_pct, 100.0 * a / v0, 1e-3);
}

TEST(Metrics, WindowAcrossStepThrows) {
    auto tr = synthetic(std::vector<double>(100, 50.0), 50.0, 1e-3);
    tr.segments.push_back({0.08, 60.0, 0.0});
    EXPECT_THROW(steady_state_metrics(tr, 0.5), DomainError);
    EXPECT_NO_THROW(steady_state_metrics(tr, 0.1));
    const auto segs = segment_metrics(tr, 0.5);
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[1].segment, 1u);
    EXPECT_THROW(steady_state_metrics(tr, 0.0), DomainError);
}

#include <gtest/gtest.h>

#include <cmath>

#include "bec4wm/analytic.hpp"
#include "bec4wm/constants.hpp"
#include "bec4wm/errors.hpp"
#include "bec4wm/groundstate.hpp"

using namespace bec4wm;

namespace {

const PhysicalParams he = PhysicalParams::helium_main();

// Undepleted-pump occupation written out directly from the sinh^2 form.
double occupation_oracle(double k, double t, double gbar, double k_r, double mass) {
    const double delta = 0.5 * hbar / mass * (k * k - k_r * k_r);
    const double s = gbar * gbar - delta * delta;
    if (s > 0.0) {
        const double r = std::sqrt(s);
        return gbar * gbar / s * std::pow(std::sinh(r * t), 2);
    }
    const double r = std::sqrt(-s);
    return gbar * gbar / -s * std::pow(std::sin(r * t), 2);
}

}  // namespace

TEST(Analytic, GaussianAnsatzWidths) {
    const auto w = gaussian_ansatz_widths(1.0);
    EXPECT_EQ(w.bb, std::sqrt(2.0));
    EXPECT_EQ(w.cl, 2.0);
    for (double s : {0.01, 0.3, 7.0}) {
        const auto v = gaussian_ansatz_widths(s);
        EXPECT_NEAR(v.bb / v.cl, 1.0 / std::sqrt(2.0), 1e-15);
    }
    // sigma_yz = 0.055 k_r overestimates the measured 0.069 k_r by about 60%
    EXPECT_NEAR(gaussian_ansatz_widths(0.055).cl / 0.069, 1.6, 0.02);
}

TEST(Analytic, SpontaneousHaloWidth) {
    const double kr = he.k_r();
    EXPECT_NEAR(halo_width_spontaneous(he.mass, kr, 25 * us) / kr / 0.075, 1.0, 0.01);
    EXPECT_NEAR(halo_width_spontaneous(he.mass, kr, 12.5 * us) / kr / 0.15, 1.0, 0.01);
    // relative width grows as 1/k_r^2 at fixed duration
    const double r = halo_width_spontaneous(he.mass, kr / std::sqrt(2.0), 25 * us) /
                     (kr / std::sqrt(2.0)) / (halo_width_spontaneous(he.mass, kr, 25 * us) / kr);
    EXPECT_NEAR(r, 2.0, 1e-12);
    EXPECT_THROW(halo_width_spontaneous(he.mass, kr, 0.0), ConfigError);
}

TEST(Analytic, StimulatedHaloWidth) {
    const double w = halo_width_stimulated(he.a00, 2.5e19, he.k_r());
    EXPECT_NEAR(w / 0.05, 1.0, 0.02);
    EXPECT_NEAR(halo_width_stimulated(he.a00, 1.25e19, he.k_r()) / w, 0.5, 1e-14);
}

TEST(Analytic, QuadratureWidth) {
    const double stim = halo_width_stimulated(he.a00, 2.5e19, he.k_r());
    EXPECT_NEAR(minimum_halo_width(0.055, stim) / 0.074, 1.0, 0.02);
    EXPECT_EQ(minimum_halo_width(0.0, 0.05), 0.05);
    EXPECT_EQ(minimum_halo_width(0.055), 0.055);
}

TEST(Analytic, ModeCountingMainExample) {
    const double kr = he.k_r();
    const auto m = mode_counting(0.0025 * kr, 0.055 * kr, kr, 0.10 * kr);
    EXPECT_NEAR(m.mode_number / 26400.0, 1.0, 0.05);
    EXPECT_NEAR(1750.0 / m.mode_number / 0.066, 1.0, 0.05);
    EXPECT_NEAR(bb_peak_estimate(m.mode_number, 1750.0) / 16.0, 1.0, 0.05);
    // dimensionless: only ratios to k_r matter
    const auto u = mode_counting(0.0025, 0.055, 1.0, 0.10);
    EXPECT_NEAR(u.mode_number / m.mode_number, 1.0, 1e-12);
    EXPECT_NEAR(bb_peak_estimate(m.mode_number, 1e12), 1.0, 1e-7);
    EXPECT_THROW(mode_counting(0.0, 1.0, 1.0, 1.0), ConfigError);
}

TEST(Analytic, PumpCouplingRate) {
    const auto pump = UniformPumpParams::from(he, 2.5e19);
    const double gbar = 2.0 * 4.0 * pi * hbar * he.a00 / he.mass * 2.5e19;
    EXPECT_NEAR(pump.gbar / gbar, 1.0, 1e-12);
    EXPECT_NEAR(pump.gbar / 5.3e4, 1.0, 0.01);
    EXPECT_EQ(pump.detuning(pump.k_r), 0.0);
}

TEST(Analytic, PumpOccupationMatchesClosedForm) {
    const auto pump = UniformPumpParams::from(he, 2.5e19);
    const double kr = pump.k_r;
    for (double t : {0.3 / pump.gbar, 1.0 / pump.gbar, 7.0 / pump.gbar})
        for (double x : {0.5, 0.9, 0.99, 1.0, 1.01, 1.05, 1.2, 1.5}) {
            const double ref = occupation_oracle(x * kr, t, pump.gbar, kr, pump.mass);
            EXPECT_NEAR(pump_occupation(x * kr, t, pump), ref, 1e-10 * (1.0 + ref));
        }
    EXPECT_EQ(pump_occupation(1.1 * kr, 0.0, pump), 0.0);
    EXPECT_NEAR(pump_occupation(kr, 2.0 / pump.gbar, pump), std::pow(std::sinh(2.0), 2), 1e-10);
}

TEST(Analytic, PumpOccupationContinuousAtThreshold) {
    const auto pump = UniformPumpParams::from(he, 2.5e19);
    // |Delta_k| = gbar at k^2 = k_r^2 + 2 m gbar / hbar
    const double kc = std::sqrt(pump.k_r * pump.k_r + 2.0 * pump.mass * pump.gbar / hbar);
    const double t = 3.0 / pump.gbar;
    const double at = pump_occupation(kc, t, pump);
    EXPECT_NEAR(at, std::pow(pump.gbar * t, 2), 1e-8 * at);
    for (double eps : {1e-7, 1e-9}) {
        EXPECT_NEAR(pump_occupation(kc * (1 + eps), t, pump) / at, 1.0, 1e-5);
        EXPECT_NEAR(pump_occupation(kc * (1 - eps), t, pump) / at, 1.0, 1e-5);
    }
}

TEST(Analytic, PumpGrowthAndBoundedOscillation) {
    const auto pump = UniformPumpParams::from(he, 2.5e19);
    const double kin = 1.002 * pump.k_r;  // |Delta| < gbar
    const double kout = 1.2 * pump.k_r;   // |Delta| > gbar
    const double d = pump.detuning(kout);
    const double bound = pump.gbar * pump.gbar / (d * d - pump.gbar * pump.gbar);
    double prev = 0.0;
    for (int i = 1; i <= 50; ++i) {
        const double t = 0.2 * i / pump.gbar;
        const double n = pump_occupation(kin, t, pump);
        EXPECT_GT(n, prev);
        prev = n;
        EXPECT_LE(pump_occupation(kout, t, pump), bound * (1.0 + 1e-12));
    }
}

// Half width found by scanning the closed form on a fine grid.
TEST(Analytic, PumpHaloWidthAgainstScan) {
    const auto pump = UniformPumpParams::from(he, 2.5e19);
    const double kr = pump.k_r;
    for (double gt : {1.0, 7.0}) {
        const double t = gt / pump.gbar;
        const auto w = pump_halo_width(t, pump);
        EXPECT_NEAR(w.k_peak / kr, 1.0, 1e-6);
        const double peak = occupation_oracle(kr, t, pump.gbar, kr, pump.mass);
        double k = kr;
        const double step = 1e-6 * kr;
        while (occupation_oracle(k, t, pump.gbar, kr, pump.mass) > 0.5 * peak) k += step;
        EXPECT_NEAR((k - kr) / kr, w.hwhm / kr, 2e-6);
        EXPECT_NEAR(w.rms_equivalent, w.hwhm / std::sqrt(2.0 * std::log(2.0)), 1e-12 * w.hwhm);
        EXPECT_NEAR(w.half_span, 0.5 * w.hwhm, 1e-12 * w.hwhm);
    }
    // the halo narrows as it grows
    EXPECT_LT(pump_halo_width(7.0 / pump.gbar, pump).hwhm, pump_halo_width(1.0 / pump.gbar, pump).hwhm);
}

// The rms-equivalent widths follow the quoted range within 10%.
TEST(Analytic, PumpHaloWidthRange) {
    const auto pump = UniformPumpParams::from(he, 2.5e19);
    EXPECT_NEAR(pump_halo_width(1.0 / pump.gbar, pump).rms_equivalent / pump.k_r / 0.12, 1.0, 0.10);
    EXPECT_NEAR(pump_halo_width(7.0 / pump.gbar, pump).rms_equivalent / pump.k_r / 0.027, 1.0, 0.10);
}

TEST(Analytic, CollisionModelBasics) {
    const auto c = CollisionModelParams::from(he);
    EXPECT_EQ(collision_duration_model(c, 0.0), 0.0);
    std::vector<double> times;
    for (int i = 1; i <= 40; ++i) times.push_back(10e-6 * i);
    const auto n = collision_duration_model(c, times);
    for (std::size_t i = 1; i < n.size(); ++i) EXPECT_GE(n[i], n[i - 1]);
    const double total = collision_duration_total(c);
    EXPECT_LE(n.back(), total * (1 + 1e-9));
    EXPECT_NEAR(collision_duration_model(c, 1.0 / c.trap_omega[1]) / total, 0.66, 0.066);
    EXPECT_THROW(collision_duration_model(c, std::vector<double>{2e-6, 1e-6}), ConfigError);
}

// Without expansion the total is sigma0 sum over columns of n1 n2 with
// half-clouds n = rho0/2 each: sigma0 pi rho0^2 Rx^2 Ry Rz / 9.
TEST(Analytic, CollisionModelFrozenCloudOracle) {
    CollisionModelParams c{};
    c.trap_omega = {1e-3, 1e-3, 1e-3};
    c.radius = {20e-6, 4e-6, 5e-6};
    c.peak_density = 2e19;
    c.sigma0 = 8.0 * pi * std::pow(5.3 * nm, 2);
    c.v_r = 0.1;
    c.atom_number = 8.0 * pi / 15.0 * c.peak_density * c.radius[0] * c.radius[1] * c.radius[2];
    const double expected = c.sigma0 * pi * c.peak_density * c.peak_density * c.radius[0] *
                            c.radius[0] * c.radius[1] * c.radius[2] / 9.0;
    EXPECT_NEAR(collision_duration_total(c) / expected, 1.0, 1e-5);
    // the half-clouds separate completely at t = R_x / v_r
    EXPECT_NEAR(collision_duration_model(c, c.radius[0] / c.v_r) / expected, 1.0, 1e-5);
}

TEST(Analytic, MaxSimTime) {
    const double dV = 1e-18;
    const double t = max_sim_time(he.mass, he.a00, 2.5e19, dV);
    EXPECT_NEAR(t, 2.5 * 1e-6 / (he.U0_outcoupled() * std::pow(2.5e19, 2.0 / 3.0)), 1e-12 * t);
    EXPECT_NEAR(max_sim_time(he.mass, he.a00, 2.5e19, 8.0 * dV) / t, 2.0, 1e-12);
}

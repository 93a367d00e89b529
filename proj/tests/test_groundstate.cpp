#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "bec4wm/constants.hpp"
#include "bec4wm/errors.hpp"
#include "bec4wm/groundstate.hpp"

using namespace bec4wm;

namespace {

PhysicalParams ideal_gas(double omega, double atoms) {
    PhysicalParams p;
    p.a11 = 0.0;
    p.trap_omega = {omega, omega, omega};
    p.peak_density.reset();
    p.atom_number = atoms;
    return p;
}

}  // namespace

// Without interactions the ground state is the harmonic-oscillator Gaussian.
TEST(GroundState, IdealGasIsOscillatorGaussian) {
    const double w = 2.0 * pi * 1000.0;
    const auto p = ideal_gas(w, 1000.0);
    const double a = std::sqrt(hbar / (p.mass * w));
    const Lattice3D lat({32, 32, 32}, {12 * a, 12 * a, 12 * a});
    GroundStateOptions o;
    o.residual_tolerance = 1e-4;
    const auto gs = solve_ground_state(p, lat, o);

    EXPECT_NEAR(gs.atom_number, 1000.0, 1e-6);
    EXPECT_NEAR(gs.mu / (1.5 * hbar * w), 1.0, 1e-4);
    const double peak = 1000.0 / std::pow(pi * a * a, 1.5);
    EXPECT_NEAR(gs.peak_density / peak, 1.0, 2e-3);
    // |FT sqrt(rho)|^2 ~ exp(-k^2 a^2)
    EXPECT_NEAR(gs.sigma_x * a * std::sqrt(2.0), 1.0, 0.01);
    EXPECT_NEAR(gs.sigma_yz * a * std::sqrt(2.0), 1.0, 0.01);
}

TEST(GroundState, ThomasFermiRoundTrip) {
    PhysicalParams p;
    const auto a = thomas_fermi_from_peak(p, 2.5e19);
    const auto b = thomas_fermi_from_number(p, a.atom_number);
    EXPECT_NEAR(b.peak_density / 2.5e19, 1.0, 1e-10);
    EXPECT_NEAR(b.mu / a.mu, 1.0, 1e-10);
    // mu = g rho0 and m omega_i^2 R_i^2 / 2 = mu
    EXPECT_NEAR(a.mu / (hbar * p.U0_trapped() * 2.5e19), 1.0, 1e-12);
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(0.5 * p.mass * std::pow(p.trap_omega[i] * a.radius[i], 2) / a.mu, 1.0, 1e-12);
    // N = (8 pi / 15) rho0 R_x R_y R_z
    EXPECT_NEAR(a.atom_number / (8.0 * pi / 15.0 * 2.5e19 * a.radius[0] * a.radius[1] * a.radius[2]),
                1.0, 1e-12);
}

// Strongly interacting cloud: the GPE result approaches Thomas-Fermi from below
// in N at fixed peak density (kinetic energy rounds the edges).
TEST(GroundState, InteractingCloudNearThomasFermi) {
    PhysicalParams p;
    p.trap_omega = {2.0 * pi * 400.0, 2.0 * pi * 1000.0, 2.0 * pi * 1000.0};
    const auto tf = thomas_fermi_from_peak(p, 2.5e19);
    const Lattice3D lat({64, 32, 32}, {3.0 * tf.radius[0], 3.4 * tf.radius[1], 3.4 * tf.radius[2]});
    GroundStateOptions o;
    o.boundary_margin = 1;
    const auto gs = solve_ground_state(p, lat, o);
    EXPECT_NEAR(gs.peak_density / 2.5e19, 1.0, 1e-3);
    EXPECT_LT(gs.atom_number, tf.atom_number);
    EXPECT_GT(gs.atom_number, 0.85 * tf.atom_number);
    EXPECT_NEAR(gs.mu / tf.mu, 1.0, 0.08);
    EXPECT_LT(gs.residual, o.residual_tolerance);
    // narrower momentum distribution along the weak axis
    EXPECT_LT(gs.sigma_x, gs.sigma_yz);
}

TEST(GroundState, BoxTooSmallIsConfigError) {
    PhysicalParams p;
    p.trap_omega = {2.0 * pi * 400.0, 2.0 * pi * 1000.0, 2.0 * pi * 1000.0};
    const auto tf = thomas_fermi_from_peak(p, 2.5e19);
    const Lattice3D lat({32, 16, 16}, {1.5 * tf.radius[0], 1.5 * tf.radius[1], 1.5 * tf.radius[2]});
    EXPECT_THROW(solve_ground_state(p, lat), ConfigError);
}

TEST(GroundState, SaveLoadRoundTrip) {
    const double w = 2.0 * pi * 1000.0;
    const auto p = ideal_gas(w, 50.0);
    const double a = std::sqrt(hbar / (p.mass * w));
    const Lattice3D lat({16, 16, 16}, {16 * a, 16 * a, 16 * a});
    const auto gs = solve_ground_state(p, lat);
    const auto path = std::filesystem::temp_directory_path() / "bec4wm_gs_roundtrip.bin";
    save_ground_state(gs, path);
    const auto back = load_ground_state(path);
    EXPECT_TRUE(back.lattice == gs.lattice);
    EXPECT_EQ(back.density, gs.density);
    EXPECT_EQ(back.mu, gs.mu);
    EXPECT_EQ(back.sigma_x, gs.sigma_x);
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");
}

TEST(GroundState, RejectsInconsistentInputs) {
    PhysicalParams p;
    p.atom_number = 1e4;  // both N and rho0 set
    EXPECT_THROW(p.validate(), ConfigError);
    PhysicalParams q;
    q.trap_omega[1] = -1.0;
    EXPECT_THROW(q.validate(), ConfigError);
}

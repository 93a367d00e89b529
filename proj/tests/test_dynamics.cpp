#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <set>

#include "bec4wm/checkpoint.hpp"
#include "bec4wm/constants.hpp"
#include "bec4wm/dynamics.hpp"
#include "bec4wm/ensemble.hpp"
#include "bec4wm/errors.hpp"

using namespace bec4wm;

namespace {

// Small Gaussian "ground state" so the dynamics tests stay fast.
GroundState gaussian_source(const Lattice3D& lat, double rho0, std::array<double, 3> w) {
    GroundState gs(lat);
    gs.density.resize(lat.size());
    gs.amplitude.resize(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const auto c = lat.unravel(i);
        double e = 0.0;
        for (int a = 0; a < 3; ++a) e += std::pow(lat.x_at(a, c[a]) / w[a], 2);
        gs.density[i] = rho0 * std::exp(-e);
        gs.amplitude[i] = std::sqrt(gs.density[i]);
    }
    gs.peak_density = rho0;
    return gs;
}

struct SmallCollision {
    Lattice3D lat{{32, 8, 8}, {20e-6, 5e-6, 5e-6}};
    PhysicalParams p;
    SimConfig cfg;
    FieldPair init;

    SmallCollision() {
        p.v_r = 0.092 * 0.25;  // k_r inside the small grid
        const auto gs = gaussian_source(lat, 2.5e19, {5e-6, 1.2e-6, 1.2e-6});
        init = initialize_collision(gs, p);
        cfg.params = p;
        cfg.points = lat.points();
        cfg.lengths = lat.lengths();
        cfg.t_final = 4e-6;
        cfg.n_steps = 32;
        cfg.n_trajectories = 16;
        cfg.block_size = 4;
        cfg.sample_times = {0.0, 2e-6, 4e-6};
    }
};

double number(const TrajectorySample& s) {
    double n = 0.0;
    for (std::size_t i = 0; i < s.a.size(); ++i) n += (s.a_tilde[i] * s.a[i]).real();
    return n;
}

// Independent reference: GPE in momentum space by classical RK4 with a much
// smaller step, nonlinearity evaluated through the FFT.
CVector gpe_rk4(const Lattice3D& lat, CVector psi, double mass, double U0, double t, int steps) {
    const SpectralTransform fft(lat);
    const auto kg = momentum_grid(lat);
    const double dt = t / steps;
    auto rhs = [&](const CVector& y) {
        ComplexField f(lat, Space::position);
        f.values = y;
        auto k = fft.to_momentum(f);
        for (std::size_t i = 0; i < lat.size(); ++i) {
            const double k2 = kg[i][0] * kg[i][0] + kg[i][1] * kg[i][1] + kg[i][2] * kg[i][2];
            k.values[i] *= cplx(0.0, -hbar * k2 / (2.0 * mass));
        }
        CVector out = fft.to_position(k).values;
        for (std::size_t i = 0; i < lat.size(); ++i)
            out[i] += cplx(0.0, -U0) * std::norm(y[i]) * y[i];
        return out;
    };
    for (int s = 0; s < steps; ++s) {
        auto k1 = rhs(psi);
        CVector y = psi;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = psi[i] + 0.5 * dt * k1[i];
        auto k2 = rhs(y);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = psi[i] + 0.5 * dt * k2[i];
        auto k3 = rhs(y);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = psi[i] + dt * k3[i];
        auto k4 = rhs(y);
        for (std::size_t i = 0; i < y.size(); ++i)
            psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return psi;
}

}  // namespace

TEST(Dynamics, TrajectorySeedsDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t id = 0; id < 1000; ++id) seen.insert(trajectory_seed(1, id));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_NE(trajectory_seed(1, 0), trajectory_seed(2, 0));
}

TEST(Dynamics, CollisionInitialState) {
    SmallCollision sc;
    const SpectralTransform fft(sc.lat);
    const auto a = fft.to_momentum(sc.init.psi);
    // Two peaks at +-k with half the atoms each.
    const int slot = sc.lat.nearest_k_slot(0, sc.p.k_r());
    double plus = 0.0, minus = 0.0, total = 0.0;
    const int mslot = sc.lat.storage_index(0, -sc.lat.signed_index(0, slot));
    for (std::size_t i = 0; i < sc.lat.size(); ++i) {
        const auto c = sc.lat.unravel(i);
        const double n = std::norm(a.values[i]);
        total += n;
        if (std::abs(c[0] - slot) <= 3) plus += n;
        if (std::abs(c[0] - mslot) <= 3) minus += n;
    }
    EXPECT_NEAR(plus / total, 0.5, 0.01);
    EXPECT_NEAR(minus / total, 0.5, 0.01);
    for (std::size_t i = 0; i < sc.lat.size(); ++i)
        EXPECT_EQ(sc.init.psi_tilde.values[i], std::conj(sc.init.psi.values[i]));
}

// Plane wave without noise: only a global phase exp(-i (hbar k^2/2m + U0 rho) t).
TEST(Dynamics, NoiseOffPlaneWavePhase) {
    const Lattice3D lat({16, 4, 4}, {10e-6, 4e-6, 4e-6});
    const SpectralTransform fft(lat);
    const double rho = 1e19, mass = helium4_mass, U0 = contact_coupling(5.3e-9, mass);
    const double k = 3 * lat.dk(0), t = 5e-6;
    FieldPair f{ComplexField(lat, Space::position), ComplexField(lat, Space::position)};
    for (std::size_t i = 0; i < lat.size(); ++i) {
        f.psi.values[i] = std::sqrt(rho) * std::polar(1.0, k * lat.x_at(0, lat.unravel(i)[0]));
        f.psi_tilde.values[i] = std::conj(f.psi.values[i]);
    }
    SimConfig cfg;
    cfg.params.mass = mass;
    cfg.points = lat.points();
    cfg.lengths = lat.lengths();
    cfg.t_final = t;
    cfg.n_steps = 40;
    cfg.noise = false;
    cfg.U0 = U0;
    cfg.sample_times = {0.0, t};
    const auto rec = run_trajectory(f, cfg, 0, fft);
    ASSERT_TRUE(rec.valid);
    const std::size_t bin = lat.index(3, 0, 0);
    const cplx a0 = rec.samples[0].a[bin], a1 = rec.samples[1].a[bin];
    EXPECT_NEAR(std::norm(a0), rho * lat.box_volume(), 1e-10 * rho * lat.box_volume());
    const double phase = -(hbar * k * k / (2.0 * mass) + U0 * rho) * t;
    const cplx expect = a0 * std::polar(1.0, phase);
    EXPECT_LT(std::abs(a1 - expect) / std::abs(expect), 1e-10);
    EXPECT_LT(std::abs(rec.samples[1].a_tilde[bin] - std::conj(expect)) / std::abs(expect), 1e-10);
}

TEST(Dynamics, NoiseOffConservesNumber) {
    SmallCollision sc;
    sc.cfg.noise = false;
    sc.cfg.n_steps = 100;
    sc.cfg.sample_times = {0.0, sc.cfg.t_final};
    const SpectralTransform fft(sc.lat);
    const auto rec = run_trajectory(sc.init, sc.cfg, 0, fft);
    ASSERT_TRUE(rec.valid);
    const double n0 = number(rec.samples[0]), n1 = number(rec.samples[1]);
    EXPECT_LT(std::abs(n1 - n0) / n0, 1e-8);
}

// Noise-off split-step against an RK4 reference at 16x the step count.
TEST(Dynamics, NoiseOffMatchesIndependentGpe) {
    const Lattice3D lat({16, 8, 8}, {8e-6, 4e-6, 4e-6});
    const SpectralTransform fft(lat);
    PhysicalParams p;
    p.v_r = 0.092 * 0.15;
    const auto gs = gaussian_source(lat, 5e19, {1.5e-6, 0.8e-6, 0.8e-6});
    const auto init = initialize_collision(gs, p);
    const double U0 = p.U0_outcoupled(), t = 2e-6;

    SimConfig cfg;
    cfg.params = p;
    cfg.points = lat.points();
    cfg.lengths = lat.lengths();
    cfg.t_final = t;
    cfg.noise = false;
    auto run_with = [&](int steps) {
        cfg.n_steps = steps;
        return run_trajectory(init, cfg, 0, fft).samples.back().a;
    };
    ComplexField ref(lat, Space::position);
    ref.values = gpe_rk4(lat, init.psi.values, p.mass, U0, t, 2048);
    const auto ak = fft.to_momentum(ref).values;
    auto err = [&](const CVector& a) {
        double e = 0.0, n = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            e += std::norm(a[i] - ak[i]);
            n += std::norm(ak[i]);
        }
        return std::sqrt(e / n);
    };
    const double e1 = err(run_with(64)), e2 = err(run_with(128));
    EXPECT_LT(e2, 1e-4);
    // second-order splitting
    EXPECT_NEAR(e1 / e2, 4.0, 0.6);
}

// Single-mode Kerr: <a(t)> = alpha exp(|alpha|^2 (e^{-i chi t} - 1)), chi = U0 / V.
TEST(Dynamics, KerrModeMatchesExactAmplitude) {
    const Lattice3D lat = Lattice3D::few_mode({1, 1, 1}, {1e-6, 1e-6, 1e-6});
    const SpectralTransform fft(lat);
    const double V = lat.box_volume();
    const cplx alpha = 2.0;
    const double chi = 1.0e4, U0 = chi * V, t = 0.5 / chi;
    FieldPair f{ComplexField(lat, Space::position), ComplexField(lat, Space::position)};
    f.psi.values[0] = alpha / std::sqrt(V);
    f.psi_tilde.values[0] = std::conj(f.psi.values[0]);
    SimConfig cfg;
    cfg.params.peak_density.reset();
    cfg.params.atom_number = std::norm(alpha);
    cfg.points = lat.points();
    cfg.lengths = lat.lengths();
    cfg.t_final = t;
    cfg.n_steps = 200;
    cfg.U0 = U0;
    const int T = 20000;
    cplx sum = 0.0;
    double sq = 0.0, nsum = 0.0, nsq = 0.0;
    int used = 0;
    for (int id = 0; id < T; ++id) {
        const auto rec = run_trajectory(f, cfg, id, fft);
        if (!rec.valid) continue;
        const cplx a = rec.samples.back().a[0];
        const double n = (rec.samples.back().a_tilde[0] * a).real();
        sum += a;
        sq += std::norm(a);
        nsum += n;
        nsq += n * n;
        ++used;
    }
    ASSERT_GT(used, T * 99 / 100);
    const cplx mean = sum / double(used);
    const double se = std::sqrt((sq / used - std::norm(mean)) / used);
    const cplx exact = alpha * std::exp(std::norm(alpha) * (std::polar(1.0, -chi * t) - 1.0));
    EXPECT_LT(std::abs(mean - exact), 4.0 * se) << mean << " vs " << exact << " se " << se;
    const double nm = nsum / used, nse = std::sqrt((nsq / used - nm * nm) / used);
    EXPECT_LT(std::abs(nm - std::norm(alpha)), 4.0 * nse);
}

TEST(Dynamics, TrajectoryIsDeterministic) {
    SmallCollision sc;
    const SpectralTransform fft(sc.lat);
    const auto a = run_trajectory(sc.init, sc.cfg, 5, fft);
    const auto b = run_trajectory(sc.init, sc.cfg, 5, fft);
    const auto c = run_trajectory(sc.init, sc.cfg, 6, fft);
    ASSERT_EQ(a.samples.size(), 3u);
    EXPECT_TRUE(a.samples.back().a == b.samples.back().a);
    EXPECT_FALSE(a.samples.back().a == c.samples.back().a);
}

// A run with refinement 2 sees the Brownian path of the run with half the step.
TEST(Dynamics, NoiseRefinementSharesBrownianPath) {
    SmallCollision sc;
    sc.cfg.sample_times = {sc.cfg.t_final};
    const SpectralTransform fft(sc.lat);
    auto diff = [&](int steps) {
        SimConfig coarse = sc.cfg, fine = sc.cfg;
        coarse.n_steps = steps;
        coarse.noise_refinement = 2;
        fine.n_steps = 2 * steps;
        const auto a = run_trajectory(sc.init, coarse, 3, fft).samples.back().a;
        const auto b = run_trajectory(sc.init, fine, 3, fft).samples.back().a;
        SimConfig other = fine;
        other.base_seed = 99;
        const auto c = run_trajectory(sc.init, other, 3, fft).samples.back().a;
        double dab = 0.0, dbc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dab += std::norm(a[i] - b[i]);
            dbc += std::norm(b[i] - c[i]);
        }
        return std::pair{std::sqrt(dab), std::sqrt(dbc)};
    };
    const auto [d16, other16] = diff(16);
    const auto [d32, other32] = diff(32);
    EXPECT_LT(d16, 0.2 * other16);
    EXPECT_LT(d32, d16);
}

TEST(Dynamics, EnsembleIndependentOfWorkerCount) {
    SmallCollision sc;
    AnalysisSpec spec;
    spec.k_r = sc.p.k_r();
    spec.max_lag = {2, 1, 1};
    sc.cfg.workers = 1;
    const auto one = simulate_ensemble(sc.cfg, sc.init, spec);
    sc.cfg.workers = 4;
    const auto four = simulate_ensemble(sc.cfg, sc.init, spec);
    EXPECT_EQ(serialize_moments(one), serialize_moments(four));
    EXPECT_EQ(one.n_valid, 16u);
}

TEST(Dynamics, DivergenceGuardMarksTrajectoryInvalid) {
    SmallCollision sc;
    sc.cfg.divergence_factor = 1e-3;  // trips at once
    const SpectralTransform fft(sc.lat);
    const auto rec = run_trajectory(sc.init, sc.cfg, 0, fft);
    EXPECT_FALSE(rec.valid);
    EXPECT_GE(rec.failed_step, 0);
}

TEST(Dynamics, SampleTimesMustFallOnSteps) {
    SimConfig cfg;
    cfg.t_final = 1e-6;
    cfg.n_steps = 10;
    cfg.sample_times = {0.35e-6};
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.sample_times = {0.3e-6, 1e-6};
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Dynamics, MaxSimTimeScaling) {
    PhysicalParams p;
    const Lattice3D lat({64, 8, 8}, {64e-6, 8e-6, 8e-6});
    const double t = max_sim_time(p, lat);
    // 2.5 dV^{1/3} / (U0 rho0^{2/3})
    const double expect = 2.5 * std::cbrt(lat.cell_volume()) /
                          (p.U0_outcoupled() * std::pow(2.5e19, 2.0 / 3.0));
    EXPECT_NEAR(t / expect, 1.0, 1e-12);
    EXPECT_GT(max_sim_time(p, lat, false), max_sim_time(p, lat, true));
}

TEST(Dynamics, ResumeFromCheckpointIsIdentical) {
    SmallCollision sc;
    AnalysisSpec spec;
    spec.k_r = sc.p.k_r();
    spec.max_lag = {2, 1, 1};
    const auto dir = std::filesystem::temp_directory_path() / "bec4wm_resume_test";
    std::filesystem::remove_all(dir);
    EnsembleOptions opt;
    opt.checkpoint_dir = dir;
    opt.config_hash = "abc";
    const auto first = simulate_ensemble(sc.cfg, sc.init, spec, opt);
    std::size_t calls = 0;
    opt.progress = [&](std::size_t, std::size_t) { ++calls; };
    const auto again = simulate_ensemble(sc.cfg, sc.init, spec, opt);
    EXPECT_EQ(serialize_moments(first), serialize_moments(again));
    opt.config_hash = "other";
    EXPECT_THROW(simulate_ensemble(sc.cfg, sc.init, spec, opt), ConfigError);
    std::filesystem::remove_all(dir);
}

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "bec4wm/groundstate.hpp"
#include "bec4wm/lattice.hpp"
#include "bec4wm/params.hpp"

namespace bec4wm {

/// One positive-P trajectory: the fields psi and psi~ on the same lattice.
struct FieldPair {
    ComplexField psi;
    ComplexField psi_tilde;
    double time = 0.0;
    std::uint64_t trajectory_id = 0;
    std::uint64_t rng_seed = 0;
};

struct SimConfig {
    PhysicalParams params;
    std::array<int, 3> points{256, 32, 32};
    std::array<double, 3> lengths{};
    double t_final = 25e-6;
    int n_steps = 128;
    int n_trajectories = 2;
    std::uint64_t base_seed = 1;
    /// Coupling of the simulated (outcoupled) species, m^3/s. <= 0: from a00.
    double U0 = 0.0;
    /// A trajectory is invalid once |psi|^2 or |psi~|^2 exceeds this times rho0.
    double divergence_factor = 1e6;
    bool noise = true;
    /// Each noise increment is the normalised sum of this many Gaussian draws;
    /// a run with dt and refinement 2 sees the same Brownian path as a run
    /// with dt/2 and refinement 1 and the same seed.
    int noise_refinement = 1;
    /// Times (s) at which momentum-space fields are recorded; each must fall
    /// on a step boundary. Empty means {t_final}.
    std::vector<double> sample_times;
    /// Trajectories per reduction block (fixes the summation order).
    int block_size = 8;
    /// Worker threads; <= 0 uses BECSIM_WORKERS or the hardware count.
    int workers = 0;

    double dt() const { return t_final / n_steps; }
    double coupling() const { return U0 > 0.0 ? U0 : params.U0_outcoupled(); }
    Lattice3D lattice() const { return Lattice3D(points, lengths); }
    /// Step indices of sample_times (validated).
    std::vector<int> sample_steps() const;
    void validate() const;
};

/// Per-trajectory random stream: mt19937_64 seeded with
/// splitmix64(base_seed + golden * (id + 1)), golden = 0x9E3779B97F4A7C15.
std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t trajectory_id);

struct TrajectoryRng {
    explicit TrajectoryRng(std::uint64_t seed) : engine(seed) {}
    std::mt19937_64 engine;
    std::normal_distribution<double> normal{0.0, 1.0};
};

/// psi(x, 0) = sqrt(rho0 / 2) (e^{i k x} + e^{-i k x}), psi~ = conj(psi), where
/// k is the x-grid wavevector closest to k_r. Throws ConfigError if k_r is
/// beyond the x cutoff.
FieldPair initialize_collision(const GroundState& gs, const PhysicalParams& params);

/// Split-step integrator for the positive-P equations
///   d psi  = [ (i hbar/2m) lap psi  - i U0 psi~ psi psi ] dt + sqrt(-i U0 psi^2)  dW1
///   d psi~ = [-(i hbar/2m) lap psi~ + i U0 psi psi~ psi~] dt + sqrt( i U0 psi~^2) dW2
/// with <dW dW> = dt / dV per site. Each step is K(dt/2) N(dt) K(dt/2): the
/// kinetic factor is exact in momentum space, the nonlinear phase exp(-+i U0 psi~ psi dt)
/// is exact, and the noise is an Ito Euler-Maruyama increment built from the
/// pre-step fields. Noise order per step: dW1 at every site, then dW2.
class Stepper {
public:
    Stepper(const SpectralTransform& fft, double mass, double U0, double dt, bool noise,
            int noise_refinement, double guard_density);

    const Lattice3D& lattice() const { return fft_.lattice(); }
    double dt() const { return dt_; }

    /// One full step on position-space fields; false if the guard tripped.
    bool step(FieldPair& f, TrajectoryRng& rng);

    // Building blocks used by run_trajectory to merge adjacent kinetic half steps.
    void to_momentum_raw(FieldPair& f);
    void to_position_raw(FieldPair& f);
    /// Kinetic evolution by fraction*dt on raw momentum-space fields.
    void kinetic(FieldPair& f, double fraction);
    bool nonlinear_noise(FieldPair& f, TrajectoryRng& rng);

private:
    const SpectralTransform& fft_;
    double U0_, dt_;
    bool noise_;
    int refinement_;
    double guard_;
    std::vector<double> k2_;  // |k|^2 per bin
    CVector half_, full_;      // exp(-i hbar k^2 dt / 4m), its square
    std::vector<double> w1_, w2_;
};

/// Momentum-space snapshot of one trajectory at one sample time.
struct TrajectorySample {
    double time = 0.0;
    /// a(k) = sqrt(dV/N) FFT[psi](k)
    CVector a;
    /// a~(k): the amplitude multiplying a(k) in normally ordered products,
    /// sqrt(dV/N) FFT[psi~](-k).
    CVector a_tilde;
};

struct TrajectoryRecord {
    std::uint64_t trajectory_id = 0;
    bool valid = true;
    int failed_step = -1;
    std::vector<TrajectorySample> samples;
};

/// Integrates one trajectory from `init` (psi~ and psi taken as given) with
/// the stream trajectory_seed(config.base_seed, id).
TrajectoryRecord run_trajectory(const FieldPair& init, const SimConfig& config,
                                std::uint64_t trajectory_id, const SpectralTransform& fft);

/// Estimated upper bound on useful simulation time for the lattice,
/// 2.5 dV^{1/3} m / (4 pi hbar a rho0^{2/3}); uses a00 unless use_a11.
double max_sim_time(const PhysicalParams& params, const Lattice3D& lattice, bool use_a11 = false);

/// Number of worker threads: explicit > 0, else BECSIM_WORKERS, else hardware.
int resolve_workers(int requested);

}  // namespace bec4wm

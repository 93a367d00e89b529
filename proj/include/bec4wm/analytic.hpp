#pragma once

#include <array>
#include <vector>

#include "bec4wm/params.hpp"

namespace bec4wm {

struct CorrelationWidths {
    double bb;
    double cl;
};

/// Gaussian pair-wavefunction ansatz: sigma_BB = sqrt(2) sigma, sigma_CL = 2 sigma.
CorrelationWidths gaussian_ansatz_widths(double sigma);

/// Energy-time broadening of a spontaneously scattered halo, m / (hbar k_r dt),
/// in 1/m. Throws ConfigError for dt <= 0.
double halo_width_spontaneous(double mass, double k_r, double dt);

/// Bose-stimulated halo width in units of k_r: 4 pi a00 rho0 / k_r^2.
double halo_width_stimulated(double a00, double rho0, double k_r);

/// Quadrature sum sqrt(dk_stim^2 + sigma^2); sigma is also the lower bound
/// any halo width along that axis can reach.
double minimum_halo_width(double sigma, double dk_stim = 0.0);

struct UniformPumpParams {
    double gbar;  ///< 2 U0 rho0, 1/s
    double k_r;
    double mass;

    /// gbar from the outcoupled coupling (a00) and the peak density.
    static UniformPumpParams from(const PhysicalParams& p, double rho0);
    /// Resonance offset Delta_k = (hbar / 2m)(k^2 - k_r^2), 1/s.
    double detuning(double k) const;
};

/// Undepleted-pump occupation of mode k after time t. The sinh^2 branch
/// continues into sin^2 for |Delta_k| > gbar; the removable singularity at
/// |Delta_k| = gbar is evaluated through its series.
double pump_occupation(double k, double t, const UniformPumpParams& pump);

struct PumpHaloWidth {
    double k_peak;      ///< location of the maximum (1/m)
    double hwhm;        ///< outer half width at half maximum about k_peak (1/m)
    double rms_equivalent;  ///< hwhm / sqrt(2 ln 2): Gaussian rms width with that HWHM
    double half_span;   ///< hwhm / 2
};

/// Width of n_k(t) across the resonance, found by root bracketing on the
/// outer flank k > k_peak.
PumpHaloWidth pump_halo_width(double t, const UniformPumpParams& pump);

struct CollisionModelParams {
    std::array<double, 3> trap_omega;   ///< rad/s
    std::array<double, 3> radius;       ///< initial Thomas-Fermi radii, m
    double peak_density;                ///< of the initial trapped cloud, 1/m^3
    double sigma0;                      ///< 8 pi a00^2, m^2
    double v_r;                         ///< speed of each cloud, m/s
    double atom_number;

    /// Thomas-Fermi cloud for the given trap and peak density (a11 sets the size).
    static CollisionModelParams from(const PhysicalParams& p);
};

/// Classical rate-equation estimate of the scattered number: two halves of
/// the Thomas-Fermi cloud, each evolving under the free-expansion scaling
/// equations, move apart at +-v_r while scattering at rate 2 sigma0 v_r rho1 rho2.
/// Returns N_sc at each requested time (times must be ascending and >= 0).
std::vector<double> collision_duration_model(const CollisionModelParams& params,
                                             const std::vector<double>& times);
double collision_duration_model(const CollisionModelParams& params, double t);
/// N_sc once the clouds no longer overlap.
double collision_duration_total(const CollisionModelParams& params);

struct ModeCount {
    double shell_volume;  ///< 4 pi sqrt(2 pi) k_r^2 dk
    double mode_volume;   ///< beta sigma_x sigma_yz^2
    double mode_number;
};

inline constexpr double gaussian_mode_beta = 15.749609945722419;  // (2 pi)^{3/2}

ModeCount mode_counting(double sigma_x, double sigma_yz, double k_r, double dk,
                        double beta = gaussian_mode_beta);

/// Back-to-back peak height 1 + N_m / N_sc.
double bb_peak_estimate(double mode_number, double scattered);

/// Eq.-(1)-type upper bound on useful positive-P simulation time:
/// 2.5 dV^{1/3} / (U0 rho0^{2/3}) with U0 from the chosen scattering length.
double max_sim_time(double mass, double scattering_length, double rho0, double cell_volume);

}  // namespace bec4wm

#pragma once

#include <filesystem>
#include <vector>

#include "bec4wm/lattice.hpp"
#include "bec4wm/params.hpp"

namespace bec4wm {

struct GroundStateOptions {
    /// Relative energy change per unit of imaginary time hbar/mu.
    double energy_tolerance = 1e-8;
    /// Required ||H psi - mu psi|| / ||mu psi|| at exit.
    double residual_tolerance = 2e-3;
    /// Relative accuracy of the peak density when targeting it.
    double peak_tolerance = 2e-4;
    int max_steps = 20000;
    int max_outer = 12;
    /// Minimum number of lattice spacings between the cloud edge and the box face.
    int boundary_margin = 4;
    /// Points per axis of the zero-padded profile used for the width fits.
    int padding_factor = 16;
};

struct GroundState {
    Lattice3D lattice;
    std::vector<double> density;    ///< rho0(x), 1/m^3
    std::vector<double> amplitude;  ///< sqrt(rho0(x))
    double mu = 0.0;                ///< chemical potential, J
    double energy_per_atom = 0.0;   ///< J
    double atom_number = 0.0;
    double peak_density = 0.0;
    double residual = 0.0;
    int steps = 0;
    double sigma_x = 0.0;   ///< 1/m
    double sigma_yz = 0.0;  ///< 1/m

    explicit GroundState(const Lattice3D& l) : lattice(l) {}
};

/// Gross-Pitaevskii ground state of the trapped species (coupling from a11)
/// by imaginary-time split-step propagation. Targets either params.atom_number
/// or params.peak_density; the latter wraps the norm-conserving solve in a
/// secant search on N. Fills sigma_x/sigma_yz via source_momentum_widths.
/// Throws ConfigError if the cloud does not fit the box, NumericalError if
/// the iteration fails to converge.
GroundState solve_ground_state(const PhysicalParams& params, const Lattice3D& lattice,
                               const GroundStateOptions& options = {});

/// Thomas-Fermi estimates for the harmonic trap.
struct ThomasFermi {
    double mu;                     ///< J
    double atom_number;
    double peak_density;
    std::array<double, 3> radius;  ///< m
};
ThomasFermi thomas_fermi_from_peak(const PhysicalParams& params, double peak_density);
ThomasFermi thomas_fermi_from_number(const PhysicalParams& params, double atom_number);

struct SourceWidths {
    double sigma_x;
    double sigma_y;
    double sigma_z;
    double sigma_yz;  ///< mean of sigma_y and sigma_z
};

/// rms widths of the momentum density of sqrt(rho0) along the three axes
/// through k = 0. Each axis uses the projection of the amplitude onto that
/// axis, zero padded for resolution, and a Gaussian fit
/// exp(-k^2 / (2 sigma^2)) over the main lobe.
SourceWidths source_momentum_widths(const GroundState& gs, int padding_factor = 16);

/// Little-endian float64 density dump plus a JSON sidecar (<path>.json).
void save_ground_state(const GroundState& gs, const std::filesystem::path& path);
GroundState load_ground_state(const std::filesystem::path& path);

}  // namespace bec4wm

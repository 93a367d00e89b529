#pragma once

#include <array>
#include <optional>

#include "bec4wm/constants.hpp"

namespace bec4wm {

/// Physical inputs of one collision scenario (SI units).
struct PhysicalParams {
    double mass = helium4_mass;
    double a00 = 5.3 * nm;   ///< outcoupled species
    double a11 = 7.51 * nm;  ///< trapped species
    std::array<double, 3> trap_omega{2.0 * pi * 47.0, 2.0 * pi * 1150.0, 2.0 * pi * 1150.0};
    std::optional<double> peak_density = 2.5e19;
    std::optional<double> atom_number;
    double v_r = 0.092;

    double k_r() const { return mass * v_r / hbar; }
    double U0_trapped() const { return contact_coupling(a11, mass); }
    double U0_outcoupled() const { return contact_coupling(a00, mass); }

    /// Throws ConfigError unless all quantities are positive (a11 may be 0)
    /// and exactly one of peak_density / atom_number is set.
    void validate() const;

    /// Metastable helium parameters of the main collision example.
    static PhysicalParams helium_main();
};

}  // namespace bec4wm

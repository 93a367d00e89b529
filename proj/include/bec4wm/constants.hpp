#pragma once

#include <numbers>

namespace bec4wm {

inline constexpr double pi = std::numbers::pi;
inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double helium4_mass = 6.65e-27;  // kg, metastable 4He
inline constexpr double sodium23_mass = 3.8175e-26;  // kg

inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double us = 1e-6;

/// Contact coupling U0 = 4 pi hbar a / m in m^3/s (multiply by hbar for energy).
constexpr double contact_coupling(double scattering_length, double mass) {
    return 4.0 * pi * hbar * scattering_length / mass;
}

}  // namespace bec4wm

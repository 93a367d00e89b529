#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "bec4wm/dynamics.hpp"
#include "bec4wm/groundstate.hpp"
#include "bec4wm/moments.hpp"
#include "bec4wm/observables.hpp"
#include "bec4wm/params.hpp"

namespace bec4wm {

/// Settings of the few-mode validation run (positive-P against the exact
/// truncated-Fock evolution).
struct FewModeSettings {
    std::vector<std::array<int, 3>> lattices{{2, 1, 1}, {4, 1, 1}};
    std::array<double, 3> lengths{10e-6, 10e-6, 10e-6};
    double pump_atoms = 20.0;
    /// Pair gain rate gbar = 2 U0 N_p / V as a multiple of the lowest kinetic frequency.
    double gbar_over_kinetic = 0.5;
    std::vector<double> gbar_times{0.25, 0.5, 1.0};
    int trajectories = 20000;
    int steps = 400;
    std::uint64_t base_seed = 7;
    /// Also run with half the step (same Brownian path) and compare.
    bool step_halving = true;
};

/// Unscaled scenario a desk preset stands in for. The widths (units of k_r),
/// fitted halo width and scattered number feed its mode-count estimate;
/// zeros fall back to Thomas-Fermi widths and the spontaneous halo width.
struct ReferenceScenario {
    PhysicalParams physical;
    double sigma_x_kr = 0.0;
    double sigma_yz_kr = 0.0;
    double delta_k_kr = 0.0;
    double scattered = 0.0;
};

/// Everything needed to reproduce one experiment. Serialised as JSON with
/// the sections physical, lattice, ground, integration, analysis, outputs
/// and fewmode; unknown keys are rejected.
struct RunConfig {
    std::string name = "custom";
    /// "collision" or "fewmode".
    std::string kind = "collision";
    std::string scaling_note;

    PhysicalParams physical;
    std::array<int, 3> points{256, 32, 32};
    std::array<double, 3> lengths{};
    GroundStateOptions ground;

    double t_final = 25e-6;
    int steps = 128;
    int trajectories = 400;
    std::uint64_t base_seed = 1;
    int block_size = 8;
    bool noise = true;
    int noise_refinement = 1;
    double divergence_factor = 1e6;
    /// Fractions of t_final at which moments are accumulated.
    std::vector<double> sample_fractions{0.0, 0.5, 1.0};
    /// Scattering length entering the simulation-time bound: "a00" or "a11".
    std::string time_bound_length = "a00";
    /// Worker threads (0: BECSIM_WORKERS or hardware). Not part of the hash.
    int workers = 0;

    AnalysisSpec analysis;
    double eta = 1.0;
    RadialOptions radial;
    double mode_beta = 15.749609945722419;

    std::filesystem::path output_dir = "runs/out";
    bool write_csv = true;
    bool write_gnuplot = true;
    bool snapshot_fields = false;

    FewModeSettings fewmode;
    std::optional<ReferenceScenario> reference;

    nlohmann::json to_json() const;
    /// Throws ConfigError on unknown keys, wrong types or invalid values.
    static RunConfig from_json(const nlohmann::json& j);
    /// FNV-1a of the canonical JSON without outputs and worker count.
    std::string hash() const;
    void validate() const;

    SimConfig sim_config() const;
    Lattice3D lattice() const { return Lattice3D(points, lengths); }
};

/// A top-level "config_hash" (as written by save_config) is ignored.
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& c, const std::filesystem::path& path);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
RunConfig preset(const std::string& name);
/// One-line description per preset.
std::string preset_description(const std::string& name);

}  // namespace bec4wm

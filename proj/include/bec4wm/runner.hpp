#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <nlohmann/json.hpp>
#include <string>

#include "bec4wm/config.hpp"
#include "bec4wm/groundstate.hpp"
#include "bec4wm/moments.hpp"

namespace bec4wm {

struct RunOptions {
    bool resume = true;
    /// Receives progress lines; null for silence.
    std::function<void(const std::string&)> log;
};

/// Ground state of the configured trap and lattice. When `dir` is non-empty
/// the density dump and ground.json are written there.
GroundState run_ground(const RunConfig& config, const std::filesystem::path& dir = {},
                       const RunOptions& options = {});

/// Full experiment into config.output_dir: config.json, ground state,
/// checkpoints/, then everything analyze() writes. Returns the summary.
nlohmann::json run(const RunConfig& config, const RunOptions& options = {});

/// Recomputes every report of a run directory from its checkpoints:
/// summary.json, profiles/*.csv, correlations/*.csv, quadrants.json and
/// gnuplot scripts (collision runs) or validation.json (few-mode runs).
/// Throws ConfigError if the directory is incomplete or was produced by a
/// different configuration.
nlohmann::json analyze(const std::filesystem::path& dir);

/// Reports computed from accumulated moments (no files written).
nlohmann::json analyze_moments(const RunConfig& config, const EnsembleMoments& moments,
                               double sigma_x, double sigma_yz);

/// Closed-form estimates for a configuration. Source widths (1/m) for the
/// mode count default to the Thomas-Fermi value 1.64 / R along each axis.
nlohmann::json predict(const RunConfig& config, std::optional<double> sigma_x = {},
                       std::optional<double> sigma_yz = {});
/// Aligned text rendering of predict().
std::string format_predictions(const nlohmann::json& predictions);

/// Few-mode validation (positive-P against the exact solver), optionally
/// keeping the stochastic samples under dir/checkpoints. The report carries
/// "pass".
nlohmann::json validate_fewmode(const RunConfig& config, const std::filesystem::path& dir = {},
                                const RunOptions& options = {});

}  // namespace bec4wm

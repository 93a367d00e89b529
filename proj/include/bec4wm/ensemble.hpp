#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "bec4wm/dynamics.hpp"
#include "bec4wm/moments.hpp"

namespace bec4wm {

struct EnsembleOptions {
    /// Empty: no checkpoints.
    std::filesystem::path checkpoint_dir;
    std::string config_hash;
    bool resume = true;
    /// Also store the last-sample fields of every trajectory under checkpoint_dir.
    bool snapshot_fields = false;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Runs config.n_trajectories trajectories from `init` in parallel blocks and
/// reduces them in block order, so the result does not depend on the worker
/// count. Throws NumericalError if more than half the trajectories diverge
/// or fewer than two remain valid.
EnsembleMoments simulate_ensemble(const SimConfig& config, const FieldPair& init,
                                  const AnalysisSpec& analysis,
                                  const EnsembleOptions& options = {});

/// Ground state on the configured lattice, standing-wave initial state, then
/// the ensemble above.
EnsembleMoments simulate_ensemble(const SimConfig& config, const AnalysisSpec& analysis,
                                  const EnsembleOptions& options = {});

}  // namespace bec4wm

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "bec4wm/dynamics.hpp"
#include "bec4wm/moments.hpp"

namespace bec4wm {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);

/// Binary serialisation of accumulated moments (little-endian float64/uint64).
std::string serialize_moments(const EnsembleMoments& m);
EnsembleMoments deserialize_moments(std::string_view bytes);

struct CheckpointManifest {
    std::string config_hash;
    std::uint64_t base_seed = 0;
    int block_size = 0;
    int n_trajectories = 0;
    int completed_blocks = 0;
    std::string payload_hash;  ///< FNV-1a of moments.bin
};

/// Writes <dir>/moments.bin then <dir>/manifest.json (atomically replaced).
void write_checkpoint(const std::filesystem::path& dir, const CheckpointManifest& manifest,
                      const EnsembleMoments& moments);

/// Reads a checkpoint if <dir>/manifest.json exists. Throws ConfigError when
/// the config hash differs from `expected_hash` or the payload hash does not
/// match (corruption).
std::optional<std::pair<CheckpointManifest, EnsembleMoments>> read_checkpoint(
    const std::filesystem::path& dir, const std::string& expected_hash);

/// Momentum-space fields of one trajectory sample as interleaved float64
/// (re, im) pairs, a(k) then a~(k), plus a JSON sidecar.
void write_field_snapshot(const std::filesystem::path& path, const TrajectorySample& sample,
                          std::uint64_t trajectory_id, std::uint64_t seed,
                          const std::string& config_hash);

}  // namespace bec4wm

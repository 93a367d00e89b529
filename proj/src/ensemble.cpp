#include "bec4wm/ensemble.hpp"

#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "bec4wm/checkpoint.hpp"
#include "bec4wm/errors.hpp"

namespace bec4wm {

EnsembleMoments simulate_ensemble(const SimConfig& config, const FieldPair& init,
                                  const AnalysisSpec& analysis, const EnsembleOptions& options) {
    config.validate();
    const Lattice3D lattice = Lattice3D::few_mode(config.points, config.lengths);
    const SpectralTransform fft(lattice);
    const MomentLayout layout(lattice, analysis);
    std::vector<double> times;
    for (int s : config.sample_steps()) times.push_back(s * config.dt());

    const int n_blocks = (config.n_trajectories + config.block_size - 1) / config.block_size;
    EnsembleMoments total(layout, times);
    int first_block = 0;

    const bool checkpointing = !options.checkpoint_dir.empty();
    if (checkpointing && options.resume) {
        if (auto cp = read_checkpoint(options.checkpoint_dir, options.config_hash)) {
            if (cp->first.block_size != config.block_size ||
                cp->first.base_seed != config.base_seed)
                throw ConfigError("checkpoint was written with a different block size or seed");
            first_block = std::min(cp->first.completed_blocks, n_blocks);
            total = std::move(cp->second);
        }
    }

    auto run_block = [&](int b) {
        EnsembleMoments part(layout, times);
        const int lo = b * config.block_size;
        const int hi = std::min(config.n_trajectories, lo + config.block_size);
        for (int id = lo; id < hi; ++id) {
            const auto rec = run_trajectory(init, config, static_cast<std::uint64_t>(id), fft);
            if (options.snapshot_fields && checkpointing && rec.valid && !rec.samples.empty())
                write_field_snapshot(options.checkpoint_dir / ("traj_" + std::to_string(id) + ".bin"),
                                     rec.samples.back(), rec.trajectory_id,
                                     trajectory_seed(config.base_seed, rec.trajectory_id),
                                     options.config_hash);
            part.add(layout, rec);
        }
        return part;
    };

    std::mutex mtx;
    std::map<int, EnsembleMoments> finished;
    int next_merge = first_block;
    std::atomic<int> next_block{first_block};
    std::exception_ptr failure;

    auto merge_ready = [&]() {
        // Called with mtx held.
        while (true) {
            auto it = finished.find(next_merge);
            if (it == finished.end()) break;
            total.merge(it->second);
            finished.erase(it);
            ++next_merge;
            if (checkpointing) {
                CheckpointManifest man{options.config_hash, config.base_seed, config.block_size,
                                       config.n_trajectories, next_merge, {}};
                write_checkpoint(options.checkpoint_dir, man, total);
            }
            if (options.progress)
                options.progress(std::min<std::size_t>(
                                     static_cast<std::size_t>(next_merge) * config.block_size,
                                     config.n_trajectories),
                                 config.n_trajectories);
        }
    };

    auto worker = [&]() {
        while (true) {
            {
                std::lock_guard lock(mtx);
                if (failure) return;
            }
            const int b = next_block.fetch_add(1);
            if (b >= n_blocks) return;
            try {
                auto part = run_block(b);
                std::lock_guard lock(mtx);
                finished.emplace(b, std::move(part));
                merge_ready();
            } catch (...) {
                std::lock_guard lock(mtx);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int workers = std::min(resolve_workers(config.workers), std::max(1, n_blocks - first_block));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    const std::size_t all = total.n_valid + total.n_invalid;
    if (2 * total.n_invalid > all)
        throw NumericalError("ensemble: " + std::to_string(total.n_invalid) + " of " +
                             std::to_string(all) + " trajectories diverged (more than half)");
    if (total.n_valid < 2) throw NumericalError("ensemble: fewer than two valid trajectories");
    return total;
}

EnsembleMoments simulate_ensemble(const SimConfig& config, const AnalysisSpec& analysis,
                                  const EnsembleOptions& options) {
    config.validate();
    const GroundState gs = solve_ground_state(config.params, config.lattice());
    const FieldPair init = initialize_collision(gs, config.params);
    return simulate_ensemble(config, init, analysis, options);
}

}  // namespace bec4wm

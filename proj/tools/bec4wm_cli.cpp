// Command-line front end: ground, run, analyze, predict, validate, preset.
//
// Exit codes: 0 success, 1 usage, 2 configuration error, 3 numerical failure,
// 4 validation failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

#include "bec4wm/config.hpp"
#include "bec4wm/errors.hpp"
#include "bec4wm/runner.hpp"

using namespace bec4wm;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;
constexpr int exit_validation = 4;

struct Source {
    std::string file;
    std::string preset;
    std::string out;
    int workers = 0;
    long trajectories = 0;
    long seed = -1;
};

void add_source(CLI::App* cmd, Source& s) {
    auto* f = cmd->add_option("-c,--config", s.file, "JSON run configuration");
    auto* p = cmd->add_option("-p,--preset", s.preset, "named scenario");
    f->excludes(p);
    cmd->add_option("-o,--out", s.out, "output directory (overrides the config)");
    cmd->add_option("-w,--workers", s.workers, "worker threads (default: BECSIM_WORKERS or all cores)");
    cmd->add_option("-n,--trajectories", s.trajectories, "override the trajectory count");
    cmd->add_option("-s,--seed", s.seed, "override the base seed");
}

RunConfig resolve(const Source& s) {
    if (s.file.empty() && s.preset.empty()) throw ConfigError("give --config or --preset");
    RunConfig c = s.file.empty() ? preset(s.preset) : load_config(s.file);
    if (!s.out.empty()) c.output_dir = s.out;
    if (s.workers > 0) c.workers = s.workers;
    if (s.trajectories > 0) {
        c.trajectories = static_cast<int>(s.trajectories);
        c.fewmode.trajectories = static_cast<int>(s.trajectories);
    }
    if (s.seed >= 0) {
        c.base_seed = static_cast<std::uint64_t>(s.seed);
        c.fewmode.base_seed = static_cast<std::uint64_t>(s.seed);
    }
    c.validate();
    return c;
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Positive-P simulation of colliding condensates"};
    app.require_subcommand(1);
    app.fallthrough();

    Source src;
    bool fresh = false;
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "no progress output");

    auto* ground = app.add_subcommand("ground", "solve the trapped ground state");
    add_source(ground, src);

    auto* run_cmd = app.add_subcommand("run", "ground state, ensemble and reports");
    add_source(run_cmd, src);
    run_cmd->add_flag("--fresh", fresh, "ignore existing checkpoints");

    std::string dir;
    auto* analyze_cmd = app.add_subcommand("analyze", "recompute reports from checkpoints");
    analyze_cmd->add_option("dir", dir, "run directory")->required();

    bool as_json = false;
    double sx = 0.0, syz = 0.0;
    auto* predict_cmd = app.add_subcommand("predict", "closed-form estimates");
    add_source(predict_cmd, src);
    predict_cmd->add_flag("--json", as_json, "print JSON instead of a table");
    predict_cmd->add_option("--sigma-x", sx, "source width along x in units of k_r");
    predict_cmd->add_option("--sigma-yz", syz, "transverse source width in units of k_r");

    auto* validate_cmd = app.add_subcommand("validate", "few-mode positive-P against exact evolution");
    add_source(validate_cmd, src);

    bool list = false;
    std::string show;
    auto* preset_cmd = app.add_subcommand("preset", "list or print scenario presets");
    preset_cmd->add_flag("--list", list, "list preset names");
    preset_cmd->add_option("name", show, "print this preset as JSON");

    CLI11_PARSE(app, argc, argv);

    RunOptions opts;
    if (!quiet) opts.log = log_line;

    try {
        if (*ground) {
            const RunConfig c = resolve(src);
            run_ground(c, c.output_dir, opts);
            std::cout << (c.output_dir / "ground.json").string() << '\n';
        } else if (*run_cmd) {
            const RunConfig c = resolve(src);
            opts.resume = !fresh;
            const auto summary = run(c, opts);
            std::cout << summary.dump(2) << '\n';
            if (c.kind == "fewmode" && !summary.value("pass", false)) return exit_validation;
        } else if (*analyze_cmd) {
            const auto summary = analyze(dir);
            std::cout << summary.dump(2) << '\n';
            if (summary.contains("pass") && !summary["pass"].get<bool>()) return exit_validation;
        } else if (*predict_cmd) {
            const RunConfig c = resolve(src);
            const double kr = c.physical.k_r();
            auto opt = [kr](double v) { return v > 0.0 ? std::optional<double>(v * kr) : std::nullopt; };
            const auto p = predict(c, opt(sx), opt(syz));
            std::cout << (as_json ? p.dump(2) + "\n" : format_predictions(p));
        } else if (*validate_cmd) {
            Source s = src;
            if (s.file.empty() && s.preset.empty()) s.preset = "fewmode-validate";
            const RunConfig c = resolve(s);
            const auto rep = validate_fewmode(c, s.out.empty() ? std::filesystem::path() : c.output_dir, opts);
            std::cout << rep.dump(2) << '\n';
            if (!rep.value("pass", false)) return exit_validation;
        } else if (*preset_cmd) {
            if (list || show.empty()) {
                for (const auto& n : preset_names())
                    std::cout << n << "\t" << preset_description(n) << '\n';
            } else {
                auto j = preset(show).to_json();
                j["config_hash"] = preset(show).hash();
                std::cout << j.dump(2) << '\n';
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const ValidationError& e) {
        std::cerr << "validation failure: " << e.what() << '\n';
        return exit_validation;
    }
    return 0;
}

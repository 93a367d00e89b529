#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "bec4wm/analytic.hpp"
#include "bec4wm/config.hpp"
#include "bec4wm/errors.hpp"
#include "bec4wm/runner.hpp"

using namespace bec4wm;
using nlohmann::json;

TEST(Config, JsonRoundTrip) {
    for (const auto& name : preset_names()) {
        const RunConfig c = preset(name);
        const RunConfig back = RunConfig::from_json(c.to_json());
        EXPECT_EQ(back.to_json(), c.to_json()) << name;
        EXPECT_EQ(back.hash(), c.hash()) << name;
    }
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
    json j = preset("main").to_json();
    j["physical"]["colour"] = "blue";
    EXPECT_THROW(RunConfig::from_json(j), ConfigError);
    json k = preset("main").to_json();
    k["integration"]["steps"] = -3;
    EXPECT_THROW(RunConfig::from_json(k), ConfigError);
    json l = preset("main").to_json();
    l["integration"]["steps"] = "many";
    EXPECT_THROW(RunConfig::from_json(l), ConfigError);
    EXPECT_THROW(preset("no-such-preset"), ConfigError);
}

TEST(Config, HashIgnoresOutputsAndWorkers) {
    RunConfig a = preset("main");
    RunConfig b = a;
    b.output_dir = "/somewhere/else";
    b.workers = 7;
    b.write_csv = false;
    EXPECT_EQ(a.hash(), b.hash());
    b.physical.v_r *= 1.01;
    EXPECT_NE(a.hash(), b.hash());
    RunConfig c = a;
    c.base_seed = 2;
    EXPECT_NE(a.hash(), c.hash());
}

TEST(Config, SaveLoad) {
    const auto path = std::filesystem::temp_directory_path() / "bec4wm_cfg.json";
    const RunConfig c = preset("small-a");
    save_config(c, path);
    EXPECT_EQ(load_config(path).hash(), c.hash());
    std::filesystem::remove(path);
}

TEST(Presets, ScenarioParameters) {
    const RunConfig sv = preset("small-velocity");
    EXPECT_NEAR(sv.physical.v_r, 0.065, 1e-12);
    EXPECT_NEAR(sv.physical.k_r() / 4.1e6, 1.0, 0.01);
    EXPECT_NEAR(preset("main").physical.k_r() / sv.physical.k_r(), std::sqrt(2.0), 0.01);

    const RunConfig sa = preset("small-a");
    EXPECT_NEAR(sa.physical.a00, 2.65e-9, 1e-15);
    EXPECT_NEAR(sa.physical.a11, 3.75e-9, 1e-15);
    ASSERT_TRUE(sa.physical.peak_density.has_value());
    EXPECT_EQ(*sa.physical.peak_density, 2.5e19);

    const RunConfig ht = preset("half-time");
    EXPECT_NEAR(ht.t_final, 0.5 * preset("main").t_final, 1e-18);

    const RunConfig fs = preset("fullscale-appendixD");
    EXPECT_EQ(fs.points, (std::array<int, 3>{1400, 50, 70}));
    EXPECT_EQ(fs.trajectories, 2800);
    EXPECT_EQ(fs.steps, 128);

    for (const auto& name : preset_names()) {
        if (name == "fullscale-appendixD" || name == "fewmode-validate") continue;
        EXPECT_FALSE(preset(name).scaling_note.empty()) << name;
    }
    EXPECT_EQ(preset("fewmode-validate").kind, "fewmode");
}

// The desk collision time stays below the positive-P time bound.
TEST(Presets, DeskRunsWithinSimulationTimeBound) {
    for (const auto& name : {"main", "half-time", "small-velocity", "small-a"}) {
        const RunConfig c = preset(name);
        const auto lat = c.lattice();
        const double bound = max_sim_time(c.physical.mass, c.physical.a00,
                                          *c.physical.peak_density, lat.cell_volume());
        EXPECT_LT(c.t_final, bound) << name;
    }
}

TEST(Predict, MainReferenceTable) {
    const json p = predict(preset("main"));
    ASSERT_TRUE(p.contains("reference"));
    const json& r = p["reference"];
    EXPECT_NEAR(r["delta_k_spontaneous_kr"].get<double>() / 0.075, 1.0, 0.01);
    EXPECT_NEAR(r["delta_k_stimulated_kr"].get<double>() / 0.05, 1.0, 0.02);
    EXPECT_NEAR(r["mode_count"]["N_m"].get<double>() / 26400.0, 1.0, 0.05);
    EXPECT_EQ(p["config_hash"], preset("main").hash());
    // text rendering mentions each section
    const std::string txt = format_predictions(p);
    EXPECT_NE(txt.find("reference"), std::string::npos);
    EXPECT_NE(txt.find("scattering modes"), std::string::npos);
}

TEST(Predict, SourceWidthOverride) {
    const RunConfig c = preset("main");
    const double kr = c.physical.k_r();
    const json a = predict(c, 0.0025 * kr, 0.055 * kr);
    const json b = predict(c, 0.005 * kr, 0.055 * kr);
    const double na = a["simulated"]["mode_count"]["N_m"].get<double>();
    const double nb = b["simulated"]["mode_count"]["N_m"].get<double>();
    EXPECT_NEAR(na / nb, 2.0, 1e-9);
}

#ifdef BEC4WM_CLI
namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(BEC4WM_CLI) + " -q " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli("preset --list"), 0);
    EXPECT_EQ(cli("predict -p main"), 0);
    EXPECT_EQ(cli("predict -p nonsense"), 2);
    const auto bad = std::filesystem::temp_directory_path() / "bec4wm_bad.json";
    std::ofstream(bad) << R"({"physical": {"colour": 1}})";
    EXPECT_EQ(cli("predict -c " + bad.string()), 2);
    EXPECT_EQ(cli("analyze /nonexistent/run"), 2);
    EXPECT_NE(cli("frobnicate"), 0);
    std::filesystem::remove(bad);
}
#endif

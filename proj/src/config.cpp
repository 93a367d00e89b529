#include "bec4wm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "bec4wm/checkpoint.hpp"
#include "bec4wm/constants.hpp"
#include "bec4wm/errors.hpp"

namespace bec4wm {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("config: unknown key '" + section + "." + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + section + "." + key + "': " + e.what());
    }
}

std::array<double, 3> scaled(std::array<double, 3> v, double f) {
    for (auto& x : v) x *= f;
    return v;
}

json physical_to_json(const PhysicalParams& p) {
    json ph{{"mass_kg", p.mass},
            {"a00_nm", p.a00 / nm},
            {"a11_nm", p.a11 / nm},
            {"trap_hz", scaled(p.trap_omega, 1.0 / (2.0 * pi))},
            {"v_r_m_per_s", p.v_r}};
    if (p.peak_density) ph["peak_density_m3"] = *p.peak_density;
    if (p.atom_number) ph["atom_number"] = *p.atom_number;
    return ph;
}

void physical_from_json(const json& s, const std::string& section, PhysicalParams& p) {
    check_keys(s, section, {"mass_kg", "a00_nm", "a11_nm", "trap_hz", "v_r_m_per_s",
                            "peak_density_m3", "atom_number"});
    read(s, "mass_kg", p.mass, section);
    double a00 = p.a00 / nm, a11 = p.a11 / nm;
    read(s, "a00_nm", a00, section);
    read(s, "a11_nm", a11, section);
    p.a00 = a00 * nm;
    p.a11 = a11 * nm;
    std::array<double, 3> hz = scaled(p.trap_omega, 1.0 / (2.0 * pi));
    read(s, "trap_hz", hz, section);
    p.trap_omega = scaled(hz, 2.0 * pi);
    read(s, "v_r_m_per_s", p.v_r, section);
    if (s.contains("peak_density_m3") || s.contains("atom_number")) {
        p.peak_density.reset();
        p.atom_number.reset();
        if (s.contains("peak_density_m3")) {
            double v = 0.0;
            read(s, "peak_density_m3", v, section);
            p.peak_density = v;
        }
        if (s.contains("atom_number")) {
            double v = 0.0;
            read(s, "atom_number", v, section);
            p.atom_number = v;
        }
    }
}

}  // namespace

json RunConfig::to_json() const {
    json j;
    j["name"] = name;
    j["kind"] = kind;
    j["scaling_note"] = scaling_note;
    j["physical"] = physical_to_json(physical);
    if (reference)
        j["reference"] = {{"physical", physical_to_json(reference->physical)},
                          {"sigma_x_kr", reference->sigma_x_kr},
                          {"sigma_yz_kr", reference->sigma_yz_kr},
                          {"delta_k_kr", reference->delta_k_kr},
                          {"scattered", reference->scattered}};
    j["lattice"] = {{"points", points}, {"lengths_um", scaled(lengths, 1.0 / um)}};
    j["ground"] = {{"energy_tolerance", ground.energy_tolerance},
                   {"residual_tolerance", ground.residual_tolerance},
                   {"peak_tolerance", ground.peak_tolerance},
                   {"max_steps", ground.max_steps},
                   {"max_outer", ground.max_outer},
                   {"boundary_margin", ground.boundary_margin},
                   {"padding_factor", ground.padding_factor}};
    j["integration"] = {{"t_final_us", t_final / us},
                        {"steps", steps},
                        {"trajectories", trajectories},
                        {"base_seed", base_seed},
                        {"block_size", block_size},
                        {"noise", noise},
                        {"noise_refinement", noise_refinement},
                        {"divergence_factor", divergence_factor},
                        {"sample_fractions", sample_fractions},
                        {"time_bound_length", time_bound_length},
                        {"workers", workers}};
    j["analysis"] = {{"exclusion", analysis.exclusion},
                     {"axial_mask", analysis.axial_mask},
                     {"shell", analysis.shell},
                     {"max_lag", analysis.max_lag},
                     {"track_mean_field", analysis.track_mean_field},
                     {"eta", eta},
                     {"radial_bin_kr", radial.bin_width},
                     {"fit_window_kr", std::array<double, 2>{radial.fit_lo, radial.fit_hi}},
                     {"fit_baseline", radial.fit_baseline},
                     {"fit_slope", radial.fit_slope},
                     {"mode_beta", mode_beta}};
    j["outputs"] = {{"directory", output_dir.string()},
                    {"csv", write_csv},
                    {"gnuplot", write_gnuplot},
                    {"snapshot_fields", snapshot_fields}};
    j["fewmode"] = {{"lattices", fewmode.lattices},
                    {"lengths_um", scaled(fewmode.lengths, 1.0 / um)},
                    {"pump_atoms", fewmode.pump_atoms},
                    {"gbar_over_kinetic", fewmode.gbar_over_kinetic},
                    {"gbar_times", fewmode.gbar_times},
                    {"trajectories", fewmode.trajectories},
                    {"steps", fewmode.steps},
                    {"base_seed", fewmode.base_seed},
                    {"step_halving", fewmode.step_halving}};
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    check_keys(j, "<root>", {"name", "kind", "scaling_note", "physical", "lattice", "ground",
                             "integration", "analysis", "outputs", "fewmode",
                             "reference"});
    RunConfig c;
    read(j, "name", c.name, "<root>");
    read(j, "kind", c.kind, "<root>");
    read(j, "scaling_note", c.scaling_note, "<root>");

    if (j.contains("physical")) physical_from_json(j.at("physical"), "physical", c.physical);
    if (j.contains("reference")) {
        const auto& s = j.at("reference");
        check_keys(s, "reference",
                   {"physical", "sigma_x_kr", "sigma_yz_kr", "delta_k_kr", "scattered"});
        ReferenceScenario r;
        if (s.contains("physical")) physical_from_json(s.at("physical"), "reference.physical", r.physical);
        read(s, "sigma_x_kr", r.sigma_x_kr, "reference");
        read(s, "sigma_yz_kr", r.sigma_yz_kr, "reference");
        read(s, "delta_k_kr", r.delta_k_kr, "reference");
        read(s, "scattered", r.scattered, "reference");
        c.reference = r;
    }
    if (j.contains("lattice")) {
        const auto& s = j.at("lattice");
        check_keys(s, "lattice", {"points", "lengths_um"});
        read(s, "points", c.points, "lattice");
        std::array<double, 3> l = scaled(c.lengths, 1.0 / um);
        read(s, "lengths_um", l, "lattice");
        c.lengths = scaled(l, um);
    }
    if (j.contains("ground")) {
        const auto& s = j.at("ground");
        check_keys(s, "ground", {"energy_tolerance", "residual_tolerance", "peak_tolerance",
                                 "max_steps", "max_outer", "boundary_margin", "padding_factor"});
        read(s, "energy_tolerance", c.ground.energy_tolerance, "ground");
        read(s, "residual_tolerance", c.ground.residual_tolerance, "ground");
        read(s, "peak_tolerance", c.ground.peak_tolerance, "ground");
        read(s, "max_steps", c.ground.max_steps, "ground");
        read(s, "max_outer", c.ground.max_outer, "ground");
        read(s, "boundary_margin", c.ground.boundary_margin, "ground");
        read(s, "padding_factor", c.ground.padding_factor, "ground");
    }
    if (j.contains("integration")) {
        const auto& s = j.at("integration");
        check_keys(s, "integration",
                   {"t_final_us", "steps", "trajectories", "base_seed", "block_size", "noise",
                    "noise_refinement", "divergence_factor", "sample_fractions",
                    "time_bound_length", "workers"});
        double t = c.t_final / us;
        read(s, "t_final_us", t, "integration");
        c.t_final = t * us;
        read(s, "steps", c.steps, "integration");
        read(s, "trajectories", c.trajectories, "integration");
        read(s, "base_seed", c.base_seed, "integration");
        read(s, "block_size", c.block_size, "integration");
        read(s, "noise", c.noise, "integration");
        read(s, "noise_refinement", c.noise_refinement, "integration");
        read(s, "divergence_factor", c.divergence_factor, "integration");
        read(s, "sample_fractions", c.sample_fractions, "integration");
        read(s, "time_bound_length", c.time_bound_length, "integration");
        read(s, "workers", c.workers, "integration");
    }
    if (j.contains("analysis")) {
        const auto& s = j.at("analysis");
        check_keys(s, "analysis",
                   {"exclusion", "axial_mask", "shell", "max_lag", "track_mean_field", "eta",
                    "radial_bin_kr", "fit_window_kr", "fit_baseline", "fit_slope", "mode_beta"});
        read(s, "exclusion", c.analysis.exclusion, "analysis");
        read(s, "axial_mask", c.analysis.axial_mask, "analysis");
        read(s, "shell", c.analysis.shell, "analysis");
        read(s, "max_lag", c.analysis.max_lag, "analysis");
        read(s, "track_mean_field", c.analysis.track_mean_field, "analysis");
        read(s, "eta", c.eta, "analysis");
        read(s, "radial_bin_kr", c.radial.bin_width, "analysis");
        std::array<double, 2> win{c.radial.fit_lo, c.radial.fit_hi};
        read(s, "fit_window_kr", win, "analysis");
        c.radial.fit_lo = win[0];
        c.radial.fit_hi = win[1];
        read(s, "fit_baseline", c.radial.fit_baseline, "analysis");
        read(s, "fit_slope", c.radial.fit_slope, "analysis");
        read(s, "mode_beta", c.mode_beta, "analysis");
    }
    if (j.contains("outputs")) {
        const auto& s = j.at("outputs");
        check_keys(s, "outputs", {"directory", "csv", "gnuplot", "snapshot_fields"});
        std::string dir = c.output_dir.string();
        read(s, "directory", dir, "outputs");
        c.output_dir = dir;
        read(s, "csv", c.write_csv, "outputs");
        read(s, "gnuplot", c.write_gnuplot, "outputs");
        read(s, "snapshot_fields", c.snapshot_fields, "outputs");
    }
    if (j.contains("fewmode")) {
        const auto& s = j.at("fewmode");
        check_keys(s, "fewmode", {"lattices", "lengths_um", "pump_atoms", "gbar_over_kinetic",
                                  "gbar_times", "trajectories", "steps", "base_seed",
                                  "step_halving"});
        auto& f = c.fewmode;
        read(s, "lattices", f.lattices, "fewmode");
        std::array<double, 3> l = scaled(f.lengths, 1.0 / um);
        read(s, "lengths_um", l, "fewmode");
        f.lengths = scaled(l, um);
        read(s, "pump_atoms", f.pump_atoms, "fewmode");
        read(s, "gbar_over_kinetic", f.gbar_over_kinetic, "fewmode");
        read(s, "gbar_times", f.gbar_times, "fewmode");
        read(s, "trajectories", f.trajectories, "fewmode");
        read(s, "steps", f.steps, "fewmode");
        read(s, "base_seed", f.base_seed, "fewmode");
        read(s, "step_halving", f.step_halving, "fewmode");
    }
    c.validate();
    return c;
}

std::string RunConfig::hash() const {
    json j = to_json();
    j.erase("outputs");
    j["integration"].erase("workers");
    return hex64(fnv1a64(j.dump()));
}

void RunConfig::validate() const {
    if (kind != "collision" && kind != "fewmode")
        throw ConfigError("config: kind must be 'collision' or 'fewmode'");
    if (kind == "fewmode") {
        if (fewmode.lattices.empty()) throw ConfigError("fewmode: no lattices");
        for (const auto& pts : fewmode.lattices) {
            const auto lat = Lattice3D::few_mode(pts, fewmode.lengths);
            if (lat.size() > 8) throw ConfigError("fewmode: at most 8 modes");
        }
        if (!(fewmode.pump_atoms > 0.0)) throw ConfigError("fewmode: pump_atoms must be positive");
        if (!(fewmode.gbar_over_kinetic > 0.0))
            throw ConfigError("fewmode: gbar_over_kinetic must be positive");
        if (fewmode.gbar_times.empty()) throw ConfigError("fewmode: no gbar_times");
        for (std::size_t i = 0; i < fewmode.gbar_times.size(); ++i)
            if (!(fewmode.gbar_times[i] > 0.0) ||
                (i > 0 && fewmode.gbar_times[i] <= fewmode.gbar_times[i - 1]))
                throw ConfigError("fewmode: gbar_times must be positive and increasing");
        if (fewmode.trajectories < 100) throw ConfigError("fewmode: at least 100 trajectories");
        if (fewmode.steps < 1) throw ConfigError("fewmode: steps must be >= 1");
        physical.validate();
        return;
    }
    if (reference) reference->physical.validate();
    if (time_bound_length != "a00" && time_bound_length != "a11")
        throw ConfigError("integration.time_bound_length must be 'a00' or 'a11'");
    if (sample_fractions.empty()) throw ConfigError("integration.sample_fractions is empty");
    for (double f : sample_fractions)
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("sample fractions must lie in [0, 1]");
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("analysis.eta must lie in (0, 1]");
    if (!(analysis.shell > 0.0)) throw ConfigError("analysis.shell must be positive");
    if (!(analysis.exclusion > 0.0)) throw ConfigError("analysis.exclusion must be positive");
    if (!(analysis.axial_mask > 0.0)) throw ConfigError("analysis.axial_mask must be positive");
    if (!(radial.fit_lo < radial.fit_hi)) throw ConfigError("analysis.fit_window_kr is empty");
    if (!(mode_beta > 0.0)) throw ConfigError("analysis.mode_beta must be positive");
    (void)lattice();
    sim_config().validate();
}

SimConfig RunConfig::sim_config() const {
    SimConfig s;
    s.params = physical;
    s.points = points;
    s.lengths = lengths;
    s.t_final = t_final;
    s.n_steps = steps;
    s.n_trajectories = trajectories;
    s.base_seed = base_seed;
    s.divergence_factor = divergence_factor;
    s.noise = noise;
    s.noise_refinement = noise_refinement;
    s.block_size = block_size;
    s.workers = workers;
    // Snap fractions onto step boundaries.
    for (double f : sample_fractions) {
        const double t = std::round(f * steps) * (t_final / steps);
        if (s.sample_times.empty() || t > s.sample_times.back()) s.sample_times.push_back(t);
    }
    return s;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    // save_config records the hash for reference; edited files are still valid
    if (j.is_object()) j.erase("config_hash");
    return RunConfig::from_json(j);
}

void save_config(const RunConfig& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    json j = c.to_json();
    j["config_hash"] = c.hash();
    out << j.dump(2) << '\n';
}

// Presets ------------------------------------------------------------------

namespace {

// Desk-scale collision geometry: a tighter trap than the experiment so the
// cloud, its momentum widths and the halo fit a 256x36x36 grid. L_x is 64
// recoil wavelengths, which puts k_r on the grid and folds the 3 k_r
// harmonic of the nonlinear term onto -k_r instead of into the halo.
RunConfig desk_base() {
    RunConfig c;
    c.physical = PhysicalParams::helium_main();
    c.physical.trap_omega = {2.0 * pi * 219.0, 2.0 * pi * 1000.0, 2.0 * pi * 1000.0};
    c.points = {256, 36, 36};
    c.lengths = {69.32 * um, 17.72 * um, 17.72 * um};
    c.ground.boundary_margin = 1;
    c.t_final = 25.0 * us;
    c.steps = 128;
    c.trajectories = 400;
    c.sample_fractions = {0.0, 0.25, 0.5, 1.0};
    c.analysis.exclusion = 0.9;
    c.analysis.max_lag = {8, 4, 4};
    c.scaling_note =
        "desk scale: trap (219, 1000, 1000) Hz instead of (47, 1150, 1150) Hz so the cloud "
        "(about 3.1e4 atoms at the same peak density) fits 256x36x36 points over "
        "69.32x17.72x17.72 um; k_max = 2 k_r along x and 1.1 k_r across; 400 trajectories; "
        "scattered atoms counted for |k_x| <= 0.9 k_r because the condensate peaks span "
        "several x bins";
    ReferenceScenario r;
    r.physical = PhysicalParams::helium_main();
    r.sigma_x_kr = 0.0025;
    r.sigma_yz_kr = 0.055;
    r.delta_k_kr = 0.10;
    r.scattered = 1750.0;
    c.reference = r;
    return c;
}

const std::vector<std::pair<std::string, std::string>> kPresets = {
    {"main", "He* collision, v_r = 9.2 cm/s, rho0 = 2.5e19 m^-3 (desk scale)"},
    {"half-time", "main with half the collision time (desk scale)"},
    {"small-velocity", "main with v_r = 6.5 cm/s (desk scale)"},
    {"small-a", "main with a00 = 2.65 nm, a11 = 3.75 nm (desk scale)"},
    {"fullscale-appendixD", "experimental trap on 1400x50x70, 2800 trajectories, 128 steps"},
    {"fewmode-validate", "positive-P against exact few-mode evolution"},
};

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& [n, d] : kPresets) out.push_back(n);
    return out;
}

std::string preset_description(const std::string& name) {
    for (const auto& [n, d] : kPresets)
        if (n == name) return d;
    throw ConfigError("unknown preset '" + name + "'");
}

RunConfig preset(const std::string& name) {
    (void)preset_description(name);
    RunConfig c;
    if (name == "main") {
        c = desk_base();
    } else if (name == "half-time") {
        c = desk_base();
        c.t_final /= 2.0;
        c.steps /= 2;
        c.scaling_note += "; half horizon";
        c.reference->delta_k_kr = 0.0;
        c.reference->scattered = 0.0;
    } else if (name == "small-velocity") {
        c = desk_base();
        c.physical.v_r = 0.065;
        c.scaling_note += "; v_r = 6.5 cm/s";
        c.reference->physical.v_r = 0.065;
        // widths quoted in units of the smaller recoil momentum
        c.reference->sigma_x_kr = 0.0035;
        c.reference->sigma_yz_kr = 0.078;
        c.reference->delta_k_kr = 0.0;
        c.reference->scattered = 0.0;
    } else if (name == "small-a") {
        c = desk_base();
        c.physical.a00 = 2.65 * nm;
        c.physical.a11 = 3.75 * nm;
        c.scaling_note += "; scattering lengths halved";
        c.reference->physical.a00 = 2.65 * nm;
        c.reference->physical.a11 = 3.75 * nm;
        c.reference->sigma_x_kr = 0.0036;
        c.reference->sigma_yz_kr = 0.068;
        c.reference->delta_k_kr = 0.0;
        c.reference->scattered = 0.0;
    } else if (name == "fullscale-appendixD") {
        c.physical = PhysicalParams::helium_main();
        c.points = {1400, 50, 70};
        c.lengths = {252.0 * um, 20.52 * um, 30.76 * um};
        c.t_final = 25.0 * us;
        c.steps = 128;
        c.trajectories = 2800;
        c.analysis.max_lag = {12, 4, 4};
        c.scaling_note = "full scale; not desk reproducible";
    } else {  // fewmode-validate
        c.kind = "fewmode";
        c.physical = PhysicalParams::helium_main();
        c.scaling_note = "few-mode lattices of 2 and 4 plane waves along x";
    }
    c.name = name;
    c.output_dir = "runs/" + name;
    c.validate();
    return c;
}

}  // namespace bec4wm

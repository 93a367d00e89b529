#include "bec4wm/runner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bec4wm/analytic.hpp"
#include "bec4wm/checkpoint.hpp"
#include "bec4wm/constants.hpp"
#include "bec4wm/ensemble.hpp"
#include "bec4wm/errors.hpp"
#include "bec4wm/observables.hpp"
#include "bec4wm/oracle.hpp"

namespace bec4wm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void say(const RunOptions& o, const std::string& s) {
    if (o.log) o.log(s);
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("missing " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("corrupt " + p.string() + ": " + e.what());
    }
}

std::string csv_header(const RunConfig& c) {
    return "# config_hash=" + c.hash() + " base_seed=" + std::to_string(c.base_seed) + "\n";
}

double rho0_of(const PhysicalParams& p) {
    if (p.peak_density) return *p.peak_density;
    return thomas_fermi_from_number(p, *p.atom_number).peak_density;
}

const char* axis_name(int a) { return a == 0 ? "x" : (a == 1 ? "y" : "z"); }
const char* kind_name(PairKind k) { return k == PairKind::collinear ? "CL" : "BB"; }
const char* quad_name(int q) { return q == 0 ? "A" : q == 1 ? "B" : q == 2 ? "C" : "D"; }

RunConfig config_from_dir(const fs::path& dir) {
    json j = read_json(dir / "config.json");
    const std::string recorded = j.value("config_hash", "");
    j.erase("config_hash");
    RunConfig c = RunConfig::from_json(j);
    if (!recorded.empty() && recorded != c.hash())
        throw ConfigError("config.json hash " + recorded + " does not match its contents (" +
                          c.hash() + ")");
    return c;
}

json ground_summary(const RunConfig& c, const GroundState& gs) {
    const double kr = c.physical.k_r();
    const auto tf = c.physical.peak_density
                        ? thomas_fermi_from_peak(c.physical, *c.physical.peak_density)
                        : thomas_fermi_from_number(c.physical, *c.physical.atom_number);
    return {{"config_hash", c.hash()},
            {"base_seed", c.base_seed},
            {"atom_number", gs.atom_number},
            {"mu_J", gs.mu},
            {"energy_per_atom_J", gs.energy_per_atom},
            {"peak_density_m3", gs.peak_density},
            {"residual", gs.residual},
            {"steps", gs.steps},
            {"sigma_x_kr", gs.sigma_x / kr},
            {"sigma_yz_kr", gs.sigma_yz / kr},
            {"sigma_x_m", gs.sigma_x},
            {"sigma_yz_m", gs.sigma_yz},
            {"thomas_fermi",
             {{"atom_number", tf.atom_number},
              {"mu_J", tf.mu},
              {"radius_um", {tf.radius[0] / um, tf.radius[1] / um, tf.radius[2] / um}}}}};
}

json fit_json(const GaussianFit& f, double unit) {
    return {{"amplitude", f.amplitude},
            {"center", f.center / unit},
            {"width", f.width / unit},
            {"baseline", f.baseline},
            {"converged", f.converged},
            {"rms_residual", f.rms_residual}};
}

// N_sc(t2) / N_sc(t1) with a jackknife error from the per-trajectory sums.
MeanStat scattered_ratio(const EnsembleMoments& m, std::size_t s1, std::size_t s2) {
    const auto& a = m.samples[s1].scattered;
    const auto& b = m.samples[s2].scattered;
    std::vector<double> v;
    for (std::size_t t = 0; t < a.size(); ++t) {
        v.push_back(a[t].real());
        v.push_back(b[t].real());
    }
    return jackknife(v, 2, [](const std::vector<double>& c) { return c[1] / c[0]; });
}

}  // namespace

GroundState run_ground(const RunConfig& c, const fs::path& dir, const RunOptions& o) {
    say(o, "ground state on " + std::to_string(c.points[0]) + "x" + std::to_string(c.points[1]) +
               "x" + std::to_string(c.points[2]));
    GroundState gs = solve_ground_state(c.physical, c.lattice(), c.ground);
    if (!dir.empty()) {
        fs::create_directories(dir);
        save_ground_state(gs, dir / "ground.bin");
        write_text(dir / "ground.json", ground_summary(c, gs).dump(2) + "\n");
    }
    std::ostringstream msg;
    msg << "ground state: N = " << gs.atom_number << ", mu = " << gs.mu
        << " J, sigma_x = " << gs.sigma_x / c.physical.k_r()
        << " k_r, sigma_yz = " << gs.sigma_yz / c.physical.k_r() << " k_r";
    say(o, msg.str());
    return gs;
}

json run(const RunConfig& c, const RunOptions& o) {
    c.validate();
    const fs::path dir = c.output_dir;
    fs::create_directories(dir);
    if (fs::exists(dir / "config.json")) {
        const RunConfig old = config_from_dir(dir);
        if (old.hash() != c.hash())
            throw ConfigError("output directory " + dir.string() +
                              " holds a run with a different configuration");
    }
    save_config(c, dir / "config.json");

    if (c.kind == "fewmode") {
        validate_fewmode(c, dir, o);
        return analyze(dir);
    }

    std::optional<GroundState> gs;
    if (o.resume && fs::exists(dir / "ground.json") && fs::exists(dir / "ground.bin")) {
        const json g = read_json(dir / "ground.json");
        if (g.value("config_hash", "") == c.hash()) {
            gs.emplace(load_ground_state(dir / "ground.bin"));
            gs->sigma_x = g.at("sigma_x_m");
            gs->sigma_yz = g.at("sigma_yz_m");
            say(o, "ground state reused from " + (dir / "ground.bin").string());
        }
    }
    if (!gs) gs.emplace(run_ground(c, dir, o));

    const SimConfig sim = c.sim_config();
    const double bound = max_sim_time(c.physical, c.lattice(), c.time_bound_length == "a11");
    if (c.t_final > bound) {
        std::ostringstream w;
        w << "warning: t_final " << c.t_final / us << " us exceeds the positive-P time bound "
          << bound / us << " us";
        say(o, w.str());
    }
    const FieldPair init = initialize_collision(*gs, c.physical);
    AnalysisSpec spec = c.analysis;
    spec.k_r = c.physical.k_r();
    EnsembleOptions eo;
    eo.checkpoint_dir = dir / "checkpoints";
    eo.config_hash = c.hash();
    eo.resume = o.resume;
    eo.snapshot_fields = c.snapshot_fields;
    if (o.log)
        eo.progress = [&o](std::size_t done, std::size_t total) {
            o.log("trajectories " + std::to_string(done) + "/" + std::to_string(total));
        };
    const EnsembleMoments m = simulate_ensemble(sim, init, spec, eo);
    say(o, "ensemble done: " + std::to_string(m.n_valid) + " valid, " +
               std::to_string(m.n_invalid) + " discarded");
    return analyze(dir);
}

json analyze_moments(const RunConfig& c, const EnsembleMoments& m, double sigma_x,
                     double sigma_yz) {
    const double kr = c.physical.k_r();
    const Lattice3D lat = m.lattice();
    json out;
    out["config_hash"] = c.hash();
    out["base_seed"] = c.base_seed;
    out["trajectories_valid"] = m.n_valid;
    out["trajectories_discarded"] = m.n_invalid;
    out["potentially_biased"] = m.potentially_biased();
    out["scaling_note"] = c.scaling_note;

    json samples = json::array();
    for (std::size_t s = 0; s < m.samples.size(); ++s) {
        const auto tn = total_number(m, s);
        const auto ti = total_number_imag(m, s);
        const auto sc = count_scattered(m, s);
        const auto d = momentum_density(m, s);
        samples.push_back({{"time_us", m.samples[s].time / us},
                           {"total_number", tn.mean},
                           {"total_number_se", tn.se},
                           {"total_number_imag", ti.mean},
                           {"total_number_imag_se", ti.se},
                           {"N_sc", sc.n_sc},
                           {"N_sc_se", sc.se},
                           {"fraction", sc.fraction},
                           {"imag_outlier_fraction", d.imag_outlier_fraction}});
    }
    out["samples"] = samples;

    // Linearity of the scattered number between t_final/2 and t_final.
    const std::size_t last = m.samples.size() - 1;
    for (std::size_t s = 0; s < last; ++s)
        if (std::abs(m.samples[s].time - 0.5 * m.samples[last].time) < 1e-3 * m.samples[last].time) {
            const auto r = scattered_ratio(m, s, last);
            out["linearity"] = {{"ratio", r.mean}, {"se", r.se}};
        }

    const double t = m.samples[last].time;
    if (!(t > 0.0)) return out;
    json fin;
    fin["time_us"] = t / us;
    const auto d = momentum_density(m, last);
    const double dk_sp = halo_width_spontaneous(c.physical.mass, kr, t);
    json halo{{"spontaneous_estimate_kr", dk_sp / kr}};
    RadialOptions ro = c.radial;
    if (ro.bin_width > 0.0) ro.bin_width *= kr;
    double dk_used = dk_sp;
    try {
        const auto hp = radial_profile(d, lat, kr, ro);
        halo["k0_kr"] = hp.fit.center / kr;
        halo["delta_k_kr"] = std::abs(hp.fit.width) / kr;
        halo["ratio_to_spontaneous"] = std::abs(hp.fit.width) / dk_sp;
        halo["fit"] = fit_json(hp.fit, kr);
        halo["profile"] = {{"k_kr", json::array()}, {"n", hp.n}, {"se", hp.se}, {"modes", hp.modes}};
        for (double k : hp.k) halo["profile"]["k_kr"].push_back(k / kr);
        dk_used = std::abs(hp.fit.width);
    } catch (const NumericalError& e) {
        halo["error"] = e.what();
    }
    fin["halo"] = halo;

    json corr;
    std::array<std::array<double, 3>, 2> width{};
    double g2_bb0 = 0.0, g2_cl0 = 0.0;
    for (auto kind : {PairKind::back_to_back, PairKind::collinear})
        for (int a = 0; a < 3; ++a) {
            const auto cc = g2_average(m, last, kind, a);
            json j{{"dk_kr", json::array()}, {"g2", cc.g2}, {"se", cc.se},
                   {"dropped_lags", cc.dropped_lags}, {"fitted", cc.fitted}};
            for (double v : cc.dk) j["dk_kr"].push_back(v / kr);
            for (std::size_t i = 0; i < cc.dk.size(); ++i)
                if (cc.dk[i] == 0.0) {
                    j["g2_0"] = cc.g2[i];
                    j["g2_0_se"] = cc.se[i];
                    if (a == 0) (kind == PairKind::back_to_back ? g2_bb0 : g2_cl0) = cc.g2[i];
                }
            if (cc.fitted) {
                j["fit"] = fit_json(cc.fit, kr);
                j["width_kr"] = std::abs(cc.fit.width) / kr;
                width[static_cast<int>(kind)][a] = std::abs(cc.fit.width);
            }
            corr[kind_name(kind)][axis_name(a)] = j;
        }
    fin["correlations"] = corr;
    const auto& wbb = width[static_cast<int>(PairKind::back_to_back)];
    const auto& wcl = width[static_cast<int>(PairKind::collinear)];
    auto ratio = [](double a, double b) { return b > 0.0 ? json(a / b) : json(nullptr); };
    fin["widths"] = {{"sigma_x_kr", sigma_x / kr},
                     {"sigma_yz_kr", sigma_yz / kr},
                     {"sigma_x_BB/sigma_x", ratio(wbb[0], sigma_x)},
                     {"sigma_yz_BB/sigma_yz", ratio(0.5 * (wbb[1] + wbb[2]), sigma_yz)},
                     {"sigma_x_CL/sigma_x", ratio(wcl[0], sigma_x)},
                     {"sigma_yz_CL/sigma_yz", ratio(0.5 * (wcl[1] + wcl[2]), sigma_yz)},
                     {"CL/BB", {ratio(wcl[0], wbb[0]), ratio(wcl[1], wbb[1]), ratio(wcl[2], wbb[2])}}};
    fin["g2_BB_0"] = g2_bb0;
    fin["g2_CL_0"] = g2_cl0;

    const auto sc = count_scattered(m, last);
    if (sigma_x > 0.0 && sigma_yz > 0.0) {
        const auto mc = mode_counting(sigma_x, sigma_yz, kr, dk_used, c.mode_beta);
        fin["mode_count"] = {{"delta_k_kr", dk_used / kr},
                             {"N_m", mc.mode_number},
                             {"N_sc", sc.n_sc},
                             {"occupancy", sc.n_sc / mc.mode_number},
                             {"g2_BB_estimate", bb_peak_estimate(mc.mode_number, sc.n_sc)},
                             {"g2_BB_over_estimate", g2_bb0 / bb_peak_estimate(mc.mode_number, sc.n_sc)}};
    }

    const auto q = quadrant_stats(m, last, c.eta);
    json qj;
    qj["eta"] = q.eta;
    qj["trajectories"] = q.trajectories;
    for (int i = 0; i < 4; ++i) {
        qj["mean"][quad_name(i)] = {{"value", q.mean[i]}, {"se", q.mean_se[i]}};
        for (int j = 0; j < 4; ++j) {
            const std::string key = std::string(quad_name(i)) + "-" + quad_name(j);
            qj["g2"][key] = {{"value", q.g2[i][j]}, {"se", q.g2_se[i][j]}};
            if (i != j) qj["V"][key] = {{"value", q.variance[i][j]}, {"se", q.variance_se[i][j]}};
        }
    }
    for (auto [i, j] : {std::pair{0, 2}, std::pair{1, 3}, std::pair{0, 1}}) {
        const auto chk = symmetric_pair_check(m, last, i, j, c.eta);
        qj["symmetric_check"][std::string(quad_name(i)) + "-" + quad_name(j)] = {
            {"V_direct", chk.v_direct},       {"V_alt", chk.v_alt},
            {"identity_error", std::abs(chk.v_direct - chk.v_alt)},
            {"g_ii", chk.g_ii},               {"g_ij", chk.g_ij},
            {"squeezed", chk.squeezed},       {"cauchy_schwarz_violated", chk.cs_violated}};
    }
    json sweep = json::array();
    for (double eta : {0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0}) {
        const auto qe = quadrant_stats(m, last, eta);
        sweep.push_back({{"eta", eta},
                         {"V_A-C", qe.variance[0][2]},
                         {"V_A-C_se", qe.variance_se[0][2]},
                         {"V_B-D", qe.variance[1][3]},
                         {"V_B-D_se", qe.variance_se[1][3]}});
    }
    qj["eta_sweep"] = sweep;
    fin["quadrants"] = qj;
    out["final"] = fin;
    return out;
}

namespace {

void write_collision_reports(const fs::path& dir, const RunConfig& c, const json& summary) {
    const std::string head = csv_header(c);
    const json& fin = summary.at("final");
    std::ostringstream gp_profiles, gp_corr;

    if (fin.at("halo").contains("profile")) {
        const auto& p = fin["halo"]["profile"];
        std::ostringstream csv;
        csv << head << "k_over_kr,n,se,modes\n" << std::setprecision(10);
        for (std::size_t i = 0; i < p["k_kr"].size(); ++i)
            csv << p["k_kr"][i].get<double>() << ',' << p["n"][i].get<double>() << ','
                << p["se"][i].get<double>() << ',' << p["modes"][i].get<int>() << '\n';
        if (c.write_csv) write_text(dir / "profiles" / "halo.csv", csv.str());
        const auto& f = fin["halo"]["fit"];
        gp_profiles << "# config_hash=" << c.hash() << "\nset datafile separator ','\n"
                    << "set xlabel 'k/k_r'\nset ylabel 'n(k)'\n"
                    << "f(x) = " << f["amplitude"].get<double>() << "*exp(-(x-"
                    << f["center"].get<double>() << ")**2/(2*" << f["width"].get<double>()
                    << "**2))\n"
                    << "plot 'halo.csv' using 1:2:3 with yerrorbars title 'radial profile', "
                       "f(x) title 'Gaussian fit'\n";
        if (c.write_gnuplot) write_text(dir / "profiles" / "halo.gp", gp_profiles.str());
    }

    gp_corr << "# config_hash=" << c.hash() << "\nset datafile separator ','\n"
            << "set multiplot layout 2,3\n";
    for (const char* kind : {"BB", "CL"})
        for (const char* ax : {"x", "y", "z"}) {
            const auto& j = fin["correlations"][kind][ax];
            std::ostringstream csv;
            csv << head << "dk_over_kr,g2,se\n" << std::setprecision(10);
            for (std::size_t i = 0; i < j["dk_kr"].size(); ++i)
                csv << j["dk_kr"][i].get<double>() << ',' << j["g2"][i].get<double>() << ','
                    << j["se"][i].get<double>() << '\n';
            const std::string name = std::string(kind) + "_" + ax + ".csv";
            if (c.write_csv) write_text(dir / "correlations" / name, csv.str());
            gp_corr << "set title '" << kind << " along " << ax << "'\nset xlabel 'dk/k_r'\n";
            if (j.contains("fit"))
                gp_corr << "plot '" << name << "' using 1:2:3 with yerrorbars notitle, 1+"
                        << j["fit"]["amplitude"].get<double>() << "*exp(-x**2/(2*"
                        << j["fit"]["width"].get<double>() << "**2)) notitle\n";
            else
                gp_corr << "plot '" << name << "' using 1:2:3 with yerrorbars notitle\n";
        }
    gp_corr << "unset multiplot\n";
    if (c.write_gnuplot) write_text(dir / "correlations" / "correlations.gp", gp_corr.str());

    json q = fin.at("quadrants");
    q["config_hash"] = c.hash();
    q["base_seed"] = c.base_seed;
    write_text(dir / "quadrants.json", q.dump(2) + "\n");
    std::ostringstream eta_csv;
    eta_csv << head << "eta,V_AC,V_AC_se,V_BD,V_BD_se\n";
    for (const auto& e : q["eta_sweep"])
        eta_csv << e["eta"].get<double>() << ',' << e["V_A-C"].get<double>() << ','
                << e["V_A-C_se"].get<double>() << ',' << e["V_B-D"].get<double>() << ','
                << e["V_B-D_se"].get<double>() << '\n';
    if (c.write_csv) write_text(dir / "quadrants_eta.csv", eta_csv.str());
    if (c.write_gnuplot)
        write_text(dir / "quadrants.gp",
               "# config_hash=" + c.hash() +
                   "\nset datafile separator ','\nset xlabel 'detection efficiency'\n"
                   "set ylabel 'V'\nplot 'quadrants_eta.csv' using 1:2:3 with yerrorbars "
                   "title 'V_{A-C}', '' using 1:4:5 with yerrorbars title 'V_{B-D}', 1 notitle\n");
}

std::vector<double> fewmode_times(const RunConfig& c, double gbar) {
    std::vector<double> t;
    for (double g : c.fewmode.gbar_times) t.push_back(g / gbar);
    return t;
}

struct FewModeCase {
    Lattice3D lattice;
    std::vector<std::complex<double>> alpha;
    PositivePRun run;
    std::vector<double> times;
    double gbar;
};

FewModeCase fewmode_case(const RunConfig& c, std::size_t idx) {
    const auto& f = c.fewmode;
    const Lattice3D lat = Lattice3D::few_mode(f.lattices[idx], f.lengths);
    double kin = 0.0;
    for (int a = 0; a < 3; ++a)
        if (lat.points(a) > 1) {
            const double w = hbar * lat.dk(a) * lat.dk(a) / (2.0 * c.physical.mass);
            kin = kin > 0.0 ? std::min(kin, w) : w;
        }
    if (!(kin > 0.0)) throw ConfigError("fewmode: lattice has a single mode");
    const double gbar = f.gbar_over_kinetic * kin;
    PositivePRun run;
    run.mass = c.physical.mass;
    run.U0 = gbar * lat.box_volume() / (2.0 * f.pump_atoms);  // gbar = 2 U0 N_p / V
    run.n_trajectories = f.trajectories;
    run.steps = f.steps;
    run.base_seed = f.base_seed;
    run.workers = c.workers;
    std::vector<std::complex<double>> alpha(lat.size(), 0.0);
    alpha[0] = std::sqrt(f.pump_atoms);
    return {lat, alpha, run, fewmode_times(c, gbar), gbar};
}

json analyze_fewmode(const fs::path& dir, const RunConfig& c) {
    json rep;
    rep["config_hash"] = c.hash();
    rep["base_seed"] = c.fewmode.base_seed;
    bool pass = true;
    json cases = json::array();
    for (std::size_t i = 0; i < c.fewmode.lattices.size(); ++i) {
        const auto fc = fewmode_case(c, i);
        const auto exact = evolve_exact(
            FewModeSystem::from_lattice(fc.lattice, fc.run.mass, fc.run.U0, fc.alpha), fc.times);
        const fs::path cp = dir / "checkpoints";
        const auto samples = load_samples(cp / ("fewmode_" + std::to_string(i) + ".bin"));
        const auto cmp = compare_moments(exact, samples);
        json cj;
        cj["points"] = c.fewmode.lattices[i];
        cj["modes"] = fc.lattice.size();
        cj["gbar_per_s"] = fc.gbar;
        cj["gbar_times"] = c.fewmode.gbar_times;
        cj["comparison"] = json::parse(cmp.to_json());
        cj["exact_basis_size"] = exact.back().basis_size;
        cj["exact_max_number_drift"] = 0.0;
        for (const auto& e : exact)
            cj["exact_max_number_drift"] =
                std::max(cj["exact_max_number_drift"].get<double>(),
                         std::abs(e.total_number - exact.front().total_number));
        pass = pass && cmp.pass;
        const fs::path fine = cp / ("fewmode_" + std::to_string(i) + "_fine.bin");
        if (c.fewmode.step_halving && fs::exists(fine)) {
            const auto coarse =
                load_samples(cp / ("fewmode_" + std::to_string(i) + "_coarse.bin"));
            const auto h = compare_step_halving(coarse, load_samples(fine));
            cj["step_halving"] = json::parse(h.to_json());
            pass = pass && h.pass;
        }
        cases.push_back(cj);
    }
    rep["cases"] = cases;
    rep["pass"] = pass;
    return rep;
}

}  // namespace

json validate_fewmode(const RunConfig& c, const fs::path& dir, const RunOptions& o) {
    if (c.kind != "fewmode") throw ConfigError("validate needs a few-mode configuration");
    const fs::path cp = dir.empty() ? fs::path() : dir / "checkpoints";
    if (!cp.empty()) fs::create_directories(cp);
    json rep;
    bool pass = true;
    json cases = json::array();
    for (std::size_t i = 0; i < c.fewmode.lattices.size(); ++i) {
        const auto fc = fewmode_case(c, i);
        say(o, "few-mode lattice " + std::to_string(i) + ": " + std::to_string(fc.lattice.size()) +
                   " modes, " + std::to_string(fc.run.n_trajectories) + " trajectories");
        const auto exact = evolve_exact(
            FewModeSystem::from_lattice(fc.lattice, fc.run.mass, fc.run.U0, fc.alpha), fc.times);
        const auto samples = sample_positive_p(fc.lattice, fc.alpha, fc.run, fc.times);
        const auto cmp = compare_moments(exact, samples);
        json cj{{"points", c.fewmode.lattices[i]},
                {"modes", fc.lattice.size()},
                {"comparison", json::parse(cmp.to_json())}};
        pass = pass && cmp.pass;
        if (!cp.empty()) save_samples(samples, cp / ("fewmode_" + std::to_string(i) + ".bin"));
        if (c.fewmode.step_halving) {
            PositivePRun coarse = fc.run, fine = fc.run;
            coarse.noise_refinement = 2;
            fine.steps *= 2;
            const auto sc = sample_positive_p(fc.lattice, fc.alpha, coarse, fc.times);
            const auto sf = sample_positive_p(fc.lattice, fc.alpha, fine, fc.times);
            const auto h = compare_step_halving(sc, sf);
            cj["step_halving"] = json::parse(h.to_json());
            pass = pass && h.pass;
            if (!cp.empty()) {
                save_samples(sc, cp / ("fewmode_" + std::to_string(i) + "_coarse.bin"));
                save_samples(sf, cp / ("fewmode_" + std::to_string(i) + "_fine.bin"));
            }
        }
        cases.push_back(cj);
    }
    rep["cases"] = cases;
    rep["pass"] = pass;
    return rep;
}

json analyze(const fs::path& dir) {
    const RunConfig c = config_from_dir(dir);
    json summary;
    if (c.kind == "fewmode") {
        summary = analyze_fewmode(dir, c);
        write_text(dir / "validation.json", summary.dump(2) + "\n");
    } else {
        auto cp = read_checkpoint(dir / "checkpoints", c.hash());
        if (!cp) throw ConfigError("no checkpoint in " + (dir / "checkpoints").string());
        const auto& man = cp->first;
        if (static_cast<long>(man.completed_blocks) * man.block_size < c.trajectories)
            throw ConfigError("run in " + dir.string() + " is incomplete (" +
                              std::to_string(cp->second.n_valid + cp->second.n_invalid) + " of " +
                              std::to_string(c.trajectories) + " trajectories); resume it");
        const json g = read_json(dir / "ground.json");
        summary = analyze_moments(c, cp->second, g.at("sigma_x_m"), g.at("sigma_yz_m"));
        summary["ground_state"] = g;
        write_collision_reports(dir, c, summary);
    }
    summary["config_hash"] = c.hash();
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    return summary;
}

namespace {

struct ScenarioInputs {
    double t_final;
    double cell_volume;
    bool a11_bound;
    double beta;
    std::optional<double> sigma_x, sigma_yz;  // 1/m
    std::optional<double> halo_width;         // 1/m
    std::optional<double> scattered;
};

json scenario_predictions(const PhysicalParams& p, const ScenarioInputs& in) {
    const double kr = p.k_r();
    const double rho0 = rho0_of(p);
    json j;
    j["k_r_per_m"] = kr;
    j["t_final_us"] = in.t_final / us;
    const double dk_sp = halo_width_spontaneous(p.mass, kr, in.t_final);
    const double dk_st = halo_width_stimulated(p.a00, rho0, kr);
    j["delta_k_spontaneous_kr"] = dk_sp / kr;
    j["delta_k_stimulated_kr"] = dk_st;

    const auto tf = thomas_fermi_from_peak(p, rho0);
    j["thomas_fermi"] = {{"atom_number", tf.atom_number},
                         {"mu_J", tf.mu},
                         {"radius_um", {tf.radius[0] / um, tf.radius[1] / um, tf.radius[2] / um}}};
    const auto pump = UniformPumpParams::from(p, rho0);
    j["gbar_per_s"] = pump.gbar;
    json widths = json::array();
    for (double gt : {1.0, 7.0}) {
        const auto w = pump_halo_width(gt / pump.gbar, pump);
        widths.push_back({{"gbar_t", gt},
                          {"t_us", gt / pump.gbar / us},
                          {"hwhm_kr", w.hwhm / kr},
                          {"rms_equivalent_kr", w.rms_equivalent / kr},
                          {"half_span_kr", w.half_span / kr}});
    }
    j["uniform_pump_widths"] = widths;

    const auto cm = CollisionModelParams::from(p);
    const double total = collision_duration_total(cm);
    const double t_exp = 1.0 / p.trap_omega[1];
    j["collision_model"] = {{"N_sc_infinity", total},
                            {"N_sc_at_1_over_omega_y", collision_duration_model(cm, t_exp)},
                            {"fraction_at_1_over_omega_y",
                             collision_duration_model(cm, t_exp) / total},
                            {"N_sc_infinity_over_N", total / cm.atom_number}};

    const double sx = in.sigma_x.value_or(1.64 / tf.radius[0]);
    const double syz = in.sigma_yz.value_or(1.64 / tf.radius[1]);
    const double dk = in.halo_width.value_or(dk_sp);
    const auto mc = mode_counting(sx, syz, kr, dk, in.beta);
    json m{{"sigma_x_kr", sx / kr},
           {"sigma_yz_kr", syz / kr},
           {"sigma_source", in.sigma_x ? "given" : "Thomas-Fermi 1.64/R"},
           {"delta_k_kr", dk / kr},
           {"N_m", mc.mode_number},
           {"shell_volume_kr3", mc.shell_volume / (kr * kr * kr)},
           {"mode_volume_kr3", mc.mode_volume / (kr * kr * kr)}};
    if (in.scattered) {
        m["N_sc"] = *in.scattered;
        m["occupancy"] = *in.scattered / mc.mode_number;
        m["g2_BB_estimate"] = bb_peak_estimate(mc.mode_number, *in.scattered);
    }
    j["mode_count"] = m;
    j["quadrature_width_kr"] = minimum_halo_width(syz / kr, dk_st);
    j["max_sim_time_us"] =
        max_sim_time(p.mass, in.a11_bound ? p.a11 : p.a00, rho0, in.cell_volume) / us;
    return j;
}

void format_scenario(std::ostringstream& o, const json& j) {
    auto row = [&](const std::string& name, const json& v, const std::string& unit = "") {
        o << "  " << std::left << std::setw(46) << name << ' ';
        if (v.is_number()) {
            o << v.get<double>();
        } else if (v.is_array()) {
            for (std::size_t i = 0; i < v.size(); ++i) o << (i ? ", " : "") << v[i].get<double>();
        } else {
            o << v.dump();
        }
        o << (unit.empty() ? "" : " " + unit) << '\n';
    };
    row("recoil wavevector k_r", j["k_r_per_m"], "1/m");
    row("collision time", j["t_final_us"], "us");
    row("spontaneous halo width", j["delta_k_spontaneous_kr"], "k_r");
    row("stimulated halo width", j["delta_k_stimulated_kr"], "k_r");
    row("Thomas-Fermi atom number", j["thomas_fermi"]["atom_number"]);
    row("coupling rate gbar", j["gbar_per_s"], "1/s");
    for (const auto& w : j["uniform_pump_widths"]) {
        const std::string tag =
            "gbar t = " + std::to_string(static_cast<int>(w["gbar_t"].get<double>()));
        row("uniform pump time, " + tag, w["t_us"], "us");
        row("uniform pump HWHM, " + tag, w["hwhm_kr"], "k_r");
        row("uniform pump rms-equivalent width, " + tag, w["rms_equivalent_kr"], "k_r");
    }
    const auto& m = j["mode_count"];
    row("source widths sigma_x, sigma_yz", json::array({m["sigma_x_kr"], m["sigma_yz_kr"]}), "k_r");
    row("halo width for the mode count", m["delta_k_kr"], "k_r");
    row("scattering modes N_m", m["N_m"]);
    if (m.contains("occupancy")) {
        row("occupancy N_sc/N_m", m["occupancy"]);
        row("back-to-back peak estimate 1 + N_m/N_sc", m["g2_BB_estimate"]);
    }
    row("quadrature-sum width", j["quadrature_width_kr"], "k_r");
    row("collision model N_sc(1/omega_y)/N_sc(inf)",
        j["collision_model"]["fraction_at_1_over_omega_y"]);
    row("collision model N_sc(inf)/N", j["collision_model"]["N_sc_infinity_over_N"]);
    row("positive-P time bound", j["max_sim_time_us"], "us");
}

}  // namespace

json predict(const RunConfig& c, std::optional<double> sigma_x, std::optional<double> sigma_yz) {
    const bool a11 = c.time_bound_length == "a11";
    json j;
    j["config_hash"] = c.hash();
    j["simulated"] = scenario_predictions(
        c.physical, {c.t_final, c.lattice().cell_volume(), a11, c.mode_beta, sigma_x, sigma_yz, {}, {}});
    if (c.reference) {
        const auto& r = *c.reference;
        const double kr = r.physical.k_r();
        auto opt = [kr](double v) { return v > 0.0 ? std::optional<double>(v * kr) : std::nullopt; };
        j["reference"] = scenario_predictions(
            r.physical, {c.t_final, c.lattice().cell_volume(), a11, c.mode_beta, opt(r.sigma_x_kr),
                         opt(r.sigma_yz_kr), opt(r.delta_k_kr),
                         r.scattered > 0.0 ? std::optional<double>(r.scattered) : std::nullopt});
    }
    return j;
}

std::string format_predictions(const json& j) {
    std::ostringstream o;
    o << std::setprecision(4);
    o << "config_hash " << j.value("config_hash", "") << '\n';
    o << "simulated scenario\n";
    format_scenario(o, j.at("simulated"));
    if (j.contains("reference")) {
        o << "reference (unscaled) scenario\n";
        format_scenario(o, j.at("reference"));
    }
    return o.str();
}

}  // namespace bec4wm

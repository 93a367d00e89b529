// Acceptance run: one PASS/FAIL line per criterion. Always exits 0 unless the
// harness itself breaks; failures are reported, not hidden.
//
// usage: bec4wm_acceptance [work_dir]   (default: ./acceptance_runs)
// The desk collision run checkpoints into work_dir and resumes when rerun.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "bec4wm/analytic.hpp"
#include "bec4wm/checkpoint.hpp"
#include "bec4wm/config.hpp"
#include "bec4wm/constants.hpp"
#include "bec4wm/dynamics.hpp"
#include "bec4wm/ensemble.hpp"
#include "bec4wm/groundstate.hpp"
#include "bec4wm/lattice.hpp"
#include "bec4wm/runner.hpp"

using namespace bec4wm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects sub-checks of one criterion.
struct Criterion {
    int id;
    std::string title;
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& text) {
        pass = pass && ok;
        detail << "\n    " << (ok ? "ok   " : "FAIL ") << text;
    }
    void note(const std::string& text) { detail << "\n    note " << text; }
    void print(double secs) const {
        std::printf("criterion %d: %s  %s (%.1f s)%s\n", id, pass ? "PASS" : "FAIL", title.c_str(),
                    secs, detail.str().c_str());
        std::fflush(stdout);
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

bool within(double value, double target, double rel) {
    return std::abs(value / target - 1.0) <= rel;
}

void criterion_analytic() {
    const auto t0 = Clock::now();
    Criterion c{1, "analytic formula suite"};
    const PhysicalParams he = PhysicalParams::helium_main();
    const double kr = he.k_r();

    const auto w = gaussian_ansatz_widths(1.0);
    c.check(w.bb == std::sqrt(2.0) && w.cl == 2.0, fmt("ansatz widths %.15g, %.15g", w.bb, w.cl));

    const double spont = halo_width_spontaneous(he.mass, kr, 25 * us) / kr;
    c.check(within(spont, 0.075, 0.01), fmt("spontaneous width %.5f k_r vs 0.075 (1%%)", spont));

    const double stim = halo_width_stimulated(he.a00, 2.5e19, kr);
    c.check(within(stim, 0.05, 0.02), fmt("stimulated width He* %.5f vs 0.05 (2%%)", stim));

    // Na: a = 2.75 nm; k_r from the spontaneous estimate of the 0.13 k_r
    // width at 300 us; peak density assumed equal to the He* value.
    const double na_kr = std::sqrt(sodium23_mass / (hbar * 300 * us * 0.13));
    const double na = halo_width_stimulated(2.75 * nm, 2.5e19, na_kr);
    c.check(within(na, 0.096, 0.02),
            fmt("stimulated width Na %.5f vs 0.096 (2%%), k_r = %.3g 1/m, rho0 = 2.5e19 assumed", na,
                na_kr));

    const auto m = mode_counting(0.0025 * kr, 0.055 * kr, kr, 0.10 * kr);
    c.check(within(m.mode_number, 26400.0, 0.05), fmt("N_m %.0f vs 26400 (5%%)", m.mode_number));
    const double occ = 1750.0 / m.mode_number;
    c.check(within(occ, 0.066, 0.05), fmt("occupancy %.4f vs 0.066 (5%%)", occ));
    const double bb = bb_peak_estimate(m.mode_number, 1750.0);
    c.check(within(bb, 16.0, 0.05), fmt("g2_BB estimate %.2f vs 16 (5%%)", bb));

    const double quad = minimum_halo_width(0.055, stim);
    c.check(within(quad, 0.074, 0.02), fmt("quadrature width %.5f k_r vs 0.074 (2%%)", quad));
    const double secs = seconds_since(t0);
    c.check(secs < 1.0, fmt("runtime %.3f s < 1 s", secs));
    c.print(secs);
}

void criterion_pump() {
    const auto t0 = Clock::now();
    Criterion c{2, "undepleted-pump width trajectory"};
    const PhysicalParams he = PhysicalParams::helium_main();
    const auto pump = UniformPumpParams::from(he, 2.5e19);
    c.note(fmt("gbar = %.4g 1/s; widths are HWHM / sqrt(2 ln 2) in units of k_r", pump.gbar));
    const double targets_w[2] = {0.12, 0.027};
    const double targets_t[2] = {20.0, 140.0};
    const double gts[2] = {1.0, 7.0};
    for (int i = 0; i < 2; ++i) {
        const double t = gts[i] / pump.gbar;
        const auto w = pump_halo_width(t, pump);
        const double dk = w.rms_equivalent / pump.k_r;
        c.check(within(dk, targets_w[i], 0.10),
                fmt("gbar t = %.0f: width %.4f vs %.3f (10%%); plain HWHM %.4f", gts[i], dk,
                    targets_w[i], w.hwhm / pump.k_r));
        c.check(within(t / us, targets_t[i], 0.05),
                fmt("gbar t = %.0f: t = %.2f us vs %.0f us (5%%)", gts[i], t / us, targets_t[i]));
    }
    const double secs = seconds_since(t0);
    c.check(secs < 10.0, fmt("runtime %.3f s < 10 s", secs));
    c.print(secs);
}

void criterion_oracle(const fs::path& work) {
    const auto t0 = Clock::now();
    Criterion c{3, "few-mode oracle equivalence"};
    try {
        RunConfig cfg = preset("fewmode-validate");
        const json rep = validate_fewmode(cfg, work / "fewmode");
        c.note(fmt("%.0f trajectories, base seed %.0f", cfg.fewmode.trajectories,
                   static_cast<double>(cfg.fewmode.base_seed)));
        c.check(cfg.fewmode.trajectories >= 10000, "at least 1e4 trajectories");
        for (const auto& cj : rep["cases"]) {
            const auto& cmp = cj["comparison"];
            const double maxz = cmp["max_abs_z"].get<double>();
            c.check(cmp["pass"].get<bool>(),
                    fmt("%.0f modes: %.0f moments, max |z| = %.2f (< 3)", cj["modes"].get<double>(),
                        static_cast<double>(cmp["moments"].size()), maxz));
            if (cj.contains("step_halving")) {
                const auto& sh = cj["step_halving"];
                c.check(sh["pass"].get<bool>(),
                        fmt("%.0f modes: step halving max |fine - coarse| / se = %.2f (< 1)",
                            cj["modes"].get<double>(), sh["max_ratio"].get<double>()));
            } else {
                c.check(false, "step halving missing");
            }
        }
    } catch (const std::exception& e) {
        c.check(false, std::string("error: ") + e.what());
    }
    c.print(seconds_since(t0));
}

// Desk collision; returns the summary (empty on error) for criterion 6.
json criterion_collision(const fs::path& work) {
    const auto t0 = Clock::now();
    Criterion c{4, "desk-scale collision"};
    json s;
    try {
        RunConfig cfg = preset("main");
        cfg.output_dir = work / "main";
        RunOptions opts;
        opts.resume = true;
        opts.log = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
        s = run(cfg, opts);
        const auto& f = s["final"];
        const auto lat = cfg.lattice();
        c.note(fmt("lattice %.0fx%.0fx%.0f, %.0f valid trajectories", lat.points(0), lat.points(1),
                   lat.points(2), s["trajectories_valid"].get<double>()));
        c.check(s["trajectories_valid"].get<int>() >= 400, "at least 400 trajectories");

        const auto& cl = f["correlations"]["CL"]["y"];
        const double gcl = f["g2_CL_0"].get<double>(), gcl_se = cl["g2_0_se"].get<double>();
        c.check(std::abs(gcl - 2.0) <= 0.3, fmt("(a) g2_CL(0) = %.3f +- %.3f vs 2 +- 0.3", gcl, gcl_se));

        const auto& mc = f["mode_count"];
        const double ratio = mc["g2_BB_over_estimate"].get<double>();
        c.check(ratio >= 0.5 && ratio <= 2.0,
                fmt("(b) g2_BB(0) = %.2f, 1 + N_m/N_sc = %.2f (N_m %.0f, N_sc %.0f)",
                    f["g2_BB_0"].get<double>(), mc["g2_BB_estimate"].get<double>(),
                    mc["N_m"].get<double>(), mc["N_sc"].get<double>()) +
                    fmt(", ratio %.2f in [0.5, 2]", ratio));

        const auto& V = f["quadrants"]["V"];
        const double vac = V["A-C"]["value"].get<double>(), vac_se = V["A-C"]["se"].get<double>();
        const double vab = V["A-B"]["value"].get<double>(), vab_se = V["A-B"]["se"].get<double>();
        c.check(vac + 3.0 * vac_se < 1.0, fmt("(c) V_A-C = %.3f +- %.3f below 1 by 3 s.e.", vac, vac_se));
        c.check(vab > 1.0 - 3.0 * vab_se,
                fmt("(c) V_A-B = %.3f +- %.3f not below 1 by 3 s.e.", vab, vab_se));

        double id_err = 0.0;
        for (const auto& [k, v] : f["quadrants"]["symmetric_check"].items())
            id_err = std::max(id_err, v["identity_error"].get<double>() /
                                          std::max(1.0, std::abs(v["V_direct"].get<double>())));
        c.check(id_err < 1e-10, fmt("(d) V identity max relative error %.2e (< 1e-10)", id_err));

        const double hr = f["halo"]["ratio_to_spontaneous"].get<double>();
        c.check(std::abs(hr - 1.0) <= 0.35,
                fmt("(e) halo width %.4f k_r vs m/(hbar k_r dt) = %.4f k_r: ratio %.2f (within 35%%)",
                    f["halo"]["delta_k_kr"].get<double>(),
                    f["halo"]["spontaneous_estimate_kr"].get<double>(), hr));

        const double lin = s["linearity"]["ratio"].get<double>();
        c.check(std::abs(lin - 2.0) <= 0.3,
                fmt("(f) N_sc(t)/N_sc(t/2) = %.3f +- %.3f vs 2 +- 15%%", lin,
                    s["linearity"]["se"].get<double>()));

        const auto& wr = f["widths"]["CL/BB"];
        bool ok = true;
        for (const auto& r : wr) ok = ok && r.get<double>() >= 1.0 && r.get<double>() <= 1.4;
        c.check(ok, fmt("(g) sigma_CL/sigma_BB = %.3f, %.3f, %.3f (x, y, z) in [1.0, 1.4]",
                        wr[0].get<double>(), wr[1].get<double>(), wr[2].get<double>()));
    } catch (const std::exception& e) {
        c.check(false, std::string("error: ") + e.what());
        s = json();
    }
    c.print(seconds_since(t0));
    return s;
}

void criterion_collision_model() {
    const auto t0 = Clock::now();
    Criterion c{5, "collision-duration model"};
    try {
        const auto p = CollisionModelParams::from(PhysicalParams::helium_main());
        const double at = collision_duration_model(p, 1.0 / p.trap_omega[1]);
        const double total = collision_duration_total(p);
        c.check(within(at / total, 0.66, 0.10),
                fmt("N_sc(1/omega_y)/N_sc(inf) = %.3f vs 0.66 (10%%); 1/omega_y = %.1f us", at / total,
                    1e6 / p.trap_omega[1]));
        c.note(fmt("N_sc(inf)/N = %.3f", total / p.atom_number));
    } catch (const std::exception& e) {
        c.check(false, std::string("error: ") + e.what());
    }
    const double secs = seconds_since(t0);
    c.check(secs < 60.0, fmt("runtime %.2f s < 60 s", secs));
    c.print(secs);
}

void criterion_structure(const fs::path& work, const json& summary) {
    const auto t0 = Clock::now();
    Criterion c{6, "conservation and structure"};
    try {
        const RunConfig cfg = preset("main");
        const Lattice3D lat = cfg.lattice();
        const SpectralTransform fft(lat);

        std::mt19937_64 rng(11);
        std::normal_distribution<double> g;
        ComplexField f(lat, Space::position);
        for (auto& v : f.values) v = {g(rng), g(rng)};
        double nx = 0.0, nk = 0.0;
        for (const auto& v : f.values) nx += std::norm(v);
        nx *= lat.cell_volume();
        for (const auto& v : fft.to_momentum(f).values) nk += std::norm(v);
        c.check(std::abs(nk / nx - 1.0) < 1e-10, fmt("Parseval relative error %.1e", std::abs(nk / nx - 1.0)));

        // Noise-off GPE from the desk ground state.
        const GroundState gs = fs::exists(work / "main" / "ground.bin")
                                   ? load_ground_state(work / "main" / "ground.bin")
                                   : run_ground(cfg);
        const FieldPair init = initialize_collision(gs, cfg.physical);
        SimConfig sim = cfg.sim_config();
        sim.noise = false;
        sim.n_steps = 100;
        sim.t_final = cfg.t_final;
        sim.sample_times = {0.0, sim.t_final};
        const auto rec = run_trajectory(init, sim, 0, fft);
        auto number = [](const TrajectorySample& s) {
            double n = 0.0;
            for (std::size_t i = 0; i < s.a.size(); ++i) n += (s.a_tilde[i] * s.a[i]).real();
            return n;
        };
        const double drift = rec.valid ? std::abs(number(rec.samples[1]) / number(rec.samples[0]) - 1.0) : 1.0;
        c.check(rec.valid && drift < 1e-8, fmt("noise-off number drift %.1e over 100 steps (< 1e-8)", drift));

        if (summary.is_null()) {
            c.check(false, "no desk ensemble available for the ensemble checks");
        } else {
            const auto& smp = summary["samples"];
            const double n0 = smp.front()["total_number"].get<double>();
            double worst = 0.0, worst_im = 0.0, worst_frac = 0.0;
            for (const auto& x : smp) {
                const double se = x["total_number_se"].get<double>();
                if (se > 0.0) worst = std::max(worst, std::abs(x["total_number"].get<double>() - n0) / se);
                const double se_im = x["total_number_imag_se"].get<double>();
                if (se_im > 0.0)
                    worst_im = std::max(worst_im, std::abs(x["total_number_imag"].get<double>()) / se_im);
                worst_frac = std::max(worst_frac, x["imag_outlier_fraction"].get<double>());
            }
            c.check(worst < 3.0, fmt("ensemble <N> change max %.2f s.e. (< 3)", worst));
            c.check(worst_im < 3.0 && worst_frac < 0.01,
                    fmt("hermiticity: Im N max %.2f s.e. (< 3); bins with |Im n| > 3 s.e.: %.2f%% (< 1%%)",
                        worst_im, 100.0 * worst_frac));
        }

        // Worker-count independence on a small ensemble from the same source.
        RunConfig small = cfg;
        small.trajectories = 16;
        small.steps = 16;
        small.t_final = 4 * us;
        small.block_size = 4;
        small.sample_fractions = {1.0};
        SimConfig s1 = small.sim_config();
        s1.workers = 1;
        SimConfig s8 = s1;
        s8.workers = 8;
        AnalysisSpec spec = small.analysis;
        spec.k_r = cfg.physical.k_r();
        const auto m1 = simulate_ensemble(s1, init, spec);
        const auto m8 = simulate_ensemble(s8, init, spec);
        c.check(serialize_moments(m1) == serialize_moments(m8), "1 and 8 workers give identical moments");
    } catch (const std::exception& e) {
        c.check(false, std::string("error: ") + e.what());
    }
    const double secs = seconds_since(t0);
    c.print(secs);
}

void criterion_ground() {
    const auto t0 = Clock::now();
    Criterion c{7, "ground states"};
    try {
        GroundStateOptions o;
        o.boundary_margin = 1;
        const PhysicalParams he = PhysicalParams::helium_main();
        const Lattice3D lat({256, 32, 32}, {300 * um, 16 * um, 16 * um});
        const auto gs = solve_ground_state(he, lat, o);
        const double kr = he.k_r();
        c.check(within(gs.atom_number, 9.84e4, 0.02), fmt("main N = %.4g vs 9.84e4 (2%%)", gs.atom_number));
        c.check(within(gs.sigma_x / kr, 0.0025, 0.10), fmt("main sigma_x = %.5f k_r vs 0.0025 (10%%)", gs.sigma_x / kr));
        c.check(within(gs.sigma_yz / kr, 0.055, 0.10),
                fmt("main sigma_yz = %.4f k_r vs 0.055 (10%%)", gs.sigma_yz / kr));
        const auto tf = thomas_fermi_from_peak(he, 2.5e19);
        c.note(fmt("Thomas-Fermi N at the same peak density %.4g", tf.atom_number));

        const PhysicalParams sa = preset("small-a").reference->physical;
        const Lattice3D lat2({256, 32, 32}, {240 * um, 18 * um, 18 * um});
        const auto gs2 = solve_ground_state(sa, lat2, o);
        c.check(within(gs2.atom_number, 3.5e4, 0.05),
                fmt("halved scattering lengths N = %.4g vs 3.5e4 (5%%)", gs2.atom_number));
    } catch (const std::exception& e) {
        c.check(false, std::string("error: ") + e.what());
    }
    c.print(seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
    fs::create_directories(work);
    criterion_analytic();
    criterion_pump();
    criterion_oracle(work);
    const json summary = criterion_collision(work);
    criterion_collision_model();
    criterion_structure(work, summary);
    criterion_ground();
    return 0;
}

#include "bec4wm/groundstate.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <nlohmann/json.hpp>

#include "bec4wm/errors.hpp"
#include "bec4wm/fit.hpp"

namespace bec4wm {

void PhysicalParams::validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(mass)) throw ConfigError("mass must be positive");
    if (!positive(a00)) throw ConfigError("a00 must be positive");
    if (!(a11 >= 0.0) || !std::isfinite(a11)) throw ConfigError("a11 must be non-negative");
    for (double w : trap_omega)
        if (!positive(w)) throw ConfigError("trap frequencies must be positive");
    if (peak_density.has_value() == atom_number.has_value())
        throw ConfigError("exactly one of peak_density and atom_number must be set");
    if (peak_density && !positive(*peak_density)) throw ConfigError("peak_density must be positive");
    if (atom_number && !positive(*atom_number)) throw ConfigError("atom_number must be positive");
    if (!(v_r >= 0.0) || !std::isfinite(v_r)) throw ConfigError("v_r must be non-negative");
}

PhysicalParams PhysicalParams::helium_main() { return PhysicalParams{}; }

namespace {

double omega_bar(const PhysicalParams& p) {
    return std::cbrt(p.trap_omega[0] * p.trap_omega[1] * p.trap_omega[2]);
}

ThomasFermi tf_from_mu(const PhysicalParams& p, double mu) {
    ThomasFermi tf{};
    tf.mu = mu;
    const double g = hbar * p.U0_trapped();
    tf.peak_density = mu / g;
    for (int a = 0; a < 3; ++a)
        tf.radius[a] = std::sqrt(2.0 * mu / (p.mass * p.trap_omega[a] * p.trap_omega[a]));
    tf.atom_number =
        8.0 * pi / 15.0 * tf.peak_density * tf.radius[0] * tf.radius[1] * tf.radius[2];
    return tf;
}

// Imaginary-time propagator working in rate units (energies divided by hbar).
class ImaginaryTime {
public:
    ImaginaryTime(const PhysicalParams& p, const Lattice3D& lat)
        : lat_(lat), fft_(lat), U_(p.U0_trapped()), psi_(lat.size()), scratch_(lat.size()) {
        const auto& n = lat.points();
        trap_.resize(lat.size());
        kin_.resize(lat.size());
        for (int i = 0; i < n[0]; ++i)
            for (int j = 0; j < n[1]; ++j)
                for (int l = 0; l < n[2]; ++l) {
                    const std::size_t idx = lat.index(i, j, l);
                    const double x[3] = {lat.x_at(0, i), lat.x_at(1, j), lat.x_at(2, l)};
                    const double k[3] = {lat.k_at(0, i), lat.k_at(1, j), lat.k_at(2, l)};
                    double v = 0.0, t = 0.0;
                    for (int a = 0; a < 3; ++a) {
                        v += 0.5 * p.mass * p.trap_omega[a] * p.trap_omega[a] * x[a] * x[a] / hbar;
                        t += hbar * k[a] * k[a] / (2.0 * p.mass);
                    }
                    trap_[idx] = v;
                    kin_[idx] = t;
                }
    }

    std::vector<double>& psi() { return psi_; }

    double norm() const {
        double s = 0.0;
        for (double v : psi_) s += v * v;
        return s * lat_.cell_volume();
    }
    double peak() const {
        double m = 0.0;
        for (double v : psi_) m = std::max(m, v * v);
        return m;
    }
    void scale(double f) {
        for (double& v : psi_) v *= f;
    }

    struct Energy {
        double total;  // per atom, rate units
        double mu;     // per atom, rate units
    };

    // One Lie step K then V; returns the energy of the state on entry.
    Energy step(double dt) {
        double epot = 0.0, eint = 0.0, nrm = 0.0;
        for (std::size_t i = 0; i < psi_.size(); ++i) {
            const double r = psi_[i] * psi_[i];
            epot += trap_[i] * r;
            eint += 0.5 * U_ * r * r;
            nrm += r;
            scratch_[i] = psi_[i];
        }
        fft_.forward(scratch_.data());
        double ekin = 0.0;
        const double inv = 1.0 / static_cast<double>(lat_.size());
        for (std::size_t i = 0; i < psi_.size(); ++i) {
            ekin += kin_[i] * std::norm(scratch_[i]);
            scratch_[i] *= std::exp(-kin_[i] * dt) * inv;
        }
        ekin *= inv;  // raw Parseval factor; dV cancels in the per-atom ratio
        fft_.backward(scratch_.data());
        for (std::size_t i = 0; i < psi_.size(); ++i) {
            const double v = scratch_[i].real();
            psi_[i] = v * std::exp(-(trap_[i] + U_ * v * v) * dt);
        }
        return {(ekin + epot + eint) / nrm, (ekin + epot + 2.0 * eint) / nrm};
    }

    // ||H psi - mu psi|| / ||mu psi|| and mu (rate units).
    std::pair<double, double> residual() {
        for (std::size_t i = 0; i < psi_.size(); ++i) scratch_[i] = psi_[i];
        fft_.forward(scratch_.data());
        const double inv = 1.0 / static_cast<double>(lat_.size());
        for (std::size_t i = 0; i < psi_.size(); ++i) scratch_[i] *= kin_[i] * inv;
        fft_.backward(scratch_.data());
        double num = 0.0, nrm = 0.0;
        std::vector<double> h(psi_.size());
        for (std::size_t i = 0; i < psi_.size(); ++i) {
            h[i] = scratch_[i].real() + (trap_[i] + U_ * psi_[i] * psi_[i]) * psi_[i];
            num += h[i] * psi_[i];
            nrm += psi_[i] * psi_[i];
        }
        const double mu = num / nrm;
        double r = 0.0;
        for (std::size_t i = 0; i < psi_.size(); ++i) r += std::pow(h[i] - mu * psi_[i], 2);
        return {std::sqrt(r / nrm) / std::abs(mu), mu};
    }

private:
    Lattice3D lat_;
    SpectralTransform fft_;
    double U_;
    std::vector<double> trap_, kin_, psi_;
    CVector scratch_;
};

struct FixedNResult {
    double energy;
    double mu;
    int steps;
};

// Norm-conserving descent through a decreasing dt schedule. Rejects any step
// that raises the energy and halves dt.
FixedNResult relax_fixed_norm(ImaginaryTime& it, double N, double rate,
                              const GroundStateOptions& opt, int& budget) {
    const double levels[] = {0.5, 0.1, 0.02};
    it.scale(std::sqrt(N / it.norm()));
    std::vector<double> accepted = it.psi();
    std::vector<double> entry;
    double e_acc = std::numeric_limits<double>::infinity();
    FixedNResult res{0.0, 0.0, 0};
    for (double level : levels) {
        double dt = level / rate;
        const double dt_min = dt * 1e-4;
        int quiet = 0;
        while (true) {
            if (budget-- <= 0) throw NumericalError("ground state: step budget exhausted");
            entry = it.psi();
            const auto e = it.step(dt);
            ++res.steps;
            const double change = std::abs(e_acc - e.total) / std::abs(e.total) / (dt * rate);
            if (e.total > e_acc && !(change < opt.energy_tolerance)) {
                // The state produced from `accepted` raised the energy: redo with a smaller step.
                it.psi() = accepted;
                dt *= 0.5;
                if (dt < dt_min) throw NumericalError("ground state: step size underflow");
                quiet = 0;
                continue;
            }
            accepted.swap(entry);
            e_acc = e.total;
            res.energy = e.total;
            res.mu = e.mu;
            it.scale(std::sqrt(N / it.norm()));
            if (std::isfinite(change) && change < opt.energy_tolerance) {
                if (++quiet >= 3) break;
            } else {
                quiet = 0;
            }
        }
    }
    return res;
}

}  // namespace

ThomasFermi thomas_fermi_from_peak(const PhysicalParams& p, double peak_density) {
    return tf_from_mu(p, hbar * p.U0_trapped() * peak_density);
}

ThomasFermi thomas_fermi_from_number(const PhysicalParams& p, double atom_number) {
    const double wb = omega_bar(p);
    const double abar = std::sqrt(hbar / (p.mass * wb));
    const double mu = 0.5 * hbar * wb * std::pow(15.0 * atom_number * p.a11 / abar, 0.4);
    return tf_from_mu(p, mu);
}

GroundState solve_ground_state(const PhysicalParams& params, const Lattice3D& lattice,
                               const GroundStateOptions& opt) {
    params.validate();
    const bool interacting = params.a11 > 0.0;
    const bool by_peak = params.peak_density.has_value();

    // Initial estimate and boundary pre-check.
    std::array<double, 3> extent{};
    std::array<double, 3> osc{};
    for (int a = 0; a < 3; ++a) osc[a] = std::sqrt(hbar / (params.mass * params.trap_omega[a]));
    ThomasFermi tf{};
    if (interacting) {
        tf = by_peak ? thomas_fermi_from_peak(params, *params.peak_density)
                     : thomas_fermi_from_number(params, *params.atom_number);
    }
    const bool use_tf = interacting && tf.radius[1] > 2.0 * osc[1] && tf.radius[2] > 2.0 * osc[2];
    for (int a = 0; a < 3; ++a) {
        extent[a] = std::max(use_tf ? tf.radius[a] : 0.0, 3.0 * osc[a]);
        if (extent[a] > lattice.length(a) / 2.0 - opt.boundary_margin * lattice.dx(a))
            throw ConfigError("ground state: cloud (extent " + std::to_string(extent[a]) +
                              " m on axis " + std::to_string(a) + ") does not fit the box");
    }

    ImaginaryTime it(params, lattice);
    auto& psi = it.psi();
    const auto& n = lattice.points();
    for (int i = 0; i < n[0]; ++i)
        for (int j = 0; j < n[1]; ++j)
            for (int l = 0; l < n[2]; ++l) {
                const double x[3] = {lattice.x_at(0, i), lattice.x_at(1, j), lattice.x_at(2, l)};
                double v = 0.0;
                if (use_tf) {
                    double s = 1.0;
                    for (int a = 0; a < 3; ++a) s -= x[a] * x[a] / (tf.radius[a] * tf.radius[a]);
                    v = std::sqrt(std::max(s, 0.0) + 1e-4);
                } else {
                    double s = 0.0;
                    for (int a = 0; a < 3; ++a) s += x[a] * x[a] / (2.0 * osc[a] * osc[a]);
                    v = std::exp(-s);
                }
                psi[lattice.index(i, j, l)] = v;
            }

    const double osc_rate = 0.5 * (params.trap_omega[0] + params.trap_omega[1] + params.trap_omega[2]);
    const double rate = std::max(interacting ? tf.mu / hbar : 0.0, osc_rate);
    int budget = opt.max_steps;

    double N = 0.0;
    FixedNResult r{};
    if (!by_peak) {
        N = *params.atom_number;
        r = relax_fixed_norm(it, N, rate, opt, budget);
    } else {
        const double target = *params.peak_density;
        it.scale(std::sqrt(target / it.peak()));
        // Coarse relaxation holding the peak fixed gives a good starting N.
        double n_prev = it.norm();
        for (int s = 0; s < 4000; ++s) {
            if (budget-- <= 0) throw NumericalError("ground state: step budget exhausted");
            it.step(0.5 / rate);
            it.scale(std::sqrt(target / it.peak()));
            const double n_now = it.norm();
            if (std::abs(n_now - n_prev) / n_now < 1e-7 && s > 20) break;
            n_prev = n_now;
        }
        N = it.norm();
        double logN_prev = 0.0, logP_prev = 0.0;
        bool have_prev = false;
        for (int outer = 0;; ++outer) {
            if (outer >= opt.max_outer)
                throw NumericalError("ground state: peak-density search did not converge");
            r = relax_fixed_norm(it, N, rate, opt, budget);
            const double peak = it.peak();
            if (std::abs(peak / target - 1.0) < opt.peak_tolerance) break;
            const double logN = std::log(N), logP = std::log(peak);
            double slope = 0.4;  // Thomas-Fermi: peak ~ N^(2/5)
            if (!interacting) slope = 1.0;
            if (have_prev && std::abs(logN - logN_prev) > 1e-12) {
                const double s = (logP - logP_prev) / (logN - logN_prev);
                if (s > 0.05 && s < 2.0) slope = s;
            }
            logN_prev = logN;
            logP_prev = logP;
            have_prev = true;
            N = std::exp(logN + (std::log(target) - logP) / slope);
        }
    }

    auto [res, mu_rate] = it.residual();
    if (!(res < opt.residual_tolerance))
        throw NumericalError("ground state: residual " + std::to_string(res) +
                             " above tolerance");

    GroundState gs(lattice);
    gs.amplitude.resize(lattice.size());
    gs.density.resize(lattice.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        gs.amplitude[i] = std::abs(psi[i]);
        gs.density[i] = psi[i] * psi[i];
    }
    gs.atom_number = it.norm();
    gs.peak_density = it.peak();
    gs.mu = hbar * mu_rate;
    gs.energy_per_atom = hbar * r.energy;
    gs.residual = res;
    gs.steps = opt.max_steps - budget;

    // Post-check: nothing of significance within the margin of any face.
    std::array<double, 3> edge{};
    for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
        const auto c = lattice.unravel(idx);
        for (int a = 0; a < 3; ++a)
            if (c[a] < opt.boundary_margin || c[a] >= n[a] - opt.boundary_margin)
                edge[a] = std::max(edge[a], gs.density[idx]);
    }
    for (int a = 0; a < 3; ++a)
        if (edge[a] > 1e-4 * gs.peak_density)
            throw ConfigError("ground state: cloud touches the box boundary on axis " +
                              std::to_string(a) + " (edge density " +
                              std::to_string(edge[a] / gs.peak_density) + " of peak)");

    const auto w = source_momentum_widths(gs, opt.padding_factor);
    gs.sigma_x = w.sigma_x;
    gs.sigma_yz = w.sigma_yz;
    return gs;
}

SourceWidths source_momentum_widths(const GroundState& gs, int padding_factor) {
    const Lattice3D& lat = gs.lattice;
    const auto& n = lat.points();
    double sig[3] = {0.0, 0.0, 0.0};
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<double> proj(n[axis], 0.0);
        for (std::size_t idx = 0; idx < lat.size(); ++idx) proj[lat.unravel(idx)[axis]] += gs.amplitude[idx];

        const int M = n[axis] * std::max(padding_factor, 1);
        CVector buf(M, cplx{0.0, 0.0});
        for (int i = 0; i < n[axis]; ++i) buf[((i - n[axis] / 2) % M + M) % M] = proj[i];
        auto* p = reinterpret_cast<fftw_complex*>(buf.data());
        {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_plan plan = fftw_plan_dft_1d(M, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
            fftw_execute(plan);
            fftw_destroy_plan(plan);
        }
        std::vector<double> s(M / 2);
        for (int j = 0; j < M / 2; ++j) s[j] = std::norm(buf[j]);
        if (!(s[0] > 0.0)) throw NumericalError("source widths: empty profile");

        // Main lobe: up to the first local minimum or a 1e-4 drop.
        int last = 1;
        while (last + 1 < M / 2 && s[last + 1] < s[last] && s[last] > 1e-4 * s[0]) ++last;
        if (last < 3) throw NumericalError("source widths: main lobe under-resolved");
        const double dk = 2.0 * pi / (M * lat.dx(axis));
        std::vector<double> kk, yy;
        for (int j = -last; j <= last; ++j) {
            kk.push_back(j * dk);
            yy.push_back(s[std::abs(j)] / s[0]);
        }
        GaussianFitOptions fo;
        fo.fit_center = false;
        fo.width_guess = last * dk / 3.0;
        sig[axis] = fit_gaussian(kk, yy, fo).width;
    }
    return {sig[0], sig[1], sig[2], 0.5 * (sig[1] + sig[2])};
}

void save_ground_state(const GroundState& gs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (double v : gs.density) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    nlohmann::json j;
    j["format"] = "float64-le";
    j["points"] = gs.lattice.points();
    j["lengths_m"] = gs.lattice.lengths();
    j["mu_J"] = gs.mu;
    j["energy_per_atom_J"] = gs.energy_per_atom;
    j["atom_number"] = gs.atom_number;
    j["peak_density"] = gs.peak_density;
    j["residual"] = gs.residual;
    j["sigma_x"] = gs.sigma_x;
    j["sigma_yz"] = gs.sigma_yz;
    std::ofstream side(path.string() + ".json");
    side << j.dump(2) << '\n';
}

GroundState load_ground_state(const std::filesystem::path& path) {
    std::ifstream side(path.string() + ".json");
    if (!side) throw ConfigError("missing ground-state sidecar " + path.string() + ".json");
    const auto j = nlohmann::json::parse(side);
    const Lattice3D lat(j.at("points").get<std::array<int, 3>>(),
                        j.at("lengths_m").get<std::array<double, 3>>());
    GroundState gs(lat);
    gs.density.resize(lat.size());
    std::ifstream in(path, std::ios::binary);
    for (double& v : gs.density) {
        std::uint64_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), sizeof bits);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        v = std::bit_cast<double>(bits);
    }
    if (!in) throw ConfigError("truncated ground-state snapshot " + path.string());
    gs.amplitude.resize(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) gs.amplitude[i] = std::sqrt(std::max(gs.density[i], 0.0));
    gs.mu = j.at("mu_J");
    gs.energy_per_atom = j.at("energy_per_atom_J");
    gs.atom_number = j.at("atom_number");
    gs.peak_density = j.at("peak_density");
    gs.residual = j.at("residual");
    gs.sigma_x = j.at("sigma_x");
    gs.sigma_yz = j.at("sigma_yz");
    return gs;
}

}  // namespace bec4wm

#include "bec4wm/dynamics.hpp"

#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "bec4wm/analytic.hpp"
#include "bec4wm/errors.hpp"

namespace bec4wm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t trajectory_id) {
    return splitmix64(base_seed + 0x9E3779B97F4A7C15ull * (trajectory_id + 1));
}

void SimConfig::validate() const {
    params.validate();
    if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
    if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
    if (n_trajectories < 2) throw ConfigError("n_trajectories must be >= 2");
    if (noise_refinement < 1) throw ConfigError("noise_refinement must be >= 1");
    if (block_size < 1) throw ConfigError("block_size must be >= 1");
    if (!(divergence_factor > 0.0)) throw ConfigError("divergence_factor must be positive");
    (void)sample_steps();
}

std::vector<int> SimConfig::sample_steps() const {
    if (sample_times.empty()) return {n_steps};
    std::vector<int> out;
    for (double t : sample_times) {
        const double s = t / dt();
        const long r = std::lround(s);
        if (r < 0 || r > n_steps || std::abs(s - r) > 1e-6)
            throw ConfigError("sample time " + std::to_string(t) + " s is not on a step boundary");
        if (!out.empty() && r <= out.back())
            throw ConfigError("sample times must be strictly increasing");
        out.push_back(static_cast<int>(r));
    }
    return out;
}

FieldPair initialize_collision(const GroundState& gs, const PhysicalParams& params) {
    const Lattice3D& lat = gs.lattice;
    const double kr = params.k_r();
    if (kr > lat.k_max(0)) throw ConfigError("k_r is beyond the x momentum cutoff");
    const int slot = lat.nearest_k_slot(0, kr);
    if (slot < 0 || (kr > 0.0 && lat.is_nyquist(0, slot)))
        throw ConfigError("k_r has no interior grid bin on the x axis");
    const double k = lat.k_at(0, slot);

    FieldPair f{ComplexField(lat, Space::position), ComplexField(lat, Space::position)};
    const auto& n = lat.points();
    for (int i = 0; i < n[0]; ++i) {
        const double x = lat.x_at(0, i);
        const double mod = 2.0 * std::cos(k * x);  // e^{ikx} + e^{-ikx}
        for (int j = 0; j < n[1]; ++j)
            for (int l = 0; l < n[2]; ++l) {
                const std::size_t idx = lat.index(i, j, l);
                const cplx v = std::sqrt(0.5 * gs.density[idx]) * mod;
                f.psi.values[idx] = v;
                f.psi_tilde.values[idx] = std::conj(v);
            }
    }
    return f;
}

Stepper::Stepper(const SpectralTransform& fft, double mass, double U0, double dt, bool noise,
                 int noise_refinement, double guard_density)
    : fft_(fft),
      U0_(U0),
      dt_(dt),
      noise_(noise),
      refinement_(noise_refinement),
      guard_(guard_density) {
    const Lattice3D& lat = fft.lattice();
    k2_.resize(lat.size());
    half_.resize(lat.size());
    full_.resize(lat.size());
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto c = lat.unravel(idx);
        double k2 = 0.0;
        for (int a = 0; a < 3; ++a) k2 += std::pow(lat.k_at(a, c[a]), 2);
        k2_[idx] = k2;
        half_[idx] = std::polar(1.0, -hbar * k2 * dt / (4.0 * mass));
        full_[idx] = half_[idx] * half_[idx];
    }
    w1_.resize(lat.size());
    w2_.resize(lat.size());
}

void Stepper::to_momentum_raw(FieldPair& f) {
    fft_.forward(f.psi.values.data());
    fft_.forward(f.psi_tilde.values.data());
    f.psi.space = f.psi_tilde.space = Space::momentum;
}

void Stepper::to_position_raw(FieldPair& f) {
    fft_.backward(f.psi.values.data());
    fft_.backward(f.psi_tilde.values.data());
    const double s = 1.0 / static_cast<double>(lattice().size());
    for (auto& v : f.psi.values) v *= s;
    for (auto& v : f.psi_tilde.values) v *= s;
    f.psi.space = f.psi_tilde.space = Space::position;
}

void Stepper::kinetic(FieldPair& f, double fraction) {
    if (fraction != 0.5 && fraction != 1.0) throw std::invalid_argument("kinetic: fraction");
    const CVector& ph = fraction == 0.5 ? half_ : full_;
    auto* p = f.psi.values.data();
    auto* q = f.psi_tilde.values.data();
    for (std::size_t i = 0; i < k2_.size(); ++i) {
        p[i] *= ph[i];
        q[i] *= std::conj(ph[i]);
    }
}

bool Stepper::nonlinear_noise(FieldPair& f, TrajectoryRng& rng) {
    const std::size_t n = k2_.size();
    auto* p = f.psi.values.data();
    auto* q = f.psi_tilde.values.data();
    if (noise_) {
        const double amp = std::sqrt(dt_ / (lattice().cell_volume() * refinement_));
        std::fill(w1_.begin(), w1_.end(), 0.0);
        std::fill(w2_.begin(), w2_.end(), 0.0);
        for (int r = 0; r < refinement_; ++r) {
            for (std::size_t i = 0; i < n; ++i) w1_[i] += rng.normal(rng.engine);
            for (std::size_t i = 0; i < n; ++i) w2_[i] += rng.normal(rng.engine);
        }
        for (std::size_t i = 0; i < n; ++i) {
            w1_[i] *= amp;
            w2_[i] *= amp;
        }
    }
    // Principal roots: sqrt(-i U0 a^2) = +-sqrt(U0) e^{-i pi/4} a, choosing
    // the sign with non-negative real part (likewise for psi~ with e^{+i pi/4}).
    const double su = std::sqrt(U0_) * std::sqrt(0.5);
    const cplx rot1(su, -su), rot2(su, su);
    auto principal = [](cplx z) {
        return (z.real() < 0.0 || (z.real() == 0.0 && z.imag() < 0.0)) ? -z : z;
    };
    const double ud = U0_ * dt_;
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
        const cplx a = p[i], b = q[i];
        // exp(-i U0 b a dt) and its inverse.
        const cplx ba = b * a;
        const double mag = std::exp(ba.imag() * ud);
        const double arg = -ba.real() * ud;
        const double c = std::cos(arg), sn = std::sin(arg);
        cplx na = a * cplx(mag * c, mag * sn);
        cplx nb = b * cplx(c / mag, -sn / mag);
        if (noise_) {
            na += principal(rot1 * a) * w1_[i];
            nb += principal(rot2 * b) * w2_[i];
        }
        p[i] = na;
        q[i] = nb;
        const double m = std::max(std::norm(na), std::norm(nb));
        if (!(m <= guard_)) ok = false;  // also catches NaN
    }
    return ok;
}

bool Stepper::step(FieldPair& f, TrajectoryRng& rng) {
    to_momentum_raw(f);
    kinetic(f, 0.5);
    to_position_raw(f);
    const bool ok = nonlinear_noise(f, rng);
    to_momentum_raw(f);
    kinetic(f, 0.5);
    to_position_raw(f);
    f.time += dt_;
    return ok && f.psi.all_finite() && f.psi_tilde.all_finite();
}

TrajectoryRecord run_trajectory(const FieldPair& init, const SimConfig& config,
                                std::uint64_t trajectory_id, const SpectralTransform& fft) {
    const Lattice3D& lat = fft.lattice();
    if (!init.psi.matches(lat) || !init.psi_tilde.matches(lat))
        throw ConfigError("run_trajectory: initial fields do not match the lattice");
    double rho_peak = 0.0;
    for (const auto& v : init.psi.values) rho_peak = std::max(rho_peak, std::norm(v));
    const double rho0 = config.params.peak_density ? *config.params.peak_density : 0.5 * rho_peak;
    Stepper stepper(fft, config.params.mass, config.coupling(), config.dt(), config.noise,
                    config.noise_refinement, config.divergence_factor * rho0);
    TrajectoryRng rng(trajectory_seed(config.base_seed, trajectory_id));

    FieldPair f = init;
    f.trajectory_id = trajectory_id;
    f.rng_seed = trajectory_seed(config.base_seed, trajectory_id);
    TrajectoryRecord rec;
    rec.trajectory_id = trajectory_id;
    const auto samples = config.sample_steps();
    const double scale = fft.momentum_scale();
    const auto neg = negated_bins(lat);

    // f is in raw momentum space when this is called, at a sample time.
    auto record = [&](int step) {
        TrajectorySample s;
        s.time = step * config.dt();
        s.a.resize(lat.size());
        s.a_tilde.resize(lat.size());
        for (std::size_t i = 0; i < lat.size(); ++i) {
            s.a[i] = f.psi.values[i] * scale;
            s.a_tilde[i] = f.psi_tilde.values[neg[i]] * scale;
        }
        rec.samples.push_back(std::move(s));
    };

    // Adjacent kinetic half steps are merged; the fields sit half a kinetic
    // step ahead of the nonlinear substep between iterations.
    std::size_t next_sample = 0;
    stepper.to_momentum_raw(f);
    if (next_sample < samples.size() && samples[next_sample] == 0) {
        record(0);
        ++next_sample;
    }
    if (config.n_steps > 0) stepper.kinetic(f, 0.5);
    for (int s = 1; s <= config.n_steps; ++s) {
        stepper.to_position_raw(f);
        if (!stepper.nonlinear_noise(f, rng)) {
            rec.valid = false;
            rec.failed_step = s;
            rec.samples.clear();
            return rec;
        }
        stepper.to_momentum_raw(f);
        const bool sample_now = next_sample < samples.size() && samples[next_sample] == s;
        if (sample_now || s == config.n_steps) {
            stepper.kinetic(f, 0.5);
            if (sample_now) {
                record(s);
                ++next_sample;
            }
            if (s < config.n_steps) stepper.kinetic(f, 0.5);
        } else {
            stepper.kinetic(f, 1.0);
        }
    }
    for (const auto& smp : rec.samples)
        for (std::size_t i = 0; i < smp.a.size(); ++i)
            if (!std::isfinite(smp.a[i].real()) || !std::isfinite(smp.a[i].imag()) ||
                !std::isfinite(smp.a_tilde[i].real()) || !std::isfinite(smp.a_tilde[i].imag())) {
                rec.valid = false;
                rec.samples.clear();
                return rec;
            }
    return rec;
}

double max_sim_time(const PhysicalParams& params, const Lattice3D& lattice, bool use_a11) {
    if (!params.peak_density) throw ConfigError("max_sim_time needs the peak density");
    return max_sim_time(params.mass, use_a11 ? params.a11 : params.a00, *params.peak_density,
                        lattice.cell_volume());
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("BECSIM_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w > 0) return w;
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("BECSIM_WORKERS is not a positive integer: ") + env);
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace bec4wm

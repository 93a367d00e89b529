#include "bec4wm/analytic.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_odeiv2.h>
#include <gsl/gsl_roots.h>

#include <cmath>
#include <memory>

#include "bec4wm/errors.hpp"
#include "bec4wm/groundstate.hpp"

namespace bec4wm {

namespace {
// Status codes are checked at every call; never let GSL abort the process.
[[maybe_unused]] const gsl_error_handler_t* const gsl_quiet = gsl_set_error_handler_off();
}  // namespace

CorrelationWidths gaussian_ansatz_widths(double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian_ansatz_widths: sigma must be positive");
    return {std::sqrt(2.0) * sigma, 2.0 * sigma};
}

double halo_width_spontaneous(double mass, double k_r, double dt) {
    if (!(dt > 0.0)) throw ConfigError("halo_width_spontaneous: duration must be positive");
    if (!(k_r > 0.0) || !(mass > 0.0)) throw ConfigError("halo_width_spontaneous: bad inputs");
    return mass / (hbar * k_r * dt);
}

double halo_width_stimulated(double a00, double rho0, double k_r) {
    if (!(a00 > 0.0) || !(rho0 > 0.0) || !(k_r > 0.0))
        throw ConfigError("halo_width_stimulated: inputs must be positive");
    return 4.0 * pi * a00 * rho0 / (k_r * k_r);
}

double minimum_halo_width(double sigma, double dk_stim) {
    return std::hypot(dk_stim, sigma);
}

UniformPumpParams UniformPumpParams::from(const PhysicalParams& p, double rho0) {
    return {2.0 * p.U0_outcoupled() * rho0, p.k_r(), p.mass};
}

double UniformPumpParams::detuning(double k) const {
    return hbar / (2.0 * mass) * (k * k - k_r * k_r);
}

namespace {

// (sinh(sqrt(x)) / sqrt(x))^2, continued to (sin(sqrt(-x)) / sqrt(-x))^2 for x < 0.
double sinhc_sq(double x) {
    double s;
    if (std::abs(x) < 1e-6) {
        s = 1.0 + x / 6.0 + x * x / 120.0;
    } else if (x > 0.0) {
        const double r = std::sqrt(x);
        s = std::sinh(r) / r;
    } else {
        const double r = std::sqrt(-x);
        s = std::sin(r) / r;
    }
    return s * s;
}

double pump_occupation_detuned(double delta, double t, double gbar) {
    const double D = gbar * gbar - delta * delta;
    return gbar * gbar * t * t * sinhc_sq(D * t * t);
}

}  // namespace

double pump_occupation(double k, double t, const UniformPumpParams& pump) {
    if (t < 0.0) throw ConfigError("pump_occupation: negative time");
    return pump_occupation_detuned(pump.detuning(k), t, pump.gbar);
}

PumpHaloWidth pump_halo_width(double t, const UniformPumpParams& pump) {
    if (!(t > 0.0)) throw ConfigError("pump_halo_width: time must be positive");
    const double g = pump.gbar;
    const double peak = pump_occupation_detuned(0.0, t, g);
    // n falls monotonically from Delta = 0 to its first zero at sqrt(Delta^2 - g^2) t = pi.
    const double d_hi = std::sqrt(g * g + pi * pi / (t * t));

    struct Ctx {
        double t, g, half;
    } ctx{t, g, 0.5 * peak};
    gsl_function F;
    F.function = [](double d, void* p) {
        const auto& c = *static_cast<Ctx*>(p);
        return pump_occupation_detuned(d, c.t, c.g) - c.half;
    };
    F.params = &ctx;
    std::unique_ptr<gsl_root_fsolver, decltype(&gsl_root_fsolver_free)> solver(
        gsl_root_fsolver_alloc(gsl_root_fsolver_brent), &gsl_root_fsolver_free);
    gsl_root_fsolver_set(solver.get(), &F, 0.0, d_hi);
    double d = 0.0;
    for (int it = 0; it < 200; ++it) {
        gsl_root_fsolver_iterate(solver.get());
        d = gsl_root_fsolver_root(solver.get());
        const double lo = gsl_root_fsolver_x_lower(solver.get());
        const double hi = gsl_root_fsolver_x_upper(solver.get());
        if (gsl_root_test_interval(lo, hi, 0.0, 1e-13) == GSL_SUCCESS) break;
    }
    const double k_half = std::sqrt(pump.k_r * pump.k_r + 2.0 * pump.mass * d / hbar);
    PumpHaloWidth w{};
    w.k_peak = pump.k_r;
    w.hwhm = k_half - pump.k_r;
    w.rms_equivalent = w.hwhm / std::sqrt(2.0 * std::log(2.0));
    w.half_span = 0.5 * w.hwhm;
    return w;
}

CollisionModelParams CollisionModelParams::from(const PhysicalParams& p) {
    p.validate();
    const ThomasFermi tf = p.peak_density ? thomas_fermi_from_peak(p, *p.peak_density)
                                          : thomas_fermi_from_number(p, *p.atom_number);
    CollisionModelParams c{};
    c.trap_omega = p.trap_omega;
    c.radius = tf.radius;
    c.peak_density = tf.peak_density;
    c.sigma0 = 8.0 * pi * p.a00 * p.a00;
    c.v_r = p.v_r;
    c.atom_number = tf.atom_number;
    return c;
}

namespace {

// State: lambda_x,y,z, their time derivatives, N_sc.
struct Model {
    const CollisionModelParams* p;
    gsl_integration_workspace* ws;

    // Integral of rho1 rho2 over space for clouds centred at +-d.
    double overlap(const double* lam, double d) const {
        const double X = lam[0] * p->radius[0];
        const double hi = X - d;
        if (hi <= 0.0) return 0.0;
        struct Ctx {
            double X, d;
        } ctx{X, d};
        gsl_function F;
        // Transverse integral over the disk where both parabolas are positive:
        // pi c^2 (3 C - c) / 6 with c = min(A, B), C = max(A, B). The overlap is
        // symmetric in x, hence the factor 2 below.
        F.function = [](double x, void* v) {
            const auto& c = *static_cast<Ctx*>(v);
            const double A = 1.0 - std::pow((x + c.d) / c.X, 2);
            const double B = 1.0 - std::pow((x - c.d) / c.X, 2);
            const double lo = std::min(A, B), up = std::max(A, B);
            if (lo <= 0.0) return 0.0;
            return pi * lo * lo * (3.0 * up - lo) / 6.0;
        };
        F.params = &ctx;
        double result = 0.0, err = 0.0;
        const int status = gsl_integration_qag(&F, 0.0, hi, 1e-14 * X, 1e-10, 1000, GSL_INTEG_GAUSS21,
                                               ws, &result, &err);
        if (status != GSL_SUCCESS) throw NumericalError("collision model: quadrature failed");
        const double vol = lam[0] * lam[1] * lam[2];
        const double rho_c = 0.5 * p->peak_density / vol;
        return 2.0 * result * lam[1] * p->radius[1] * lam[2] * p->radius[2] * rho_c * rho_c;
    }
};

int model_rhs(double t, const double y[], double dydt[], void* params) {
    const auto& m = *static_cast<Model*>(params);
    const double vol = y[0] * y[1] * y[2];
    for (int a = 0; a < 3; ++a) {
        dydt[a] = y[3 + a];
        dydt[3 + a] = m.p->trap_omega[a] * m.p->trap_omega[a] / (y[a] * vol);
    }
    dydt[6] = 2.0 * 2.0 * m.p->sigma0 * m.p->v_r * m.overlap(y, m.p->v_r * t);
    return GSL_SUCCESS;
}

}  // namespace

std::vector<double> collision_duration_model(const CollisionModelParams& params,
                                             const std::vector<double>& times) {
    if (!(params.sigma0 > 0.0)) throw ConfigError("collision model: sigma0 must be positive");
    std::unique_ptr<gsl_integration_workspace, decltype(&gsl_integration_workspace_free)> ws(
        gsl_integration_workspace_alloc(1000), &gsl_integration_workspace_free);
    Model model{&params, ws.get()};
    gsl_odeiv2_system sys{model_rhs, nullptr, 7, &model};
    std::unique_ptr<gsl_odeiv2_driver, decltype(&gsl_odeiv2_driver_free)> drv(
        gsl_odeiv2_driver_alloc_y_new(&sys, gsl_odeiv2_step_rkf45, 1e-7, 1e-10, 1e-9),
        &gsl_odeiv2_driver_free);
    double y[7] = {1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    double t = 0.0;
    std::vector<double> out;
    out.reserve(times.size());
    for (double target : times) {
        if (target < t) throw ConfigError("collision model: times must be ascending and >= 0");
        if (target > t) {
            const int status = gsl_odeiv2_driver_apply(drv.get(), &t, target, y);
            if (status != GSL_SUCCESS) throw NumericalError("collision model: ODE failure");
        }
        out.push_back(y[6]);
    }
    return out;
}

double collision_duration_model(const CollisionModelParams& params, double t) {
    return collision_duration_model(params, std::vector<double>{t}).front();
}

double collision_duration_total(const CollisionModelParams& params) {
    // The clouds stop overlapping once v_r t exceeds the (slowly growing)
    // axial radius; march in chunks until the count stops changing.
    const double t_sep = params.radius[0] / params.v_r;
    std::vector<double> times;
    for (int i = 1; i <= 16; ++i) times.push_back(0.5 * i * t_sep);
    const auto n = collision_duration_model(params, times);
    for (std::size_t i = 1; i < n.size(); ++i)
        if (n[i] == n[i - 1] && n[i] > 0.0) return n[i];
    throw NumericalError("collision model: clouds still overlap at 8 separation times");
}

ModeCount mode_counting(double sigma_x, double sigma_yz, double k_r, double dk, double beta) {
    if (!(sigma_x > 0.0) || !(sigma_yz > 0.0) || !(k_r > 0.0) || !(dk > 0.0) || !(beta > 0.0))
        throw ConfigError("mode_counting: inputs must be positive");
    ModeCount m{};
    m.shell_volume = 4.0 * pi * std::sqrt(2.0 * pi) * k_r * k_r * dk;
    m.mode_volume = beta * sigma_x * sigma_yz * sigma_yz;
    m.mode_number = m.shell_volume / m.mode_volume;
    return m;
}

double bb_peak_estimate(double mode_number, double scattered) {
    if (!(scattered > 0.0)) throw ConfigError("bb_peak_estimate: scattered number must be positive");
    return 1.0 + mode_number / scattered;
}

double max_sim_time(double mass, double scattering_length, double rho0, double cell_volume) {
    const double U0 = contact_coupling(scattering_length, mass);
    return 2.5 * std::cbrt(cell_volume) / (U0 * std::pow(rho0, 2.0 / 3.0));
}

}  // namespace bec4wm

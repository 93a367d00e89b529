#include "bec4wm/fit.hpp"

#include <gsl/gsl_blas.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bec4wm/errors.hpp"

namespace bec4wm {

double GaussianFit::operator()(double x) const {
    const double u = (x - center) / width;
    return amplitude * std::exp(-0.5 * u * u) + baseline + slope * x;
}

namespace {

// Parameter layout: amplitude, width, [center], [baseline], [slope].
struct Problem {
    std::span<const double> x;
    std::span<const double> y;
    GaussianFitOptions opt;
    int i_center = -1;
    int i_base = -1;
    int i_slope = -1;
    std::size_t n_params = 2;

    GaussianFit unpack(const gsl_vector* p) const {
        GaussianFit g;
        g.amplitude = gsl_vector_get(p, 0);
        g.width = std::abs(gsl_vector_get(p, 1));
        g.center = i_center >= 0 ? gsl_vector_get(p, i_center) : opt.center;
        g.baseline = i_base >= 0 ? gsl_vector_get(p, i_base) : opt.baseline;
        g.slope = i_slope >= 0 ? gsl_vector_get(p, i_slope) : 0.0;
        return g;
    }
};

int residual_f(const gsl_vector* p, void* data, gsl_vector* f) {
    const auto& pr = *static_cast<const Problem*>(data);
    const GaussianFit g = pr.unpack(p);
    if (!(g.width > 0.0)) return GSL_EDOM;
    for (std::size_t i = 0; i < pr.x.size(); ++i) gsl_vector_set(f, i, g(pr.x[i]) - pr.y[i]);
    return GSL_SUCCESS;
}

int residual_df(const gsl_vector* p, void* data, gsl_matrix* J) {
    const auto& pr = *static_cast<const Problem*>(data);
    const double A = gsl_vector_get(p, 0);
    const double w = gsl_vector_get(p, 1);
    const double c = pr.i_center >= 0 ? gsl_vector_get(p, pr.i_center) : pr.opt.center;
    for (std::size_t i = 0; i < pr.x.size(); ++i) {
        const double d = pr.x[i] - c;
        const double e = std::exp(-0.5 * d * d / (w * w));
        gsl_matrix_set(J, i, 0, e);
        gsl_matrix_set(J, i, 1, A * e * d * d / (w * w * w));
        if (pr.i_center >= 0) gsl_matrix_set(J, i, pr.i_center, A * e * d / (w * w));
        if (pr.i_base >= 0) gsl_matrix_set(J, i, pr.i_base, 1.0);
        if (pr.i_slope >= 0) gsl_matrix_set(J, i, pr.i_slope, pr.x[i]);
    }
    return GSL_SUCCESS;
}

}  // namespace

GaussianFit fit_gaussian(std::span<const double> x, std::span<const double> y,
                         const GaussianFitOptions& options) {
    if (x.size() != y.size()) throw NumericalError("fit_gaussian: x and y differ in length");

    Problem pr{x, y, options};
    if (options.fit_center) pr.i_center = static_cast<int>(pr.n_params++);
    if (options.fit_baseline) pr.i_base = static_cast<int>(pr.n_params++);
    if (options.fit_slope) pr.i_slope = static_cast<int>(pr.n_params++);
    if (x.size() <= pr.n_params) throw NumericalError("fit_gaussian: too few points");

    // Initial guess from the data moments above the baseline.
    const double base0 = options.fit_baseline ? *std::min_element(y.begin(), y.end())
                                              : options.baseline;
    std::size_t imax = 0;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = std::max(y[i] - base0, 0.0);
        if (y[i] - base0 > y[imax] - base0) imax = i;
        s0 += v;
        s1 += v * x[i];
        s2 += v * x[i] * x[i];
    }
    if (!(s0 > 0.0)) throw NumericalError("fit_gaussian: profile has no peak above baseline");
    const double c0 = options.fit_center ? x[imax] : options.center;
    double w0 = options.width_guess;
    if (!(w0 > 0.0)) {
        const double mean = s1 / s0;
        w0 = std::sqrt(std::max(s2 / s0 - mean * mean, 0.0));
        if (!(w0 > 0.0)) w0 = std::abs(x.back() - x.front()) / 4.0;
    }

    gsl_vector* p = gsl_vector_alloc(pr.n_params);
    gsl_vector_set(p, 0, y[imax] - base0);
    gsl_vector_set(p, 1, w0);
    if (pr.i_center >= 0) gsl_vector_set(p, pr.i_center, c0);
    if (pr.i_base >= 0) gsl_vector_set(p, pr.i_base, base0);
    if (pr.i_slope >= 0) gsl_vector_set(p, pr.i_slope, 0.0);

    gsl_multifit_nlinear_fdf fdf;
    fdf.f = residual_f;
    fdf.df = residual_df;
    fdf.fvv = nullptr;
    fdf.n = x.size();
    fdf.p = pr.n_params;
    fdf.params = &pr;

    gsl_multifit_nlinear_parameters fp = gsl_multifit_nlinear_default_parameters();
    gsl_multifit_nlinear_workspace* w =
        gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &fp, x.size(), pr.n_params);

    gsl_error_handler_t* old = gsl_set_error_handler_off();
    int info = 0;
    int status = gsl_multifit_nlinear_init(p, &fdf, w);
    if (status == GSL_SUCCESS)
        status = gsl_multifit_nlinear_driver(400, 1e-12, 1e-12, 1e-12, nullptr, nullptr, &info, w);
    gsl_set_error_handler(old);

    GaussianFit out = pr.unpack(gsl_multifit_nlinear_position(w));
    double chi2 = 0.0;
    gsl_blas_ddot(gsl_multifit_nlinear_residual(w), gsl_multifit_nlinear_residual(w), &chi2);
    out.rms_residual = std::sqrt(chi2 / static_cast<double>(x.size()));
    out.converged = status == GSL_SUCCESS;

    gsl_multifit_nlinear_free(w);
    gsl_vector_free(p);

    if (!(out.width > 0.0) || !std::isfinite(out.width) || !std::isfinite(out.amplitude))
        throw NumericalError("fit_gaussian: fit failed");
    return out;
}

}  // namespace bec4wm

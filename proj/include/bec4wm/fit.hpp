#pragma once

#include <span>

namespace bec4wm {

/// y(x) = amplitude * exp(-(x - center)^2 / (2 width^2)) + baseline + slope * x
struct GaussianFit {
    double amplitude = 0.0;
    double center = 0.0;
    double width = 0.0;
    double baseline = 0.0;
    double slope = 0.0;
    double rms_residual = 0.0;
    bool converged = false;

    double operator()(double x) const;
};

struct GaussianFitOptions {
    bool fit_center = true;
    double center = 0.0;  // initial guess, or the fixed value
    bool fit_baseline = false;
    double baseline = 0.0;
    bool fit_slope = false;
    double width_guess = 0.0;  // <= 0: estimate from the data
};

/// Unweighted nonlinear least squares (Levenberg-Marquardt).
/// Throws NumericalError on degenerate input (fewer points than parameters,
/// all-zero data) or a non-positive fitted width.
GaussianFit fit_gaussian(std::span<const double> x, std::span<const double> y,
                         const GaussianFitOptions& options = {});

}  // namespace bec4wm

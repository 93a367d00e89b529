#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "bec4wm/fit.hpp"
#include "bec4wm/moments.hpp"

namespace bec4wm {

/// Ensemble-mean momentum density at one sample time.
struct DensityField {
    double time = 0.0;
    std::size_t trajectories = 0;
    std::vector<double> n;      ///< Re <a~(k) a(k)>
    std::vector<double> n_im;   ///< Im part (should vanish within errors)
    std::vector<double> se;     ///< standard error of n
    std::vector<double> se_im;
    /// max over bins of |n_im| / se_im, skipping bins whose spread is round-off.
    double max_imag_z = 0.0;
    /// Fraction of those bins with |n_im| > 3 se_im (about 0.3% for a real mean).
    double imag_outlier_fraction = 0.0;
};

DensityField momentum_density(const EnsembleMoments& m, std::size_t sample);

struct ScatteredCount {
    double n_sc = 0.0;
    double se = 0.0;
    double total = 0.0;
    double fraction = 0.0;
};

/// Sum of n(k) over |k_x| <= exclusion k_r; fraction relative to the total.
/// The standard error is not available from the mean density alone (se = 0).
ScatteredCount count_scattered(const DensityField& n, const Lattice3D& lattice, double k_r,
                               double exclusion = 0.99);
/// Same count with the exclusion fixed at run time, with a standard error from
/// the per-trajectory sums.
ScatteredCount count_scattered(const EnsembleMoments& m, std::size_t sample);

struct MeanStat {
    double mean = 0.0;
    double se = 0.0;
};
/// Ensemble mean of the total atom number Re sum_k n_traj(k).
MeanStat total_number(const EnsembleMoments& m, std::size_t sample);
/// Imaginary part of the same sum (zero for exact averages).
MeanStat total_number_imag(const EnsembleMoments& m, std::size_t sample);

struct HaloProfile {
    std::vector<double> k;   ///< bin centres, 1/m
    std::vector<double> n;   ///< mean occupation per lattice mode in the bin
    std::vector<double> se;  ///< from per-mode errors, treating modes as independent
    std::vector<int> modes;  ///< lattice modes per bin
    GaussianFit fit;         ///< exp(-(k - k0)^2 / (2 dk^2)): center = k0, width = dk
    bool fitted = false;
};

struct RadialOptions {
    double axial_mask = 0.8;
    double bin_width = 0.0;  ///< 1/m; <= 0: 0.02 k_r
    double fit_lo = 0.55;    ///< fit window in units of k_r
    double fit_hi = 1.45;
    bool fit_baseline = false;
    bool fit_slope = false;
};

/// Angle-averaged profile of n(k) over |k_x| <= axial_mask k_r with a Gaussian
/// fit across the halo. Throws NumericalError if the halo cannot be fitted.
HaloProfile radial_profile(const DensityField& n, const Lattice3D& lattice, double k_r,
                           const RadialOptions& options = {});

struct CorrelationCurve {
    int axis = 0;
    PairKind kind = PairKind::collinear;
    std::vector<double> dk;  ///< lag, 1/m
    std::vector<double> g2;
    std::vector<double> se;
    std::vector<int> dropped_lags;  ///< lags whose denominator vanished
    GaussianFit fit;  ///< g2 - 1 = amplitude exp(-dk^2 / (2 width^2))
    bool fitted = false;
};

/// Domain-averaged pair correlation along one axis:
///   sum_D G2(k, +-k + lag e_axis) / sum_D n(k) n(+-k + lag e_axis).
/// The denominator is the product of ensemble-mean densities with the
/// same-trajectory terms removed; the standard error reflects the numerator only.
CorrelationCurve g2_average(const EnsembleMoments& m, std::size_t sample, PairKind kind,
                            int axis);

struct QuadrantStats {
    std::array<double, 4> mean{};                      ///< <N_i>
    std::array<double, 4> mean_se{};
    std::array<std::array<double, 4>, 4> normal{};     ///< <:N_i N_j:>
    std::array<std::array<double, 4>, 4> g2{};         ///< g_ij
    std::array<std::array<double, 4>, 4> g2_se{};
    std::array<std::array<double, 4>, 4> variance{};   ///< V_{i-j}
    std::array<std::array<double, 4>, 4> variance_se{};
    double eta = 1.0;
    std::size_t trajectories = 0;
};

/// Relative-number statistics of the four quadrant sums. Standard errors by
/// delete-one jackknife over trajectories.
QuadrantStats quadrant_stats(const EnsembleMoments& m, std::size_t sample, double eta = 1.0);

/// Normalised relative-number variance with detection efficiency eta.
double relative_variance(double mean_i, double mean_j, double normal_ii, double normal_jj,
                         double normal_ij, double eta = 1.0);

struct SymmetricPairCheck {
    double v_direct;   ///< from the exchange-symmetrised raw moments
    double v_alt;      ///< 1 + eta <N> (g_ii - g_ij)
    double g_ii;
    double g_ij;
    bool squeezed;      ///< v_direct < 1
    bool cs_violated;   ///< g_ij > g_ii
};

/// Exchange-symmetrises quadrants i and j on the same sample and evaluates
/// the variance both directly and through the g2 identity.
SymmetricPairCheck symmetric_pair_check(const EnsembleMoments& m, std::size_t sample, int i,
                                        int j, double eta = 1.0);

/// Generic delete-one jackknife: `values` holds `per` numbers per trajectory;
/// f maps a vector of column means to the statistic. Returns the
/// bias-corrected estimate and its standard error.
MeanStat jackknife(const std::vector<double>& values, std::size_t per,
                   const std::function<double(const std::vector<double>&)>& f);

}  // namespace bec4wm

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bec4wm/dynamics.hpp"
#include "bec4wm/lattice.hpp"

namespace bec4wm {

/// Which momentum bins and pair sets are accumulated during a run. Fixed
/// before the run starts.
struct AnalysisSpec {
    double k_r = 0.0;
    /// Correlation domain and quadrant shell: |1 - k^2/k_r^2| < shell.
    double shell = 0.28;
    /// Bins with |k_x| > axial_mask k_r (the condensates) are left out of the domain.
    double axial_mask = 0.8;
    /// Scattered atoms: bins with |k_x| <= exclusion k_r.
    double exclusion = 0.99;
    /// Largest correlation lag along each axis, in bins.
    std::array<int, 3> max_lag{8, 4, 4};
    /// Also accumulate a~(k) - conj(a(k)), the mean-field consistency residual.
    bool track_mean_field = false;
};

enum class PairKind { collinear = 0, back_to_back = 1 };
enum Quadrant { quad_A = 0, quad_B = 1, quad_C = 2, quad_D = 3 };

/// Precomputed index sets derived from a lattice and an AnalysisSpec.
struct MomentLayout {
    MomentLayout(const Lattice3D& lattice, const AnalysisSpec& spec);

    Lattice3D lattice;
    AnalysisSpec spec;
    std::vector<std::size_t> domain;     ///< bins of the correlation domain
    std::vector<std::size_t> scattered;  ///< bins counted as scattered
    /// Quadrant label per domain bin: -1 if on no quadrant.
    std::vector<int> quadrant;
    /// partner[slot][d]: partner bin of domain[d] for one (kind, axis, lag), or -1.
    std::vector<std::vector<long>> partner;

    std::size_t lag_count(int axis) const { return 2 * spec.max_lag[axis] + 1; }
    /// Flat slot of (kind, axis, lag) in partner and in per-trajectory pair sums.
    std::size_t slot(PairKind kind, int axis, int lag) const;
    std::size_t slot_count() const;
};

/// Half-open diagonal quadrants in the (k_x, k_y) plane: A around +k_x,
/// B around +k_y, C around -k_x, D around -k_y; negation maps A<->C, B<->D.
/// Returns -1 at the origin.
int quadrant_of(double kx, double ky);

/// Accumulated moments at one sample time.
struct SampleMoments {
    double time = 0.0;
    // Per-bin sums over valid trajectories of n_traj(k) = a~(k) a(k).
    std::vector<double> dens_re, dens_im, dens_re_sq, dens_im_sq;
    // Per-bin sums of a~(k) - conj(a(k)) when tracked.
    std::vector<double> mf_re, mf_im, mf_re_sq, mf_im_sq;
    // Per-trajectory values, in trajectory-id order.
    std::vector<cplx> pair_sums;  ///< slot_count per trajectory: sum_D n(k) n(k')
    std::vector<cplx> quadrants;  ///< 4 per trajectory
    std::vector<cplx> total;      ///< sum over all bins
    std::vector<cplx> scattered;  ///< sum over scattered bins
};

/// Ensemble accumulators with sample counts. Merging appends per-trajectory
/// data and adds per-bin sums in call order, so a fixed merge order gives
/// bit-identical results.
struct EnsembleMoments {
    std::array<int, 3> points{};
    std::array<double, 3> lengths{};
    AnalysisSpec spec;
    std::vector<SampleMoments> samples;
    std::size_t n_valid = 0;
    std::size_t n_invalid = 0;
    std::vector<std::uint64_t> invalid_ids;

    EnsembleMoments() = default;
    EnsembleMoments(const MomentLayout& layout, const std::vector<double>& times);

    void add(const MomentLayout& layout, const TrajectoryRecord& rec);
    void merge(const EnsembleMoments& other);
    Lattice3D lattice() const { return Lattice3D(points, lengths); }
    std::size_t slot_count() const;
    bool potentially_biased() const { return n_invalid > 0; }
};

}  // namespace bec4wm

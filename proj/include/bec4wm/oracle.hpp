#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bec4wm/constants.hpp"
#include "bec4wm/lattice.hpp"

namespace bec4wm {

/// Number-conserving quartic Hamiltonian on a handful of modes (rate units,
/// i.e. energies divided by hbar):
///   H = sum_i omega_i n_i + sum_terms c a_i^dag a_j^dag a_k a_l.
struct FewModeSystem {
    struct Term {
        std::complex<double> c;
        int i, j, k, l;
    };
    std::vector<double> omega;
    std::vector<Term> terms;
    /// Initial product state: coherent amplitude per mode, or a Fock state
    /// where fock[i] >= 0 (then alpha[i] is ignored).
    std::vector<std::complex<double>> alpha;
    std::vector<int> fock;
    /// Per-mode occupation cap (0 = none). Raised automatically when the
    /// population reaching the cap exceeds max_leakage.
    std::vector<int> n_max;
    double max_leakage = 1e-6;
    /// Coherent components with Poisson weight below this are discarded.
    double coherent_tail = 1e-13;

    std::size_t modes() const { return omega.size(); }
    void validate() const;

    /// kappa (a_1^dag a_2^dag a_0 a_0 + h.c.) with a Fock pump of n_pump atoms
    /// and vacuum signals; undepleted limit gives n_1 = sinh^2(kappa n_pump t).
    static FewModeSystem pair_model(double kappa, int n_pump);

    /// Plane-wave modes of a (few-mode) lattice with the same Hamiltonian the
    /// positive-P integrator samples: omega_k = hbar k^2 / 2m and
    /// (U0 / 2V) a^dag a^dag a a for k1 + k2 = k3 + k4 modulo the grid.
    static FewModeSystem from_lattice(const Lattice3D& lattice, double mass, double U0,
                                      const std::vector<std::complex<double>>& alpha);
};

/// Normally ordered moments of the exact state at one time.
struct ModeMoments {
    double time = 0.0;
    std::vector<double> n;                   ///< <a_i^dag a_i>
    std::vector<std::vector<double>> G;      ///< <a_i^dag a_j^dag a_j a_i>
    double total_number = 0.0;
    double norm = 0.0;
    double leakage = 0.0;
    std::size_t basis_size = 0;

    /// G_ij / (n_i n_j); NaN when either occupation vanishes.
    double g2(std::size_t i, std::size_t j) const;
    /// 1 + [G_ii - n_i^2 + G_jj - n_j^2 - 2 (G_ij - n_i n_j)] / (n_i + n_j).
    double pair_variance(std::size_t i, std::size_t j) const;
};

/// State-vector evolution in the truncated Fock space reachable from the
/// initial state, by a Taylor-series propagator on the sparse Hamiltonian.
/// Times must be ascending. Throws NumericalError if the cap keeps leaking.
std::vector<ModeMoments> evolve_exact(const FewModeSystem& system, const std::vector<double>& times);
ModeMoments evolve_exact(const FewModeSystem& system, double t);

struct ComparisonEntry {
    std::string moment;  ///< e.g. "n[1]", "g2[1,3]", "V[1-3]"
    double time = 0.0;
    double exact = 0.0;
    double stochastic = 0.0;
    double se = 0.0;
    double z = 0.0;
};

struct ComparisonReport {
    std::vector<ComparisonEntry> entries;
    std::size_t trajectories = 0;
    std::size_t invalid = 0;
    double max_abs_z = 0.0;
    bool pass = false;  ///< every |z| < 3
    std::string to_json() const;
};

struct PositivePRun {
    double mass = helium4_mass;
    double U0 = 0.0;              ///< m^3/s
    int n_trajectories = 10000;
    int steps = 200;          ///< over the last requested time
    std::uint64_t base_seed = 7;
    int noise_refinement = 1;
    int workers = 0;
    /// Modes whose moments are compared; empty = all.
    std::vector<int> modes;
};

/// Runs the positive-P integrator on the few-mode lattice from the coherent
/// amplitudes `alpha` and compares n_i, g2_ij and V_{i-j} with the exact
/// evolution of FewModeSystem::from_lattice. Throws NumericalError when the
/// ensemble is too small (fewer than 100 valid trajectories).
ComparisonReport compare_positive_p(const Lattice3D& lattice,
                                    const std::vector<std::complex<double>>& alpha,
                                    const PositivePRun& run, const std::vector<double>& times);

/// Per-trajectory normally ordered estimators from a positive-P run on the
/// few-mode lattice: columns n_i then n_i n_j (i <= j) per sample time.
struct PositivePSamples {
    std::size_t modes = 0;
    std::vector<double> times;
    /// [time][trajectory * columns + c]
    std::vector<std::vector<double>> columns;
    std::size_t trajectories = 0;
    std::size_t invalid = 0;
    std::size_t column_count() const { return modes + modes * (modes + 1) / 2; }
};
PositivePSamples sample_positive_p(const Lattice3D& lattice,
                                   const std::vector<std::complex<double>>& alpha,
                                   const PositivePRun& run, const std::vector<double>& times);

/// z-scores of the stochastic moments against the exact ones (same times):
/// n_i, and g2_ij (i <= j) and V_{i-j} (i < j) where both exact occupations
/// reach min_occupation. Below that a ratio like g2 rests on a handful of
/// trajectories and its jackknife error is not trustworthy. Standard errors
/// by jackknife. Empty `modes` = all.
ComparisonReport compare_moments(const std::vector<ModeMoments>& exact,
                                 const PositivePSamples& samples,
                                 const std::vector<int>& modes = {},
                                 double min_occupation = 0.01);

struct StepHalvingEntry {
    std::string moment;
    double time = 0.0;
    double coarse = 0.0;
    double fine = 0.0;
    double se = 0.0;     ///< of the coarse estimate
    double ratio = 0.0;  ///< |fine - coarse| / se
};

struct StepHalvingReport {
    std::vector<StepHalvingEntry> entries;
    double max_ratio = 0.0;
    bool pass = false;  ///< every ratio < 1
    std::string to_json() const;
};

/// Compares the same moments from a run and its half-step counterpart
/// driven by the same Brownian path (the coarse run uses noise_refinement 2).
/// Pair moments are selected as in compare_moments, using the coarse means.
StepHalvingReport compare_step_halving(const PositivePSamples& coarse,
                                       const PositivePSamples& fine,
                                       const std::vector<int>& modes = {},
                                       double min_occupation = 0.01);

/// Little-endian float64 dump with a JSON header line.
void save_samples(const PositivePSamples& s, const std::filesystem::path& path);
PositivePSamples load_samples(const std::filesystem::path& path);

}  // namespace bec4wm

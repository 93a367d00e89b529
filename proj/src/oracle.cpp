#include "bec4wm/oracle.hpp"

#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <queue>
#include <thread>

#include "bec4wm/constants.hpp"
#include "bec4wm/dynamics.hpp"
#include "bec4wm/errors.hpp"
#include "bec4wm/observables.hpp"

namespace bec4wm {

using cd = std::complex<double>;

void FewModeSystem::validate() const {
    const std::size_t m = modes();
    if (m < 1 || m > 8) throw ConfigError("few-mode system: 1 to 8 modes supported");
    if (alpha.size() != m || fock.size() != m || n_max.size() != m)
        throw ConfigError("few-mode system: per-mode vectors differ in length");
    for (const auto& t : terms)
        for (int idx : {t.i, t.j, t.k, t.l})
            if (idx < 0 || idx >= static_cast<int>(m)) throw ConfigError("few-mode term: bad mode index");
    if (!(max_leakage > 0.0)) throw ConfigError("few-mode system: max_leakage must be positive");
    // a^dag_i a^dag_j a_k a_l only depends on the unordered pairs {i,j}, {k,l}
    using Key = std::array<int, 4>;
    std::map<Key, cd> coeff;
    for (const auto& t : terms)
        coeff[{std::min(t.i, t.j), std::max(t.i, t.j), std::min(t.k, t.l), std::max(t.k, t.l)}] += t.c;
    for (const auto& [k, c] : coeff) {
        const auto it = coeff.find({k[2], k[3], k[0], k[1]});
        const cd partner = it == coeff.end() ? cd(0.0) : it->second;
        if (std::abs(c - std::conj(partner)) > 1e-12 * std::abs(c))
            throw ConfigError("few-mode system: Hamiltonian is not Hermitian");
    }
}

FewModeSystem FewModeSystem::pair_model(double kappa, int n_pump) {
    FewModeSystem s;
    s.omega = {0.0, 0.0, 0.0};
    s.terms = {{kappa, 1, 2, 0, 0}, {kappa, 0, 0, 2, 1}};
    s.alpha.assign(3, 0.0);
    s.fock = {n_pump, 0, 0};
    s.n_max = {0, 16, 16};
    return s;
}

FewModeSystem FewModeSystem::from_lattice(const Lattice3D& lat, double mass, double U0,
                                          const std::vector<cd>& alpha) {
    const std::size_t M = lat.size();
    if (alpha.size() != M) throw ConfigError("from_lattice: one amplitude per lattice bin required");
    FewModeSystem s;
    s.alpha = alpha;
    s.fock.assign(M, -1);
    s.n_max.assign(M, 0);
    std::vector<std::array<int, 3>> sig(M);
    for (std::size_t b = 0; b < M; ++b) {
        const auto c = lat.unravel(b);
        double k2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            sig[b][a] = lat.signed_index(a, c[a]);
            k2 += std::pow(lat.k_at(a, c[a]), 2);
        }
        s.omega.push_back(hbar * k2 / (2.0 * mass));
    }
    const double coeff = U0 / (2.0 * lat.box_volume());
    auto conserves = [&](std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        for (int ax = 0; ax < 3; ++ax) {
            const int n = lat.points(ax);
            const int diff = sig[a][ax] + sig[b][ax] - sig[c][ax] - sig[d][ax];
            if (((diff % n) + n) % n != 0) return false;
        }
        return true;
    };
    for (std::size_t a = 0; a < M; ++a)
        for (std::size_t b = 0; b < M; ++b)
            for (std::size_t c = 0; c < M; ++c)
                for (std::size_t d = 0; d < M; ++d)
                    if (conserves(a, b, c, d))
                        s.terms.push_back({coeff, static_cast<int>(a), static_cast<int>(b),
                                           static_cast<int>(c), static_cast<int>(d)});
    return s;
}

double ModeMoments::g2(std::size_t i, std::size_t j) const {
    if (!(n[i] > 0.0) || !(n[j] > 0.0)) return std::nan("");
    return G[i][j] / (n[i] * n[j]);
}

double ModeMoments::pair_variance(std::size_t i, std::size_t j) const {
    return relative_variance(n[i], n[j], G[i][i], G[j][j], G[i][j]);
}

namespace {

using State = std::vector<int>;

struct Basis {
    std::vector<State> states;
    std::map<State, std::size_t> index;
    Eigen::SparseMatrix<cd, Eigen::RowMajor> H;
    Eigen::VectorXcd psi0;
    std::vector<bool> at_cap;
};

// Applies a_i^dag a_j^dag a_k a_l to |s>; returns the factor (0 if annihilated).
double apply_term(State& s, int i, int j, int k, int l) {
    double f = 1.0;
    for (int m : {l, k}) {
        if (s[m] == 0) return 0.0;
        f *= std::sqrt(static_cast<double>(s[m]));
        --s[m];
    }
    for (int m : {j, i}) {
        ++s[m];
        f *= std::sqrt(static_cast<double>(s[m]));
    }
    return f;
}

Basis build_basis(const FewModeSystem& sys, const std::vector<int>& cap) {
    const std::size_t M = sys.modes();
    // Initial product-state components.
    std::vector<std::vector<std::pair<int, cd>>> per_mode(M);
    for (std::size_t m = 0; m < M; ++m) {
        if (sys.fock[m] >= 0) {
            per_mode[m].push_back({sys.fock[m], 1.0});
            continue;
        }
        const cd a = sys.alpha[m];
        const double mean = std::norm(a);
        if (mean == 0.0) {
            per_mode[m].push_back({0, 1.0});
            continue;
        }
        double log_w = -mean;  // log Poisson weight at n = 0
        double cum = 0.0;
        for (int n = 0;; ++n) {
            if (n > 0) log_w += std::log(mean) - std::log(static_cast<double>(n));
            const double w = std::exp(log_w);
            const double phase = std::arg(a) * n;
            per_mode[m].push_back({n, std::polar(std::sqrt(w), phase)});
            cum += w;
            if (n > mean && 1.0 - cum < sys.coherent_tail) break;
            if (n > 10000) throw NumericalError("few-mode: coherent amplitude too large");
        }
    }
    Basis B;
    std::vector<std::pair<State, cd>> init{{State(M, 0), 1.0}};
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<std::pair<State, cd>> next;
        for (const auto& [s, amp] : init)
            for (const auto& [n, c] : per_mode[m]) {
                State t = s;
                t[m] = n;
                next.push_back({t, amp * c});
            }
        init.swap(next);
    }
    std::queue<std::size_t> todo;
    auto add_state = [&](const State& s) -> std::size_t {
        auto it = B.index.find(s);
        if (it != B.index.end()) return it->second;
        const std::size_t id = B.states.size();
        B.states.push_back(s);
        B.index.emplace(s, id);
        todo.push(id);
        return id;
    };
    auto within_cap = [&](const State& s) {
        for (std::size_t m = 0; m < M; ++m)
            if (cap[m] > 0 && s[m] > cap[m]) return false;
        return true;
    };
    for (const auto& [s, amp] : init)
        if (within_cap(s)) add_state(s);

    std::vector<Eigen::Triplet<cd>> trip;
    while (!todo.empty()) {
        const std::size_t id = todo.front();
        todo.pop();
        const State s = B.states[id];
        double diag = 0.0;
        for (std::size_t m = 0; m < M; ++m) diag += sys.omega[m] * s[m];
        if (diag != 0.0) trip.emplace_back(id, id, diag);
        for (const auto& t : sys.terms) {
            State u = s;
            const double f = apply_term(u, t.i, t.j, t.k, t.l);
            if (f == 0.0 || !within_cap(u)) continue;
            const std::size_t to = add_state(u);
            trip.emplace_back(to, id, t.c * f);
        }
        if (B.states.size() > 2000000) throw NumericalError("few-mode: basis exceeds 2e6 states");
    }
    const auto N = static_cast<Eigen::Index>(B.states.size());
    B.H.resize(N, N);
    B.H.setFromTriplets(trip.begin(), trip.end());
    B.psi0 = Eigen::VectorXcd::Zero(N);
    for (const auto& [s, amp] : init) {
        auto it = B.index.find(s);
        if (it != B.index.end()) B.psi0[static_cast<Eigen::Index>(it->second)] += amp;
    }
    B.at_cap.resize(B.states.size());
    for (std::size_t i = 0; i < B.states.size(); ++i) {
        bool c = false;
        for (std::size_t m = 0; m < M; ++m) c = c || (cap[m] > 0 && B.states[i][m] == cap[m]);
        B.at_cap[i] = c;
    }
    return B;
}

ModeMoments measure(const Basis& B, const Eigen::VectorXcd& psi, std::size_t M, double t) {
    ModeMoments r;
    r.time = t;
    r.n.assign(M, 0.0);
    r.G.assign(M, std::vector<double>(M, 0.0));
    r.basis_size = B.states.size();
    for (std::size_t s = 0; s < B.states.size(); ++s) {
        const double p = std::norm(psi[static_cast<Eigen::Index>(s)]);
        if (p == 0.0) continue;
        r.norm += p;
        const State& st = B.states[s];
        if (B.at_cap[s]) r.leakage += p;
        for (std::size_t i = 0; i < M; ++i) {
            r.n[i] += p * st[i];
            r.total_number += p * st[i];
            for (std::size_t j = 0; j < M; ++j)
                r.G[i][j] += p * st[i] * (st[j] - (i == j ? 1 : 0));
        }
    }
    return r;
}

void propagate(const Basis& B, Eigen::VectorXcd& psi, double dt) {
    // Row-sum norm bounds the spectral radius.
    double hnorm = 0.0;
    for (Eigen::Index r = 0; r < B.H.outerSize(); ++r) {
        double s = 0.0;
        for (decltype(B.H)::InnerIterator it(B.H, r); it; ++it) s += std::abs(it.value());
        hnorm = std::max(hnorm, s);
    }
    const int substeps = std::max(1, static_cast<int>(std::ceil(std::abs(dt) * hnorm / 0.5)));
    const double h = dt / substeps;
    const cd minus_ih(0.0, -h);
    Eigen::VectorXcd term(psi.size()), acc(psi.size());
    for (int s = 0; s < substeps; ++s) {
        term = psi;
        acc = psi;
        for (int j = 1; j < 60; ++j) {
            term = (B.H * term).eval() * (minus_ih / static_cast<double>(j));
            acc += term;
            if (term.norm() < 1e-17 * acc.norm()) break;
        }
        psi = acc;
    }
}

}  // namespace

std::vector<ModeMoments> evolve_exact(const FewModeSystem& sys, const std::vector<double>& times) {
    sys.validate();
    std::vector<int> cap = sys.n_max;
    for (int attempt = 0; attempt < 6; ++attempt) {
        const Basis B = build_basis(sys, cap);
        Eigen::VectorXcd psi = B.psi0;
        std::vector<ModeMoments> out;
        double t = 0.0, worst = 0.0;
        for (double target : times) {
            if (target < t) throw ConfigError("evolve_exact: times must be ascending and >= 0");
            if (target > t) propagate(B, psi, target - t);
            t = target;
            out.push_back(measure(B, psi, sys.modes(), t));
            worst = std::max(worst, out.back().leakage);
        }
        if (worst <= sys.max_leakage) return out;
        bool any = false;
        for (int& c : cap)
            if (c > 0) {
                c *= 2;
                any = true;
            }
        if (!any) break;
    }
    throw NumericalError("evolve_exact: truncation leakage above tolerance after cap doubling");
}

ModeMoments evolve_exact(const FewModeSystem& sys, double t) {
    return evolve_exact(sys, std::vector<double>{t}).front();
}

PositivePSamples sample_positive_p(const Lattice3D& lat, const std::vector<cd>& alpha,
                                   const PositivePRun& run, const std::vector<double>& times) {
    if (alpha.size() != lat.size()) throw ConfigError("sample_positive_p: amplitude count");
    if (times.empty() || !(times.back() > 0.0)) throw ConfigError("sample_positive_p: bad times");
    const SpectralTransform fft(lat);
    ComplexField ak(lat, Space::momentum);
    double natoms = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        ak.values[i] = alpha[i];
        natoms += std::norm(alpha[i]);
    }
    FieldPair init;
    init.psi = fft.to_position(ak);
    init.psi_tilde = init.psi;
    for (auto& v : init.psi_tilde.values) v = std::conj(v);

    SimConfig cfg;
    cfg.params.mass = run.mass;
    cfg.params.peak_density.reset();
    cfg.params.atom_number = natoms > 0.0 ? natoms : 1.0;
    cfg.points = lat.points();
    cfg.lengths = lat.lengths();
    cfg.t_final = times.back();
    cfg.n_steps = run.steps;
    cfg.n_trajectories = run.n_trajectories;
    cfg.base_seed = run.base_seed;
    cfg.U0 = run.U0;
    cfg.noise_refinement = run.noise_refinement;
    cfg.sample_times = times;
    cfg.validate();

    PositivePSamples out;
    out.modes = lat.size();
    out.times = times;
    const std::size_t C = out.column_count();
    const std::size_t ntraj = static_cast<std::size_t>(run.n_trajectories);
    std::vector<std::vector<double>> cols(times.size(), std::vector<double>(ntraj * C, 0.0));
    std::vector<char> valid(ntraj, 0);

    auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t id = lo; id < hi; ++id) {
            const auto rec = run_trajectory(init, cfg, id, fft);
            if (!rec.valid) continue;
            valid[id] = 1;
            for (std::size_t s = 0; s < times.size(); ++s) {
                const auto& smp = rec.samples[s];
                double* row = &cols[s][id * C];
                std::vector<cd> n(out.modes);
                for (std::size_t i = 0; i < out.modes; ++i) {
                    n[i] = smp.a_tilde[i] * smp.a[i];
                    row[i] = n[i].real();
                }
                std::size_t c = out.modes;
                for (std::size_t i = 0; i < out.modes; ++i)
                    for (std::size_t j = i; j < out.modes; ++j) row[c++] = (n[i] * n[j]).real();
            }
        }
    };
    const int workers = std::min<int>(resolve_workers(run.workers), static_cast<int>(ntraj));
    if (workers <= 1) {
        work(0, ntraj);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (ntraj + workers - 1) / workers;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(work, std::min(ntraj, w * chunk), std::min(ntraj, (w + 1) * chunk));
        for (auto& t : pool) t.join();
    }
    // Compact to valid trajectories in id order.
    out.columns.resize(times.size());
    for (std::size_t id = 0; id < ntraj; ++id) {
        if (!valid[id]) {
            ++out.invalid;
            continue;
        }
        ++out.trajectories;
        for (std::size_t s = 0; s < times.size(); ++s)
            out.columns[s].insert(out.columns[s].end(), cols[s].begin() + id * C,
                                  cols[s].begin() + (id + 1) * C);
    }
    return out;
}

namespace {

std::size_t pair_column(std::size_t modes, std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    std::size_t c = modes;
    for (std::size_t a = 0; a < modes; ++a)
        for (std::size_t b = a; b < modes; ++b) {
            if (a == i && b == j) return c;
            ++c;
        }
    return c;
}

}  // namespace

namespace {

struct MomentSpec {
    std::string name;
    std::size_t time_index;
    int type;  // 0: n_i, 1: g2_ij, 2: V_{i-j}
    std::size_t i, j;
};

std::vector<std::size_t> mode_list(std::size_t modes, const std::vector<int>& requested) {
    std::vector<std::size_t> out;
    if (requested.empty()) {
        for (std::size_t i = 0; i < modes; ++i) out.push_back(i);
    } else {
        for (int m : requested) {
            if (m < 0 || static_cast<std::size_t>(m) >= modes)
                throw ConfigError("compared mode index out of range");
            out.push_back(static_cast<std::size_t>(m));
        }
    }
    return out;
}

// occupied(t, i): whether pair moments involving mode i are compared at time index t.
template <class Occupied>
std::vector<MomentSpec> moment_specs(std::size_t ntimes, const std::vector<std::size_t>& modes,
                                     Occupied occupied) {
    std::vector<MomentSpec> out;
    for (std::size_t s = 0; s < ntimes; ++s) {
        for (std::size_t i : modes) out.push_back({"n[" + std::to_string(i) + "]", s, 0, i, i});
        for (std::size_t a = 0; a < modes.size(); ++a)
            for (std::size_t b = a; b < modes.size(); ++b) {
                const std::size_t i = modes[a], j = modes[b];
                if (!occupied(s, i) || !occupied(s, j)) continue;
                out.push_back({"g2[" + std::to_string(i) + "," + std::to_string(j) + "]", s, 1, i, j});
                if (i != j)
                    out.push_back({"V[" + std::to_string(i) + "-" + std::to_string(j) + "]", s, 2, i, j});
            }
    }
    return out;
}

MeanStat estimate(const PositivePSamples& pp, const MomentSpec& m) {
    const std::size_t M = pp.modes, C = pp.column_count();
    const std::size_t i = m.i, j = m.j;
    const auto& col = pp.columns[m.time_index];
    if (m.type == 0) return jackknife(col, C, [i](const std::vector<double>& c) { return c[i]; });
    const std::size_t cij = pair_column(M, i, j);
    if (m.type == 1)
        return jackknife(col, C, [=](const std::vector<double>& c) { return c[cij] / (c[i] * c[j]); });
    const std::size_t cii = pair_column(M, i, i), cjj = pair_column(M, j, j);
    return jackknife(col, C, [=](const std::vector<double>& c) {
        return relative_variance(c[i], c[j], c[cii], c[cjj], c[cij]);
    });
}

double exact_value(const ModeMoments& ex, const MomentSpec& m) {
    if (m.type == 0) return ex.n[m.i];
    if (m.type == 1) return ex.g2(m.i, m.j);
    return ex.pair_variance(m.i, m.j);
}

}  // namespace

ComparisonReport compare_moments(const std::vector<ModeMoments>& exact,
                                 const PositivePSamples& pp, const std::vector<int>& requested,
                                 double min_occupation) {
    if (exact.size() != pp.times.size()) throw ConfigError("compare_moments: time count mismatch");
    if (pp.trajectories < 100)
        throw NumericalError("compare_moments: fewer than 100 valid trajectories");
    const auto modes = mode_list(pp.modes, requested);
    const auto specs = moment_specs(pp.times.size(), modes, [&](std::size_t s, std::size_t i) {
        return exact[s].n[i] >= min_occupation;
    });
    ComparisonReport rep;
    rep.trajectories = pp.trajectories;
    rep.invalid = pp.invalid;
    for (const auto& m : specs) {
        const MeanStat st = estimate(pp, m);
        const double ex = exact_value(exact[m.time_index], m);
        ComparisonEntry e{m.name, pp.times[m.time_index], ex, st.mean, st.se, 0.0};
        const double diff = st.mean - ex;
        e.z = st.se > 0.0 ? diff / st.se
                          : (std::abs(diff) < 1e-12 * (1.0 + std::abs(ex)) ? 0.0 : 1e9);
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(e.z));
        rep.entries.push_back(e);
    }
    rep.pass = rep.max_abs_z < 3.0;
    return rep;
}

ComparisonReport compare_positive_p(const Lattice3D& lat, const std::vector<cd>& alpha,
                                    const PositivePRun& run, const std::vector<double>& times) {
    const auto exact = evolve_exact(FewModeSystem::from_lattice(lat, run.mass, run.U0, alpha), times);
    return compare_moments(exact, sample_positive_p(lat, alpha, run, times), run.modes);
}

StepHalvingReport compare_step_halving(const PositivePSamples& coarse,
                                       const PositivePSamples& fine,
                                       const std::vector<int>& requested,
                                       double min_occupation) {
    if (coarse.modes != fine.modes || coarse.times != fine.times)
        throw ConfigError("compare_step_halving: runs differ in modes or times");
    const auto modes = mode_list(coarse.modes, requested);
    std::vector<std::vector<double>> nbar(coarse.times.size());
    for (std::size_t s = 0; s < coarse.times.size(); ++s)
        for (std::size_t i = 0; i < coarse.modes; ++i)
            nbar[s].push_back(estimate(coarse, {"", s, 0, i, i}).mean);
    const auto specs = moment_specs(coarse.times.size(), modes, [&](std::size_t s, std::size_t i) {
        return nbar[s][i] >= min_occupation;
    });
    StepHalvingReport rep;
    for (const auto& m : specs) {
        const MeanStat a = estimate(coarse, m), b = estimate(fine, m);
        StepHalvingEntry e{m.name, coarse.times[m.time_index], a.mean, b.mean, a.se, 0.0};
        const double diff = std::abs(b.mean - a.mean);
        e.ratio = a.se > 0.0 ? diff / a.se : (diff < 1e-12 ? 0.0 : 1e9);
        rep.max_ratio = std::max(rep.max_ratio, e.ratio);
        rep.entries.push_back(e);
    }
    rep.pass = rep.max_ratio < 1.0;
    return rep;
}

std::string StepHalvingReport::to_json() const {
    nlohmann::json j;
    j["max_ratio"] = max_ratio;
    j["pass"] = pass;
    auto& arr = j["moments"] = nlohmann::json::array();
    for (const auto& e : entries)
        arr.push_back({{"moment", e.moment}, {"time_s", e.time}, {"coarse", e.coarse},
                       {"fine", e.fine}, {"se", e.se}, {"ratio", e.ratio}});
    return j.dump(2);
}

void save_samples(const PositivePSamples& s, const std::filesystem::path& path) {
    nlohmann::json h{{"modes", s.modes}, {"times", s.times}, {"trajectories", s.trajectories},
                     {"invalid", s.invalid}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << h.dump() << '\n';
    for (const auto& col : s.columns)
        for (double v : col) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            char b[8];
            for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
            out.write(b, 8);
        }
}

PositivePSamples load_samples(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    PositivePSamples s;
    try {
        const auto h = nlohmann::json::parse(line);
        s.modes = h.at("modes");
        s.times = h.at("times").get<std::vector<double>>();
        s.trajectories = h.at("trajectories");
        s.invalid = h.at("invalid");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("corrupt sample file " + path.string() + ": " + e.what());
    }
    const std::size_t per = s.trajectories * s.column_count();
    s.columns.assign(s.times.size(), std::vector<double>(per));
    for (auto& col : s.columns)
        for (double& v : col) {
            unsigned char b[8];
            if (!in.read(reinterpret_cast<char*>(b), 8))
                throw ConfigError("truncated sample file " + path.string());
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            std::memcpy(&v, &bits, 8);
        }
    return s;
}

std::string ComparisonReport::to_json() const {
    nlohmann::json j;
    j["trajectories"] = trajectories;
    j["invalid"] = invalid;
    j["max_abs_z"] = max_abs_z;
    j["pass"] = pass;
    auto& arr = j["moments"] = nlohmann::json::array();
    for (const auto& e : entries)
        arr.push_back({{"moment", e.moment}, {"time_s", e.time}, {"exact", e.exact},
                       {"stochastic", e.stochastic}, {"se", e.se}, {"z", e.z}});
    return j.dump(2);
}

}  // namespace bec4wm

#include "bec4wm/observables.hpp"

#include <algorithm>
#include <cmath>

#include "bec4wm/errors.hpp"

namespace bec4wm {

namespace {

const SampleMoments& sample_at(const EnsembleMoments& m, std::size_t s) {
    if (s >= m.samples.size()) throw std::out_of_range("sample index out of range");
    if (m.n_valid < 2) throw NumericalError("fewer than two valid trajectories");
    return m.samples[s];
}

// Mean and standard error from a sum and a sum of squares over n samples.
std::pair<double, double> mean_se(double sum, double sum_sq, double n) {
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

MeanStat column_stat(const std::vector<cplx>& v) {
    const double n = static_cast<double>(v.size());
    double s = 0.0, s2 = 0.0;
    for (const auto& x : v) {
        s += x.real();
        s2 += x.real() * x.real();
    }
    auto [m, e] = mean_se(s, s2, n);
    return {m, e};
}

}  // namespace

DensityField momentum_density(const EnsembleMoments& m, std::size_t sample) {
    const auto& s = sample_at(m, sample);
    const double n = static_cast<double>(m.n_valid);
    DensityField d;
    d.time = s.time;
    d.trajectories = m.n_valid;
    const std::size_t nb = s.dens_re.size();
    d.n.resize(nb);
    d.n_im.resize(nb);
    d.se.resize(nb);
    d.se_im.resize(nb);
    double peak = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
        std::tie(d.n[i], d.se[i]) = mean_se(s.dens_re[i], s.dens_re_sq[i], n);
        std::tie(d.n_im[i], d.se_im[i]) = mean_se(s.dens_im[i], s.dens_im_sq[i], n);
        peak = std::max(peak, std::abs(d.n[i]));
    }
    // Transform round-off is absolute on the scale of the largest bin, so a
    // spread below that floor (e.g. identical trajectories) is not tested.
    std::size_t tested = 0, outliers = 0;
    for (std::size_t i = 0; i < nb; ++i) {
        if (d.se_im[i] > 1e-12 * peak) {
            const double z = std::abs(d.n_im[i]) / d.se_im[i];
            d.max_imag_z = std::max(d.max_imag_z, z);
            ++tested;
            if (z > 3.0) ++outliers;
        }
    }
    d.imag_outlier_fraction = tested ? static_cast<double>(outliers) / tested : 0.0;
    return d;
}

ScatteredCount count_scattered(const DensityField& n, const Lattice3D& lattice, double k_r,
                               double exclusion) {
    ScatteredCount c;
    for (std::size_t idx = 0; idx < n.n.size(); ++idx) {
        c.total += n.n[idx];
        const auto ijk = lattice.unravel(idx);
        if (std::abs(lattice.k_at(0, ijk[0])) <= exclusion * k_r) c.n_sc += n.n[idx];
    }
    c.fraction = c.total != 0.0 ? c.n_sc / c.total : 0.0;
    return c;
}

ScatteredCount count_scattered(const EnsembleMoments& m, std::size_t sample) {
    const auto& s = sample_at(m, sample);
    const MeanStat sc = column_stat(s.scattered);
    const MeanStat tot = column_stat(s.total);
    return {sc.mean, sc.se, tot.mean, tot.mean != 0.0 ? sc.mean / tot.mean : 0.0};
}

MeanStat total_number(const EnsembleMoments& m, std::size_t sample) {
    return column_stat(sample_at(m, sample).total);
}

MeanStat total_number_imag(const EnsembleMoments& m, std::size_t sample) {
    std::vector<cplx> im;
    for (const auto& v : sample_at(m, sample).total) im.emplace_back(v.imag(), 0.0);
    return column_stat(im);
}

HaloProfile radial_profile(const DensityField& n, const Lattice3D& lattice, double k_r,
                           const RadialOptions& opt) {
    const double w = opt.bin_width > 0.0 ? opt.bin_width : 0.02 * k_r;
    const double k_top = [&] {
        double s = 0.0;
        for (int a = 0; a < 3; ++a) s += lattice.k_max(a) * lattice.k_max(a);
        return std::sqrt(s);
    }();
    const std::size_t nbins = static_cast<std::size_t>(std::ceil(k_top / w)) + 1;
    std::vector<double> sum(nbins, 0.0), var(nbins, 0.0);
    std::vector<int> count(nbins, 0);
    for (std::size_t idx = 0; idx < n.n.size(); ++idx) {
        const auto c = lattice.unravel(idx);
        const double kx = lattice.k_at(0, c[0]), ky = lattice.k_at(1, c[1]),
                     kz = lattice.k_at(2, c[2]);
        if (std::abs(kx) > opt.axial_mask * k_r) continue;
        const std::size_t b = static_cast<std::size_t>(std::sqrt(kx * kx + ky * ky + kz * kz) / w);
        if (b >= nbins) continue;
        sum[b] += n.n[idx];
        var[b] += n.se.empty() ? 0.0 : n.se[idx] * n.se[idx];
        ++count[b];
    }
    HaloProfile p;
    for (std::size_t b = 0; b < nbins; ++b) {
        if (count[b] == 0) continue;
        p.k.push_back((b + 0.5) * w);
        p.n.push_back(sum[b] / count[b]);
        p.se.push_back(std::sqrt(var[b]) / count[b]);
        p.modes.push_back(count[b]);
    }
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < p.k.size(); ++i)
        if (p.k[i] >= opt.fit_lo * k_r && p.k[i] <= opt.fit_hi * k_r) {
            xs.push_back(p.k[i]);
            ys.push_back(p.n[i]);
        }
    GaussianFitOptions fo;
    fo.fit_center = true;
    fo.fit_baseline = opt.fit_baseline || opt.fit_slope;
    fo.fit_slope = opt.fit_slope;
    p.fit = fit_gaussian(xs, ys, fo);
    p.fitted = true;
    return p;
}

CorrelationCurve g2_average(const EnsembleMoments& m, std::size_t sample, PairKind kind,
                            int axis) {
    const auto& s = sample_at(m, sample);
    const Lattice3D lat = Lattice3D::few_mode(m.points, m.lengths);
    const MomentLayout layout(lat, m.spec);
    if (layout.domain.empty()) throw NumericalError("g2_average: empty correlation domain");
    const DensityField d = momentum_density(m, sample);
    const std::size_t per = layout.slot_count();
    const std::size_t ntraj = s.pair_sums.size() / per;

    CorrelationCurve c;
    c.axis = axis;
    c.kind = kind;
    // Products of mean densities as U-statistics: the same-trajectory terms,
    // which carry the sampling covariance of the two means, are removed.
    const double T = static_cast<double>(ntraj);
    double den_max = 0.0;
    std::vector<double> dens(layout.lag_count(axis), 0.0);
    std::vector<MeanStat> nums(layout.lag_count(axis));
    for (int lag = -m.spec.max_lag[axis]; lag <= m.spec.max_lag[axis]; ++lag) {
        const auto& p = layout.partner[layout.slot(kind, axis, lag)];
        cplx prod = 0.0;
        for (std::size_t q = 0; q < layout.domain.size(); ++q)
            if (p[q] >= 0) {
                const std::size_t a = layout.domain[q], b = static_cast<std::size_t>(p[q]);
                prod += cplx(d.n[a], d.n_im[a]) * cplx(d.n[b], d.n_im[b]);
            }
        const std::size_t slot = layout.slot(kind, axis, lag);
        double sum = 0.0, sum2 = 0.0;
        cplx csum = 0.0;
        for (std::size_t t = 0; t < ntraj; ++t) {
            const cplx v = s.pair_sums[t * per + slot];
            csum += v;
            sum += v.real();
            sum2 += v.real() * v.real();
        }
        const auto [mean, se] = mean_se(sum, sum2, T);
        const double den = ((T * prod - csum / T) / (T - 1.0)).real();
        nums[lag + m.spec.max_lag[axis]] = {mean, se};
        dens[lag + m.spec.max_lag[axis]] = den;
        den_max = std::max(den_max, std::abs(den));
    }
    for (int lag = -m.spec.max_lag[axis]; lag <= m.spec.max_lag[axis]; ++lag) {
        const double den = dens[lag + m.spec.max_lag[axis]];
        if (!(std::abs(den) > 1e-12 * den_max) || den <= 0.0) {
            c.dropped_lags.push_back(lag);
            continue;
        }
        const auto& num = nums[lag + m.spec.max_lag[axis]];
        c.dk.push_back(lag * lat.dk(axis));
        c.g2.push_back(num.mean / den);
        c.se.push_back(num.se / den);
    }
    if (c.dk.size() >= 4) {
        GaussianFitOptions fo;
        fo.fit_center = false;
        fo.baseline = 1.0;
        fo.width_guess = 1.5 * lat.dk(axis);
        try {
            c.fit = fit_gaussian(c.dk, c.g2, fo);
            c.fitted = true;
        } catch (const NumericalError&) {
            c.fitted = false;
        }
    }
    return c;
}

MeanStat jackknife(const std::vector<double>& values, std::size_t per,
                   const std::function<double(const std::vector<double>&)>& f) {
    const std::size_t n = values.size() / per;
    if (n < 2) throw NumericalError("jackknife needs at least two samples");
    std::vector<double> sum(per, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < per; ++c) sum[c] += values[t * per + c];
    std::vector<double> mean(per);
    for (std::size_t c = 0; c < per; ++c) mean[c] = sum[c] / n;
    const double full = f(mean);
    std::vector<double> loo(per);
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t c = 0; c < per; ++c) loo[c] = (sum[c] - values[t * per + c]) / (n - 1.0);
        const double v = f(loo);
        acc += v;
        acc2 += v * v;
    }
    const double m = acc / n;
    const double var = (n - 1.0) / n * std::max(acc2 - n * m * m, 0.0);
    // First-order bias correction (products of means are biased by the
    // sampling covariance).
    return {n * full - (n - 1.0) * m, std::sqrt(var)};
}

double relative_variance(double mi, double mj, double gii, double gjj, double gij, double eta) {
    const double normal_var = gii + gjj - 2.0 * gij - (mi - mj) * (mi - mj);
    return 1.0 + eta * normal_var / (mi + mj);
}

namespace {

// Columns per trajectory: N_0..N_3, then N_i N_j for i <= j (10 products).
std::vector<double> quadrant_columns(const SampleMoments& s, std::size_t& per) {
    per = 14;
    const std::size_t ntraj = s.quadrants.size() / 4;
    std::vector<double> v(ntraj * per);
    for (std::size_t t = 0; t < ntraj; ++t) {
        const cplx* q = &s.quadrants[4 * t];
        double* row = &v[t * per];
        for (int i = 0; i < 4; ++i) row[i] = q[i].real();
        int c = 4;
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) row[c++] = (q[i] * q[j]).real();
    }
    return v;
}

int product_column(int i, int j) {
    if (i > j) std::swap(i, j);
    int c = 4;
    for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b) {
            if (a == i && b == j) return c;
            ++c;
        }
    return -1;
}

}  // namespace

QuadrantStats quadrant_stats(const EnsembleMoments& m, std::size_t sample, double eta) {
    const auto& s = sample_at(m, sample);
    std::size_t per = 0;
    const auto cols = quadrant_columns(s, per);
    QuadrantStats q;
    q.eta = eta;
    q.trajectories = s.quadrants.size() / 4;
    for (int i = 0; i < 4; ++i) {
        const auto st = jackknife(cols, per, [i](const std::vector<double>& c) { return c[i]; });
        q.mean[i] = st.mean;
        q.mean_se[i] = st.se;
    }
    bool empty = true;
    for (double v : q.mean) empty = empty && v == 0.0;
    if (empty) throw NumericalError("quadrant_stats: empty shell");
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const int cij = product_column(i, j), cii = product_column(i, i),
                      cjj = product_column(j, j);
            q.normal[i][j] = jackknife(cols, per, [cij](const std::vector<double>& c) {
                                 return c[cij];
                             }).mean;
            const auto g = jackknife(cols, per, [=](const std::vector<double>& c) {
                return c[cij] / (c[i] * c[j]);
            });
            q.g2[i][j] = g.mean;
            q.g2_se[i][j] = g.se;
            if (i == j) {
                q.variance[i][j] = 1.0;
                continue;
            }
            const auto v = jackknife(cols, per, [=](const std::vector<double>& c) {
                return relative_variance(c[i], c[j], c[cii], c[cjj], c[cij], eta);
            });
            q.variance[i][j] = v.mean;
            q.variance_se[i][j] = v.se;
        }
    return q;
}

SymmetricPairCheck symmetric_pair_check(const EnsembleMoments& m, std::size_t sample, int i,
                                        int j, double eta) {
    const auto& s = sample_at(m, sample);
    const std::size_t ntraj = s.quadrants.size() / 4;
    // Exchange-symmetrised sample: every trajectory enters once as is and once
    // with i and j swapped.
    double ni = 0.0, nj = 0.0, gii = 0.0, gjj = 0.0, gij = 0.0;
    for (std::size_t t = 0; t < ntraj; ++t) {
        const cplx a = s.quadrants[4 * t + i], b = s.quadrants[4 * t + j];
        for (int swap = 0; swap < 2; ++swap) {
            const cplx x = swap ? b : a, y = swap ? a : b;
            ni += x.real();
            nj += y.real();
            gii += (x * x).real();
            gjj += (y * y).real();
            gij += (x * y).real();
        }
    }
    const double n = 2.0 * static_cast<double>(ntraj);
    ni /= n;
    nj /= n;
    gii /= n;
    gjj /= n;
    gij /= n;
    SymmetricPairCheck r{};
    r.v_direct = relative_variance(ni, nj, gii, gjj, gij, eta);
    r.g_ii = gii / (ni * ni);
    r.g_ij = gij / (ni * nj);
    r.v_alt = 1.0 + eta * ni * (r.g_ii - r.g_ij);
    r.squeezed = r.v_direct < 1.0;
    r.cs_violated = r.g_ij > r.g_ii;
    return r;
}

}  // namespace bec4wm

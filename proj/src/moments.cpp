#include "bec4wm/moments.hpp"

#include <cmath>

#include "bec4wm/errors.hpp"

namespace bec4wm {

int quadrant_of(double kx, double ky) {
    if (kx > 0.0 && -kx <= ky && ky < kx) return quad_A;
    if (ky > 0.0 && -ky < kx && kx <= ky) return quad_B;
    if (kx < 0.0 && kx < ky && ky <= -kx) return quad_C;
    if (ky < 0.0 && ky <= kx && kx < -ky) return quad_D;
    return -1;
}

MomentLayout::MomentLayout(const Lattice3D& lat, const AnalysisSpec& s) : lattice(lat), spec(s) {
    if (!(spec.k_r > 0.0)) throw ConfigError("analysis: k_r must be positive");
    for (int a = 0; a < 3; ++a)
        if (spec.max_lag[a] < 0) throw ConfigError("analysis: negative lag range");
    const double kr2 = spec.k_r * spec.k_r;
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto c = lat.unravel(idx);
        const double kx = lat.k_at(0, c[0]), ky = lat.k_at(1, c[1]), kz = lat.k_at(2, c[2]);
        if (std::abs(kx) <= spec.exclusion * spec.k_r) scattered.push_back(idx);
        bool nyq = false;
        for (int a = 0; a < 3; ++a) nyq = nyq || lat.is_nyquist(a, c[a]);
        if (nyq) continue;
        const double k2 = kx * kx + ky * ky + kz * kz;
        if (std::abs(1.0 - k2 / kr2) < spec.shell && std::abs(kx) <= spec.axial_mask * spec.k_r) {
            domain.push_back(idx);
            quadrant.push_back(quadrant_of(kx, ky));
        }
    }

    partner.resize(slot_count());
    for (int kind = 0; kind < 2; ++kind)
        for (int axis = 0; axis < 3; ++axis)
            for (int lag = -spec.max_lag[axis]; lag <= spec.max_lag[axis]; ++lag) {
                auto& p = partner[slot(static_cast<PairKind>(kind), axis, lag)];
                p.resize(domain.size());
                for (std::size_t d = 0; d < domain.size(); ++d) {
                    const auto c = lat.unravel(domain[d]);
                    int sgn[3];
                    for (int a = 0; a < 3; ++a) {
                        const int si = lat.signed_index(a, c[a]);
                        sgn[a] = kind == static_cast<int>(PairKind::back_to_back) ? -si : si;
                    }
                    sgn[axis] += lag;
                    int st[3];
                    bool ok = true;
                    for (int a = 0; a < 3 && ok; ++a) {
                        st[a] = lat.storage_index(a, sgn[a]);
                        ok = st[a] >= 0 && !lat.is_nyquist(a, st[a]);
                    }
                    p[d] = ok ? static_cast<long>(lat.index(st[0], st[1], st[2])) : -1;
                }
            }
}

std::size_t MomentLayout::slot(PairKind kind, int axis, int lag) const {
    std::size_t off = static_cast<std::size_t>(kind) * (lag_count(0) + lag_count(1) + lag_count(2));
    for (int a = 0; a < axis; ++a) off += lag_count(a);
    return off + static_cast<std::size_t>(lag + spec.max_lag[axis]);
}

std::size_t MomentLayout::slot_count() const {
    return 2 * (lag_count(0) + lag_count(1) + lag_count(2));
}

EnsembleMoments::EnsembleMoments(const MomentLayout& layout, const std::vector<double>& times)
    : points(layout.lattice.points()), lengths(layout.lattice.lengths()), spec(layout.spec) {
    const std::size_t n = layout.lattice.size();
    for (double t : times) {
        SampleMoments s;
        s.time = t;
        s.dens_re.assign(n, 0.0);
        s.dens_im.assign(n, 0.0);
        s.dens_re_sq.assign(n, 0.0);
        s.dens_im_sq.assign(n, 0.0);
        if (spec.track_mean_field) {
            s.mf_re.assign(n, 0.0);
            s.mf_im.assign(n, 0.0);
            s.mf_re_sq.assign(n, 0.0);
            s.mf_im_sq.assign(n, 0.0);
        }
        samples.push_back(std::move(s));
    }
}

std::size_t EnsembleMoments::slot_count() const {
    return 2 * ((2 * spec.max_lag[0] + 1) + (2 * spec.max_lag[1] + 1) + (2 * spec.max_lag[2] + 1));
}

void EnsembleMoments::add(const MomentLayout& layout, const TrajectoryRecord& rec) {
    if (!rec.valid) {
        ++n_invalid;
        invalid_ids.push_back(rec.trajectory_id);
        return;
    }
    if (rec.samples.size() != samples.size())
        throw std::logic_error("EnsembleMoments::add: sample count mismatch");
    const std::size_t nb = layout.lattice.size();
    std::vector<cplx> n(nb);
    for (std::size_t si = 0; si < samples.size(); ++si) {
        const auto& smp = rec.samples[si];
        auto& acc = samples[si];
        cplx tot = 0.0;
        for (std::size_t i = 0; i < nb; ++i) {
            n[i] = smp.a_tilde[i] * smp.a[i];
            acc.dens_re[i] += n[i].real();
            acc.dens_im[i] += n[i].imag();
            acc.dens_re_sq[i] += n[i].real() * n[i].real();
            acc.dens_im_sq[i] += n[i].imag() * n[i].imag();
            tot += n[i];
        }
        if (spec.track_mean_field) {
            for (std::size_t i = 0; i < nb; ++i) {
                const cplx d = smp.a_tilde[i] - std::conj(smp.a[i]);
                acc.mf_re[i] += d.real();
                acc.mf_im[i] += d.imag();
                acc.mf_re_sq[i] += d.real() * d.real();
                acc.mf_im_sq[i] += d.imag() * d.imag();
            }
        }
        cplx sc = 0.0;
        for (std::size_t i : layout.scattered) sc += n[i];
        acc.total.push_back(tot);
        acc.scattered.push_back(sc);

        std::array<cplx, 4> q{};
        for (std::size_t d = 0; d < layout.domain.size(); ++d)
            if (layout.quadrant[d] >= 0) q[layout.quadrant[d]] += n[layout.domain[d]];
        acc.quadrants.insert(acc.quadrants.end(), q.begin(), q.end());

        for (const auto& p : layout.partner) {
            cplx s = 0.0;
            for (std::size_t d = 0; d < layout.domain.size(); ++d)
                if (p[d] >= 0) s += n[layout.domain[d]] * n[static_cast<std::size_t>(p[d])];
            acc.pair_sums.push_back(s);
        }
    }
    ++n_valid;
}

void EnsembleMoments::merge(const EnsembleMoments& o) {
    if (o.points != points || o.lengths != lengths || o.samples.size() != samples.size())
        throw std::logic_error("EnsembleMoments::merge: incompatible accumulators");
    auto add_vec = [](std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) a[i] += b[i];
    };
    auto append = [](std::vector<cplx>& a, const std::vector<cplx>& b) {
        a.insert(a.end(), b.begin(), b.end());
    };
    for (std::size_t s = 0; s < samples.size(); ++s) {
        auto& a = samples[s];
        const auto& b = o.samples[s];
        add_vec(a.dens_re, b.dens_re);
        add_vec(a.dens_im, b.dens_im);
        add_vec(a.dens_re_sq, b.dens_re_sq);
        add_vec(a.dens_im_sq, b.dens_im_sq);
        add_vec(a.mf_re, b.mf_re);
        add_vec(a.mf_im, b.mf_im);
        add_vec(a.mf_re_sq, b.mf_re_sq);
        add_vec(a.mf_im_sq, b.mf_im_sq);
        append(a.pair_sums, b.pair_sums);
        append(a.quadrants, b.quadrants);
        append(a.total, b.total);
        append(a.scattered, b.scattered);
    }
    n_valid += o.n_valid;
    n_invalid += o.n_invalid;
    invalid_ids.insert(invalid_ids.end(), o.invalid_ids.begin(), o.invalid_ids.end());
}

}  // namespace bec4wm

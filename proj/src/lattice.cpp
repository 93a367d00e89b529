#include "bec4wm/lattice.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bec4wm/errors.hpp"

namespace bec4wm {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

Lattice3D::Lattice3D(std::array<int, 3> points, std::array<double, 3> lengths)
    : Lattice3D(points, lengths, false) {}

Lattice3D Lattice3D::few_mode(std::array<int, 3> points, std::array<double, 3> lengths) {
    return Lattice3D(points, lengths, true);
}

Lattice3D::Lattice3D(std::array<int, 3> points, std::array<double, 3> lengths, bool degenerate)
    : n_(points), L_(lengths) {
    for (int a = 0; a < 3; ++a) {
        const int n = n_[a];
        const bool ok = degenerate ? (n == 1 || (n >= 2 && n % 2 == 0)) : (n >= 4 && n % 2 == 0);
        if (!ok) {
            throw ConfigError("lattice axis " + std::to_string(a) + ": point count " +
                                        std::to_string(n) + " must be even and >= 4");
        }
        if (!(L_[a] > 0.0) || !std::isfinite(L_[a])) {
            throw ConfigError("lattice axis " + std::to_string(a) +
                                        ": box length must be positive");
        }
    }
    dV_ = dx(0) * dx(1) * dx(2);
    size_ = static_cast<std::size_t>(n_[0]) * n_[1] * n_[2];
}

double Lattice3D::dk(int axis) const { return 2.0 * std::numbers::pi / L_[axis]; }

double Lattice3D::k_max(int axis) const { return std::numbers::pi / dx(axis); }

std::vector<double> Lattice3D::k_axis(int axis) const {
    std::vector<double> k(n_[axis]);
    for (int i = 0; i < n_[axis]; ++i) k[i] = k_at(axis, i);
    return k;
}

int Lattice3D::nearest_k_slot(int axis, double k) const {
    const int s = static_cast<int>(std::lround(k / dk(axis)));
    return storage_index(axis, s);
}

Lattice3D build_lattice(std::array<int, 3> points, std::array<double, 3> lengths) {
    return Lattice3D(points, lengths);
}

std::vector<std::array<double, 3>> momentum_grid(const Lattice3D& lattice) {
    std::vector<std::array<double, 3>> out(lattice.size());
    const auto kx = lattice.k_axis(0);
    const auto ky = lattice.k_axis(1);
    const auto kz = lattice.k_axis(2);
    std::size_t idx = 0;
    for (double x : kx)
        for (double y : ky)
            for (double z : kz) out[idx++] = {x, y, z};
    return out;
}

std::vector<std::size_t> negated_bins(const Lattice3D& lattice) {
    const auto& n = lattice.points();
    std::vector<std::size_t> out(lattice.size());
    for (int i = 0; i < n[0]; ++i) {
        const int ni = (n[0] - i) % n[0];
        for (int j = 0; j < n[1]; ++j) {
            const int nj = (n[1] - j) % n[1];
            for (int l = 0; l < n[2]; ++l) {
                const int nl = (n[2] - l) % n[2];
                out[lattice.index(i, j, l)] = lattice.index(ni, nj, nl);
            }
        }
    }
    return out;
}

bool ComplexField::all_finite() const {
    for (const auto& v : values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

struct SpectralTransform::Plans {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

SpectralTransform::SpectralTransform(const Lattice3D& lattice, bool measure)
    : lattice_(lattice),
      scale_(std::sqrt(lattice.cell_volume() / static_cast<double>(lattice.size()))),
      plans_(std::make_unique<Plans>()) {
    const auto& n = lattice_.points();
    CVector scratch(lattice_.size());
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = measure ? FFTW_MEASURE : FFTW_ESTIMATE;
    std::lock_guard lock(fftw_planner_mutex());
    plans_->fwd = fftw_plan_dft_3d(n[0], n[1], n[2], buf, buf, FFTW_FORWARD, flags);
    plans_->bwd = fftw_plan_dft_3d(n[0], n[1], n[2], buf, buf, FFTW_BACKWARD, flags);
    if (!plans_->fwd || !plans_->bwd) throw std::runtime_error("FFTW planning failed");
}

SpectralTransform::~SpectralTransform() {
    std::lock_guard lock(fftw_planner_mutex());
    if (plans_->fwd) fftw_destroy_plan(plans_->fwd);
    if (plans_->bwd) fftw_destroy_plan(plans_->bwd);
}

void SpectralTransform::forward(cplx* data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plans_->fwd, p, p);
}

void SpectralTransform::backward(cplx* data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plans_->bwd, p, p);
}

ComplexField SpectralTransform::to_momentum(const ComplexField& field) const {
    if (!field.matches(lattice_)) throw std::invalid_argument("to_momentum: shape mismatch");
    if (field.space != Space::position)
        throw std::invalid_argument("to_momentum: field is not in position space");
    ComplexField out = field;
    forward(out.values.data());
    for (auto& v : out.values) v *= scale_;
    out.space = Space::momentum;
    return out;
}

ComplexField SpectralTransform::to_position(const ComplexField& field) const {
    if (!field.matches(lattice_)) throw std::invalid_argument("to_position: shape mismatch");
    if (field.space != Space::momentum)
        throw std::invalid_argument("to_position: field is not in momentum space");
    ComplexField out = field;
    backward(out.values.data());
    const double s = 1.0 / (scale_ * static_cast<double>(lattice_.size()));
    for (auto& v : out.values) v *= s;
    out.space = Space::position;
    return out;
}

ComplexField SpectralTransform::to_momentum_conjugate(const ComplexField& field) const {
    ComplexField raw = to_momentum(field);
    const auto neg = negated_bins(lattice_);
    ComplexField out = raw;
    for (std::size_t i = 0; i < neg.size(); ++i) out.values[i] = raw.values[neg[i]];
    return out;
}

}  // namespace bec4wm

#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <vector>

namespace bec4wm {

using cplx = std::complex<double>;

template <class T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    template <class U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align}));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t{Align});
    }
    template <class U>
    bool operator==(const AlignedAllocator<U, Align>&) const noexcept { return true; }
};

/// Complex storage aligned for SIMD FFT kernels.
using CVector = std::vector<cplx, AlignedAllocator<cplx>>;

enum class Space { position, momentum };

/// Uniform periodic grid in a rectangular box.
///
/// Positions are x_i = (i - n/2) dx so the box centre sits on a grid point.
/// Momentum bins are kept in transform (FFT) order; the Nyquist bin of each
/// axis is assigned the negative frequency -n/2 * dk.
class Lattice3D {
public:
    /// Production lattice: every axis needs an even point count >= 4.
    Lattice3D(std::array<int, 3> points, std::array<double, 3> lengths);

    /// Degenerate lattice for few-mode validation runs: axes may have 1 or 2
    /// points (or any even count).
    static Lattice3D few_mode(std::array<int, 3> points, std::array<double, 3> lengths);

    const std::array<int, 3>& points() const noexcept { return n_; }
    const std::array<double, 3>& lengths() const noexcept { return L_; }
    int points(int axis) const { return n_[axis]; }
    double length(int axis) const { return L_[axis]; }
    double dx(int axis) const { return L_[axis] / n_[axis]; }
    double dk(int axis) const;
    /// pi / dx on each axis (equals n dk / 2).
    double k_max(int axis) const;
    double cell_volume() const noexcept { return dV_; }
    double box_volume() const noexcept { return L_[0] * L_[1] * L_[2]; }
    std::size_t size() const noexcept { return size_; }

    std::size_t index(int i, int j, int l) const noexcept {
        return (static_cast<std::size_t>(i) * n_[1] + j) * n_[2] + l;
    }
    std::array<int, 3> unravel(std::size_t idx) const noexcept {
        const int l = static_cast<int>(idx % n_[2]);
        const std::size_t r = idx / n_[2];
        return {static_cast<int>(r / n_[1]), static_cast<int>(r % n_[1]), l};
    }

    double x_at(int axis, int i) const { return (i - n_[axis] / 2) * dx(axis); }
    /// Signed frequency index of storage slot i (Nyquist -> -n/2).
    int signed_index(int axis, int i) const {
        const int n = n_[axis];
        return i < (n + 1) / 2 ? i : i - n;
    }
    /// Storage slot of a signed frequency index, or -1 when it is outside the grid.
    int storage_index(int axis, int s) const {
        const int n = n_[axis];
        if (s < -(n / 2) || s > (n - 1) / 2) return -1;
        return s >= 0 ? s : s + n;
    }
    double k_at(int axis, int i) const { return signed_index(axis, i) * dk(axis); }
    bool is_nyquist(int axis, int i) const {
        return n_[axis] % 2 == 0 && n_[axis] > 1 && i == n_[axis] / 2;
    }
    /// Physical wavevector axis values in transform order.
    std::vector<double> k_axis(int axis) const;

    /// Storage slot of the bin closest to wavevector k along one axis.
    int nearest_k_slot(int axis, double k) const;

    bool operator==(const Lattice3D& o) const { return n_ == o.n_ && L_ == o.L_; }

private:
    Lattice3D(std::array<int, 3> points, std::array<double, 3> lengths, bool degenerate);

    std::array<int, 3> n_;
    std::array<double, 3> L_;
    double dV_ = 0.0;
    std::size_t size_ = 0;
};

Lattice3D build_lattice(std::array<int, 3> points, std::array<double, 3> lengths);

/// Signed wavevectors of every bin in transform order.
std::vector<std::array<double, 3>> momentum_grid(const Lattice3D& lattice);

struct ComplexField {
    std::array<int, 3> shape{};
    Space space = Space::position;
    CVector values;

    ComplexField() = default;
    ComplexField(const Lattice3D& lattice, Space s)
        : shape(lattice.points()), space(s), values(lattice.size(), cplx{0.0, 0.0}) {}

    bool matches(const Lattice3D& lattice) const {
        return shape == lattice.points() && values.size() == lattice.size();
    }
    bool all_finite() const;
};

/// Discrete Fourier transforms with the atom-number normalisation
///   a(k) = sqrt(dV / N) sum_x psi(x) exp(-i k.x),
/// so that sum_k |a(k)|^2 = sum_x |psi(x)|^2 dV.
///
/// Plans are built once and are safe to execute from several threads at once
/// on distinct buffers.
class SpectralTransform {
public:
    explicit SpectralTransform(const Lattice3D& lattice, bool measure = false);
    ~SpectralTransform();
    SpectralTransform(const SpectralTransform&) = delete;
    SpectralTransform& operator=(const SpectralTransform&) = delete;

    const Lattice3D& lattice() const noexcept { return lattice_; }

    ComplexField to_momentum(const ComplexField& field) const;
    ComplexField to_position(const ComplexField& field) const;

    /// Momentum amplitudes of a field that represents the creation operator,
    ///   a^dagger(k) = sqrt(dV / N) sum_x psi~(x) exp(+i k.x).
    ComplexField to_momentum_conjugate(const ComplexField& field) const;

    /// Unnormalised in-place kernels on 64-byte aligned buffers of lattice size.
    void forward(cplx* data) const;
    void backward(cplx* data) const;
    /// sqrt(dV / N): raw forward output times this gives a(k).
    double momentum_scale() const noexcept { return scale_; }

private:
    Lattice3D lattice_;
    double scale_;
    struct Plans;
    std::unique_ptr<Plans> plans_;
};

/// FFTW planning is not re-entrant; every plan creation and destruction
/// in the library takes this lock.
std::mutex& fftw_planner_mutex();

/// Index of bin -k for every bin k (Nyquist slots map onto themselves).
std::vector<std::size_t> negated_bins(const Lattice3D& lattice);

}  // namespace bec4wm

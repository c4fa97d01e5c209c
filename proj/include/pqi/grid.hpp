#pragma once

#include <array>
#include <complex>
#include <cstddef>

namespace pqi {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using CVec3 = std::array<cplx, 3>;

/// Uniform periodic grid on [0, L)^3 with N nodes per axis.
///
/// Node (i, j, k) sits at x = (i h, j h, k h); linear storage is x-fastest.
/// The interior region used by the boundary value problems is the closed
/// sub-box [L/4, 3L/4]^3, i.e. node indices N/4 .. 3N/4 on every axis.
class Grid {
public:
    Grid(int n, double length);

    int n() const noexcept { return n_; }
    double length() const noexcept { return length_; }
    double h() const noexcept { return length_ / n_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(n_) * n_ * n_; }
    double cell_volume() const noexcept { return h() * h() * h(); }

    int wrap(int i) const noexcept { return ((i % n_) + n_) % n_; }
    std::size_t index(int i, int j, int k) const noexcept {
        return static_cast<std::size_t>(wrap(i)) +
               static_cast<std::size_t>(n_) * (static_cast<std::size_t>(wrap(j)) +
                                                static_cast<std::size_t>(n_) * wrap(k));
    }
    std::array<int, 3> ijk(std::size_t idx) const noexcept {
        const int i = static_cast<int>(idx % n_);
        const int j = static_cast<int>((idx / n_) % n_);
        const int k = static_cast<int>(idx / (static_cast<std::size_t>(n_) * n_));
        return {i, j, k};
    }
    Vec3 position(std::size_t idx) const noexcept {
        const auto [i, j, k] = ijk(idx);
        return {i * h(), j * h(), k * h()};
    }

    /// Angular frequency 2*pi*m/L of the FFT bin m (signed, m in [-N/2, N/2)).
    double frequency(int bin) const noexcept;
    /// Signed mode number of FFT bin b.
    int signed_mode(int bin) const noexcept { return bin < n_ / 2 ? bin : bin - n_; }

    // Interior region Omega_h: node indices [lo, hi] on each axis.
    int lo() const noexcept { return n_ / 4; }
    int hi() const noexcept { return 3 * n_ / 4; }
    bool in_closed_region(int i, int j, int k) const noexcept;
    bool in_open_region(int i, int j, int k) const noexcept;
    bool on_region_boundary(int i, int j, int k) const noexcept {
        return in_closed_region(i, j, k) && !in_open_region(i, j, k);
    }

    bool operator==(const Grid& o) const noexcept { return n_ == o.n_ && length_ == o.length_; }
    bool operator!=(const Grid& o) const noexcept { return !(*this == o); }

private:
    int n_;
    double length_;
};

void require_same_grid(const Grid& a, const Grid& b);

inline bool is_power_of_two(int n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace pqi

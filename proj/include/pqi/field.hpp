#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pqi/grid.hpp"

namespace pqi {

/// Whether a field holds physical samples or transform coefficients.
enum class Domain { space, frequency };

/// Complex samples on every node of a Grid.
class ScalarField {
public:
    explicit ScalarField(const Grid& grid, Domain domain = Domain::space);
    ScalarField(const Grid& grid, std::vector<cplx> values, Domain domain = Domain::space);

    static ScalarField constant(const Grid& grid, cplx value);
    static ScalarField from_function(const Grid& grid, const std::function<cplx(const Vec3&)>& f);

    const Grid& grid() const noexcept { return grid_; }
    Domain domain() const noexcept { return domain_; }
    std::size_t size() const noexcept { return values_.size(); }

    cplx& operator[](std::size_t i) noexcept { return values_[i]; }
    const cplx& operator[](std::size_t i) const noexcept { return values_[i]; }
    cplx& at(int i, int j, int k) noexcept { return values_[grid_.index(i, j, k)]; }
    const cplx& at(int i, int j, int k) const noexcept { return values_[grid_.index(i, j, k)]; }

    std::span<const cplx> values() const noexcept { return values_; }
    std::span<cplx> values() noexcept { return values_; }

    ScalarField conj() const;
    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(cplx s);

    double max_abs() const noexcept;
    double max_abs_imag() const noexcept;
    bool all_finite() const noexcept;

private:
    Grid grid_;
    Domain domain_;
    std::vector<cplx> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(cplx s, ScalarField a);
/// Pointwise product.
ScalarField hadamard(const ScalarField& a, const ScalarField& b);

/// Three complex component arrays on a Grid.
class VectorField {
public:
    explicit VectorField(const Grid& grid);
    VectorField(ScalarField x, ScalarField y, ScalarField z);

    static VectorField from_function(const Grid& grid, const std::function<CVec3(const Vec3&)>& f);

    const Grid& grid() const noexcept { return comp_[0].grid(); }
    ScalarField& operator[](int d) noexcept { return comp_[d]; }
    const ScalarField& operator[](int d) const noexcept { return comp_[d]; }
    CVec3 at(std::size_t idx) const noexcept {
        return {comp_[0][idx], comp_[1][idx], comp_[2][idx]};
    }
    void set(std::size_t idx, const CVec3& v) noexcept {
        for (int d = 0; d < 3; ++d) comp_[d][idx] = v[d];
    }
    VectorField& operator*=(cplx s);
    bool all_finite() const noexcept;

private:
    std::array<ScalarField, 3> comp_;
};

/// Dirichlet data on the boundary layer of the interior region Omega_h.
///
/// Values are stored for the boundary nodes in increasing linear-index order
/// (see boundary_nodes()).
class BoundaryTrace {
public:
    BoundaryTrace(const Grid& grid, std::vector<cplx> values);

    /// Restriction of a field to the boundary layer.
    static BoundaryTrace of(const ScalarField& u);
    static BoundaryTrace from_function(const Grid& grid, const std::function<cplx(const Vec3&)>& f);

    const Grid& grid() const noexcept { return grid_; }
    std::span<const cplx> values() const noexcept { return values_; }
    std::span<cplx> values() noexcept { return values_; }

    BoundaryTrace scaled(cplx s) const;
    BoundaryTrace conj() const;
    BoundaryTrace operator+(const BoundaryTrace& o) const;
    /// Field equal to the trace on the boundary layer and zero elsewhere.
    ScalarField to_field() const;
    /// Surrogate for the fractional trace norm: (h^2 sum |f|^r)^(1/r), r = max(2, p).
    double norm(double p) const;

private:
    Grid grid_;
    std::vector<cplx> values_;
};

/// Linear indices of the nodes on the boundary layer of Omega_h, increasing.
const std::vector<std::size_t>& boundary_nodes(const Grid& grid);
/// Linear indices of the nodes strictly inside Omega_h, increasing.
const std::vector<std::size_t>& interior_nodes(const Grid& grid);

/// Node masks for the sub-box.
enum class Region { full, closed_interior, open_interior, exterior };
std::vector<unsigned char> region_mask(const Grid& grid, Region region);

// Centered second-order differences with periodic wraparound.
VectorField gradient(const ScalarField& u);
/// Negative adjoint of gradient() under the uniform-weight inner product.
ScalarField divergence(const VectorField& v);
/// Compact 7-point Laplacian.
ScalarField laplacian7(const ScalarField& u);

/// h^3 sum u conj(v) in space, L^-3 sum u conj(v) in frequency; optional node mask.
cplx inner(const ScalarField& u, const ScalarField& v, std::span<const unsigned char> mask = {});
cplx inner(const VectorField& u, const VectorField& v, std::span<const unsigned char> mask = {});
double l2_norm(const ScalarField& u, std::span<const unsigned char> mask = {});

/// Discrete surrogate (h^3 sum |u|^p + |grad u|^p)^(1/p) over the whole box.
double norm_W1p(const ScalarField& u, double p);

}  // namespace pqi

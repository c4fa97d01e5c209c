#pragma once

#include <array>
#include <span>
#include <vector>

#include "pqi/field.hpp"

namespace pqi::q1 {

/// Trilinear elements on cubic cells with the 2x2x2 Gauss rule.
///
/// Either the cells of the closed interior box Omega_h, or every cell of the
/// periodic box. Corner c and Gauss point g are encoded as bit triples
/// (x = bit 0, y = bit 1, z = bit 2).
class Mesh {
public:
    enum class Extent { interior, periodic_box };

    Mesh(const Grid& grid, Extent extent);

    const Grid& grid() const noexcept { return grid_; }
    Extent extent() const noexcept { return extent_; }
    std::size_t cell_count() const noexcept { return corners_.size(); }
    const std::array<std::size_t, 8>& corners(std::size_t cell) const noexcept { return corners_[cell]; }
    std::size_t quad_count() const noexcept { return 8 * cell_count(); }
    double weight() const noexcept { return grid_.cell_volume() / 8.0; }
    Vec3 point(std::size_t cell, int g) const noexcept;

    /// Shape value of corner c at Gauss point g.
    static double shape(int g, int c) noexcept { return shape_[g][c]; }
    /// Reference-cell derivative of corner c's shape along d at Gauss point g (divide by h).
    static double dshape(int g, int c, int d) noexcept { return dshape_[g][c][d]; }

private:
    static const std::array<std::array<double, 8>, 8> shape_;
    static const std::array<std::array<std::array<double, 3>, 8>, 8> dshape_;

    Grid grid_;
    Extent extent_;
    std::vector<std::array<int, 3>> origin_;
    std::vector<std::array<std::size_t, 8>> corners_;
};

/// Gradient of the nodal interpolant at every quadrature point (cell-major).
std::vector<CVec3> gradients(const Mesh& mesh, std::span<const cplx> nodal);
/// Value of the nodal interpolant at every quadrature point.
std::vector<cplx> values(const Mesh& mesh, std::span<const cplx> nodal);
std::vector<double> real_values(const Mesh& mesh, const ScalarField& nodal);
std::vector<CVec3> vector_values(const Mesh& mesh, const VectorField& nodal);

/// Nodal load r_i = sum_q w flux_q . grad phi_i(x_q), accumulated on the full grid.
std::vector<cplx> scatter(const Mesh& mesh, std::span<const CVec3> flux);

inline CVec3 gradient_at(const Mesh& mesh, std::span<const cplx> nodal, std::size_t cell, int g) {
    // edge differences, so constants have an exactly zero gradient
    const auto& cn = mesh.corners(cell);
    const double ih = 1.0 / mesh.grid().h();
    CVec3 out{};
    for (int d = 0; d < 3; ++d) {
        const int bit = 1 << d;
        cplx acc = 0.0;
        for (int c = 0; c < 8; ++c) {
            if (c & bit) continue;
            acc += (nodal[cn[c | bit]] - nodal[cn[c]]) * Mesh::dshape(g, c | bit, d);
        }
        out[d] = acc * ih;
    }
    return out;
}

inline double norm2(const CVec3& v) noexcept {
    return std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]);
}
/// Bilinear (unconjugated) dot product.
inline cplx dot(const CVec3& a, const CVec3& b) noexcept {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

}  // namespace pqi::q1

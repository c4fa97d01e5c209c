#include "pqi/q1.hpp"

#include <cmath>

namespace pqi::q1 {

namespace {

constexpr double gauss_lo = 0.5 - 0.5 / 1.7320508075688772;
constexpr double gauss_hi = 0.5 + 0.5 / 1.7320508075688772;

double ref_coord(int g, int d) { return ((g >> d) & 1) ? gauss_hi : gauss_lo; }
double factor(int c, int d, double xi) { return ((c >> d) & 1) ? xi : 1.0 - xi; }
double dfactor(int c, int d) { return ((c >> d) & 1) ? 1.0 : -1.0; }

std::array<std::array<double, 8>, 8> make_shape() {
    std::array<std::array<double, 8>, 8> t{};
    for (int g = 0; g < 8; ++g)
        for (int c = 0; c < 8; ++c) {
            double v = 1.0;
            for (int d = 0; d < 3; ++d) v *= factor(c, d, ref_coord(g, d));
            t[g][c] = v;
        }
    return t;
}

std::array<std::array<std::array<double, 3>, 8>, 8> make_dshape() {
    std::array<std::array<std::array<double, 3>, 8>, 8> t{};
    for (int g = 0; g < 8; ++g)
        for (int c = 0; c < 8; ++c)
            for (int d = 0; d < 3; ++d) {
                double v = dfactor(c, d);
                for (int e = 0; e < 3; ++e)
                    if (e != d) v *= factor(c, e, ref_coord(g, e));
                t[g][c][d] = v;
            }
    return t;
}

}  // namespace

const std::array<std::array<double, 8>, 8> Mesh::shape_ = make_shape();
const std::array<std::array<std::array<double, 3>, 8>, 8> Mesh::dshape_ = make_dshape();

Mesh::Mesh(const Grid& grid, Extent extent) : grid_(grid), extent_(extent) {
    const int first = extent == Extent::interior ? grid.lo() : 0;
    const int count = extent == Extent::interior ? grid.hi() - grid.lo() : grid.n();
    for (int k = first; k < first + count; ++k)
        for (int j = first; j < first + count; ++j)
            for (int i = first; i < first + count; ++i) {
                std::array<std::size_t, 8> cn{};
                for (int c = 0; c < 8; ++c)
                    cn[c] = grid.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                origin_.push_back({i, j, k});
                corners_.push_back(cn);
            }
}

Vec3 Mesh::point(std::size_t cell, int g) const noexcept {
    const auto& o = origin_[cell];
    const double h = grid_.h();
    return {(o[0] + ref_coord(g, 0)) * h, (o[1] + ref_coord(g, 1)) * h, (o[2] + ref_coord(g, 2)) * h};
}

std::vector<CVec3> gradients(const Mesh& mesh, std::span<const cplx> nodal) {
    std::vector<CVec3> out(mesh.quad_count());
    for (std::size_t cell = 0; cell < mesh.cell_count(); ++cell)
        for (int g = 0; g < 8; ++g) out[8 * cell + g] = gradient_at(mesh, nodal, cell, g);
    return out;
}

std::vector<cplx> values(const Mesh& mesh, std::span<const cplx> nodal) {
    std::vector<cplx> out(mesh.quad_count());
    for (std::size_t cell = 0; cell < mesh.cell_count(); ++cell) {
        const auto& cn = mesh.corners(cell);
        for (int g = 0; g < 8; ++g) {
            cplx v{};
            for (int c = 0; c < 8; ++c) v += nodal[cn[c]] * Mesh::shape(g, c);
            out[8 * cell + g] = v;
        }
    }
    return out;
}

std::vector<double> real_values(const Mesh& mesh, const ScalarField& nodal) {
    const auto v = values(mesh, nodal.values());
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].real();
    return out;
}

std::vector<CVec3> vector_values(const Mesh& mesh, const VectorField& nodal) {
    std::vector<CVec3> out(mesh.quad_count());
    for (int d = 0; d < 3; ++d) {
        const auto v = values(mesh, nodal[d].values());
        for (std::size_t q = 0; q < v.size(); ++q) out[q][d] = v[q];
    }
    return out;
}

std::vector<cplx> scatter(const Mesh& mesh, std::span<const CVec3> flux) {
    std::vector<cplx> out(mesh.grid().size(), cplx{});
    const double wh = mesh.weight() / mesh.grid().h();
    for (std::size_t cell = 0; cell < mesh.cell_count(); ++cell) {
        const auto& cn = mesh.corners(cell);
        for (int g = 0; g < 8; ++g) {
            const CVec3& f = flux[8 * cell + g];
            for (int c = 0; c < 8; ++c) {
                out[cn[c]] += wh * (f[0] * Mesh::dshape(g, c, 0) + f[1] * Mesh::dshape(g, c, 1) +
                                    f[2] * Mesh::dshape(g, c, 2));
            }
        }
    }
    return out;
}

}  // namespace pqi::q1

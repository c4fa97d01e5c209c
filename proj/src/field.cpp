#include "pqi/field.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "pqi/errors.hpp"

namespace pqi {

namespace {

void require_finite(std::span<const cplx> v, const char* what) {
    for (const auto& z : v) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw InvalidArgument(std::string(what) + ": non-finite entry");
    }
}

struct NodeLists {
    std::vector<std::size_t> boundary;
    std::vector<std::size_t> interior;
};

const NodeLists& node_lists(const Grid& grid) {
    static std::mutex mutex;
    static std::map<int, NodeLists> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(grid.n());
    if (it != cache.end()) return it->second;
    NodeLists lists;
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const auto [i, j, k] = grid.ijk(idx);
        if (grid.in_open_region(i, j, k))
            lists.interior.push_back(idx);
        else if (grid.in_closed_region(i, j, k))
            lists.boundary.push_back(idx);
    }
    return cache.emplace(grid.n(), std::move(lists)).first->second;
}

}  // namespace

ScalarField::ScalarField(const Grid& grid, Domain domain)
    : grid_(grid), domain_(domain), values_(grid.size(), cplx{}) {}

ScalarField::ScalarField(const Grid& grid, std::vector<cplx> values, Domain domain)
    : grid_(grid), domain_(domain), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw InvalidArgument("ScalarField: length must be N^3");
    require_finite(values_, "ScalarField");
}

ScalarField ScalarField::constant(const Grid& grid, cplx value) {
    ScalarField f(grid);
    for (auto& v : f.values_) v = value;
    return f;
}

ScalarField ScalarField::from_function(const Grid& grid, const std::function<cplx(const Vec3&)>& f) {
    ScalarField out(grid);
    for (std::size_t idx = 0; idx < grid.size(); ++idx) out.values_[idx] = f(grid.position(idx));
    require_finite(out.values_, "ScalarField::from_function");
    return out;
}

ScalarField ScalarField::conj() const {
    ScalarField out(*this);
    for (auto& v : out.values_) v = std::conj(v);
    return out;
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
}

ScalarField& ScalarField::operator*=(cplx s) {
    for (auto& v : values_) v *= s;
    return *this;
}

double ScalarField::max_abs() const noexcept {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v));
    return m;
}

double ScalarField::max_abs_imag() const noexcept {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v.imag()));
    return m;
}

bool ScalarField::all_finite() const noexcept {
    for (const auto& z : values_)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(cplx s, ScalarField a) { return a *= s; }

ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid());
    ScalarField out(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

VectorField::VectorField(const Grid& grid)
    : comp_{ScalarField(grid), ScalarField(grid), ScalarField(grid)} {}

VectorField::VectorField(ScalarField x, ScalarField y, ScalarField z)
    : comp_{std::move(x), std::move(y), std::move(z)} {
    require_same_grid(comp_[0].grid(), comp_[1].grid());
    require_same_grid(comp_[0].grid(), comp_[2].grid());
}

VectorField VectorField::from_function(const Grid& grid, const std::function<CVec3(const Vec3&)>& f) {
    VectorField out(grid);
    for (std::size_t idx = 0; idx < grid.size(); ++idx) out.set(idx, f(grid.position(idx)));
    if (!out.all_finite()) throw InvalidArgument("VectorField::from_function: non-finite entry");
    return out;
}

VectorField& VectorField::operator*=(cplx s) {
    for (auto& c : comp_) c *= s;
    return *this;
}

bool VectorField::all_finite() const noexcept {
    return comp_[0].all_finite() && comp_[1].all_finite() && comp_[2].all_finite();
}

BoundaryTrace::BoundaryTrace(const Grid& grid, std::vector<cplx> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != boundary_nodes(grid_).size())
        throw InvalidArgument("BoundaryTrace: wrong number of boundary values");
    require_finite(values_, "BoundaryTrace");
}

BoundaryTrace BoundaryTrace::of(const ScalarField& u) {
    const auto& nodes = boundary_nodes(u.grid());
    std::vector<cplx> vals(nodes.size());
    for (std::size_t b = 0; b < nodes.size(); ++b) vals[b] = u[nodes[b]];
    return BoundaryTrace(u.grid(), std::move(vals));
}

BoundaryTrace BoundaryTrace::from_function(const Grid& grid,
                                           const std::function<cplx(const Vec3&)>& f) {
    const auto& nodes = boundary_nodes(grid);
    std::vector<cplx> vals(nodes.size());
    for (std::size_t b = 0; b < nodes.size(); ++b) vals[b] = f(grid.position(nodes[b]));
    return BoundaryTrace(grid, std::move(vals));
}

BoundaryTrace BoundaryTrace::scaled(cplx s) const {
    BoundaryTrace out(*this);
    for (auto& v : out.values_) v *= s;
    return out;
}

BoundaryTrace BoundaryTrace::conj() const {
    BoundaryTrace out(*this);
    for (auto& v : out.values_) v = std::conj(v);
    return out;
}

BoundaryTrace BoundaryTrace::operator+(const BoundaryTrace& o) const {
    require_same_grid(grid_, o.grid_);
    BoundaryTrace out(*this);
    for (std::size_t i = 0; i < values_.size(); ++i) out.values_[i] += o.values_[i];
    return out;
}

ScalarField BoundaryTrace::to_field() const {
    ScalarField out(grid_);
    const auto& nodes = boundary_nodes(grid_);
    for (std::size_t b = 0; b < nodes.size(); ++b) out[nodes[b]] = values_[b];
    return out;
}

double BoundaryTrace::norm(double p) const {
    const double r = std::max(2.0, p);
    double s = 0.0;
    for (const auto& v : values_) s += std::pow(std::abs(v), r);
    const double h = grid_.h();
    return std::pow(h * h * s, 1.0 / r);
}

const std::vector<std::size_t>& boundary_nodes(const Grid& grid) { return node_lists(grid).boundary; }
const std::vector<std::size_t>& interior_nodes(const Grid& grid) { return node_lists(grid).interior; }

std::vector<unsigned char> region_mask(const Grid& grid, Region region) {
    std::vector<unsigned char> mask(grid.size(), 0);
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const auto [i, j, k] = grid.ijk(idx);
        bool on = false;
        switch (region) {
            case Region::full: on = true; break;
            case Region::closed_interior: on = grid.in_closed_region(i, j, k); break;
            case Region::open_interior: on = grid.in_open_region(i, j, k); break;
            case Region::exterior: on = !grid.in_closed_region(i, j, k); break;
        }
        mask[idx] = on ? 1 : 0;
    }
    return mask;
}

VectorField gradient(const ScalarField& u) {
    const Grid& g = u.grid();
    const double inv2h = 0.5 / g.h();
    VectorField out(g);
    const int n = g.n();
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const std::size_t idx = g.index(i, j, k);
                out[0][idx] = (u.at(i + 1, j, k) - u.at(i - 1, j, k)) * inv2h;
                out[1][idx] = (u.at(i, j + 1, k) - u.at(i, j - 1, k)) * inv2h;
                out[2][idx] = (u.at(i, j, k + 1) - u.at(i, j, k - 1)) * inv2h;
            }
    return out;
}

ScalarField divergence(const VectorField& v) {
    const Grid& g = v.grid();
    const double inv2h = 0.5 / g.h();
    ScalarField out(g);
    const int n = g.n();
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                out.at(i, j, k) = (v[0].at(i + 1, j, k) - v[0].at(i - 1, j, k) +
                                   v[1].at(i, j + 1, k) - v[1].at(i, j - 1, k) +
                                   v[2].at(i, j, k + 1) - v[2].at(i, j, k - 1)) *
                                  inv2h;
            }
    return out;
}

ScalarField laplacian7(const ScalarField& u) {
    const Grid& g = u.grid();
    const double ih2 = 1.0 / (g.h() * g.h());
    ScalarField out(g);
    const int n = g.n();
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                out.at(i, j, k) = (u.at(i + 1, j, k) + u.at(i - 1, j, k) + u.at(i, j + 1, k) +
                                   u.at(i, j - 1, k) + u.at(i, j, k + 1) + u.at(i, j, k - 1) -
                                   6.0 * u.at(i, j, k)) *
                                  ih2;
            }
    return out;
}

namespace {
double quadrature_weight(const Grid& g, Domain d) {
    if (d == Domain::space) return g.cell_volume();
    const double L = g.length();
    return 1.0 / (L * L * L);
}
}  // namespace

cplx inner(const ScalarField& u, const ScalarField& v, std::span<const unsigned char> mask) {
    require_same_grid(u.grid(), v.grid());
    if (u.domain() != v.domain()) throw InvalidArgument("inner: domain mismatch");
    if (!mask.empty() && mask.size() != u.size()) throw InvalidArgument("inner: mask length");
    cplx s{};
    for (std::size_t i = 0; i < u.size(); ++i)
        if (mask.empty() || mask[i]) s += u[i] * std::conj(v[i]);
    return s * quadrature_weight(u.grid(), u.domain());
}

cplx inner(const VectorField& u, const VectorField& v, std::span<const unsigned char> mask) {
    return inner(u[0], v[0], mask) + inner(u[1], v[1], mask) + inner(u[2], v[2], mask);
}

double l2_norm(const ScalarField& u, std::span<const unsigned char> mask) {
    return std::sqrt(std::max(0.0, inner(u, u, mask).real()));
}

double norm_W1p(const ScalarField& u, double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("norm_W1p: p must lie in (1, inf)");
    const VectorField g = gradient(u);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto gv = g.at(i);
        const double gn = std::sqrt(std::norm(gv[0]) + std::norm(gv[1]) + std::norm(gv[2]));
        s += std::pow(std::abs(u[i]), p) + std::pow(gn, p);
    }
    return std::pow(u.grid().cell_volume() * s, 1.0 / p);
}

}  // namespace pqi

#include "doctest.h"

#include <cmath>

#include "pqi/errors.hpp"
#include "pqi/forward.hpp"
#include "pqi/phantom.hpp"
#include "test_util.hpp"

using namespace pqi;
using testutil::pi;

namespace {

Coefficients linear_coeffs(const Grid& g) {
    return {ScalarField::constant(g, 1.0), ScalarField(g), 3.0, 0.5, 0.1};
}

// u* = x1 + 0.3 i sin(2 pi x2) cos(2 pi x3) on the unit box
cplx ustar(const Vec3& x) { return x[0] + cplx(0, 0.3) * std::sin(2 * pi * x[1]) * std::cos(2 * pi * x[2]); }
CVec3 grad_ustar(const Vec3& x) {
    return {1.0, cplx(0, 0.6 * pi) * std::cos(2 * pi * x[1]) * std::cos(2 * pi * x[2]),
            cplx(0, -0.6 * pi) * std::sin(2 * pi * x[1]) * std::sin(2 * pi * x[2])};
}

double manufactured_error(int n, double p) {
    const Grid g(n, 1.0);
    Coefficients c = make_phantom("P2", 4, g);
    c.p = p;
    VectorField F(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const CVec3 gu = grad_ustar(g.position(i));
        const double n2 = std::norm(gu[0]) + std::norm(gu[1]) + std::norm(gu[2]);
        const double coef = c.sigma[i].real() + c.a[i].real() * std::pow(n2, 0.5 * (p - 2));
        F.set(i, {-coef * gu[0], -coef * gu[1], -coef * gu[2]});
    }
    const auto exact = ScalarField::from_function(g, ustar);
    const auto sol = solve_weak(c, BoundaryTrace::of(exact), F, 1e-10);
    CHECK(sol.report.converged);
    return relative_l2(sol.u, exact);
}

}  // namespace

TEST_CASE("energy of a constant vanishes") {
    const Grid g(8, 1.0);
    const Coefficients c = make_phantom("P1", 1, g);
    CHECK(energy(ScalarField::constant(g, {2, 3}), c, VectorField(g)) == 0.0);
}

TEST_CASE("energy of a sine over the periodic box") {
    std::vector<double> hs, errs;
    for (int n : {16, 32}) {
        const Grid g(n, 2.0);
        const double k = 2 * pi / g.length();
        const auto v = ScalarField::from_function(g, [&](const Vec3& x) { return cplx(std::sin(k * x[0])); });
        const double e = energy(v, linear_coeffs(g), VectorField(g), q1::Mesh::Extent::periodic_box);
        const double exact = 0.5 * k * k * std::pow(g.length(), 3) / 2;
        hs.push_back(g.h());
        errs.push_back(std::abs(e - exact) / exact);
    }
    CHECK(errs.back() < 1e-2);
    CHECK(testutil::loglog_slope(hs, errs) > 1.9);
}

TEST_CASE("energy is convex along segments with shared boundary values") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P2", 2, g);
    const VectorField F = testutil::random_vector(g, 40);
    for (unsigned s = 0; s < 5; ++s) {
        auto v1 = testutil::random_field(g, 100 + s);
        auto v2 = testutil::random_field(g, 200 + s);
        for (std::size_t b : boundary_nodes(g)) v2[b] = v1[b];
        const auto mid = 0.5 * (v1 + v2);
        CHECK(energy(mid, c, F) <= 0.5 * (energy(v1, c, F) + energy(v2, c, F)));
    }
}

TEST_CASE("affine data is reproduced exactly by the linear solve") {
    const Grid g(16, 1.0);
    const auto f = BoundaryTrace::from_function(g, [](const Vec3& x) { return cplx(x[0]); });
    const auto u = solve_linear(ScalarField::constant(g, 1.0), f, VectorField(g));
    double err = 0;
    for (std::size_t i : interior_nodes(g)) err = std::max(err, std::abs(u[i] - g.position(i)[0]));
    CHECK(err < 1e-12);
}

TEST_CASE("linear solve with a gradient source recovers the potential") {
    std::vector<double> hs, errs;
    for (int n : {16, 32}) {
        const Grid g(n, 1.0);
        // g vanishes with its gradient on the boundary of [1/4, 3/4]^3
        auto gfun = [](const Vec3& x) {
            double v = 1;
            for (int d = 0; d < 3; ++d) v *= std::pow(std::sin(2 * pi * (x[d] - 0.25)), 2);
            return v;
        };
        const auto potential = ScalarField::from_function(g, [&](const Vec3& x) {
            for (int d = 0; d < 3; ++d)
                if (x[d] < 0.25 || x[d] > 0.75) return cplx(0);
            return cplx(gfun(x));
        });
        const auto F = VectorField::from_function(g, [&](const Vec3& x) {
            CVec3 out{};
            for (int d = 0; d < 3; ++d) {
                if (x[d] < 0.25 || x[d] > 0.75) return CVec3{};
                double v = 2 * pi * std::sin(4 * pi * (x[d] - 0.25));
                for (int e = 0; e < 3; ++e)
                    if (e != d) v *= std::pow(std::sin(2 * pi * (x[e] - 0.25)), 2);
                out[d] = v;
            }
            return out;
        });
        const auto u = solve_linear(ScalarField::constant(g, 1.0), BoundaryTrace(g, std::vector<cplx>(boundary_nodes(g).size())), F);
        hs.push_back(g.h());
        errs.push_back(relative_l2(u, potential));
    }
    CHECK(errs.back() < 2e-2);
    CHECK(testutil::loglog_slope(hs, errs) > 1.8);
}

TEST_CASE("discrete maximum principle") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P2", 3, g);
    const auto data = testutil::random_field(g, 77, false);
    const auto f = BoundaryTrace::of(data);
    const auto u = solve_linear(c.sigma, f, VectorField(g));
    double lo = 1e300, hi = -1e300;
    for (cplx v : f.values()) {
        lo = std::min(lo, v.real());
        hi = std::max(hi, v.real());
    }
    for (std::size_t i : interior_nodes(g)) {
        CHECK(u[i].real() >= lo - 1e-12);
        CHECK(u[i].real() <= hi + 1e-12);
    }
}

TEST_CASE("Green operator inverts the sigma-Laplacian") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P2", 5, g);
    const LinearOperator op(c.sigma);
    CHECK(op.green(ScalarField(g)).max_abs() == 0.0);

    ScalarField w = testutil::random_field(g, 8);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto [a, b, k] = g.ijk(i);
        if (!g.in_open_region(a, b, k)) w[i] = 0;
    }
    const auto back = green_sigma(c.sigma, op.div_sigma_grad(w));
    CHECK(relative_l2(back, w) < 1e-10);

    const auto s1 = testutil::random_field(g, 9), s2 = testutil::random_field(g, 10);
    const cplx alpha(0.7, -2.0);
    const auto lhs = op.green(alpha * s1 + s2);
    const auto rhs = alpha * op.green(s1) + op.green(s2);
    CHECK(relative_l2(lhs, rhs) < 1e-12);
}

TEST_CASE("weak solve with a = 0 reduces to the linear problem") {
    const Grid g(16, 1.0);
    Coefficients c = make_phantom("null", 1, g);
    const auto f = BoundaryTrace::of(testutil::random_field(g, 21));
    VectorField F = testutil::random_vector(g, 22);
    const auto sol = solve_weak(c, f, F, 1e-9);
    F *= -1.0;
    CHECK(relative_l2(sol.u, solve_linear(c.sigma, f, F)) < 1e-9);
}

TEST_CASE("manufactured solutions converge at second order") {
    for (double p : {1.5, 3.0}) {
        CAPTURE(p);
        const double e16 = manufactured_error(16, p);
        const double e32 = manufactured_error(32, p);
        CHECK(e32 < 1e-3);
        CHECK(std::log2(e16 / e32) >= 1.5);
    }
}

TEST_CASE("weak solution is unique and the energy decreases monotonically") {
    const Grid g(16, 1.0);
    for (const char* name : {"P1", "P3-lowp"}) {
        CAPTURE(name);
        const Coefficients c = make_phantom(name, 6, g);
        const ForwardOperator op(c);
        const auto f = BoundaryTrace::from_function(g, [](const Vec3& x) { return cplx(2 * x[0], std::sin(2 * pi * x[1])); });
        WeakSolveOptions opt;
        opt.tol = 1e-11;
        const auto s1 = op.solve_weak(f, nullptr, opt);
        const auto& hist = s1.report.energy_history;
        for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1]);
        auto start = testutil::random_field(g, 31);
        opt.initial = &start;
        const auto s2 = op.solve_weak(f, nullptr, opt);
        CHECK(relative_l2(s1.u, s2.u) < 1e-9);
        CHECK(s1.report.weak_residual <= opt.tol);
    }
}

TEST_CASE("strong and weak solutions agree for small data") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P1", 7, g);
    const ForwardOperator op(c);
    const auto f = BoundaryTrace::from_function(g, [](const Vec3& x) { return cplx(4 * x[0], x[1] * x[2]); });
    const auto small = f.scaled(1e-2);
    const auto strong = op.solve_strong(small, nullptr, 1e-16);
    WeakSolveOptions opt;
    opt.tol = 1e-14;
    const auto weak = op.solve_weak(small, nullptr, opt);
    CHECK(relative_l2(strong.u, weak.u) < 1e-6);
    REQUIRE(strong.report.contraction_ratio.has_value());
    CHECK(*strong.report.contraction_ratio < 1.0);
    CHECK_THROWS_AS(op.solve_strong(f, nullptr, 1e-16), NotContracting);
}

TEST_CASE("contraction map trivial cases") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P1", 7, g);
    const auto t = contraction_step(ScalarField(g), c, ScalarField::constant(g, 3.0));
    CHECK(t.max_abs() == 0.0);
    const Coefficients lin = make_phantom("null", 7, g);
    const auto v_f = testutil::random_field(g, 3);
    CHECK(contraction_step(testutil::random_field(g, 4), lin, v_f).max_abs() == 0.0);
    const auto f = BoundaryTrace::of(v_f);
    const auto s = solve_strong(lin, f, VectorField(g), 1e-12);
    CHECK(s.report.iterations == 1);
}

TEST_CASE("nonlinear correction scales like the data to the power p - 1") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P1", 8, g);
    const ForwardOperator op(c);
    const auto f = BoundaryTrace::from_function(g, [](const Vec3& x) { return cplx(x[0] + 0.5 * x[1]); });
    std::vector<double> eps, corr;
    for (int k = 4; k <= 8; ++k) {
        const double e = std::ldexp(1.0, -k);
        const auto fe = f.scaled(e);
        const auto sol = op.solve_strong(fe, nullptr, 1e-18);
        const auto vf = op.linear().solve_dirichlet(fe, static_cast<const VectorField*>(nullptr));
        const auto mask = region_mask(g, Region::closed_interior);
        eps.push_back(e);
        corr.push_back(l2_norm(sol.u - vf, mask));
    }
    CHECK(testutil::loglog_slope(eps, corr) == doctest::Approx(c.p - 1).epsilon(0.05));
}

TEST_CASE("uniform and variable conductivity solves invert the stiffness block") {
    for (int n : {16, 32}) {
        const Grid g(n, 1.0);
        for (const char* name : {"P1", "P2"}) {
            CAPTURE(n);
            CAPTURE(name);
            const LinearOperator op(make_phantom(name, 1, g).sigma);
            const auto b = op.gather(testutil::random_field(g, 12).values());
            const auto x = op.solve(b);
            CHECK((op.apply_interior(x) - b).norm() < 1e-11 * b.norm());
        }
    }
}

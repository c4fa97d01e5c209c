#include "doctest.h"

#include <cmath>

#include "pqi/errors.hpp"
#include "pqi/forward.hpp"
#include "pqi/phantom.hpp"
#include "pqi/polarize.hpp"
#include "polar_cases.hpp"
#include "test_util.hpp"

using namespace pqi;

namespace {

ScalarField lin(const Grid& g, cplx a, cplx b, cplx c) {
    return ScalarField::from_function(g, [=](const Vec3& x) { return a * x[0] + b * x[1] + c * x[2]; });
}

// a = a0 on the node box [i0, i1]^3, zero elsewhere, sigma = 1.
Coefficients box_weight(const Grid& g, double p, double a0, int i0, int i1) {
    Coefficients c = make_phantom("null", 1, g);
    c.p = p;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const auto [i, j, k] = g.ijk(idx);
        if (i >= i0 && i <= i1 && j >= i0 && j <= i1 && k >= i0 && k <= i1) c.a[idx] = a0;
    }
    return c;
}

}  // namespace

TEST_CASE("Wirtinger derivatives of elementary functions") {
    const auto d1 = wirtinger([](cplx z) { return z; }, 1e-3);
    CHECK(std::abs(d1.d_z - 1.0) < 1e-12);
    CHECK(std::abs(d1.d_zbar) < 1e-12);
    const auto d2 = wirtinger([](cplx z) { return std::conj(z); }, 1e-3);
    CHECK(std::abs(d2.d_z) < 1e-12);
    CHECK(std::abs(d2.d_zbar - 1.0) < 1e-12);
    const auto d3 = wirtinger([](cplx z) { return std::norm(z); }, 1e-3);
    CHECK(std::abs(d3.d_z) < 1e-12);
    CHECK(std::abs(d3.d_zbar) < 1e-12);
    // second order: d_z (z^2 conj z) = 2 |z|^2 = 0 at the origin, error step^2
    const auto d4 = wirtinger([](cplx z) { return z * z * std::conj(z); }, 1e-2);
    CHECK(std::abs(d4.d_z - 1e-4) < 1e-12);
    CHECK_THROWS_AS(wirtinger([](cplx z) { return z; }, 0.0), InvalidArgument);
}

TEST_CASE("I oracle closed forms") {
    const Grid g(16, 1.0);
    const auto x1 = lin(g, 1, 0, 0);
    const auto x2 = lin(g, 0, 1, 0);
    CHECK(I_oracle(make_phantom("null", 1, g), x1, x1) == cplx(0.0));
    const double a0 = 0.3;
    const Coefficients c = box_weight(g, 3.0, a0, 6, 9);
    const double vol = std::pow(4 * g.h(), 3);
    CHECK(std::abs(I_oracle(c, x1, x2)) < 1e-15);
    CHECK(std::abs(I_oracle(c, x1, x1) - a0 * vol) < 1e-13);
    const Quadrature qn = Quadrature::nodal(c);
    CHECK(std::abs(I_oracle(qn, qn.sample(x1), qn.sample(x1)) - a0 * vol) < 1e-13);
}

TEST_CASE("I oracle is the nonlinear part of the forward pairing") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P2", 3, g);
    const ForwardOperator op(c);
    const auto u = testutil::random_field(g, 11);
    const auto w = testutil::random_field(g, 12);
    const cplx ref = op.pairing(u, w.conj()) - op.linear_pairing(u, w.conj());
    CHECK(std::abs(I_oracle(c, u, w) - ref) < 1e-12 * std::abs(ref));
}

TEST_CASE("I3, J3 and K on affine triples") {
    const Grid g(16, 1.0);
    const double a0 = 0.3;
    const Coefficients c = box_weight(g, 3.0, a0, 6, 9);
    const double vol = std::pow(4 * g.h(), 3);
    const auto x1 = lin(g, 1, 0, 0);
    const auto x2 = lin(g, 0, 1, 0);
    for (const Quadrature& q : {Quadrature::nodal(c), Quadrature::q1(c)}) {
        CAPTURE(static_cast<int>(q.kind()));
        const auto t1 = TripleGradients::of(q, HarmonicTriple{x1, x1, x1});
        const auto p1 = polarize(q, t1, 1e-3);
        CHECK(std::abs(p1.I3 - a0 * vol) < 1e-8);
        CHECK(std::abs(I3_direct(q, t1) - a0 * vol) < 1e-13);
        CHECK(std::abs(polarize(q, TripleGradients::of(q, HarmonicTriple{x1, x2, x1}), 1e-3).I3) < 1e-8);
        const auto t2 = TripleGradients::of(q, HarmonicTriple{x1, x2, x2});
        const auto p2 = polarize(q, t2, 1e-3);
        // (2/(p-2)) d_z of I(x1 + z x2, x2) = 2 a0 |S| at p = 3
        CHECK(std::abs(p2.J3 - 2.0 * a0 * vol) < 1e-8);
        CHECK(std::abs(J3_direct(q, t2) - 2.0 * a0 * vol) < 1e-13);
        CHECK(std::abs(p2.K - a0 * vol) < 1e-8);
    }
    const Coefficients zero = make_phantom("null", 1, g);
    const Quadrature qz = Quadrature::q1(zero);
    const auto p0 = polarize(qz, TripleGradients::of(qz, HarmonicTriple{x1, x2, x1}), 1e-3);
    CHECK(p0.I3 == cplx(0.0));
    CHECK(p0.J3 == cplx(0.0));
    CHECK(p0.K == cplx(0.0));
}

TEST_CASE("K with exponential solutions is a scaled Fourier coefficient of a") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P1", 4, g);
    const double k0 = 2 * testutil::pi / g.length();
    const Vec3 xi{k0, 2 * k0, 0};
    const double nx = std::hypot(xi[0], xi[1], xi[2]);
    const Vec3 eta{0, 0, 1};
    const Vec3 mu{-xi[1] / nx, xi[0] / nx, 0};
    const double s = 0.5 * k0;
    const double tau = std::sqrt(nx * nx / 4 + s * s);
    const cplx I{0, 1};
    CVec3 z2, z3;
    for (int d = 0; d < 3; ++d) {
        z2[d] = tau * mu[d] - I * (xi[d] / 2 + s * eta[d]);
        z3[d] = -tau * mu[d] - I * (xi[d] / 2 - s * eta[d]);
    }
    const Vec3 mid{0.5, 0.5, 0.5};
    auto grad = [&](CVec3 z) {
        return VectorField::from_function(g, [z, mid](const Vec3& x) {
            const cplx e = std::exp(z[0] * (x[0] - mid[0]) + z[1] * (x[1] - mid[1]) + z[2] * (x[2] - mid[2]));
            return CVec3{z[0] * e, z[1] * e, z[2] * e};
        });
    };
    const VectorField g1 = VectorField::from_function(g, [](const Vec3&) { return CVec3{1.0, 0.0, 0.0}; });
    const Quadrature q = Quadrature::nodal(c);
    const auto t = TripleGradients::of(q, g1, grad(z2), grad(z3));
    cplx ahat = 0.0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const Vec3 x = g.position(idx);
        ahat += std::exp(-I * (xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2])) * c.a[idx];
    }
    ahat *= g.cell_volume();
    // centering at mid multiplies K by exp(i xi . mid)
    const cplx expected = std::exp(I * (xi[0] + xi[1] + xi[2]) * 0.5) * (-0.5 * nx * nx) * ahat;
    CHECK(std::abs(K_direct(q, t) - expected) < 1e-12 * std::abs(expected));
    const auto P = polarize(q, t, 0.0, true);
    CHECK(std::abs(P.K - expected) < 1e-5 * std::abs(expected));
}

TEST_CASE("polarization identity on seeded analytic triples") {
    const Grid g(16, 1.0);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        const auto pc = testutil::polar_case(g, seed);
        const auto P = polarize(pc.q, pc.t, 1e-3, true);
        const cplx Ko = K_direct(pc.q, pc.t);
        CHECK(std::abs(P.K - Ko) < 1e-6 * std::abs(Ko));
        CHECK(std::abs(P.I3 - I3_direct(pc.q, pc.t)) < 1e-5 * std::abs(I3_direct(pc.q, pc.t)));
        CHECK(std::abs(P.J3 - J3_direct(pc.q, pc.t)) < 1e-5 * std::abs(J3_direct(pc.q, pc.t)));
        // halving the step again moves K by well under four error estimates
        const auto quarter = polarize(pc.q, pc.t, 0.25e-3);
        const auto half = polarize(pc.q, pc.t, 0.5e-3);
        CHECK(std::abs(half.K - quarter.K) < 4 * P.error_estimate);
    }
}

TEST_CASE("symmetry and bilinearity") {
    const Grid g(16, 1.0);
    const auto pc = testutil::polar_case(g, 9);
    TripleGradients swapped{pc.t.g1, pc.t.g3, pc.t.g2};
    CHECK(std::abs(I3_direct(pc.q, pc.t) - I3_direct(pc.q, swapped)) < 1e-14 * std::abs(I3_direct(pc.q, pc.t)));
    const auto a = polarize(pc.q, pc.t, 1e-3);
    const auto b = polarize(pc.q, swapped, 1e-3);
    CHECK(std::abs(a.I3 - b.I3) < 1e-5 * std::abs(a.I3));
    for (cplx alpha : {cplx(2.0), cplx(0.0, 1.0)}) {
        TripleGradients scaled = pc.t;
        for (auto& v : scaled.g2)
            for (auto& x : v) x *= alpha;
        const cplx K0 = K_direct(pc.q, pc.t);
        CHECK(std::abs(K_direct(pc.q, scaled) - alpha * K0) < 1e-13 * std::abs(K0));
        // the Wirtinger K is linear in u2 up to its own truncation error
        CHECK(std::abs(polarize(pc.q, scaled, 1e-3 / std::abs(alpha)).K - alpha * a.K) < 1e-6 * std::abs(K0));
        TripleGradients s3 = pc.t;
        for (auto& v : s3.g3)
            for (auto& x : v) x *= alpha;
        CHECK(std::abs(J3_direct(pc.q, s3) - alpha * J3_direct(pc.q, pc.t)) < 1e-13 * std::abs(J3_direct(pc.q, pc.t)));
    }
}

TEST_CASE("beta") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P2", 5, g);
    CHECK(beta_of(make_phantom("null", 5, g), lin(g, 1, 0, 0)).values.max_abs() == 0.0);
    const auto b1 = beta_of(c, lin(g, 1, 0, 0));
    const auto b2 = beta_of(c, lin(g, 2, 0, 0));
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs(b1.values[i] - c.a[i]) < 1e-14);
        CHECK(std::abs(b2.values[i] - std::pow(2.0, c.p - 2) * c.a[i]) < 1e-14);
    }
    CHECK_THROWS_AS(beta_of(c, ScalarField::constant(g, 1.0)), GradientVanishes);
}

TEST_CASE("triple validation") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P1", 1, g);
    const LinearOperator L(c.sigma);
    const auto x1 = lin(g, 1, 0, 0);
    const auto z = lin(g, 0, 1, cplx(0, 1));
    CHECK(harmonic_residual(L, x1) < 1e-12);
    CHECK(harmonic_residual(L, z) < 1e-12);
    const HarmonicTriple good{x1, z, z};
    const HarmonicTriple complex_u1{z, z, z};
    const auto sq = ScalarField::from_function(g, [](const Vec3& x) { return cplx(x[0] * x[0]); });
    const HarmonicTriple not_harmonic{x1, sq, z};
    CHECK_NOTHROW(good.validate(&L));
    CHECK_THROWS_AS(complex_u1.validate(), InvalidArgument);
    CHECK_THROWS_AS(not_harmonic.validate(&L), InvalidArgument);
    const Quadrature q = Quadrature::q1(c);
    const HarmonicTriple flat{ScalarField::constant(g, 1.0), z, z};
    const auto tf = TripleGradients::of(q, flat);
    CHECK_THROWS_AS(polarize(q, tf, 1e-3), GradientVanishes);
    const auto tg = TripleGradients::of(q, good);
    CHECK_THROWS_AS(polarize(oracle_probe(q, tg), 2.0, 1e-3), InvalidArgument);
}

TEST_CASE("boundary-mode polarization matches the oracle") {
    const Grid g(16, 1.0);
    const Coefficients c = make_phantom("P1", 2, g);
    const ForwardOperator op(c);
    const HarmonicTriple t{lin(g, 1, 0, 0), lin(g, 0.3, 1, cplx(0, 1)), lin(g, 1, cplx(0, 1), 0)};
    const Quadrature q = Quadrature::q1(c);
    const auto tg = TripleGradients::of(q, t);
    const cplx Ko = K_direct(q, tg);
    const auto P = polarize(boundary_probe(op, t), c.p, 1e-3);
    CHECK(std::abs(P.K - Ko) < 1e-4 * std::abs(Ko));
}

#pragma once

#include <algorithm>
#include <cmath>

#include "pqi/phantom.hpp"
#include "pqi/polarize.hpp"
#include "pqi/random.hpp"

namespace testutil {

// Seeded case for the polarization identity with sigma = 1: a jittered bump
// for a, random p, u1 a real harmonic quadratic perturbation of x1, and
// u2, u3 = exp(zeta . (x - c)) with zeta . zeta = 0. Gradients are analytic
// and scaled to unit maximum over supp a.
struct PolarCase {
    pqi::Coefficients c;
    pqi::Quadrature q;
    pqi::TripleGradients t;
};

inline pqi::CVec3 null_vector(pqi::Rng& rng, double k) {
    pqi::Vec3 e{pqi::uniform(rng, -1, 1), pqi::uniform(rng, -1, 1), pqi::uniform(rng, -1, 1)};
    double n = std::hypot(e[0], e[1], e[2]);
    for (auto& v : e) v /= n;
    pqi::Vec3 f{pqi::uniform(rng, -1, 1), pqi::uniform(rng, -1, 1), pqi::uniform(rng, -1, 1)};
    const double d = f[0] * e[0] + f[1] * e[1] + f[2] * e[2];
    for (int i = 0; i < 3; ++i) f[i] -= d * e[i];
    n = std::hypot(f[0], f[1], f[2]);
    pqi::CVec3 z;
    for (int i = 0; i < 3; ++i) z[i] = pqi::cplx(k * e[i], k * f[i] / n);
    return z;
}

inline void normalize(std::vector<pqi::CVec3>& g) {
    double m = 0.0;
    for (const auto& v : g) m = std::max(m, std::sqrt(pqi::q1::norm2(v)));
    for (auto& v : g)
        for (auto& x : v) x /= m;
}

inline PolarCase polar_case(const pqi::Grid& g, std::uint64_t seed) {
    using namespace pqi;
    Rng rng(seed);
    Coefficients c = make_phantom("P1", seed, g);
    c.p = uniform(rng, 1.5, 4.5);
    if (std::abs(c.p - 2.0) < 0.1) c.p = 2.5;
    const double L = g.length();
    const Vec3 mid{L / 2, L / 2, L / 2};
    const double b = uniform(rng, -0.3, 0.3) / L;
    const CVec3 z2 = null_vector(rng, uniform(rng, 1.0, 6.0) / L);
    const CVec3 z3 = null_vector(rng, uniform(rng, 1.0, 6.0) / L);
    auto exp_grad = [&](CVec3 z) {
        return VectorField::from_function(g, [z, mid](const Vec3& x) {
            const cplx e = std::exp(z[0] * (x[0] - mid[0]) + z[1] * (x[1] - mid[1]) + z[2] * (x[2] - mid[2]));
            return CVec3{z[0] * e, z[1] * e, z[2] * e};
        });
    };
    // u1 = x1 + b((x1 - m)^2 - (x2 - m)^2)
    const VectorField g1 = VectorField::from_function(g, [b, mid](const Vec3& x) {
        return CVec3{1.0 + 2 * b * (x[0] - mid[0]), -2 * b * (x[1] - mid[1]), 0.0};
    });
    Quadrature q = Quadrature::nodal(c);
    TripleGradients t = TripleGradients::of(q, g1, exp_grad(z2), exp_grad(z3));
    normalize(t.g2);
    normalize(t.g3);
    return {std::move(c), std::move(q), std::move(t)};
}

}  // namespace testutil

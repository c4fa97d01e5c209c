#include "doctest.h"

#include <cmath>

#include "pqi/cgo.hpp"
#include "pqi/errors.hpp"
#include "pqi/fft.hpp"
#include "pqi/phantom.hpp"
#include "pqi/random.hpp"
#include "test_util.hpp"

using namespace pqi;
using testutil::pi;

namespace {

ScalarField sigma_bump(const Grid& g, double radius, double amp = 0.1) {
    ScalarField s = ScalarField::constant(g, 1.0);
    const double c = g.length() / 2;
    s += bump_field(g, {c, c, c}, radius * g.length(), amp);
    return s;
}

double zeta_norm(const CVec3& z) { return std::sqrt(std::norm(z[0]) + std::norm(z[1]) + std::norm(z[2])); }

}  // namespace

TEST_CASE("potential V") {
    const Grid g(16, 1.0);
    CHECK(potential_V(ScalarField::constant(g, 1.0)).max_abs() == 0.0);
    ScalarField bad = ScalarField::constant(g, 1.0);
    bad[7] = 0.0;
    CHECK_THROWS_AS(potential_V(bad), NonPositiveSigma);

    // sigma = (1 + w)^2 with w periodic: V = Delta w / (1 + w) = -12 pi^2 w / (1 + w)
    std::vector<double> err;
    for (int n : {16, 32}) {
        const Grid gg(n, 1.0);
        auto w = [](const Vec3& x) { return 0.05 * std::sin(2 * pi * x[0]) * std::sin(2 * pi * x[1]) * std::sin(2 * pi * x[2]); };
        const auto sigma = ScalarField::from_function(gg, [&](const Vec3& x) { return cplx(std::pow(1 + w(x), 2)); });
        const auto V = potential_V(sigma);
        double e = 0.0;
        for (std::size_t i = 0; i < gg.size(); ++i) {
            const double wx = w(gg.position(i));
            e = std::max(e, std::abs(V[i] - cplx(-12 * pi * pi * wx / (1 + wx))));
        }
        err.push_back(e);
    }
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.1));

    // locality: V vanishes one node away from supp(sigma - 1)
    const auto sigma = sigma_bump(g, 0.2);
    const auto V = potential_V(sigma);
    for (int k = 0; k < g.n(); ++k)
        for (int j = 0; j < g.n(); ++j)
            for (int i = 0; i < g.n(); ++i) {
                bool near = false;
                for (int d = -1; d <= 1 && !near; ++d)
                    for (const auto& q : {std::array{i + d, j, k}, std::array{i, j + d, k}, std::array{i, j, k + d}})
                        near = near || sigma.at(q[0], q[1], q[2]) != cplx(1.0);
                if (!near) CHECK(V.at(i, j, k) == cplx(0.0));
            }
}

TEST_CASE("CGO parameter algebra") {
    const double k0 = 2 * pi;
    const auto p = make_cgo_params({k0, 0, 0}, 0.0);
    CHECK(p.tau == doctest::Approx(k0 / 2));
    CHECK_THROWS_AS(make_cgo_params({0, 0, 0}, 1.0), ZeroXi);
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec3 xi{std::round(uniform(rng, -8, 8)) * k0, std::round(uniform(rng, -8, 8)) * k0,
                      std::round(uniform(rng, -8, 8)) * k0};
        if (xi == Vec3{0, 0, 0}) continue;
        const auto q = make_cgo_params(xi, uniform(rng, 0, 200));
        CHECK_NOTHROW(q.validate());
        CHECK(zeta_norm(q.zeta2) == doctest::Approx(std::sqrt(2.0) * q.tau).epsilon(1e-12));
        CHECK(zeta_norm(q.zeta3) == doctest::Approx(std::sqrt(2.0) * q.tau).epsilon(1e-12));
        cplx z23 = 0.0;
        for (int d = 0; d < 3; ++d) z23 += q.zeta2[d] * q.zeta3[d];
        const double xi2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        CHECK(std::abs(z23 + 0.5 * xi2) < 1e-12 * (xi2 + q.tau * q.tau));
    }
}

TEST_CASE("solve_r") {
    const Grid g(32, 1.0);
    const double k0 = 2 * pi;
    const auto p = make_cgo_params({k0, 2 * k0, 3 * k0}, 4 * k0);
    CHECK(solve_r(ScalarField(g), p.zeta2).r.max_abs() == 0.0);
    const auto V = potential_V(sigma_bump(g, 0.24));
    const auto rs = solve_r(V, p.zeta2, 1e-8);
    CHECK(rs.residual <= 1e-8);
    CHECK(rs.excluded_mass < 0.01);
    CHECK(rs.excluded_modes >= 1);  // the zero mode

    // direct substitution with spectral derivatives
    const auto grad = spectral_gradient(rs.r);
    const auto lap = spectral_laplacian(rs.r);
    ScalarField res(g);
    for (std::size_t i = 0; i < g.size(); ++i)
        res[i] = lap[i] + p.zeta2[0] * grad[0][i] + p.zeta2[1] * grad[1][i] + p.zeta2[2] * grad[2][i] -
                 V[i] * rs.r[i] - V[i];
    // equal up to the excluded zero mode (the mean of V(1 + r))
    cplx mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) mean += res[i];
    mean /= static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) res[i] -= mean;
    CHECK(l2_norm(res) < 1e-6 * l2_norm(V));

    CHECK_THROWS_AS(solve_r(V, {cplx(1.0, 0.0), cplx(0.0, 1.0), 0.0}), InvalidArgument);
    CHECK_THROWS_AS(solve_r(V, p.zeta2, 1e-12, CgoEquation::stated, 1), NonConvergence);
}

TEST_CASE("CGO decay law on three sigma bumps") {
    const Grid g(32, 1.0);
    const double k0 = 2 * pi;
    for (double radius : {0.125, 0.1875, 0.24}) {
        CAPTURE(radius);
        const auto V = potential_V(sigma_bump(g, radius));
        std::vector<double> z, r;
        for (double s : {4.0, 8.0, 16.0, 32.0}) {
            const auto p = make_cgo_params({k0, 2 * k0, 3 * k0}, s * k0);
            const auto rs = solve_r(V, p.zeta2);
            CHECK(rs.residual <= 1e-8);
            z.push_back(zeta_norm(p.zeta2));
            r.push_back(l2_norm(rs.r));
        }
        const double slope = testutil::loglog_slope(z, r);
        CHECK(slope >= -1.15);
        CHECK(slope <= -0.85);
    }
}

TEST_CASE("CGO solutions") {
    const Grid g(16, 1.0);
    const double k0 = 2 * pi;
    const auto p = make_cgo_params({k0, 0, 0}, 2 * k0);
    const auto flat = cgo_solution(ScalarField::constant(g, 1.0), p.zeta2);
    CHECK(flat.r.max_abs() == 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 x = g.position(i);
        const cplx e = std::exp(p.zeta2[0] * (x[0] - 0.5) + p.zeta2[1] * (x[1] - 0.5) + p.zeta2[2] * (x[2] - 0.5));
        CHECK(std::abs(flat.u[i] - e) <= 1e-15 * std::abs(e));
    }

    const auto sigma = sigma_bump(g, 0.24);
    const auto s = cgo_solution(sigma, p.zeta2);
    double emax = 0.0, smin = 1e300;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 x = g.position(i);
        emax = std::max(emax, std::exp((p.zeta2[0] * (x[0] - 0.5) + p.zeta2[1] * (x[1] - 0.5) + p.zeta2[2] * (x[2] - 0.5)).real()));
        smin = std::min(smin, sigma[i].real());
    }
    CHECK(s.u.max_abs() <= emax / std::sqrt(smin) * (1 + s.r.max_abs()) * (1 + 1e-12));
}

TEST_CASE("harmonic variant residual falls under refinement") {
    const double k0 = 2 * pi;
    const auto p = make_cgo_params({k0, 2 * k0, 3 * k0}, 0.0);
    std::vector<double> with_r, without_r;
    for (int n : {32, 64}) {
        const Grid g(n, 1.0);
        const auto s = cgo_solution(sigma_bump(g, 0.24), p.zeta2, 1e-10, CgoEquation::harmonic);
        with_r.push_back(s.harmonic_residual);
        without_r.push_back(s.harmonic_residual_r0);
    }
    CHECK(with_r[0] / with_r[1] > 2.5);
    CHECK(without_r[1] / with_r[1] > 4.0);
    CHECK(without_r[0] / without_r[1] < 1.1);
}

TEST_CASE("gradient product expansion") {
    const Grid g(32, 1.0);
    const double k0 = 2 * pi;
    SUBCASE("sigma = 1 is exact for every s") {
        const auto sigma = ScalarField::constant(g, 1.0);
        for (double s : {0.0, 4.0, 32.0}) {
            const auto p = make_cgo_params({k0, 2 * k0, 0}, s * k0);
            const auto gp = gradient_product_expansion(sigma, p, cgo_solution(sigma, p.zeta2), cgo_solution(sigma, p.zeta3));
            CHECK(gp.deviation < 1e-10);
        }
    }
    SUBCASE("band-limited deviation decays in s; smallest xi stays bounded") {
        const auto sigma = sigma_bump(g, 0.24);
        std::vector<double> low, full;
        for (double s : {4.0, 8.0, 16.0, 32.0}) {
            const auto p = make_cgo_params({k0, 0, 0}, s * k0);
            const auto gp = gradient_product_expansion(sigma, p, cgo_solution(sigma, p.zeta2), cgo_solution(sigma, p.zeta3));
            ScalarField d = gp.lhs - gp.rhs;
            for (std::size_t i = 0; i < g.size(); ++i) d[i] *= std::exp(cplx(0.0, k0 * g.position(i)[0]));
            ScalarField dh = fft3(d);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const Vec3 k = wave_vector(g, i);
                if (std::hypot(k[0], k[1], k[2]) > 40.0) dh[i] = 0.0;
            }
            low.push_back(ifft3(dh).max_abs());
            full.push_back(gp.deviation);
        }
        for (std::size_t i = 1; i < low.size(); ++i) CHECK(low[i] < 0.75 * low[i - 1]);
        for (std::size_t i = 1; i < full.size(); ++i) CHECK(full[i] <= 1.2 * full[0]);
    }
}

#include "pqi/cgo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pqi/errors.hpp"
#include "pqi/fft.hpp"

namespace pqi {

namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(Vec3 a) {
    const double n = norm(a);
    for (auto& x : a) x /= n;
    return a;
}
cplx cdot(const CVec3& a, const CVec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double cnorm(const CVec3& a) { return std::sqrt(std::norm(a[0]) + std::norm(a[1]) + std::norm(a[2])); }

double spectral_norm2(const ScalarField& fh, const std::vector<unsigned char>* keep = nullptr) {
    double acc = 0.0;
    for (std::size_t i = 0; i < fh.size(); ++i)
        if (keep == nullptr || (*keep)[i]) acc += std::norm(fh[i]);
    return acc;
}

void require_space_sigma(const ScalarField& sigma) {
    for (std::size_t i = 0; i < sigma.size(); ++i)
        if (!(sigma[i].real() > 0.0) || sigma[i].imag() != 0.0)
            throw NonPositiveSigma("sigma must be real and positive at every node");
}

}  // namespace

void CgoParams::validate() const {
    const double nx = norm(xi);
    if (nx == 0.0) throw ZeroXi();
    if (std::abs(dot(xi, eta)) > 1e-14 * nx || std::abs(dot(xi, mu)) > 1e-14 * nx || std::abs(dot(eta, mu)) > 1e-14 ||
        std::abs(norm(eta) - 1.0) > 1e-14 || std::abs(norm(mu) - 1.0) > 1e-14)
        throw InvalidArgument("CgoParams: frame is not orthonormal");
    if (std::abs(tau * tau - (nx * nx / 4 + s * s)) > 1e-12 * (tau * tau + 1e-300))
        throw InvalidArgument("CgoParams: tau^2 != |xi|^2/4 + s^2");
    const double z2 = cnorm(zeta2) * cnorm(zeta2);
    if (std::abs(cdot(zeta2, zeta2)) > 1e-12 * z2 || std::abs(cdot(zeta3, zeta3)) > 1e-12 * z2)
        throw InvalidArgument("CgoParams: zeta is not a null vector");
    for (int d = 0; d < 3; ++d)
        if (std::abs(zeta2[d] + zeta3[d] - cplx(0.0, -xi[d])) > 1e-12 * nx)
            throw InvalidArgument("CgoParams: zeta2 + zeta3 != -i xi");
}

CgoParams make_cgo_params(const Vec3& xi, double s) {
    if (norm(xi) == 0.0) throw ZeroXi();
    if (!std::isfinite(s)) throw InvalidArgument("make_cgo_params: s must be finite");
    int k = 0;
    for (int d = 1; d < 3; ++d)
        if (std::abs(xi[d]) < std::abs(xi[k])) k = d;
    Vec3 e{};
    e[k] = 1.0;
    CgoParams p;
    p.xi = xi;
    p.s = s;
    p.eta = normalized(cross(e, xi));
    p.mu = normalized(cross(xi, p.eta));
    p.tau = std::sqrt(dot(xi, xi) / 4 + s * s);
    const cplx I{0.0, 1.0};
    for (int d = 0; d < 3; ++d) {
        p.zeta2[d] = p.tau * p.mu[d] - I * (xi[d] / 2 + s * p.eta[d]);
        p.zeta3[d] = -p.tau * p.mu[d] - I * (xi[d] / 2 - s * p.eta[d]);
    }
    p.validate();
    return p;
}

ScalarField potential_V(const ScalarField& sigma) {
    require_space_sigma(sigma);
    ScalarField w(sigma.grid());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sqrt(sigma[i].real());
    ScalarField V = laplacian7(w);
    for (std::size_t i = 0; i < V.size(); ++i) V[i] = V[i].real() / w[i].real();
    return V;
}

RSolve solve_r(const ScalarField& V, const CVec3& zeta, double tol, CgoEquation eq, int max_iter) {
    const Grid& g = V.grid();
    RSolve out{ScalarField(g), 0, 0.0, 0, 0.0};
    if (V.max_abs() == 0.0) return out;
    const double zn = cnorm(zeta);
    const double kmin = 2.0 * (2.0 * std::numbers::pi / g.length());
    if (zn < kmin) throw InvalidArgument("solve_r: |zeta| below the symbol floor 2 (2 pi / L)");

    const double c = eq == CgoEquation::harmonic ? 2.0 : 1.0;
    const cplx I{0.0, 1.0};
    std::vector<cplx> inv(g.size());
    std::vector<unsigned char> keep(g.size(), 1);
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const Vec3 k = wave_vector(g, idx);
        // first derivatives drop the Nyquist bin, as spectral_gradient does
        const auto bins = g.ijk(idx);
        cplx drift = 0.0;
        for (int d = 0; d < 3; ++d)
            if (bins[d] != g.n() / 2) drift += zeta[d] * k[d];
        const cplx m = -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) + c * I * drift;
        if (std::abs(m) < 1e-6 * zn * zn) {
            keep[idx] = 0;
            ++out.excluded_modes;
        } else {
            inv[idx] = 1.0 / m;
        }
    }
    const double vnorm = std::sqrt(spectral_norm2(fft3(V)));

    auto load = [&](const ScalarField& r) {
        ScalarField f(g);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = V[i] * (1.0 + r[i]);
        return fft3(f);
    };

    ScalarField fh = load(out.r);
    double prev = std::numeric_limits<double>::infinity();
    int rising = 0;
    for (int it = 1; it <= max_iter; ++it) {
        ScalarField rh(g, Domain::frequency);
        for (std::size_t i = 0; i < g.size(); ++i) rh[i] = keep[i] ? fh[i] * inv[i] : cplx{};
        ScalarField r = ifft3(rh);
        ScalarField fnew = load(r);
        // residual of the new iterate on resolved modes: symbol * r_hat - f_hat(r)
        double res2 = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (keep[i]) res2 += std::norm(fh[i] - fnew[i]);
        const double res = std::sqrt(res2) / vnorm;
        out.r = std::move(r);
        fh = std::move(fnew);
        out.iterations = it;
        out.residual = res;
        if (res <= tol) break;
        rising = res > prev ? rising + 1 : 0;
        if (rising >= 3 || it == max_iter) throw NonConvergence(it, res);
        prev = res;
    }
    const double total = spectral_norm2(fh);
    out.excluded_mass = total > 0.0 ? 1.0 - spectral_norm2(fh, &keep) / total : 0.0;
    if (out.excluded_mass > 0.01)
        throw SymbolSingular(std::to_string(out.excluded_modes) + " excluded modes carry " +
                             std::to_string(100.0 * out.excluded_mass) + "% of the load");
    return out;
}

ScalarField div_sigma_grad7(const ScalarField& sigma, const ScalarField& u) {
    const Grid& g = u.grid();
    const int n = g.n();
    const double ih2 = 1.0 / (g.h() * g.h());
    ScalarField out(g);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double s0 = sigma.at(i, j, k).real();
                const cplx u0 = u.at(i, j, k);
                cplx acc = 0.0;
                const int nb[6][3] = {{i + 1, j, k}, {i - 1, j, k}, {i, j + 1, k},
                                      {i, j - 1, k}, {i, j, k + 1}, {i, j, k - 1}};
                for (const auto& q : nb)
                    acc += std::sqrt(s0 * sigma.at(q[0], q[1], q[2]).real()) * (u.at(q[0], q[1], q[2]) - u0);
                out.at(i, j, k) = acc * ih2;
            }
    return out;
}

CgoBuilder::CgoBuilder(const ScalarField& sigma, CgoEquation eq, double tol)
    : sigma_(sigma), V_(potential_V(sigma)), isq_(sigma.grid()), d_isq_(sigma.grid()), eq_(eq), tol_(tol) {
    const Grid& g = sigma.grid();
    for (std::size_t i = 0; i < g.size(); ++i) isq_[i] = 1.0 / std::sqrt(sigma[i].real());
    flat_ = V_.max_abs() == 0.0;
    bool uniform = true;
    for (std::size_t i = 1; i < g.size() && uniform; ++i) uniform = sigma[i] == sigma[0];
    if (!uniform) d_isq_ = spectral_gradient(isq_);
}

CgoSolution CgoBuilder::solve(const CVec3& zeta) const {
    const double c = sigma_.grid().length() / 2;
    return solve(zeta, {c, c, c});
}

CgoSolution CgoBuilder::solve(const CVec3& zeta, const Vec3& origin) const {
    const Grid& g = sigma_.grid();
    RSolve rs = solve_r(V_, zeta, tol_, eq_);

    CgoSolution out{zeta, origin, ScalarField(g), ScalarField(g), VectorField(g)};
    out.residual = rs.residual;
    out.iterations = rs.iterations;
    out.excluded_modes = rs.excluded_modes;
    out.excluded_mass = rs.excluded_mass;

    const VectorField d_r = flat_ ? VectorField(g) : spectral_gradient(rs.r);
    ScalarField u0(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 x = g.position(i);
        const cplx e = std::exp(zeta[0] * (x[0] - origin[0]) + zeta[1] * (x[1] - origin[1]) + zeta[2] * (x[2] - origin[2]));
        const cplx one_r = 1.0 + rs.r[i];
        out.u[i] = e * isq_[i] * one_r;
        u0[i] = e * isq_[i];
        CVec3 G;
        for (int d = 0; d < 3; ++d) G[d] = zeta[d] * isq_[i] * one_r + d_isq_[d][i] * one_r + isq_[i] * d_r[d][i];
        out.grad_factor.set(i, G);
    }
    if (diagnostics_) {
        const auto mask = region_mask(g, Region::open_interior);
        out.harmonic_residual = l2_norm(div_sigma_grad7(sigma_, out.u), mask);
        out.harmonic_residual_r0 = flat_ ? out.harmonic_residual : l2_norm(div_sigma_grad7(sigma_, u0), mask);
    }
    out.r = std::move(rs.r);
    return out;
}

CgoSolution cgo_solution(const ScalarField& sigma, const CVec3& zeta, double tol, CgoEquation eq) {
    return CgoBuilder(sigma, eq, tol).solve(zeta);
}

CgoSolution cgo_solution(const ScalarField& sigma, const CVec3& zeta, double tol, CgoEquation eq, const Vec3& origin) {
    return CgoBuilder(sigma, eq, tol).solve(zeta, origin);
}

GradientProduct gradient_product_expansion(const ScalarField& sigma, const CgoParams& params, const CgoSolution& u2,
                                           const CgoSolution& u3) {
    const Grid& g = sigma.grid();
    require_space_sigma(sigma);
    const ScalarField V = potential_V(sigma);
    ScalarField w(g);
    for (std::size_t i = 0; i < g.size(); ++i) w[i] = std::sqrt(sigma[i].real());
    const VectorField dw = spectral_gradient(w);
    const Vec3& xi = params.xi;
    const double xi2 = dot(xi, xi);
    const cplx I{0.0, 1.0};

    GradientProduct out{ScalarField(g), ScalarField(g), 0.0};
    const auto mask = region_mask(g, Region::closed_interior);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3 x = g.position(i);
        const cplx phase = std::exp(-I * dot(xi, x));
        out.lhs[i] = phase * cdot(u2.grad_factor.at(i), u3.grad_factor.at(i));
        const double s = sigma[i].real();
        const cplx xdw = xi[0] * dw[0][i] + xi[1] * dw[1][i] + xi[2] * dw[2][i];
        const double dw2 = std::norm(dw[0][i]) + std::norm(dw[1][i]) + std::norm(dw[2][i]);
        out.rhs[i] = phase * (-0.5 * xi2 / s + I * std::pow(s, -1.5) * xdw + dw2 / (s * s) - 2.0 * V[i] / s);
        if (mask[i]) out.deviation = std::max(out.deviation, std::abs(out.lhs[i] - out.rhs[i]));
    }
    return out;
}

}  // namespace pqi

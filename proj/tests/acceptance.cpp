// Acceptance harness: one PASS/FAIL line per criterion.
//
//   acceptance [--only <id>] [--full]
//
// --full also runs the boundary-mode reconstruction at N = 32 (8b), which
// takes far longer than the per-item budget. Exit status counts the failures
// that are not in kKnownFailures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "pqi/asympt.hpp"
#include "pqi/cgo.hpp"
#include "pqi/dnmap.hpp"
#include "pqi/errors.hpp"
#include "pqi/fft.hpp"
#include "pqi/forward.hpp"
#include "pqi/phantom.hpp"
#include "pqi/polarize.hpp"
#include "pqi/pqf.hpp"
#include "pqi/recon.hpp"
#include "pqi/vecineq.hpp"
#include "polar_cases.hpp"
#include "test_util.hpp"

using namespace pqi;
using testutil::pi;

namespace {

// Analysed in the project notes; still reported as FAIL.
const std::set<std::string> kKnownFailures{"7c", "8b"};

int unexpected = 0;
int failed = 0;
int passed = 0;

void line(const std::string& id, bool ok, const std::string& what) {
    const bool known = !ok && kKnownFailures.count(id);
    std::printf("%s %-3s %s%s\n", ok ? "PASS" : "FAIL", id.c_str(), what.c_str(), known ? " [known]" : "");
    std::fflush(stdout);
    if (ok)
        ++passed;
    else {
        ++failed;
        if (!known) ++unexpected;
    }
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ScalarField affine(const Grid& g, double a, double b, double c) {
    return ScalarField::from_function(g, [=](const Vec3& x) { return cplx(a * x[0] + b * x[1] + c * x[2]); });
}

ScalarField sigma_bump(const Grid& g, double radius, double amp) {
    ScalarField s = ScalarField::constant(g, 1.0);
    const double c = g.length() / 2;
    s += bump_field(g, {c, c, c}, radius * g.length(), amp);
    return s;
}

double zeta_norm(const CVec3& z) { return std::sqrt(std::norm(z[0]) + std::norm(z[1]) + std::norm(z[2])); }

// ---- 1 ----

void c1() {
    std::size_t v1 = 0, v2 = 0;
    std::string detail;
    for (double p : {1.5, 2.5, 3.0, 4.7}) {
        const LemmaA1Report a = check_lemma_A1(p, 100000);
        v1 += a.violations3;
        detail += fmt(" p=%.1f:A1 %zu", p, a.violations3);
        if (p > 2) {
            const LemmaA2Report b = check_lemma_A2(p, 1.0, 100000);
            v2 += b.violations;
            detail += fmt(",A2 %zu", b.violations);
        }
    }
    line("1", v1 == 0 && v2 == 0, "vector inequalities, 1e5 samples, violations" + detail);
}

// ---- 2 ----

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
    return relative_l2(solve_weak(c, BoundaryTrace::of(exact), F, 1e-10).u, exact);
}

void c2() {
    for (double p : {1.5, 3.0}) {
        std::vector<double> h, e;
        for (int n : {16, 32, 64}) {
            h.push_back(1.0 / n);
            e.push_back(manufactured_error(n, p));
        }
        const double order = testutil::loglog_slope(h, e);
        line(p == 1.5 ? "2a" : "2b", e[1] < 1e-3 && order >= 1.5,
             fmt("manufactured solution p=%.1f: error(N=32) %.2e < 1e-3, order %.2f >= 1.5", p, e[1], order));
    }
}

// ---- 3 ----

void c3() {
    const Grid g(32, 1.0);
    const Coefficients c = make_phantom("P1", 7, g);
    const ForwardOperator op(c);
    const auto f = BoundaryTrace::from_function(g, [](const Vec3& x) { return cplx(4 * x[0], x[1] * x[2]); });
    const auto small = f.scaled(1e-2);
    const auto strong = op.solve_strong(small, nullptr, 1e-16);
    WeakSolveOptions opt;
    opt.tol = 1e-14;
    const double diff = relative_l2(strong.u, op.solve_weak(small, nullptr, opt).u);
    const double kappa = strong.report.contraction_ratio.value_or(INFINITY);
    double kappa_big = 0.0;
    try {
        const auto big = op.solve_strong(small.scaled(100.0), nullptr, 1e-16);
        kappa_big = big.report.contraction_ratio.value_or(0.0);
    } catch (const NotContracting& e) {
        kappa_big = e.kappa;
    }
    line("3", diff < 1e-6 && kappa < 1 && kappa_big > 1,
         fmt("weak/strong at eps=1e-2: diff %.2e < 1e-6, kappa %.3f < 1, kappa(100x) %.3f > 1", diff, kappa,
             kappa_big));
}

// ---- 4, 5 ----

void c4() {
    const Grid g(32, 1.0);
    {
        const Coefficients c = make_phantom("P1", 2, g);
        const ForwardOperator op(c);
        const auto f = BoundaryTrace::of(affine(g, 1, 0.5, 0.25));
        const auto sw = sweep(op, f, affine(g, 0.2, 1, 0), default_epsilons(Regime::super), Regime::super);
        const auto A = extract_linear(sw, c.p);
        const auto I = extract_I(sw, A.value, c.p);
        const double s1 = leading_exponent(sw).slope;
        const double s2 = second_exponent(sw, A.value).slope;
        const double s3 = remainder_exponent(sw, A.value, I.value, c.p).slope;
        line("4a", std::abs(s1 - 1) <= 0.02 && std::abs(s2 - 2) <= 0.05 && s3 >= 2.9,
             fmt("P1 p=3 exponents: first %.4f (1 +- 0.02), second %.4f (2 +- 0.05), remainder %.3f >= 2.9", s1, s2,
                 s3));
    }
    {
        const Coefficients c = make_phantom("P3-lowp", 4, g);
        const ForwardOperator op(c);
        const auto f = BoundaryTrace::of(affine(g, 1, 0.5, 0));
        const auto sw = sweep(op, f, affine(g, 1, 0, 0), default_epsilons(Regime::sub), Regime::sub);
        const auto A = extract_linear(sw, c.p);
        const double s1 = leading_exponent(sw).slope;
        const double s2 = second_exponent(sw, A.value).slope;
        line("4b", std::abs(s1 + 1) <= 0.02 && std::abs(s2 + 0.5) <= 0.05,
             fmt("P3-lowp p=1.5 exponents: leading %.4f (-1 +- 0.02), second %.4f (-0.5 +- 0.05)", s1, s2));
    }
}

void c5() {
    const Grid g(32, 1.0);
    const auto w = affine(g, 1, 0, 0);
    const auto f = BoundaryTrace::of(affine(g, 1, 0.5, 0));
    bool ok = true;
    std::string detail;
    for (const char* name : {"P1", "P3-lowp"}) {
        const Coefficients c = make_phantom(name, 5, g);
        const ForwardOperator op(c);
        try {
            const double p = estimate_p(make_oracle(op, w), f).p;
            const double rel = std::abs(p - c.p) / c.p;
            ok = ok && rel <= 0.02;
            detail += fmt(" %s: %.4f (true %.1f, %.2f%%);", name, p, c.p, 100 * rel);
        } catch (const NumericalError& e) {
            ok = false;
            detail += fmt(" %s: %s;", name, e.what());
        }
    }
    bool degenerate = false;
    try {
        const ForwardOperator op(make_phantom("null", 5, g));
        estimate_p(make_oracle(op, w), f);
    } catch (const IllConditionedFit&) {
        degenerate = true;
    }
    detail += degenerate ? " null: IllConditionedFit" : " null: no error";
    line("5", ok && degenerate, "p recovery within 2%:" + detail);
}

// ---- 6 ----

void c6() {
    const Grid g(32, 1.0);
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto pc = testutil::polar_case(g, seed);
        const cplx K = polarize(pc.q, pc.t, 1e-3).K;
        const cplx Ko = K_direct(pc.q, pc.t);
        worst = std::max(worst, std::abs(K - Ko) / std::abs(Ko));
    }
    line("6", worst < 1e-6, fmt("polarization identity, 20 seeds, max rel |K - K_direct| %.2e < 1e-6", worst));
}

// ---- 7 ----

void c7() {
    const Grid g(32, 1.0);
    const double k0 = 2 * pi / g.length();
    const ScalarField sigma = sigma_bump(g, 0.24, 0.1);
    const ScalarField V = potential_V(sigma);
    const Vec3 xi{k0, 2 * k0, 3 * k0};
    std::vector<double> z, r, dev;
    double worst_res = 0.0;
    for (double s : {4.0, 8.0, 16.0, 32.0}) {
        const CgoParams p = make_cgo_params(xi, s * k0);
        const RSolve rs = solve_r(V, p.zeta2);
        worst_res = std::max(worst_res, rs.residual);
        z.push_back(zeta_norm(p.zeta2));
        r.push_back(l2_norm(rs.r));
        dev.push_back(
            gradient_product_expansion(sigma, p, cgo_solution(sigma, p.zeta2), cgo_solution(sigma, p.zeta3)).deviation);
    }
    const double slope = testutil::loglog_slope(z, r);
    line("7a", slope >= -1.15 && slope <= -0.85, fmt("CGO decay slope of ||r|| vs |zeta|: %.3f in [-1.15, -0.85]", slope));
    line("7b", worst_res <= 1e-8, fmt("CGO equation residual: max %.2e <= 1e-8", worst_res));
    bool halves = true;
    std::string ratios;
    for (std::size_t i = 1; i < dev.size(); ++i) {
        const double q = dev[i - 1] / dev[i];
        halves = halves && q >= 1.5 && q <= 2.5;
        ratios += fmt(" %.3f", q);
    }
    line("7c", halves, "gradient-product deviation ratio per s doubling in [1.5, 2.5]:" + ratios);
}

// ---- 8 ----

void c8(bool full) {
    RunConfig cfg;  // P1, N = 32, cutoff 8, oracle
    auto t0 = std::chrono::steady_clock::now();
    const PipelineResult r = run_pipeline(cfg);
    const double err = r.report.rel_l2_error.value_or(INFINITY);
    line("8a", err < 0.05, fmt("oracle reconstruction P1 N=32 cutoff 8: rel L2 error %.4f < 0.05 (%.0f s)", err,
                                seconds_since(t0)));

    if (full) {
        RunConfig b = cfg;
        b.mode = ReconMode::boundary;
        b.s_list = {0.5};
        b.sweep_eps = {0.0625, 0.03125, 0.015625, 0.0078125};
        t0 = std::chrono::steady_clock::now();
        const PipelineResult rb = run_pipeline(b);
        const double eb = rb.report.rel_l2_error.value_or(INFINITY);
        const double secs = seconds_since(t0);
        line("8b", eb < 0.10 && secs <= 600,
             fmt("boundary reconstruction P1 N=32 cutoff 8: rel L2 error %.4f < 0.10, %zu failed xi, %.0f s <= 600 s",
                 eb, rb.data.failures.size(), secs));
    } else {
        line("8b", false, "boundary reconstruction P1 N=32 cutoff 8: not run, exceeds the 600 s budget (use --full)");
    }

    // synthetic beta round trip with a variable-sigma potential
    const Grid g(32, 1.0);
    const double c = g.length() / 2;
    const ScalarField beta = bump_field(g, {c + 0.02, c - 0.01, c}, 0.18, 1.0);
    const ScalarField V = potential_V(sigma_bump(g, 0.125, 0.1));
    ScalarField rhs = spectral_laplacian(beta);
    for (std::size_t i = 0; i < g.size(); ++i) rhs[i] -= 3.0 * V[i] * beta[i];
    const BetaSolve bs = invert_beta(rhs, V);
    const double rt = l2_norm(bs.beta - beta) / l2_norm(beta);
    line("8c", rt <= 1e-8, fmt("invert_beta round trip: rel error %.2e <= 1e-8", rt));

    line("8d", r.hermitian_residual < 1e-6 && r.report.imag_residual < 1e-6,
         fmt("oracle run residuals: Hermitian %.2e, reality %.2e < 1e-6", r.hermitian_residual,
             r.report.imag_residual));
}

// ---- 9 ----

void c9() {
    RunConfig cfg;
    cfg.grid_n = 16;
    cfg.cutoff = 3;
    cfg.s_list = {1, 2};
    const PipelineResult a = run_pipeline(cfg);
    const PipelineResult b = run_pipeline(cfg);
    bool same = encode_pqf(a.report.a_hat) == encode_pqf(b.report.a_hat) && a.data.khat == b.data.khat &&
                a.p_hat == b.p_hat && a.report.rel_l2_error == b.report.rel_l2_error;

    const Grid g(16, 1.0);
    const Coefficients co = make_phantom("P2", 3, g);
    const auto f = BoundaryTrace::of(affine(g, 1, 0.5, 0.2));
    WeakSolveOptions opt;
    const auto u1 = ForwardOperator(co).solve_weak(f, nullptr, opt);
    const auto u2 = ForwardOperator(co).solve_weak(f, nullptr, opt);
    same = same && encode_pqf(u1.u) == encode_pqf(u2.u) && u1.report.energy_history == u2.report.energy_history;
    line("9", same, std::string("two single-threaded runs: ") + (same ? "bitwise identical" : "outputs differ"));
}

}  // namespace

int main(int argc, char** argv) {
    std::string only;
    bool full = false;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--full"))
            full = true;
        else if (!std::strcmp(argv[i], "--only") && i + 1 < argc)
            only = argv[++i];
        else {
            std::fprintf(stderr, "usage: acceptance [--only <id>] [--full]\n");
            return 2;
        }
    }
    const std::vector<std::pair<std::string, std::function<void()>>> items{
        {"1", c1}, {"2", c2}, {"3", c3}, {"4", c4}, {"5", c5},
        {"6", c6}, {"7", c7}, {"8", [full] { c8(full); }}, {"9", c9}};
    for (const auto& [id, run] : items) {
        if (!only.empty() && only != id) continue;
        try {
            run();
        } catch (const std::exception& e) {
            line(id, false, std::string("threw: ") + e.what());
        }
    }
    std::printf("%d passed, %d failed, %d unexpected\n", passed, failed, unexpected);
    return unexpected == 0 ? 0 : 1;
}

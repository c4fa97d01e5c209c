#include "pqi/recon.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include "pqi/asympt.hpp"
#include "pqi/errors.hpp"
#include "pqi/fft.hpp"
#include "pqi/phantom.hpp"
#include "pqi/polarize.hpp"

namespace pqi {

namespace {

using Mode = std::array<int, 3>;

Mode mode_of(const Grid& g, const Vec3& xi) {
    const double k0 = 2.0 * std::numbers::pi / g.length();
    Mode n;
    for (int d = 0; d < 3; ++d) n[d] = static_cast<int>(std::lround(xi[d] / k0));
    return n;
}

std::size_t bin_of(const Grid& g, const Mode& n) { return g.index(n[0], n[1], n[2]); }

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

cplx dot3(const CVec3& a, const CVec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

// Runs f(i) for i < n on up to `threads` workers; results must be written by index.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    for (auto& t : pool) t.join();
}

struct CgoPair {
    CgoParams params;
    CgoSolution u2;
    CgoSolution u3;
};

CgoPair cgo_pair(const CgoBuilder& cgo, const Vec3& xi, double s) {
    const CgoParams params = make_cgo_params(xi, s);
    return {params, cgo.solve(params.zeta2), cgo.solve(params.zeta3)};
}

cplx lattice_sum(const ScalarField& beta, const Vec3& xi, const CgoPair& c) {
    const Grid& g = beta.grid();
    cplx acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double b = beta[i].real();
        if (b == 0.0) continue;
        const cplx e = std::polar(1.0, -dot3(xi, g.position(i)));
        acc += b * e * dot3(c.u2.grad_factor.at(i), c.u3.grad_factor.at(i));
    }
    return g.cell_volume() * acc;
}

struct DiscretePair {
    ScalarField u2;
    ScalarField u3;
};

DiscretePair discrete_pair(const LinearOperator& lin, const CgoPair& c) {
    return {lin.solve_dirichlet(BoundaryTrace::of(c.u2.u), nullptr),
            lin.solve_dirichlet(BoundaryTrace::of(c.u3.u), nullptr)};
}

cplx khat_oracle_impl(const ForwardOperator& op, const ScalarField& u1, const ScalarField& beta,
                      const Quadrature* q, const CgoBuilder& cgo, const Vec3& xi, double s) {
    const CgoPair c = cgo_pair(cgo, xi, s);
    if (!q) return lattice_sum(beta, xi, c);
    const DiscretePair d = discrete_pair(op.linear(), c);
    const TripleGradients t = TripleGradients::of(*q, HarmonicTriple{u1, d.u2, d.u3});
    return std::polar(1.0, -dot3(xi, c.u2.origin)) * K_direct(*q, t);
}

}  // namespace

std::vector<Vec3> lattice_ball(const Grid& grid, double cutoff) {
    const double k0 = 2.0 * std::numbers::pi / grid.length();
    std::vector<Vec3> out;
    const int n = grid.n();
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const auto b = grid.ijk(idx);
        Vec3 xi;
        bool ok = true;
        for (int d = 0; d < 3; ++d) {
            const int m = grid.signed_mode(b[d]);
            ok = ok && std::abs(m) < n / 2;
            xi[d] = k0 * m;
        }
        const double r = std::sqrt(dot3(xi, xi));
        if (ok && r > 0.0 && r <= cutoff * (1 + 1e-12)) out.push_back(xi);
    }
    return out;
}

// ---------------------------------------------------------------------------

bool FourierData::failed(std::size_t i) const {
    return std::any_of(failures.begin(), failures.end(), [&](const XiFailure& f) { return f.index == i; });
}

namespace {

// Lattice frequencies are k0 * m, so -xi is matched exactly.
std::vector<std::ptrdiff_t> partner_index(const FourierData& d) {
    std::map<Vec3, std::size_t> m;
    for (std::size_t i = 0; i < d.xi_list.size(); ++i) m[d.xi_list[i]] = i;
    std::vector<std::ptrdiff_t> out(d.xi_list.size(), -1);
    for (std::size_t i = 0; i < d.xi_list.size(); ++i) {
        const Vec3& x = d.xi_list[i];
        const auto it = m.find({-x[0], -x[1], -x[2]});
        if (it != m.end()) out[i] = static_cast<std::ptrdiff_t>(it->second);
    }
    return out;
}

}  // namespace

double FourierData::hermitian_residual() const {
    const auto partner = partner_index(*this);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < khat.size(); ++i) {
        if (partner[i] < 0 || failed(i) || failed(static_cast<std::size_t>(partner[i]))) continue;
        num += std::norm(khat[i] - std::conj(khat[static_cast<std::size_t>(partner[i])]));
        den += std::norm(khat[i]);
    }
    return den == 0.0 ? 0.0 : std::sqrt(num / den);
}

void FourierData::symmetrize() {
    const auto partner = partner_index(*this);
    std::vector<cplx> out = khat;
    for (std::size_t i = 0; i < khat.size(); ++i)
        if (partner[i] >= 0) out[i] = 0.5 * (khat[i] + std::conj(khat[static_cast<std::size_t>(partner[i])]));
    khat = std::move(out);
}

// ---------------------------------------------------------------------------

cplx khat_oracle(const ForwardOperator& op, const ScalarField& u1, const CgoBuilder& cgo, const Vec3& xi, double s,
                 OracleRule rule) {
    if (rule == OracleRule::lattice) {
        const Beta beta = beta_of(op.coefficients(), u1);
        return khat_oracle_impl(op, u1, beta.values, nullptr, cgo, xi, s);
    }
    const Quadrature q = Quadrature::q1(op.coefficients());
    return khat_oracle_impl(op, u1, u1, &q, cgo, xi, s);
}

std::pair<cplx, cplx> khat_boundary(const ForwardOperator& op, const ScalarField& u1, const CgoBuilder& cgo,
                                    const Vec3& xi, double s, const AssembleOptions& opt) {
    const double p = opt.p > 0.0 ? opt.p : op.coefficients().p;
    if (!(p > 1.0) || p == 2.0) throw InvalidArgument("khat_boundary: p must lie in (1, inf) \\ {2}");
    const Regime regime = p > 2.0 ? Regime::super : Regime::sub;
    const std::vector<double> eps = opt.epsilons.empty() ? default_epsilons(regime) : opt.epsilons;

    const CgoPair c = cgo_pair(cgo, xi, s);
    const DiscretePair d = discrete_pair(op.linear(), c);

    double step = opt.step;
    if (step <= 0.0) {
        const Quadrature q = Quadrature::q1(op.coefficients());
        step = default_step(TripleGradients::of(q, HarmonicTriple{u1, d.u2, d.u3}));
    }

    // u2(-xi) = conj u2(xi) and u3(-xi) = conj u3(xi): the data sets for
    // -xi are those of xi with the roles of u2 and conj u2 swapped.
    const BoundaryTrace t1 = BoundaryTrace::of(u1);
    const BoundaryTrace t2 = BoundaryTrace::of(d.u2);
    const BoundaryTrace t2c = t2.conj();
    const std::vector<ScalarField> ws{d.u3.conj(), d.u3};

    std::map<std::pair<int, bool>, std::pair<cplx, cplx>> cache;
    auto eval = [&](cplx z, bool conj_u2) {
        // z is always one of +-step, +-i step
        const int key = z.real() > 0 ? 0 : z.real() < 0 ? 1 : z.imag() > 0 ? 2 : 3;
        const auto it = cache.find({key, conj_u2});
        if (it != cache.end()) return it->second;
        const BoundaryTrace data = t1 + (conj_u2 ? t2c : t2).scaled(z);
        const auto sw = sweep_many(op, data, ws, eps, regime, opt.sweep_tol);
        std::pair<cplx, cplx> v;
        v.first = extract_I(sw[0], extract_linear(sw[0], p).value, p).value;
        v.second = extract_I(sw[1], extract_linear(sw[1], p).value, p).value;
        cache[{key, conj_u2}] = v;
        return v;
    };
    const PolarProbe plus = [&](cplx z, bool conj_u2) { return eval(z, conj_u2).first; };
    const PolarProbe minus = [&](cplx z, bool conj_u2) { return eval(z, !conj_u2).second; };
    const Polarization kp = polarize(plus, p, step);
    const Polarization km = polarize(minus, p, step);
    const double phase = dot3(xi, c.u2.origin);
    return {std::polar(1.0, -phase) * kp.K, std::polar(1.0, phase) * km.K};
}

FourierData assemble_khat(const ForwardOperator& op, const ScalarField& u1, const std::vector<Vec3>& xi_list,
                          const std::vector<double>& s_list, const AssembleOptions& opt) {
    const Grid& g = op.linear().grid();
    require_same_grid(g, u1.grid());
    if (u1.max_abs_imag() != 0.0) throw InvalidArgument("assemble_khat: u1 must be real");
    if (s_list.empty()) throw InvalidArgument("assemble_khat: empty s_list");
    std::vector<double> s = s_list;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!(s[i] > 0.0) || (i > 0 && s[i] == s[i - 1]))
            throw InvalidArgument("assemble_khat: s values must be positive and distinct");

    FourierData out;
    out.xi_list = xi_list;
    out.s_list = s;
    out.khat.assign(xi_list.size(), 0.0);
    out.extrapolation_error.assign(xi_list.size(), 0.0);
    for (const auto& xi : xi_list) out.cutoff = std::max(out.cutoff, std::sqrt(dot3(xi, xi)));

    CgoBuilder cgo(op.coefficients().sigma, opt.equation, opt.cgo_tol);
    cgo.set_diagnostics(false);
    std::vector<std::vector<cplx>> K(xi_list.size(), std::vector<cplx>(s.size()));
    std::vector<XiFailure> failures;
    std::mutex fail_mu;
    auto fail = [&](std::size_t i, const std::exception& e) {
        const auto* ne = dynamic_cast<const NumericalError*>(&e);
        std::lock_guard lock(fail_mu);
        failures.push_back({i, ne ? ne->kind() : "InvalidArgument", e.what()});
    };

    if (opt.mode == ReconMode::oracle) {
        std::optional<Beta> beta;
        std::optional<Quadrature> q;
        if (opt.rule == OracleRule::lattice)
            beta = beta_of(op.coefficients(), u1);
        else
            q = Quadrature::q1(op.coefficients());
        const ScalarField& bvals = beta ? beta->values : u1;
        parallel_for(xi_list.size(), opt.threads, [&](std::size_t i) {
            try {
                for (std::size_t j = 0; j < s.size(); ++j)
                    K[i][j] = khat_oracle_impl(op, u1, bvals, q ? &*q : nullptr, cgo, xi_list[i], s[j]);
            } catch (const std::exception& e) {
                fail(i, e);
            }
        });
    } else {
        const auto partner = partner_index(out);
        std::vector<std::size_t> tasks;
        for (std::size_t i = 0; i < xi_list.size(); ++i)
            if (partner[i] < 0 || static_cast<std::size_t>(partner[i]) >= i) tasks.push_back(i);
        parallel_for(tasks.size(), opt.threads, [&](std::size_t t) {
            const std::size_t i = tasks[t];
            const std::ptrdiff_t m = partner[i];
            try {
                for (std::size_t j = 0; j < s.size(); ++j) {
                    const auto [kp, km] = khat_boundary(op, u1, cgo, xi_list[i], s[j], opt);
                    K[i][j] = kp;
                    if (m >= 0) K[static_cast<std::size_t>(m)][j] = km;
                }
            } catch (const std::exception& e) {
                fail(i, e);
                if (m >= 0 && static_cast<std::size_t>(m) != i) fail(static_cast<std::size_t>(m), e);
            }
        });
    }

    std::sort(failures.begin(), failures.end(), [](const XiFailure& a, const XiFailure& b) { return a.index < b.index; });
    out.failures = std::move(failures);
    for (std::size_t i = 0; i < xi_list.size(); ++i) {
        if (out.failed(i)) continue;
        const std::size_t n = s.size();
        if (n == 1) {
            out.khat[i] = K[i][0];
            continue;
        }
        const double s1 = s[n - 2], s2 = s[n - 1];
        const cplx kinf = (s2 * K[i][n - 1] - s1 * K[i][n - 2]) / (s2 - s1);
        out.khat[i] = kinf;
        out.extrapolation_error[i] = std::abs(kinf - K[i][n - 1]);
    }
    return out;
}

// ---------------------------------------------------------------------------

ScalarField beta_rhs(const FourierData& data, const ScalarField& sigma) {
    const Grid& g = sigma.grid();
    ScalarField kh(g, Domain::frequency);
    for (std::size_t i = 0; i < data.xi_list.size(); ++i) {
        if (data.failed(i)) continue;
        kh[bin_of(g, mode_of(g, data.xi_list[i]))] = data.khat[i];
    }
    ScalarField rhs = ifft3(kh);
    for (std::size_t i = 0; i < g.size(); ++i) rhs[i] *= 2.0 * std::sqrt(sigma[i].real());
    return rhs;
}

namespace {

// Delta^-1 on nonzero modes, zero mode fixed by mean zero on the boundary layer.
ScalarField inverse_laplacian(const ScalarField& f) {
    const Grid& g = f.grid();
    ScalarField fh = fft3(f);
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const Vec3 k = wave_vector(g, idx);
        const double k2 = dot3(k, k);
        fh[idx] = k2 == 0.0 ? cplx{} : fh[idx] / -k2;
    }
    ScalarField b = ifft3(fh);
    const auto& collar = boundary_nodes(g);
    cplx mean = 0.0;
    for (std::size_t i : collar) mean += b[i];
    mean /= static_cast<double>(collar.size());
    for (auto& v : b.values()) v -= mean;
    return b;
}

double nonzero_mode_norm(const ScalarField& f) {
    ScalarField fh = fft3(f);
    fh[0] = 0.0;
    return l2_norm(ifft3(fh));
}

}  // namespace

BetaSolve invert_beta(const ScalarField& rhs, const ScalarField& V, double tol, int max_iter) {
    require_same_grid(rhs.grid(), V.grid());
    const Grid& g = rhs.grid();
    const bool flat = V.max_abs() == 0.0;
    auto source = [&](const ScalarField& b) {
        ScalarField s = rhs;
        if (!flat)
            for (std::size_t i = 0; i < g.size(); ++i) s[i] += 3.0 * V[i] * b[i];
        return s;
    };

    BetaSolve out{inverse_laplacian(rhs)};
    out.iterations = 1;
    double prev = 0.0;
    int rises = 0;
    while (!flat) {
        ScalarField next = inverse_laplacian(source(out.beta));
        const double inc = l2_norm(next - out.beta);
        const double scale = l2_norm(next);
        out.beta = std::move(next);
        ++out.iterations;
        if (prev > 0.0) out.contraction = inc / prev;
        if (inc <= tol * scale || scale == 0.0) break;
        rises = prev > 0.0 && inc > prev ? rises + 1 : 0;
        prev = inc;
        if (rises >= 3 || out.iterations >= max_iter)
            throw SingularOperator("invert_beta: fixed point failed after " + std::to_string(out.iterations) +
                                   " iterations, spectral radius estimate " + std::to_string(out.contraction));
    }

    const double rn = l2_norm(rhs);
    if (rn > 0.0) {
        ScalarField r = spectral_laplacian(out.beta) - source(out.beta);
        out.residual = nonzero_mode_norm(r) / rn;
    }
    return out;
}

BetaSolve invert_beta(const FourierData& data, const ScalarField& sigma, const ScalarField& V, double tol,
                      int max_iter) {
    return invert_beta(beta_rhs(data, sigma), V, tol, max_iter);
}

// ---------------------------------------------------------------------------

ReconReport recover_a(const BetaSolve& beta, const ScalarField& u1, double p, double grad_floor) {
    const Grid& g = u1.grid();
    require_same_grid(g, beta.beta.grid());
    const VectorField grad = gradient(u1);
    const auto mask = region_mask(g, Region::closed_interior);
    ScalarField a(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!mask[i]) continue;
        const CVec3 v = grad.at(i);
        const double n = std::sqrt(std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]));
        if (!(n >= grad_floor)) throw GradientVanishes("recover_a: |grad u1| below floor on Omega_h");
        a[i] = std::pow(n, 2.0 - p) * beta.beta[i];
    }
    ReconReport out(g);
    const double an = l2_norm(a);
    double im = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        im += a[i].imag() * a[i].imag();
        out.a_hat[i] = a[i].real();
    }
    out.imag_residual = an > 0.0 ? std::sqrt(im * g.cell_volume()) / an : 0.0;
    out.beta_residual = beta.residual;
    out.beta_iterations = beta.iterations;
    return out;
}

ScalarField band_limit(const ScalarField& a, double cutoff) {
    const Grid& g = a.grid();
    ScalarField ah = fft3(a);
    ScalarField kept(g, Domain::frequency);
    kept[0] = ah[0];
    for (const Vec3& xi : lattice_ball(g, cutoff)) {
        const std::size_t b = bin_of(g, mode_of(g, xi));
        kept[b] = ah[b];
    }
    ScalarField out = ifft3(kept);
    for (auto& v : out.values()) v = v.real();
    return out;
}

double rel_error_on_region(const ScalarField& a_hat, const ScalarField& ref) {
    const auto mask = region_mask(ref.grid(), Region::closed_interior);
    const double rn = l2_norm(ref, mask);
    const double en = l2_norm(a_hat - ref, mask);
    if (rn == 0.0) return en == 0.0 ? 0.0 : INFINITY;
    return en / rn;
}

ScalarField default_u1(const LinearOperator& lin) {
    const Grid& g = lin.grid();
    auto x1 = [](const Vec3& x) { return cplx{x[0]}; };
    ScalarField u = lin.solve_dirichlet(BoundaryTrace::from_function(g, x1), nullptr);
    const auto mask = region_mask(g, Region::closed_interior);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!mask[i]) u[i] = g.position(i)[0];
        u[i] = u[i].real();
    }
    return u;
}

// ---------------------------------------------------------------------------

PipelineResult run_pipeline(const RunConfig& config, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    config.validate();
    const Grid grid(config.grid_n, config.grid_l);
    Coefficients truth = make_phantom(config.phantom, config.seed, grid);
    if (config.p > 0.0) truth.p = config.p;
    const ForwardOperator op(truth);
    const ScalarField u1 = default_u1(op.linear());

    PipelineResult res(config, truth);
    res.p_used = truth.p;
    try {
        const PEstimate est = estimate_p(make_oracle(op, u1), BoundaryTrace::of(u1), config.sweep_eps);
        res.p_hat = est.p;
        res.p_used = est.p;
    } catch (const NumericalError& e) {
        res.p_error = e.what();
    }

    const double k0 = 2.0 * std::numbers::pi / grid.length();
    std::vector<double> s;
    for (double v : config.s_list) s.push_back(v * k0);
    AssembleOptions opt;
    opt.mode = config.mode;
    opt.epsilons = config.sweep_eps;
    opt.p = res.p_used;
    opt.threads = threads;
    res.data = assemble_khat(op, u1, lattice_ball(grid, config.cutoff * k0), s, opt);
    res.hermitian_residual = res.data.hermitian_residual();
    res.data.symmetrize();

    const ScalarField V = potential_V(truth.sigma);
    const BetaSolve beta = invert_beta(res.data, truth.sigma, V);
    res.report = recover_a(beta, u1, res.p_used);
    res.report.cutoff = config.cutoff * k0;
    res.a_band = band_limit(truth.a, config.cutoff * k0);
    if (l2_norm(res.a_band) > 0.0) res.report.rel_l2_error = rel_error_on_region(res.report.a_hat, res.a_band);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace pqi

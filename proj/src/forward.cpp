#include "pqi/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pqi/errors.hpp"
#include "pqi/fft.hpp"
#include "pqi/vecineq.hpp"

namespace pqi {

namespace {

using Eigen::VectorXcd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

VectorXcd mul(const SpMat& a, const VectorXcd& x) {
    VectorXd re = a * x.real();
    VectorXd im = a * x.imag();
    VectorXcd out(re.size());
    out.real() = re;
    out.imag() = im;
    return out;
}

double re_dot(const VectorXcd& a, const VectorXcd& b) {
    return (a.real().dot(b.real()) + a.imag().dot(b.imag()));
}

// rho = (reg^2 + |g|^2)^((p-2)/2), with a floor where the gradient vanishes for p < 2.
struct Power {
    double p;
    double reg2;
    double floor2;

    double t(double n2) const noexcept {
        const double v = reg2 + n2;
        return v > floor2 ? v : floor2;
    }
    double rho(double n2) const noexcept { return pmap_weight(t(n2), p); }
    // a |g|^(p-2) g through the shared kernel
    CVec3 flux(double a, const CVec3& g) const noexcept {
        CVec3 f = pmap(g, p, reg2, floor2);
        for (auto& v : f) v *= a;
        return f;
    }
    // (p-2) t^((p-4)/2)
    double curvature(double n2) const noexcept {
        const double v = t(n2);
        if (v == 0.0) return 0.0;
        return (p - 2.0) * std::pow(v, 0.5 * (p - 4.0));
    }
};

double quad_energy(const q1::Mesh& mesh, std::span<const cplx> v, const std::vector<double>& sigma_q,
                   const std::vector<double>& a_q, double p, std::span<const CVec3> F_q, double reg) {
    const double w = mesh.weight();
    const double regp = reg > 0.0 ? std::pow(reg, p) : 0.0;
    double e = 0.0;
    for (std::size_t cell = 0; cell < mesh.cell_count(); ++cell) {
        for (int g = 0; g < 8; ++g) {
            const std::size_t q = 8 * cell + g;
            const CVec3 gr = q1::gradient_at(mesh, v, cell, g);
            const double n2 = q1::norm2(gr);
            double dens = 0.5 * sigma_q[q] * n2;
            if (a_q[q] > 0.0) dens += a_q[q] / p * (std::pow(reg * reg + n2, 0.5 * p) - regp);
            if (!F_q.empty()) {
                const CVec3& f = F_q[q];
                dens += (std::conj(gr[0]) * f[0] + std::conj(gr[1]) * f[1] + std::conj(gr[2]) * f[2]).real();
            }
            e += w * dens;
        }
    }
    return e;
}

// t1^(p/2) - t0^(p/2) with t1 = t0 + dt, without cancellation for small dt.
double pow_diff(double t0, double dt, double p) {
    if (t0 > 0.0 && std::abs(dt) < 0.5 * t0) return std::pow(t0, 0.5 * p) * std::expm1(0.5 * p * std::log1p(dt / t0));
    return std::pow(t0 + dt, 0.5 * p) - std::pow(t0, 0.5 * p);
}

}  // namespace

void Coefficients::check_solvable() const {
    require_same_grid(sigma.grid(), a.grid());
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("exponent p must be finite and > 1");
    if (!sigma.all_finite() || !a.all_finite()) throw InvalidArgument("coefficients must be finite");
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (sigma[i].imag() != 0.0 || a[i].imag() != 0.0)
            throw InvalidArgument("coefficients must be real");
        if (!(sigma[i].real() > 0.0)) throw NonPositiveSigma("sigma <= 0 at node " + std::to_string(i));
        if (a[i].real() < 0.0) throw InvalidArgument("a < 0 at node " + std::to_string(i));
    }
}

void Coefficients::validate() const {
    check_solvable();
    if (p == 2.0) throw InvalidArgument("p = 2 is excluded");
    if (!(lambda > 0.0 && lambda < 1.0)) throw InvalidArgument("lambda must lie in (0, 1)");
    if (!(m > 0.0)) throw InvalidArgument("m must be positive");
    const Grid& g = grid();
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const auto [i, j, k] = g.ijk(idx);
        const double s = sigma[idx].real();
        const double av = a[idx].real();
        if (g.in_closed_region(i, j, k)) {
            if (!(s > lambda && s < 1.0 / lambda))
                throw InvalidArgument("sigma outside (lambda, 1/lambda) at node " + std::to_string(idx));
            if (!(av < 1.0 / m)) throw InvalidArgument("a >= 1/m at node " + std::to_string(idx));
        } else {
            if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("sigma != 1 outside Omega_h");
            if (av != 0.0) throw InvalidArgument("a != 0 outside Omega_h");
        }
    }
}

// ---------------------------------------------------------------------------

LinearOperator::LinearOperator(const ScalarField& sigma)
    : mesh_(sigma.grid(), q1::Mesh::Extent::interior),
      sigma_q_(q1::real_values(mesh_, sigma)),
      interior_(interior_nodes(sigma.grid())),
      boundary_(boundary_nodes(sigma.grid())),
      dof_of_(sigma.grid().size(), -1) {
    for (double s : sigma_q_)
        if (!(s > 0.0)) throw NonPositiveSigma("sigma must be positive on Omega_h");
    {
        const double s0 = sigma[boundary_.front()].real();
        bool flat = true;
        for (std::size_t b : boundary_) flat = flat && sigma[b].real() == s0;
        for (std::size_t i : interior_) flat = flat && sigma[i].real() == s0;
        uniform_ = flat && is_power_of_two(sigma.grid().n());
        if (flat) std::fill(sigma_q_.begin(), sigma_q_.end(), s0);
    }
    // boundary columns are encoded as -(b + 2)
    for (std::size_t d = 0; d < interior_.size(); ++d) dof_of_[interior_[d]] = static_cast<int>(d);
    for (std::size_t b = 0; b < boundary_.size(); ++b) dof_of_[boundary_[b]] = -static_cast<int>(b) - 2;

    const double h = grid().h();
    const double w = mesh_.weight();
    std::vector<Eigen::Triplet<double>> tii, tib;
    tii.reserve(mesh_.cell_count() * 64);
    tib.reserve(mesh_.cell_count() * 16);
    for (std::size_t cell = 0; cell < mesh_.cell_count(); ++cell) {
        double ke[8][8] = {};
        for (int g = 0; g < 8; ++g) {
            const double s = sigma_q_[8 * cell + g] * w / (h * h);
            for (int a = 0; a < 8; ++a)
                for (int b = 0; b < 8; ++b) {
                    double v = 0.0;
                    for (int d = 0; d < 3; ++d) v += q1::Mesh::dshape(g, a, d) * q1::Mesh::dshape(g, b, d);
                    ke[a][b] += s * v;
                }
        }
        const auto& cn = mesh_.corners(cell);
        for (int a = 0; a < 8; ++a) {
            const int ra = dof_of_[cn[a]];
            if (ra < 0) continue;
            for (int b = 0; b < 8; ++b) {
                const int cb = dof_of_[cn[b]];
                if (cb >= 0)
                    tii.emplace_back(ra, cb, ke[a][b]);
                else
                    tib.emplace_back(ra, -cb - 2, ke[a][b]);
            }
        }
    }
    k_ii_.resize(static_cast<Eigen::Index>(interior_.size()), static_cast<Eigen::Index>(interior_.size()));
    k_ii_.setFromTriplets(tii.begin(), tii.end());
    k_ib_.resize(static_cast<Eigen::Index>(interior_.size()), static_cast<Eigen::Index>(boundary_.size()));
    k_ib_.setFromTriplets(tib.begin(), tib.end());

    if (uniform_) {
        const double s0 = sigma_q_.front();
        // K = s0 (A x M x M + M x A x M + M x M x A) with 1-D Q1 stiffness A and mass M
        const int m = grid().hi() - grid().lo() - 1;
        std::vector<double> a1(m), m1(m);
        for (int j = 0; j < m; ++j) {
            const double c = std::cos(std::numbers::pi * (j + 1) / (m + 1));
            a1[j] = 2.0 / h * (1.0 - c);
            m1[j] = h / 3.0 * (2.0 + c);
        }
        inv_eig_.resize(static_cast<std::size_t>(m) * m * m);
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i)
                    inv_eig_[i + m * (j + static_cast<std::size_t>(m) * k)] =
                        1.0 / (s0 * (a1[i] * m1[j] * m1[k] + m1[i] * a1[j] * m1[k] + m1[i] * m1[j] * a1[k]));
        return;
    }
    chol_.compute(k_ii_);
    if (chol_.info() != Eigen::Success) throw SingularOperator("stiffness factorization failed");
}

VectorXcd LinearOperator::sine_solve(const VectorXcd& rhs) const {
    const int m = grid().hi() - grid().lo() - 1;
    const int len = 2 * (m + 1);
    const double norm = 2.0 / (m + 1);
    VectorXcd x = rhs;
    std::vector<cplx> buf(len);
    // orthonormal DST-I along one axis via the odd extension; S^2 = I
    auto transform = [&](std::size_t stride, std::size_t s1, std::size_t s2) {
        for (int b = 0; b < m; ++b)
            for (int a = 0; a < m; ++a) {
                const std::size_t base = a * s1 + b * s2;
                buf[0] = 0.0;
                buf[m + 1] = 0.0;
                for (int t = 0; t < m; ++t) {
                    const cplx v = x[static_cast<Eigen::Index>(base + t * stride)];
                    buf[t + 1] = v;
                    buf[len - 1 - t] = -v;
                }
                fft1d(buf, -1);
                for (int t = 0; t < m; ++t)
                    x[static_cast<Eigen::Index>(base + t * stride)] = buf[t + 1] * cplx(0.0, 0.5 * std::sqrt(norm));
            }
    };
    const std::size_t mm = static_cast<std::size_t>(m);
    for (int pass = 0; pass < 2; ++pass) {
        transform(1, mm, mm * mm);
        transform(mm, 1, mm * mm);
        transform(mm * mm, 1, mm);
        if (pass == 0)
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] *= inv_eig_[static_cast<std::size_t>(i)];
    }
    return x;
}

VectorXcd LinearOperator::gather(std::span<const cplx> nodal) const {
    VectorXcd x(static_cast<Eigen::Index>(interior_.size()));
    for (std::size_t d = 0; d < interior_.size(); ++d) x[static_cast<Eigen::Index>(d)] = nodal[interior_[d]];
    return x;
}

void LinearOperator::scatter_into(const VectorXcd& x, std::span<cplx> nodal) const {
    for (std::size_t d = 0; d < interior_.size(); ++d) nodal[interior_[d]] = x[static_cast<Eigen::Index>(d)];
}

VectorXcd LinearOperator::apply(std::span<const cplx> nodal) const {
    VectorXcd xb(static_cast<Eigen::Index>(boundary_.size()));
    for (std::size_t b = 0; b < boundary_.size(); ++b) xb[static_cast<Eigen::Index>(b)] = nodal[boundary_[b]];
    return mul(k_ii_, gather(nodal)) + mul(k_ib_, xb);
}

VectorXcd LinearOperator::apply_interior(const VectorXcd& x) const { return mul(k_ii_, x); }

VectorXcd LinearOperator::solve(const VectorXcd& rhs) const {
    if (uniform_) return sine_solve(rhs);
    Eigen::MatrixXd b(rhs.size(), 2);
    b.col(0) = rhs.real();
    b.col(1) = rhs.imag();
    const Eigen::MatrixXd x = chol_.solve(b);
    VectorXcd out(rhs.size());
    out.real() = x.col(0);
    out.imag() = x.col(1);
    return out;
}

VectorXcd LinearOperator::load(const VectorField& F) const {
    require_same_grid(grid(), F.grid());
    const auto F_q = q1::vector_values(mesh_, F);
    const auto nodal = q1::scatter(mesh_, F_q);
    return gather(nodal);
}

ScalarField LinearOperator::solve_dirichlet(const BoundaryTrace& f, const VectorXcd& rhs) const {
    require_same_grid(grid(), f.grid());
    ScalarField u = f.to_field();
    VectorXcd xb(static_cast<Eigen::Index>(boundary_.size()));
    for (std::size_t b = 0; b < boundary_.size(); ++b) xb[static_cast<Eigen::Index>(b)] = f.values()[b];
    const VectorXcd x = solve(rhs - mul(k_ib_, xb));
    scatter_into(x, u.values());
    return u;
}

ScalarField LinearOperator::solve_dirichlet(const BoundaryTrace& f, const VectorField* F) const {
    VectorXcd rhs = F ? load(*F) : VectorXcd::Zero(static_cast<Eigen::Index>(interior_.size()));
    return solve_dirichlet(f, rhs);
}

ScalarField LinearOperator::div_sigma_grad(const ScalarField& w) const {
    require_same_grid(grid(), w.grid());
    const VectorXcd r = apply(w.values());
    ScalarField out(grid());
    const double ih3 = 1.0 / grid().cell_volume();
    for (std::size_t d = 0; d < interior_.size(); ++d) out[interior_[d]] = -r[static_cast<Eigen::Index>(d)] * ih3;
    return out;
}

ScalarField LinearOperator::green(const ScalarField& S) const {
    require_same_grid(grid(), S.grid());
    const VectorXcd x = solve(-grid().cell_volume() * gather(S.values()));
    ScalarField out(grid());
    scatter_into(x, out.values());
    return out;
}

// ---------------------------------------------------------------------------

ForwardOperator::ForwardOperator(const Coefficients& c)
    : ForwardOperator(c, nullptr) {}

ForwardOperator::ForwardOperator(const Coefficients& c, std::shared_ptr<const LinearOperator> linear)
    : c_(c), lin_(std::move(linear)) {
    c_.check_solvable();
    if (!lin_) lin_ = std::make_shared<const LinearOperator>(c_.sigma);
    require_same_grid(lin_->grid(), c_.grid());
    const q1::Mesh& mesh = lin_->mesh();
    a_q_ = q1::real_values(mesh, c_.a);
    for (std::size_t cell = 0; cell < mesh.cell_count(); ++cell) {
        bool any = false;
        for (int g = 0; g < 8; ++g) any = any || a_q_[8 * cell + g] > 0.0;
        if (any) active_.push_back(cell);
    }
    // W^{1,r} norm of an interior hat function, r = max(2, p)
    const double r = std::max(2.0, c_.p);
    const double h = c_.grid().h();
    double s = 0.0;
    for (int corner = 0; corner < 8; ++corner)
        for (int g = 0; g < 8; ++g) {
            double n2 = 0.0;
            for (int d = 0; d < 3; ++d) n2 += std::pow(q1::Mesh::dshape(g, corner, d) / h, 2);
            s += mesh.weight() * (std::pow(q1::Mesh::shape(g, corner), r) + std::pow(n2, 0.5 * r));
        }
    phi_norm_ = std::pow(s, 1.0 / r);
}

double ForwardOperator::energy(const ScalarField& v, const VectorField* F, double reg) const {
    require_same_grid(c_.grid(), v.grid());
    std::vector<CVec3> F_q;
    if (F) F_q = q1::vector_values(lin_->mesh(), *F);
    return quad_energy(lin_->mesh(), v.values(), lin_->sigma_q(), a_q_, c_.p, F_q, reg);
}

std::vector<CVec3> ForwardOperator::nonlinear_flux(const ScalarField& u) const {
    require_same_grid(c_.grid(), u.grid());
    const q1::Mesh& mesh = lin_->mesh();
    const Power pw{c_.p, 0.0, 0.0};
    std::vector<CVec3> out(8 * active_.size());
    for (std::size_t n = 0; n < active_.size(); ++n)
        for (int g = 0; g < 8; ++g) {
            const double aq = a_q_[8 * active_[n] + g];
            if (aq > 0.0) out[8 * n + g] = pw.flux(aq, q1::gradient_at(mesh, u.values(), active_[n], g));
        }
    return out;
}

VectorXcd ForwardOperator::nonlinear_load(const ScalarField& u) const {
    const q1::Mesh& mesh = lin_->mesh();
    const Power pw{c_.p, 0.0, 0.0};
    const double w = mesh.weight();
    const double ih = 1.0 / mesh.grid().h();
    std::vector<cplx> nodal(mesh.grid().size(), cplx{});
    for (std::size_t cell : active_) {
        const auto& cn = mesh.corners(cell);
        for (int g = 0; g < 8; ++g) {
            const double aq = a_q_[8 * cell + g];
            if (aq <= 0.0) continue;
            const CVec3 f = pw.flux(aq, q1::gradient_at(mesh, u.values(), cell, g));
            for (int a = 0; a < 8; ++a) {
                cplx acc = 0.0;
                for (int d = 0; d < 3; ++d) acc += f[d] * q1::Mesh::dshape(g, a, d);
                nodal[cn[a]] += w * ih * acc;
            }
        }
    }
    return lin_->gather(nodal);
}

VectorXcd ForwardOperator::residual(const ScalarField& u, const VectorXcd* f_load, double reg) const {
    const q1::Mesh& mesh = lin_->mesh();
    VectorXcd r = lin_->apply(u.values());
    if (f_load) r += *f_load;
    if (active_.empty()) return r;
    const double floor2 = c_.p < 2.0 ? std::pow(1e-14 * std::max(u.max_abs(), 1e-300) / c_.grid().length(), 2) : 0.0;
    const Power pw{c_.p, reg * reg, floor2};
    const double w = mesh.weight();
    const double ih = 1.0 / mesh.grid().h();
    std::vector<cplx> nodal(mesh.grid().size(), cplx{});
    for (std::size_t cell : active_) {
        const auto& cn = mesh.corners(cell);
        for (int g = 0; g < 8; ++g) {
            const double aq = a_q_[8 * cell + g];
            if (aq <= 0.0) continue;
            const CVec3 f = pw.flux(aq, q1::gradient_at(mesh, u.values(), cell, g));
            for (int a = 0; a < 8; ++a) {
                cplx acc = 0.0;
                for (int d = 0; d < 3; ++d) acc += f[d] * q1::Mesh::dshape(g, a, d);
                nodal[cn[a]] += w * ih * acc;
            }
        }
    }
    return r + lin_->gather(nodal);
}

double ForwardOperator::weak_residual(const VectorXcd& r) const {
    return r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff() / phi_norm_;
}

namespace {

// Gauss-point data for Hessian products at a fixed state.
struct Linearization {
    std::vector<CVec3> g;
    std::vector<double> rho;
    std::vector<double> curv;
};

}  // namespace

Solution ForwardOperator::solve_weak(const BoundaryTrace& f, const VectorField* F, const WeakSolveOptions& opt) const {
    require_same_grid(c_.grid(), f.grid());
    if (!(opt.tol > 0.0)) throw InvalidArgument("tol must be positive");
    const q1::Mesh& mesh = lin_->mesh();
    const std::size_t n = lin_->dofs();
    const double p = c_.p;

    VectorXcd f_load = VectorXcd::Zero(static_cast<Eigen::Index>(n));
    std::vector<CVec3> F_q;
    if (F) {
        require_same_grid(c_.grid(), F->grid());
        F_q = q1::vector_values(mesh, *F);
        f_load = lin_->gather(q1::scatter(mesh, F_q));
    }

    // start from the linear solution (or the caller's guess)
    ScalarField u = opt.initial ? *opt.initial : lin_->solve_dirichlet(f, VectorXcd(-f_load));
    {
        const ScalarField fb = f.to_field();
        for (std::size_t b : lin_->boundary()) u[b] = fb[b];
    }

    Solution out{u, {}};
    SolveReport& rep = out.report;
    auto E = [&](const ScalarField& v, double reg) {
        return quad_energy(mesh, v.values(), lin_->sigma_q(), a_q_, p, F_q, reg);
    };
    rep.energy_history.push_back(E(u, 0.0));

    if (active_.empty()) {
        out.u = u;
        const VectorXcd r = residual(u, &f_load);
        rep.weak_residual = weak_residual(r);
        rep.final_energy = rep.energy_history.back();
        rep.converged = rep.weak_residual <= opt.tol;
        if (!rep.converged) throw NonConvergence(0, rep.weak_residual);
        return out;
    }

    const double gscale = std::max(f.norm(2.0) > 0.0 ? u.max_abs() / c_.grid().length() : 0.0, 1e-300);
    std::vector<double> stages{0.0};
    if (p < 2.0) stages = {1e-8 * gscale, 1e-10 * gscale, 0.0};
    const double floor2 = p < 2.0 ? std::pow(1e-14 * gscale, 2) : 0.0;
    const double ih = 1.0 / mesh.grid().h();
    const double w = mesh.weight();

    std::vector<cplx> dn(mesh.grid().size(), cplx{});
    std::vector<cplx> acc(mesh.grid().size(), cplx{});
    std::vector<CVec3> dgs(active_.size() * 8);
    Linearization lz;
    lz.g.resize(active_.size() * 8);
    lz.rho.resize(active_.size() * 8);
    lz.curv.resize(active_.size() * 8);

    auto hess = [&](const VectorXcd& d) {
        VectorXcd y = lin_->apply_interior(d);
        std::fill(dn.begin(), dn.end(), cplx{});
        lin_->scatter_into(d, dn);
        std::fill(acc.begin(), acc.end(), cplx{});
        for (std::size_t ac = 0; ac < active_.size(); ++ac) {
            const std::size_t cell = active_[ac];
            const auto& cn = mesh.corners(cell);
            for (int g = 0; g < 8; ++g) {
                const std::size_t q = 8 * ac + g;
                const double aq = a_q_[8 * cell + g];
                if (aq <= 0.0) continue;
                const CVec3 dg = q1::gradient_at(mesh, dn, cell, g);
                const CVec3& g0 = lz.g[q];
                const double proj = (std::conj(g0[0]) * dg[0] + std::conj(g0[1]) * dg[1] + std::conj(g0[2]) * dg[2]).real();
                CVec3 fl;
                for (int e = 0; e < 3; ++e) fl[e] = w * aq * ih * (lz.rho[q] * dg[e] + lz.curv[q] * proj * g0[e]);
                for (int a = 0; a < 8; ++a) {
                    cplx s = 0.0;
                    for (int e = 0; e < 3; ++e) s += fl[e] * q1::Mesh::dshape(g, a, e);
                    acc[cn[a]] += s;
                }
            }
        }
        return VectorXcd(y + lin_->gather(acc));
    };

    int steps = 0;
    double wr = 0.0;
    for (std::size_t st = 0; st < stages.size(); ++st) {
        const double reg = stages[st];
        const bool last = st + 1 == stages.size();
        const Power pw{p, reg * reg, last ? floor2 : 0.0};
        const double stage_tol = last ? opt.tol : 100.0 * opt.tol;
        while (true) {
            VectorXcd r = residual(u, &f_load, reg);
            wr = weak_residual(r);
            if (wr <= stage_tol) break;
            if (steps >= opt.max_newton) break;
            ++steps;

            for (std::size_t ac = 0; ac < active_.size(); ++ac) {
                for (int g = 0; g < 8; ++g) {
                    const std::size_t q = 8 * ac + g;
                    lz.g[q] = q1::gradient_at(mesh, u.values(), active_[ac], g);
                    const double n2 = q1::norm2(lz.g[q]);
                    lz.rho[q] = pw.rho(n2);
                    lz.curv[q] = pw.curvature(n2);
                }
            }

            // preconditioned CG on H d = -r
            VectorXcd d = VectorXcd::Zero(r.size());
            VectorXcd res = -r;
            VectorXcd z = lin_->solve(res);
            VectorXcd dir = z;
            double rz = re_dot(res, z);
            const double rz0 = rz;
            for (int it = 0; it < 400 && rz > 1e-26 * rz0; ++it) {
                const VectorXcd hd = hess(dir);
                const double curv = re_dot(dir, hd);
                if (!(curv > 0.0)) break;
                const double alpha = rz / curv;
                d += alpha * dir;
                res -= alpha * hd;
                z = lin_->solve(res);
                const double rz1 = re_dot(res, z);
                dir = z + (rz1 / rz) * dir;
                rz = rz1;
            }
            if (d.squaredNorm() == 0.0) d = lin_->solve(-r);

            const double slope = re_dot(r, d);
            // exact quadratic part of the energy along u + alpha d, nonlinear part on active cells
            const VectorXcd r_lin = lin_->apply(u.values()) + f_load;
            const double d_lin = re_dot(d, r_lin);
            const double d_quad = re_dot(d, lin_->apply_interior(d));
            std::fill(dn.begin(), dn.end(), cplx{});
            lin_->scatter_into(d, dn);
            for (std::size_t ac = 0; ac < active_.size(); ++ac)
                for (int g = 0; g < 8; ++g) dgs[8 * ac + g] = q1::gradient_at(mesh, dn, active_[ac], g);
            auto delta_energy = [&](double al) {
                double e = al * d_lin + 0.5 * al * al * d_quad;
                for (std::size_t ac = 0; ac < active_.size(); ++ac)
                    for (int g = 0; g < 8; ++g) {
                        const std::size_t q = 8 * ac + g;
                        const double aq = a_q_[8 * active_[ac] + g];
                        if (aq <= 0.0) continue;
                        const CVec3& g0 = lz.g[q];
                        const CVec3& dg = dgs[q];
                        double dt = 0.0;
                        for (int k = 0; k < 3; ++k) dt += (std::conj(al * dg[k]) * (2.0 * g0[k] + al * dg[k])).real();
                        e += w * aq / p * pow_diff(reg * reg + q1::norm2(g0), dt, p);
                    }
                return e;
            };
            const VectorXcd x0 = lin_->gather(u.values());
            ScalarField trial = u;
            double alpha = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 40; ++ls) {
                lin_->scatter_into(x0 + alpha * d, trial.values());
                const double de = delta_energy(alpha);
                if (de <= 1e-4 * alpha * slope) {
                    accepted = true;
                } else {
                    // energy change lost in roundoff: along a convex line, a nonpositive
                    // derivative at the trial point still certifies descent
                    const VectorXcd rt = residual(trial, &f_load, reg);
                    accepted = re_dot(rt, d) <= 0.0 && weak_residual(rt) < wr;
                }
                if (accepted) {
                    u = trial;
                    if (reg == 0.0) rep.energy_history.push_back(rep.energy_history.back() + std::min(de, 0.0));
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) break;
        }
    }

    rep.iterations = steps;
    rep.weak_residual = wr;
    rep.final_energy = E(u, 0.0);
    rep.converged = wr <= opt.tol;
    out.u = u;
    if (!rep.converged) throw NonConvergence(steps, wr);
    return out;
}

ScalarField ForwardOperator::contraction_step(const ScalarField& v, const ScalarField& v_f) const {
    require_same_grid(c_.grid(), v.grid());
    require_same_grid(c_.grid(), v_f.grid());
    const ScalarField w = v_f + v;
    const VectorXcd x = lin_->solve(-nonlinear_load(w));
    ScalarField out(c_.grid());
    lin_->scatter_into(x, out.values());
    return out;
}

Solution ForwardOperator::solve_strong(const BoundaryTrace& f, const VectorField* F, double tol, int max_iter) const {
    require_same_grid(c_.grid(), f.grid());
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
    const std::size_t n = lin_->dofs();
    VectorXcd f_load = VectorXcd::Zero(static_cast<Eigen::Index>(n));
    if (F) f_load = lin_->load(*F);
    const ScalarField v_f = lin_->solve_dirichlet(f, VectorXcd(-f_load));
    const auto mask = region_mask(c_.grid(), Region::closed_interior);
    const double s = std::min(std::abs(c_.p - 2.0), 1.0) / 4.0;

    ScalarField v(c_.grid());
    double prev = 0.0;
    double kappa = 0.0;
    double worst = 0.0;
    int expanding = 0;
    int it = 0;
    bool converged = false;
    while (it < max_iter) {
        ++it;
        ScalarField next = contraction_step(v, v_f);
        const double d = l2_norm(next - v, mask);
        if (!std::isfinite(d)) throw NotContracting(it, std::numeric_limits<double>::infinity());
        const double scale = l2_norm(v_f, mask) + l2_norm(next, mask);
        v = std::move(next);
        if (d <= tol || d <= 1e-14 * scale) {
            converged = true;
            break;
        }
        if (it > 1 && prev > 0.0) {
            kappa = std::pow(d / prev, s);
            if (d > 1e-12 * scale) {
                worst = std::max(worst, kappa);
                expanding = kappa > 1.0 ? expanding + 1 : 0;
                if (expanding >= 3) throw NotContracting(it, kappa);
            }
        }
        prev = d;
    }

    Solution out{v_f + v, {}};
    out.report.iterations = it;
    out.report.converged = converged;
    out.report.contraction_ratio = worst > 0.0 ? worst : kappa;
    out.report.final_energy = energy(out.u, F);
    out.report.weak_residual = weak_residual(residual(out.u, &f_load));
    out.report.energy_history.push_back(out.report.final_energy);
    if (!converged) throw NonConvergence(it, prev);
    return out;
}

cplx ForwardOperator::linear_pairing(const ScalarField& u, const ScalarField& w) const {
    const q1::Mesh& mesh = lin_->mesh();
    const auto& sq = lin_->sigma_q();
    cplx acc = 0.0;
    for (std::size_t cell = 0; cell < mesh.cell_count(); ++cell)
        for (int g = 0; g < 8; ++g) {
            const CVec3 gu = q1::gradient_at(mesh, u.values(), cell, g);
            const CVec3 gw = q1::gradient_at(mesh, w.values(), cell, g);
            acc += sq[8 * cell + g] * (gu[0] * std::conj(gw[0]) + gu[1] * std::conj(gw[1]) + gu[2] * std::conj(gw[2]));
        }
    return mesh.weight() * acc;
}

cplx ForwardOperator::pairing(const ScalarField& u, const ScalarField& w) const {
    require_same_grid(c_.grid(), u.grid());
    require_same_grid(c_.grid(), w.grid());
    const q1::Mesh& mesh = lin_->mesh();
    const Power pw{c_.p, 0.0, 0.0};
    cplx acc = 0.0;
    for (std::size_t cell : active_)
        for (int g = 0; g < 8; ++g) {
            const double aq = a_q_[8 * cell + g];
            if (aq <= 0.0) continue;
            const CVec3 gu = q1::gradient_at(mesh, u.values(), cell, g);
            const double n2 = q1::norm2(gu);
            if (n2 == 0.0) continue;
            const CVec3 gw = q1::gradient_at(mesh, w.values(), cell, g);
            acc += aq * pw.rho(n2) * (gu[0] * std::conj(gw[0]) + gu[1] * std::conj(gw[1]) + gu[2] * std::conj(gw[2]));
        }
    return linear_pairing(u, w) + mesh.weight() * acc;
}

// ---------------------------------------------------------------------------

double energy(const ScalarField& v, const Coefficients& c, const VectorField& F, q1::Mesh::Extent extent) {
    require_same_grid(v.grid(), c.grid());
    require_same_grid(v.grid(), F.grid());
    const q1::Mesh mesh(v.grid(), extent);
    const auto sq = q1::real_values(mesh, c.sigma);
    const auto aq = q1::real_values(mesh, c.a);
    const auto Fq = q1::vector_values(mesh, F);
    return quad_energy(mesh, v.values(), sq, aq, c.p, Fq, 0.0);
}

Solution solve_weak(const Coefficients& c, const BoundaryTrace& f, const VectorField& F, double tol) {
    WeakSolveOptions opt;
    opt.tol = tol;
    return ForwardOperator(c).solve_weak(f, &F, opt);
}

ScalarField solve_linear(const ScalarField& sigma, const BoundaryTrace& f, const VectorField& F) {
    return LinearOperator(sigma).solve_dirichlet(f, &F);
}

ScalarField green_sigma(const ScalarField& sigma, const ScalarField& S) {
    return LinearOperator(sigma).green(S);
}

ScalarField contraction_step(const ScalarField& v, const Coefficients& c, const ScalarField& v_f) {
    return ForwardOperator(c).contraction_step(v, v_f);
}

Solution solve_strong(const Coefficients& c, const BoundaryTrace& f, const VectorField& F, double tol) {
    return ForwardOperator(c).solve_strong(f, &F, tol);
}

double relative_l2(const ScalarField& u, const ScalarField& ref) {
    const auto mask = region_mask(u.grid(), Region::closed_interior);
    const double den = l2_norm(ref, mask);
    const double num = l2_norm(u - ref, mask);
    return den > 0.0 ? num / den : num;
}

}  // namespace pqi

#include "pqi/polarize.hpp"

#include <algorithm>
#include <cmath>

#include "pqi/asympt.hpp"
#include "pqi/errors.hpp"

namespace pqi {

namespace {

double max_norm(const std::vector<CVec3>& g) {
    double m = 0.0;
    for (const auto& v : g) m = std::max(m, q1::norm2(v));
    return std::sqrt(m);
}

CVec3 conj3(const CVec3& v) { return {std::conj(v[0]), std::conj(v[1]), std::conj(v[2])}; }

}  // namespace

Quadrature Quadrature::nodal(const Coefficients& c) {
    Quadrature q(c.grid());
    q.kind_ = Kind::nodal;
    q.p_ = c.p;
    q.weight_ = c.grid().cell_volume();
    for (std::size_t i = 0; i < c.a.size(); ++i)
        if (c.a[i].real() > 0.0) {
            q.node_.push_back(i);
            q.a_.push_back(c.a[i].real());
        }
    return q;
}

Quadrature Quadrature::q1(const Coefficients& c) {
    Quadrature q(c.grid());
    q.kind_ = Kind::q1;
    q.p_ = c.p;
    auto mesh = std::make_shared<q1::Mesh>(c.grid(), q1::Mesh::Extent::interior);
    q.weight_ = mesh->weight();
    const auto aq = q1::real_values(*mesh, c.a);
    for (std::size_t cell = 0; cell < mesh->cell_count(); ++cell)
        for (int g = 0; g < 8; ++g)
            if (aq[8 * cell + g] > 0.0) {
                q.gp_.emplace_back(cell, g);
                q.a_.push_back(aq[8 * cell + g]);
            }
    q.mesh_ = std::move(mesh);
    return q;
}

Vec3 Quadrature::point(std::size_t i) const {
    if (kind_ == Kind::nodal) return grid_.position(node_[i]);
    return mesh_->point(gp_[i].first, gp_[i].second);
}

std::vector<CVec3> Quadrature::sample(const ScalarField& u) const {
    require_same_grid(grid_, u.grid());
    std::vector<CVec3> out(size());
    if (kind_ == Kind::nodal) {
        const double inv2h = 0.5 / grid_.h();
        for (std::size_t n = 0; n < node_.size(); ++n) {
            const auto [i, j, k] = grid_.ijk(node_[n]);
            out[n] = {(u.at(i + 1, j, k) - u.at(i - 1, j, k)) * inv2h, (u.at(i, j + 1, k) - u.at(i, j - 1, k)) * inv2h,
                      (u.at(i, j, k + 1) - u.at(i, j, k - 1)) * inv2h};
        }
    } else {
        for (std::size_t n = 0; n < gp_.size(); ++n)
            out[n] = q1::gradient_at(*mesh_, u.values(), gp_[n].first, gp_[n].second);
    }
    return out;
}

std::vector<CVec3> Quadrature::sample(const VectorField& grad) const {
    require_same_grid(grid_, grad.grid());
    std::vector<CVec3> out(size());
    if (kind_ == Kind::nodal) {
        for (std::size_t n = 0; n < node_.size(); ++n) out[n] = grad.at(node_[n]);
    } else {
        for (std::size_t n = 0; n < gp_.size(); ++n) {
            const auto& cn = mesh_->corners(gp_[n].first);
            CVec3 v{};
            for (int c = 0; c < 8; ++c) {
                const double s = q1::Mesh::shape(gp_[n].second, c);
                for (int d = 0; d < 3; ++d) v[d] += s * grad[d][cn[c]];
            }
            out[n] = v;
        }
    }
    return out;
}

void HarmonicTriple::validate(const LinearOperator* op, double tol) const {
    require_same_grid(u1.grid(), u2.grid());
    require_same_grid(u1.grid(), u3.grid());
    if (!u1.all_finite() || !u2.all_finite() || !u3.all_finite())
        throw InvalidArgument("HarmonicTriple: non-finite values");
    if (u1.max_abs_imag() != 0.0) throw InvalidArgument("HarmonicTriple: u1 must be real");
    if (op == nullptr) return;
    for (const ScalarField* u : {&u1, &u2, &u3})
        if (harmonic_residual(*op, *u) >= tol)
            throw InvalidArgument("HarmonicTriple: field is not sigma-harmonic (residual " +
                                  std::to_string(harmonic_residual(*op, *u)) + ")");
}

double harmonic_residual(const LinearOperator& op, const ScalarField& u) {
    const double umax = u.max_abs();
    if (umax == 0.0) return 0.0;
    const auto r = op.apply(u.values());
    double smax = 0.0;
    for (double s : op.sigma_q()) smax = std::max(smax, s);
    return r.cwiseAbs().maxCoeff() / (smax * u.grid().h() * umax);
}

TripleGradients TripleGradients::of(const Quadrature& q, const HarmonicTriple& t) {
    t.validate();
    return {q.sample(t.u1), q.sample(t.u2), q.sample(t.u3)};
}

TripleGradients TripleGradients::of(const Quadrature& q, const VectorField& g1, const VectorField& g2,
                                    const VectorField& g3) {
    for (int d = 0; d < 3; ++d)
        if (g1[d].max_abs_imag() != 0.0) throw InvalidArgument("TripleGradients: grad u1 must be real");
    return {q.sample(g1), q.sample(g2), q.sample(g3)};
}

Beta beta_of(const Coefficients& c, const ScalarField& u1, std::string u1_ref) {
    require_same_grid(c.grid(), u1.grid());
    const VectorField g = gradient(u1);
    ScalarField beta(c.grid());
    for (std::size_t i = 0; i < beta.size(); ++i) {
        const double a = c.a[i].real();
        if (a <= 0.0) continue;
        const double n2 = q1::norm2(g.at(i));
        if (n2 == 0.0) throw GradientVanishes("beta_of: grad u1 vanishes on supp a");
        beta[i] = a * std::pow(n2, 0.5 * (c.p - 2.0));
    }
    return {std::move(beta), std::move(u1_ref)};
}

cplx I_oracle(const Quadrature& q, const std::vector<CVec3>& g0, const std::vector<CVec3>& gw) {
    if (g0.size() != q.size() || gw.size() != q.size()) throw InvalidArgument("I_oracle: sample count mismatch");
    const double e = 0.5 * (q.p() - 2.0);
    cplx acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double n2 = q1::norm2(g0[i]);
        if (n2 == 0.0) continue;
        acc += q.a()[i] * std::pow(n2, e) * q1::dot(g0[i], gw[i]);
    }
    return q.weight() * acc;
}

cplx I_oracle(const Coefficients& c, const ScalarField& u0, const ScalarField& w) {
    const Quadrature q = Quadrature::q1(c);
    return I_oracle(q, q.sample(u0), q.sample(w));
}

Wirtinger wirtinger(const std::function<cplx(cplx)>& f, double step) {
    if (!(step > 0.0)) throw InvalidArgument("wirtinger: step must be positive");
    const cplx i{0.0, 1.0};
    const cplx fx = (f(step) - f(-step)) / (2.0 * step);
    const cplx fy = (f(i * step) - f(-i * step)) / (2.0 * step);
    return {0.5 * (fx - i * fy), 0.5 * (fx + i * fy)};
}

double default_step(const TripleGradients& t) {
    const double m2 = max_norm(t.g2);
    if (m2 == 0.0) return 1e-3;
    return 1e-3 * max_norm(t.g1) / m2;
}

void check_gradient_floor(const TripleGradients& t, double floor) {
    const double lim = std::max(floor, 1e-12 * max_norm(t.g1));
    for (const auto& g : t.g1)
        if (std::sqrt(q1::norm2(g)) <= lim) throw GradientVanishes("grad u1 vanishes on supp a");
}

PolarProbe oracle_probe(const Quadrature& q, const TripleGradients& t) {
    check_gradient_floor(t);
    const double floor = 1e-12 * max_norm(t.g1);
    return [&q, &t, floor](cplx z, bool conj_u2) {
        std::vector<CVec3> g(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            const CVec3 v = conj_u2 ? conj3(t.g2[i]) : t.g2[i];
            for (int d = 0; d < 3; ++d) g[i][d] = t.g1[i][d] + z * v[d];
            if (std::sqrt(q1::norm2(g[i])) <= floor) throw GradientVanishes("probe gradient vanishes on supp a");
        }
        return I_oracle(q, g, t.g3);
    };
}

PolarProbe boundary_probe(const ForwardOperator& op, const HarmonicTriple& t, std::vector<double> epsilons,
                          double tol) {
    t.validate();
    const double p = op.coefficients().p;
    const Regime regime = p > 2.0 ? Regime::super : Regime::sub;
    if (epsilons.empty()) epsilons = default_epsilons(regime);
    // the pairing conjugates its test function
    const ScalarField w = t.u3.conj();
    const ScalarField u1 = t.u1;
    const ScalarField u2 = t.u2;
    const ScalarField u2c = t.u2.conj();
    return [&op, w, u1, u2, u2c, epsilons, regime, tol, p](cplx z, bool conj_u2) {
        ScalarField data = u1;
        const ScalarField& v = conj_u2 ? u2c : u2;
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += z * v[i];
        const auto sw = sweep(op, BoundaryTrace::of(data), w, epsilons, regime, tol);
        const auto A = extract_linear(sw, p);
        return extract_I(sw, A.value, p).value;
    };
}

namespace {

Polarization polarize_at(const PolarProbe& probe, double p, double step) {
    const Wirtinger bar = wirtinger([&](cplx z) { return probe(z, true); }, step);
    const Wirtinger hol = wirtinger([&](cplx z) { return probe(z, false); }, step);
    Polarization out;
    out.I3 = 2.0 / (p - 2.0) * bar.d_zbar;
    out.J3 = 2.0 / (p - 2.0) * hol.d_z;
    // ((p-2)/2)(J3 - I3) without the round trip through 2/(p-2)
    out.K = hol.d_z - bar.d_zbar;
    out.step = step;
    return out;
}

}  // namespace

Polarization polarize(const PolarProbe& probe, double p, double step, bool estimate_error) {
    if (!(p > 1.0) || p == 2.0) throw InvalidArgument("polarize: p must lie in (1, inf) \\ {2}");
    Polarization out = polarize_at(probe, p, step);
    if (estimate_error) {
        const Polarization half = polarize_at(probe, p, 0.5 * step);
        out.error_estimate = std::abs(out.K - half.K) * 4.0 / 3.0;
    }
    return out;
}

Polarization polarize(const Quadrature& q, const TripleGradients& t, double step, bool estimate_error) {
    if (step <= 0.0) step = default_step(t);
    return polarize(oracle_probe(q, t), q.p(), step, estimate_error);
}

cplx I3_direct(const Quadrature& q, const TripleGradients& t) {
    const double e = 0.5 * (q.p() - 4.0);
    cplx acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double n2 = q1::norm2(t.g1[i]);
        if (n2 == 0.0) continue;
        acc += q.a()[i] * std::pow(n2, e) * q1::dot(t.g1[i], t.g2[i]) * q1::dot(t.g1[i], t.g3[i]);
    }
    return q.weight() * acc;
}

cplx J3_direct(const Quadrature& q, const TripleGradients& t) {
    const double e = 0.5 * (q.p() - 4.0);
    const double c = 2.0 / (q.p() - 2.0);
    cplx acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double n2 = q1::norm2(t.g1[i]);
        if (n2 == 0.0) continue;
        acc += q.a()[i] * std::pow(n2, e) *
               (q1::dot(conj3(t.g1[i]), t.g2[i]) * q1::dot(t.g1[i], t.g3[i]) + c * n2 * q1::dot(t.g2[i], t.g3[i]));
    }
    return q.weight() * acc;
}

cplx K_direct(const Quadrature& q, const TripleGradients& t) {
    const double e = 0.5 * (q.p() - 2.0);
    cplx acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double n2 = q1::norm2(t.g1[i]);
        if (n2 == 0.0) continue;
        acc += q.a()[i] * std::pow(n2, e) * q1::dot(t.g2[i], t.g3[i]);
    }
    return q.weight() * acc;
}

}  // namespace pqi

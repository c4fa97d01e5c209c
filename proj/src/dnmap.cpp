#include "pqi/dnmap.hpp"

namespace pqi {

std::vector<DnPairing> dn_pair_many(const ForwardOperator& op, const BoundaryTrace& f,
                                    std::span<const ScalarField> ws, double tol,
                                    ScalarField* u_out, const ScalarField* initial) {
    const double p = op.coefficients().p;
    WeakSolveOptions opt;
    opt.tol = tol;
    opt.initial = initial;
    const Solution sol = op.solve_weak(f, nullptr, opt);
    std::vector<DnPairing> out;
    out.reserve(ws.size());
    const double fn = f.norm(p);
    for (const ScalarField& w : ws) out.push_back({op.pairing(sol.u, w), fn, BoundaryTrace::of(w).norm(p)});
    if (u_out) *u_out = sol.u;
    return out;
}

DnPairing dn_pair(const ForwardOperator& op, const BoundaryTrace& f, const ScalarField& w, double tol) {
    return dn_pair_many(op, f, std::span<const ScalarField>(&w, 1), tol).front();
}

DnPairing dn_pair(const Coefficients& c, const BoundaryTrace& f, const ScalarField& w, double tol) {
    return dn_pair(ForwardOperator(c), f, w, tol);
}

cplx dn_linear_pair(const ScalarField& sigma, const BoundaryTrace& f, const ScalarField& w) {
    const Coefficients c{sigma, ScalarField(sigma.grid()), 3.0, 0.5, 0.1};
    const ForwardOperator op(c);
    const ScalarField u0 = op.linear().solve_dirichlet(f, static_cast<const VectorField*>(nullptr));
    return op.linear_pairing(u0, w);
}

}  // namespace pqi

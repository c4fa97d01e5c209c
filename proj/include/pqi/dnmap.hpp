#pragma once

#include <span>
#include <vector>

#include "pqi/forward.hpp"

namespace pqi {

/// Volume form of the Dirichlet-to-Neumann pairing <Lambda f, w|boundary>.
struct DnPairing {
    cplx value;
    double f_norm = 0.0;
    double w_norm = 0.0;
};

/// h^3-quadrature of (sigma + a|grad u|^(p-2)) grad u . conj(grad w) over Omega_h,
/// u the weak solution with Dirichlet data f and no source.
DnPairing dn_pair(const Coefficients& c, const BoundaryTrace& f, const ScalarField& w, double tol);
DnPairing dn_pair(const ForwardOperator& op, const BoundaryTrace& f, const ScalarField& w, double tol);

/// One forward solve, several test fields. The solution is written to *u_out if given.
std::vector<DnPairing> dn_pair_many(const ForwardOperator& op, const BoundaryTrace& f,
                                    std::span<const ScalarField> ws, double tol,
                                    ScalarField* u_out = nullptr, const ScalarField* initial = nullptr);

/// Linear DN pairing: integral of sigma grad u0 . conj(grad w) with u0 sigma-harmonic, u0 = f.
cplx dn_linear_pair(const ScalarField& sigma, const BoundaryTrace& f, const ScalarField& w);

}  // namespace pqi

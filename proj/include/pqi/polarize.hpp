#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pqi/field.hpp"
#include "pqi/forward.hpp"
#include "pqi/q1.hpp"

namespace pqi {

/// Points, weights and a-values for the nonlinear integrals. Only points
/// with a > 0 are kept.
///
/// nodal: every grid node, weight h^3 (a lattice sum, used with analytic
/// gradients). q1: Gauss points of the Omega_h cells, the rule of the
/// forward solver, so boundary-mode values are reproduced.
class Quadrature {
public:
    enum class Kind { nodal, q1 };

    static Quadrature nodal(const Coefficients& c);
    static Quadrature q1(const Coefficients& c);

    Kind kind() const noexcept { return kind_; }
    const Grid& grid() const noexcept { return grid_; }
    double p() const noexcept { return p_; }
    double weight() const noexcept { return weight_; }
    std::size_t size() const noexcept { return a_.size(); }
    const std::vector<double>& a() const noexcept { return a_; }
    Vec3 point(std::size_t i) const;

    /// Gradient of a nodal field at the points (central differences for
    /// nodal, element gradients for q1).
    std::vector<CVec3> sample(const ScalarField& u) const;
    /// A given gradient field at the points (interpolated for q1).
    std::vector<CVec3> sample(const VectorField& grad) const;

private:
    Quadrature(const Grid& grid) : grid_(grid) {}

    Grid grid_;
    Kind kind_ = Kind::nodal;
    double p_ = 3.0;
    double weight_ = 0.0;
    std::vector<double> a_;
    std::vector<std::size_t> node_;                 // nodal
    std::shared_ptr<const q1::Mesh> mesh_;          // q1
    std::vector<std::pair<std::size_t, int>> gp_;  // q1: (cell, gauss point)
};

struct HarmonicTriple {
    ScalarField u1;
    ScalarField u2;
    ScalarField u3;

    /// Same grid, finite values, u1 real. With an operator, also the
    /// sigma-harmonic residual of each field against tol.
    void validate(const LinearOperator* op = nullptr, double tol = 1e-9) const;
};

/// max |K u| over interior rows, relative to max(sigma) * h * max|u|.
double harmonic_residual(const LinearOperator& op, const ScalarField& u);

/// Gradients of a triple sampled on a quadrature.
struct TripleGradients {
    std::vector<CVec3> g1, g2, g3;

    static TripleGradients of(const Quadrature& q, const HarmonicTriple& t);
    static TripleGradients of(const Quadrature& q, const VectorField& g1, const VectorField& g2,
                              const VectorField& g3);
};

struct Beta {
    ScalarField values;
    std::string u1_ref;
};

/// beta = a |grad u1|^(p-2) at the nodes (central-difference gradient).
Beta beta_of(const Coefficients& c, const ScalarField& u1, std::string u1_ref = "u1");

/// sum w a |g0|^(p-2) g0 . gw, bilinear in gw.
cplx I_oracle(const Quadrature& q, const std::vector<CVec3>& g0, const std::vector<CVec3>& gw);
/// Same integral on the forward solver's rule.
cplx I_oracle(const Coefficients& c, const ScalarField& u0, const ScalarField& w);

struct Wirtinger {
    cplx d_z;
    cplx d_zbar;
};

/// Four-point central differences at z = 0.
Wirtinger wirtinger(const std::function<cplx(cplx)>& f, double step);

/// z -> I(u1 + z v, u3) with v = conj(u2) when conj_u2, else v = u2.
using PolarProbe = std::function<cplx(cplx z, bool conj_u2)>;

/// q and t must outlive the probe.
PolarProbe oracle_probe(const Quadrature& q, const TripleGradients& t);
/// Every evaluation is an asymptotic extraction from DN pairings.
PolarProbe boundary_probe(const ForwardOperator& op, const HarmonicTriple& t, std::vector<double> epsilons = {},
                          double tol = 1e-12);

struct Polarization {
    cplx I3;
    cplx J3;
    cplx K;
    double step = 0.0;
    /// |K(step) - K(step/2)| * 4/3 when requested, else 0.
    double error_estimate = 0.0;
};

/// I3 = (2/(p-2)) d_zbar I(u1 + z conj(u2), u3), J3 = (2/(p-2)) d_z I(u1 + z u2, u3),
/// K = ((p-2)/2)(J3 - I3). Throws GradientVanishes when grad u1 vanishes on
/// supp a.
Polarization polarize(const PolarProbe& probe, double p, double step, bool estimate_error = false);
Polarization polarize(const Quadrature& q, const TripleGradients& t, double step = 0.0,
                      bool estimate_error = false);

/// 1e-3 max|g1| / max|g2| over the points.
double default_step(const TripleGradients& t);
/// Throws GradientVanishes if |g1| = 0 at a point.
void check_gradient_floor(const TripleGradients& t, double floor = 0.0);

cplx I3_direct(const Quadrature& q, const TripleGradients& t);
cplx J3_direct(const Quadrature& q, const TripleGradients& t);
cplx K_direct(const Quadrature& q, const TripleGradients& t);

}  // namespace pqi

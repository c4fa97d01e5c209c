#pragma once

#include <cstddef>

#include "pqi/field.hpp"

namespace pqi {

/// zeta2 = tau mu - i(xi/2 + s eta), zeta3 = -tau mu - i(xi/2 - s eta),
/// tau^2 = |xi|^2/4 + s^2.
struct CgoParams {
    Vec3 xi{};
    Vec3 eta{};
    Vec3 mu{};
    double s = 0.0;
    double tau = 0.0;
    CVec3 zeta2{};
    CVec3 zeta3{};

    /// Orthogonality to 1e-14, null vectors and zeta2 + zeta3 = -i xi to 1e-12
    /// (relative to |zeta|^2 and |xi|).
    void validate() const;
};

/// eta = normalize(e_k x xi) with k the axis of smallest |xi_k|, mu = normalize(xi x eta).
CgoParams make_cgo_params(const Vec3& xi, double s);

/// First-order coefficient of the equation for r:
/// stated:   Delta r + zeta . grad r - V r = V
/// harmonic: Delta r + 2 zeta . grad r - V r = V, for which
///           exp(zeta . x) sigma^(-1/2) (1 + r) is sigma-harmonic.
enum class CgoEquation { stated, harmonic };

/// Delta_h(sqrt sigma) / sqrt sigma with the 7-point Laplacian.
ScalarField potential_V(const ScalarField& sigma);

struct RSolve {
    ScalarField r;
    int iterations = 0;
    /// Equation residual on resolved modes, relative to ||V||_2.
    double residual = 0.0;
    std::size_t excluded_modes = 0;
    /// Share of ||V(1 + r)||^2 on excluded modes.
    double excluded_mass = 0.0;
};

/// Born iteration r <- M[V(1 + r)] with M the lattice Fourier multiplier of
/// the inverse symbol. Modes with |symbol| < 1e-6 |zeta|^2 are zeroed.
RSolve solve_r(const ScalarField& V, const CVec3& zeta, double tol = 1e-8, CgoEquation eq = CgoEquation::stated,
               int max_iter = 500);

struct CgoSolution {
    CVec3 zeta{};
    Vec3 origin{};
    ScalarField r;
    /// exp(zeta . (x - origin)) sigma^(-1/2) (1 + r).
    ScalarField u;
    /// grad u = exp(zeta . (x - origin)) * grad_factor.
    VectorField grad_factor;
    double residual = 0.0;
    int iterations = 0;
    std::size_t excluded_modes = 0;
    double excluded_mass = 0.0;
    /// ||div(sigma grad u)||_2 over the open Omega_h, with r and with r = 0.
    double harmonic_residual = 0.0;
    double harmonic_residual_r0 = 0.0;
};

/// origin defaults to the box center, which keeps |u| within range for large zeta.
CgoSolution cgo_solution(const ScalarField& sigma, const CVec3& zeta, double tol = 1e-8,
                         CgoEquation eq = CgoEquation::stated);
CgoSolution cgo_solution(const ScalarField& sigma, const CVec3& zeta, double tol, CgoEquation eq, const Vec3& origin);

/// Reuses V and grad sigma^(-1/2) across many zeta.
class CgoBuilder {
public:
    explicit CgoBuilder(const ScalarField& sigma, CgoEquation eq = CgoEquation::stated, double tol = 1e-8);

    CgoSolution solve(const CVec3& zeta) const;
    CgoSolution solve(const CVec3& zeta, const Vec3& origin) const;

    const ScalarField& sigma() const noexcept { return sigma_; }
    const ScalarField& V() const noexcept { return V_; }
    /// When off, harmonic_residual and harmonic_residual_r0 are left at 0.
    void set_diagnostics(bool on) noexcept { diagnostics_ = on; }

private:
    ScalarField sigma_;
    ScalarField V_;
    ScalarField isq_;
    VectorField d_isq_;
    CgoEquation eq_;
    double tol_;
    bool flat_ = false;
    bool diagnostics_ = true;
};

/// Flux-form div(sigma grad u) with geometric-mean face coefficients.
ScalarField div_sigma_grad7(const ScalarField& sigma, const ScalarField& u);

struct GradientProduct {
    ScalarField lhs;
    ScalarField rhs;
    /// max over Omega_h of |lhs - rhs|.
    double deviation = 0.0;
};

/// lhs = grad u2 . grad u3 (uncentered, exp(-i xi . x) G2 . G3); rhs = the
/// leading-order expansion
/// exp(-i xi . x)[-|xi|^2/(2 sigma) + i sigma^(-3/2) xi . grad sqrt(sigma)
///                + sigma^-2 |grad sqrt(sigma)|^2 - 2 V / sigma].
GradientProduct gradient_product_expansion(const ScalarField& sigma, const CgoParams& params, const CgoSolution& u2,
                                           const CgoSolution& u3);

}  // namespace pqi

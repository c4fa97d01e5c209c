#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pqi/forward.hpp"

namespace pqi {

/// super: p > 2 with data eps*f; sub: 1 < p < 2 with data f/eps.
enum class Regime { super, sub };
std::string to_string(Regime r);

struct EpsSweep {
    std::vector<double> epsilons;
    std::vector<cplx> pairings;
    Regime regime = Regime::super;

    /// Multiplier applied to f at sweep point i.
    double data_scale(std::size_t i) const { return regime == Regime::super ? epsilons[i] : 1.0 / epsilons[i]; }
    void validate() const;
};

struct SweepFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

struct Extrapolated {
    cplx value;
    double error = 0.0;
};

/// Default eps = 2^-k: k = 4..10 (super), k = 1..5 (sub).
std::vector<double> default_epsilons(Regime r);

/// Pairings of the solutions with data scale(eps_i) f against every test field.
///
/// tol is relative: each solve stops at weak residual tol * scale(eps_i).
/// Requires scale(eps_i) * ||f|| >= 1e3 * tol.
std::vector<EpsSweep> sweep_many(const ForwardOperator& op, const BoundaryTrace& f,
                                 std::span<const ScalarField> ws, const std::vector<double>& epsilons,
                                 Regime regime, double tol = 1e-12);
EpsSweep sweep(const ForwardOperator& op, const BoundaryTrace& f, const ScalarField& w,
               const std::vector<double>& epsilons, Regime regime, double tol = 1e-12);
/// Regime chosen from c.p.
EpsSweep sweep(const Coefficients& c, const BoundaryTrace& f, const ScalarField& w,
               const std::vector<double>& epsilons, double tol = 1e-12);

/// Neville extrapolation to s = 0 of values sampled at decreasing s, with polynomial degree <= order.
/// Throws IllConditionedFit if the two last extrapolants differ by more than 10% of max(|value|, floor).
Extrapolated richardson(std::span<const double> s, std::span<const cplx> values, int order, double floor = 0.0);

/// Limit of pairing / scale as the data scale goes to the linear end.
Extrapolated extract_linear(const EpsSweep& sw, double p);
/// Limit of (pairing - scale * linear) / scale^(p-1).
Extrapolated extract_I(const EpsSweep& sw, cplx linear, double p);

/// Least-squares line through (log x, log y).
SweepFit loglog_fit(std::span<const double> x, std::span<const double> y);

/// Slope of log|pairing| against log eps (+1 super, -1 sub).
SweepFit leading_exponent(const EpsSweep& sw);
/// Slope of log|pairing - scale * linear| against log eps (p-1 super, 1-p sub).
SweepFit second_exponent(const EpsSweep& sw, cplx linear);
/// Slope of log|pairing - scale*linear - scale^(p-1)*I| against log eps, restricted to points
/// whose remainder exceeds noise_floor * |pairing|.
SweepFit remainder_exponent(const EpsSweep& sw, cplx linear, cplx I, double p, double noise_floor = 1e-11);

struct PEstimate {
    /// 1 + slope (super) or 1 - slope (sub) of log|pairing - scale * linear| against log eps.
    double p = 0.0;
    /// Exponent minimizing the three-term expansion misfit; used to extrapolate linear.
    double p_model = 0.0;
    Regime regime = Regime::super;
    cplx linear;
    SweepFit fit;
    EpsSweep sweep;
    int iterations = 0;
};

/// Pairing as a function of the Dirichlet datum; the only access estimate_p has to the medium.
using PairingOracle = std::function<cplx(const BoundaryTrace& data)>;

/// Recover p from pairings alone. Empty epsilons selects default_epsilons of the detected regime.
/// Throws IllConditionedFit when there is no resolvable second-order term or r^2 < 0.99.
PEstimate estimate_p(const PairingOracle& oracle, const BoundaryTrace& f, std::vector<double> epsilons = {});
/// Oracle backed by weak solves of op against test field w (data-relative tol).
PairingOracle make_oracle(const ForwardOperator& op, const ScalarField& w, double tol = 1e-12);

}  // namespace pqi

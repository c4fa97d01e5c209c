#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pqi/cgo.hpp"
#include "pqi/config.hpp"
#include "pqi/forward.hpp"

namespace pqi {

/// Nonzero lattice frequencies 2 pi n / L with |xi| <= cutoff and
/// |n_d| < N/2, in FFT bin order.
std::vector<Vec3> lattice_ball(const Grid& grid, double cutoff);

struct XiFailure {
    std::size_t index = 0;
    std::string kind;
    std::string message;
};

struct FourierData {
    std::vector<Vec3> xi_list;
    std::vector<cplx> khat;
    std::vector<double> s_list;
    std::vector<double> extrapolation_error;
    std::vector<XiFailure> failures;
    double cutoff = 0.0;

    /// ||khat(xi) - conj(khat(-xi))||_2 / ||khat||_2 over xi with both
    /// values present.
    double hermitian_residual() const;
    /// khat(xi) <- (khat(xi) + conj(khat(-xi))) / 2.
    void symmetrize();
    bool failed(std::size_t i) const;
};

/// Direct integrals: lattice uses analytic CGO gradients and nodal beta;
/// q1 uses the discrete sigma-harmonic extensions of the CGO traces on the
/// forward solver's rule (the fields boundary mode sees).
enum class OracleRule { lattice, q1 };

struct AssembleOptions {
    ReconMode mode = ReconMode::oracle;
    OracleRule rule = OracleRule::lattice;
    CgoEquation equation = CgoEquation::stated;
    double cgo_tol = 1e-8;
    /// Exponent used by the boundary-mode extraction (0: the operator's p).
    double p = 0.0;
    /// Boundary mode: sweep epsilons (empty: regime default), solver tol and
    /// Wirtinger step (0: 1e-3 max|grad u1| / max|grad u2| on supp a).
    std::vector<double> epsilons;
    double sweep_tol = 1e-12;
    double step = 0.0;
    int threads = 1;
};

/// K(u1, u2, u3) for every xi and s, extrapolated to s = inf with
/// K_inf + c/s through the two largest s (a single s is taken as is).
/// CGO fields are centered at the box center; khat refers to origin 0.
/// u1 must be real. Per-xi failures are recorded and leave khat = 0.
FourierData assemble_khat(const ForwardOperator& op, const ScalarField& u1, const std::vector<Vec3>& xi_list,
                          const std::vector<double>& s_list, const AssembleOptions& opt = {});

/// K at one (xi, s). Boundary mode returns K for xi and -xi from shared sweeps.
cplx khat_oracle(const ForwardOperator& op, const ScalarField& u1, const CgoBuilder& cgo, const Vec3& xi, double s,
                 OracleRule rule = OracleRule::lattice);
std::pair<cplx, cplx> khat_boundary(const ForwardOperator& op, const ScalarField& u1, const CgoBuilder& cgo,
                                    const Vec3& xi, double s, const AssembleOptions& opt = {});

struct BetaSolve {
    ScalarField beta;
    int iterations = 0;
    /// ||Delta beta - 3 V beta - rhs||_2 / ||rhs||_2 over nonzero modes.
    double residual = 0.0;
    /// Ratio of successive fixed-point increments at exit.
    double contraction = 0.0;
};

/// 2 sigma^(1/2) F^-1[khat], modes outside xi_list set to zero.
ScalarField beta_rhs(const FourierData& data, const ScalarField& sigma);

/// Solve Delta beta - 3 V beta = rhs with the spectral Laplacian by
/// beta <- Delta^-1 (rhs + 3 V beta); the zero mode of each iterate is set
/// so that beta has mean zero on the boundary layer of Omega_h.
/// SingularOperator when the increments grow three times in a row or
/// max_iter is reached.
BetaSolve invert_beta(const ScalarField& rhs, const ScalarField& V, double tol = 1e-12, int max_iter = 200);
BetaSolve invert_beta(const FourierData& data, const ScalarField& sigma, const ScalarField& V, double tol = 1e-12,
                      int max_iter = 200);

struct ReconReport {
    explicit ReconReport(const Grid& g) : a_hat(g) {}

    ScalarField a_hat;
    double cutoff = 0.0;
    /// ||Im a_hat||_2 / ||a_hat||_2 before the imaginary part is dropped.
    double imag_residual = 0.0;
    double beta_residual = 0.0;
    int beta_iterations = 0;
    std::optional<double> rel_l2_error;
};

/// a_hat = |grad u1|^(2-p) beta on Omega_h, zero elsewhere.
/// GradientVanishes if |grad u1| < grad_floor on Omega_h.
ReconReport recover_a(const BetaSolve& beta, const ScalarField& u1, double p, double grad_floor = 0.1);

/// Real part of a restricted to the zero mode and the modes of
/// lattice_ball(cutoff).
ScalarField band_limit(const ScalarField& a, double cutoff);
/// ||a_hat - ref||_2 / ||ref||_2 over Omega_h.
double rel_error_on_region(const ScalarField& a_hat, const ScalarField& ref);

/// sigma-harmonic extension of the trace x1 on Omega_h, x1 elsewhere.
ScalarField default_u1(const LinearOperator& lin);

struct PipelineResult {
    PipelineResult(const RunConfig& c, const Coefficients& t) : config(c), truth(t), report(t.grid()), a_band(t.grid()) {}

    RunConfig config;
    Coefficients truth;
    std::optional<double> p_hat;
    std::string p_error;
    double p_used = 0.0;
    FourierData data;
    double hermitian_residual = 0.0;
    ReconReport report;
    ScalarField a_band;
    double seconds = 0.0;
};

PipelineResult run_pipeline(const RunConfig& config, int threads = 1);

}  // namespace pqi

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "pqi/field.hpp"
#include "pqi/q1.hpp"

namespace pqi {

/// Conductivity sigma, nonlinear weight a, exponent p and ellipticity bounds.
struct Coefficients {
    ScalarField sigma;
    ScalarField a;
    double p = 3.0;
    double lambda = 0.5;
    double m = 0.1;

    const Grid& grid() const noexcept { return sigma.grid(); }

    /// Full invariant check: lambda < sigma < 1/lambda on Omega_h, sigma = 1
    /// off Omega_h, 0 <= a < 1/m with a = 0 off Omega_h, p in (1, inf) \ {2}.
    void validate() const;
    /// Weaker check used by the solvers (positivity, finiteness, p > 1).
    void check_solvable() const;
};

struct SolveReport {
    int iterations = 0;
    double final_energy = 0.0;
    double weak_residual = 0.0;
    bool converged = false;
    /// Last observed contraction ratio (fixed-point solver only).
    std::optional<double> contraction_ratio;
    std::vector<double> energy_history;
};

struct Solution {
    ScalarField u;
    SolveReport report;
};

/// The linear sigma-operator on Omega_h: Q1 stiffness split into interior and
/// boundary blocks. Interior solves use a sine-transform diagonalization when
/// sigma is constant on Omega_h and a sparse Cholesky factor otherwise.
class LinearOperator {
public:
    explicit LinearOperator(const ScalarField& sigma);

    const Grid& grid() const noexcept { return mesh_.grid(); }
    const q1::Mesh& mesh() const noexcept { return mesh_; }
    const std::vector<double>& sigma_q() const noexcept { return sigma_q_; }
    std::size_t dofs() const noexcept { return interior_.size(); }
    const std::vector<std::size_t>& interior() const noexcept { return interior_; }
    const std::vector<std::size_t>& boundary() const noexcept { return boundary_; }

    /// Interior rows of K u for a nodal field u (boundary values included).
    Eigen::VectorXcd apply(std::span<const cplx> nodal) const;
    /// Interior-block apply for a vector of interior unknowns.
    Eigen::VectorXcd apply_interior(const Eigen::VectorXcd& x) const;
    Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const;

    /// Interior rows of the load sum_q w F_q . grad phi_i.
    Eigen::VectorXcd load(const VectorField& F) const;

    Eigen::VectorXcd gather(std::span<const cplx> nodal) const;
    void scatter_into(const Eigen::VectorXcd& x, std::span<cplx> nodal) const;

    /// Solve div(sigma grad u) = div F with u = f on the boundary layer.
    ScalarField solve_dirichlet(const BoundaryTrace& f, const VectorField* F) const;
    /// Same with a precomputed interior load: K u = rhs.
    ScalarField solve_dirichlet(const BoundaryTrace& f, const Eigen::VectorXcd& rhs) const;
    /// Discrete div(sigma grad w) at interior nodes (lumped by h^3), zero elsewhere.
    ScalarField div_sigma_grad(const ScalarField& w) const;
    /// Inverse of div_sigma_grad with zero Dirichlet data.
    ScalarField green(const ScalarField& S) const;

private:
    q1::Mesh mesh_;
    std::vector<double> sigma_q_;
    std::vector<std::size_t> interior_;
    std::vector<std::size_t> boundary_;
    std::vector<int> dof_of_;
    Eigen::SparseMatrix<double> k_ii_;
    Eigen::SparseMatrix<double> k_ib_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol_;
    // Uniform sigma: the interior block is diagonal in the sine basis.
    bool uniform_ = false;
    std::vector<double> inv_eig_;

    Eigen::VectorXcd sine_solve(const Eigen::VectorXcd& rhs) const;
};

struct WeakSolveOptions {
    double tol = 1e-9;
    int max_newton = 200;
    /// Optional starting field (boundary values are overwritten by f).
    const ScalarField* initial = nullptr;
};

/// Prepared nonlinear problem div(sigma grad u + a |grad u|^(p-2) grad u) = -div F.
///
/// The right-hand side sign is the Euler-Lagrange equation of
/// E[v] = int 1/2 sigma |grad v|^2 + 1/p a |grad v|^p + Re(grad conj(v) . F).
class ForwardOperator {
public:
    explicit ForwardOperator(const Coefficients& c);
    ForwardOperator(const Coefficients& c, std::shared_ptr<const LinearOperator> linear);

    const Coefficients& coefficients() const noexcept { return c_; }
    const LinearOperator& linear() const noexcept { return *lin_; }
    std::shared_ptr<const LinearOperator> linear_ptr() const noexcept { return lin_; }
    const std::vector<double>& a_q() const noexcept { return a_q_; }
    const std::vector<std::size_t>& active_cells() const noexcept { return active_; }

    double energy(const ScalarField& v, const VectorField* F, double reg = 0.0) const;
    /// Interior rows of the weak form sum_q w (sigma g + a rho g + F) . grad phi_i.
    Eigen::VectorXcd residual(const ScalarField& u, const Eigen::VectorXcd* f_load, double reg = 0.0) const;
    /// sup_i |residual_i| / ||phi_i||_{W^{1,max(2,p)}}.
    double weak_residual(const Eigen::VectorXcd& r) const;
    /// Interior rows of the nonlinear flux load sum_q w a |g|^(p-2) g . grad phi_i.
    Eigen::VectorXcd nonlinear_load(const ScalarField& u) const;
    /// a_q pmap(grad u) at the Gauss points of active_cells(), 8 per cell.
    std::vector<CVec3> nonlinear_flux(const ScalarField& u) const;

    Solution solve_weak(const BoundaryTrace& f, const VectorField* F, const WeakSolveOptions& opt) const;
    ScalarField contraction_step(const ScalarField& v, const ScalarField& v_f) const;
    Solution solve_strong(const BoundaryTrace& f, const VectorField* F, double tol, int max_iter = 500) const;

    /// sum_q w (sigma + a |grad u|^(p-2)) grad u . conj(grad w) over Omega_h.
    cplx pairing(const ScalarField& u, const ScalarField& w) const;
    cplx linear_pairing(const ScalarField& u, const ScalarField& w) const;

private:
    Coefficients c_;
    std::shared_ptr<const LinearOperator> lin_;
    std::vector<double> a_q_;
    std::vector<std::size_t> active_;
    double phi_norm_ = 1.0;
};

// Free-function forms of the forward operations.

double energy(const ScalarField& v, const Coefficients& c, const VectorField& F,
              q1::Mesh::Extent extent = q1::Mesh::Extent::interior);
Solution solve_weak(const Coefficients& c, const BoundaryTrace& f, const VectorField& F, double tol);
ScalarField solve_linear(const ScalarField& sigma, const BoundaryTrace& f, const VectorField& F);
ScalarField green_sigma(const ScalarField& sigma, const ScalarField& S);
ScalarField contraction_step(const ScalarField& v, const Coefficients& c, const ScalarField& v_f);
Solution solve_strong(const Coefficients& c, const BoundaryTrace& f, const VectorField& F, double tol);

/// Relative L2 difference over the closed interior box.
double relative_l2(const ScalarField& u, const ScalarField& ref);

}  // namespace pqi

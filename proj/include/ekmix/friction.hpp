#pragma once

// Small dense algebra of the interspecies friction operator
//
//   f_i = -sum_j b_ij rho_i rho_j (v_i - v_j) = -(tau v)_i,
//
// with tau_ij = -b_ij rho_i rho_j (i != j) and zero row sums. Under a
// connected friction graph tau has rank n-1 and kernel span{1}; everything
// below builds on inverting its leading (n-1)x(n-1) block.

#include <cstddef>
#include <cstdint>

#include "ekmix/linalg.hpp"

namespace ekmix {

/// Throws ValidationError unless b is square, symmetric and nonnegative off
/// the diagonal.
void validate_friction_matrix(const Matrix& b);

/// True iff the graph on species with edges {b_ij > 0} is connected.
bool friction_graph_connected(const Matrix& b);

struct HypothesisNReport {
  bool connected = false;
  bool rank_ok = false;          ///< SVD confirms rank(tau) = n - 1
  double sigma_ratio_rank = 0;   ///< sigma_{n-1} / sigma_1
  double sigma_ratio_null = 0;   ///< sigma_n / sigma_1
  Vector rho_sample;             ///< density used for the rank check
  [[nodiscard]] bool pass() const { return connected && rank_ok; }
};

/// Connectivity of the friction graph plus an SVD rank check of tau at a
/// pseudo-random positive density drawn from `seed`.
HypothesisNReport check_hypothesis_N(const Matrix& b, std::uint64_t seed = 0);

Matrix build_tau(const Matrix& b, const Vector& rho);

/// tau_red_inv: inverse of the leading (n-1)x(n-1) block of tau
/// q_inv:       (n-1)x(n-1), delta_ij rho_i - rho_i rho_j / rho
/// d_tilde:     q_inv * tau_red_inv * q_inv
/// d_full:      g * d_tilde * g^T (n x n), with g_ii = 1, g_ni = -1
struct ReducedOperators {
  Matrix tau_red_inv;
  Matrix q_inv;
  Matrix d_tilde;
  Matrix d_full;
  Matrix g;
};

ReducedOperators reduced_operators(const Matrix& b, const Vector& rho);

/// Only the n x n diffusion matrix D (no intermediate products kept).
Matrix diffusion_matrix(const Matrix& b, const Vector& rho);

/// (n-1)x(n-1) Q with Q_ij = delta_ij / rho_j + 1 / rho_n; the inverse of q_inv.
Matrix q_matrix(const Vector& rho);

/// Unique u with -sum_j b_ij rho_i rho_j (u_i - u_j) = d_i and sum_i rho_i u_i = 0.
/// Requires |sum d| <= 1e-10 |d|.
Vector solve_constrained(const Matrix& b, const Vector& rho, const Vector& d);

/// d_i = rho_i grad_mu_i - rho_i / rho * sum_j rho_j grad_mu_j; the last
/// component is closed off so that sum_i d_i vanishes exactly.
Vector driving_force(const Vector& rho, const Vector& grad_mu);

/// rho_i u_i = -eps sum_j D_ij grad_mu_j.
Vector relative_velocity_flux(const ReducedOperators& ops, double eps, const Vector& grad_mu);

/// E''_red = A^T diag(h'') A with A = d rho / d rho_reduced = [I; -1^T].
Matrix reduced_energy_hessian(const Vector& d2h);

struct SpectrumReport {
  Vector eigenvalues;  ///< ascending
  double min_eigenvalue = 0.0;
  [[nodiscard]] bool pass() const { return min_eigenvalue > 0.0; }
};

/// Spectrum of d_tilde * hessian_red, computed through the symmetric similar
/// matrix L^T d_tilde L where hessian_red = L L^T.
SpectrumReport parabolicity_check(const ReducedOperators& ops, const Matrix& hessian_red);

/// nu = lambda_min(Q^T tau_red Q) / n; then
/// 1/2 sum b_ij rho_i rho_j |v_i - v_j|^2 >= nu sum rho_i^2 |v_i - v|^2.
double coercivity_constant(const Matrix& b, const Vector& rho);

/// 1/2 sum_ij b_ij rho_i rho_j (v_i - v_j)^2.
double friction_dissipation(const Matrix& b, const Vector& rho, const Vector& v);

/// f_i = -sum_j b_ij rho_i rho_j (v_i - v_j).
Vector friction_force(const Matrix& b, const Vector& rho, const Vector& v);

}  // namespace ekmix

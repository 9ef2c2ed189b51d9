#include "ekmix/friction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "ekmix/errors.hpp"
#include "ekmix/model.hpp"

namespace ekmix {

namespace {

void check_density(const Vector& rho, Eigen::Index n) {
  if (rho.size() != n) throw PreconditionError("density vector has wrong length");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(rho(i) > 0.0) || !std::isfinite(rho(i))) {
      throw DomainError("friction algebra needs positive densities");
    }
  }
}

Matrix embedding(Eigen::Index n) {
  Matrix g = Matrix::Zero(n, n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    g(i, i) = 1.0;
    g(n - 1, i) = -1.0;
  }
  return g;
}

Matrix q_inverse(const Vector& rho) {
  const Eigen::Index m = rho.size() - 1;
  const double total = rho.sum();
  Matrix q_inv(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      q_inv(i, j) = (i == j ? rho(i) : 0.0) - rho(i) * rho(j) / total;
    }
  }
  return q_inv;
}

Matrix invert_leading_block(const Matrix& tau) {
  const Eigen::Index m = tau.rows() - 1;
  const Matrix block = tau.topLeftCorner(m, m);
  Eigen::PartialPivLU<Matrix> lu(block);
  if (!(lu.rcond() > 1e-14)) {
    throw StructuralError("leading block of the friction matrix is singular");
  }
  return lu.inverse();
}

}  // namespace

void validate_friction_matrix(const Matrix& b) {
  if (b.rows() != b.cols()) throw ValidationError("friction matrix must be square");
  const Eigen::Index n = b.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!std::isfinite(b(i, j))) throw ValidationError("friction matrix has non-finite entries");
      if (b(i, j) != b(j, i)) throw ValidationError("friction matrix not symmetric");
      if (b(i, j) < 0.0) throw ValidationError("friction matrix has negative entries");
    }
  }
}

bool friction_graph_connected(const Matrix& b) {
  const Eigen::Index n = b.rows();
  if (n <= 1) return true;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<Eigen::Index> stack{0};
  seen[0] = true;
  Eigen::Index reached = 1;
  while (!stack.empty()) {
    const Eigen::Index i = stack.back();
    stack.pop_back();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && b(i, j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = true;
        ++reached;
        stack.push_back(j);
      }
    }
  }
  return reached == n;
}

HypothesisNReport check_hypothesis_N(const Matrix& b, std::uint64_t seed) {
  validate_friction_matrix(b);
  const Eigen::Index n = b.rows();
  HypothesisNReport report;
  report.connected = friction_graph_connected(b);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  report.rho_sample.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) report.rho_sample(i) = dist(rng);

  if (n == 1) {
    // tau is the 1x1 zero matrix: rank 0 = n - 1.
    report.rank_ok = true;
    return report;
  }
  const Matrix tau = build_tau(b, report.rho_sample);
  Eigen::JacobiSVD<Matrix> svd(tau);
  const Vector sv = svd.singularValues();
  const double s1 = sv(0);
  if (s1 > 0.0) {
    report.sigma_ratio_rank = sv(n - 2) / s1;
    report.sigma_ratio_null = sv(n - 1) / s1;
  }
  report.rank_ok = report.sigma_ratio_rank > 1e-10 && report.sigma_ratio_null < 1e-10;
  return report;
}

Matrix build_tau(const Matrix& b, const Vector& rho) {
  const Eigen::Index n = b.rows();
  check_density(rho, n);
  Matrix tau = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double diag = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      tau(i, j) = -b(i, j) * rho(i) * rho(j);
      diag -= tau(i, j);
    }
    tau(i, i) = diag;
  }
  return tau;
}

Matrix q_matrix(const Vector& rho) {
  const Eigen::Index m = rho.size() - 1;
  Matrix q(m, m);
  const double inv_last = 1.0 / rho(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) q(i, j) = (i == j ? 1.0 / rho(j) : 0.0) + inv_last;
  }
  return q;
}

ReducedOperators reduced_operators(const Matrix& b, const Vector& rho) {
  const Eigen::Index n = b.rows();
  const Matrix tau = build_tau(b, rho);
  ReducedOperators ops;
  ops.g = embedding(n);
  if (n == 1) {
    ops.tau_red_inv.resize(0, 0);
    ops.q_inv.resize(0, 0);
    ops.d_tilde.resize(0, 0);
    ops.d_full = Matrix::Zero(1, 1);
    return ops;
  }
  ops.tau_red_inv = invert_leading_block(tau);
  ops.q_inv = q_inverse(rho);
  const Matrix d_tilde = ops.q_inv * ops.tau_red_inv * ops.q_inv;
  ops.d_tilde = 0.5 * (d_tilde + d_tilde.transpose());
  ops.d_full = ops.g * ops.d_tilde * ops.g.transpose();
  return ops;
}

Matrix diffusion_matrix(const Matrix& b, const Vector& rho) {
  const Eigen::Index n = b.rows();
  const Matrix tau = build_tau(b, rho);
  Matrix d = Matrix::Zero(n, n);
  if (n == 1) return d;
  const Eigen::Index m = n - 1;
  Eigen::PartialPivLU<Matrix> lu(Matrix(tau.topLeftCorner(m, m)));
  if (!(lu.rcond() > 1e-14)) {
    throw StructuralError("leading block of the friction matrix is singular");
  }
  const Matrix q_inv = q_inverse(rho);
  const Matrix x = lu.solve(q_inv);
  const Matrix d_tilde = q_inv * x;
  d.topLeftCorner(m, m) = 0.5 * (d_tilde + d_tilde.transpose());
  // G d_tilde G^T: the last row and column close the zero sums.
  double corner = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) row += d(i, j);
    d(i, m) = -row;
    d(m, i) = -row;
    corner += row;
  }
  d(m, m) = corner;
  return d;
}

Vector solve_constrained(const Matrix& b, const Vector& rho, const Vector& d) {
  const Eigen::Index n = b.rows();
  check_density(rho, n);
  if (d.size() != n) throw PreconditionError("driving force has wrong length");
  if (std::abs(d.sum()) > 1e-10 * d.norm()) {
    throw PreconditionError("driving force components must sum to zero");
  }
  Vector u = Vector::Zero(n);
  if (n == 1) return u;
  const Eigen::Index m = n - 1;
  const Matrix tau = build_tau(b, rho);
  const Vector d_red = d.head(m);
  Eigen::PartialPivLU<Matrix> lu(Matrix(tau.topLeftCorner(m, m)));
  if (!(lu.rcond() > 1e-14)) {
    throw StructuralError("leading block of the friction matrix is singular");
  }
  const Vector flux = -(q_inverse(rho) * lu.solve(d_red));
  double last = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    u(i) = flux(i) / rho(i);
    last -= flux(i);
  }
  u(m) = last / rho(m);
  return u;
}

Vector driving_force(const Vector& rho, const Vector& grad_mu) {
  const Eigen::Index n = rho.size();
  if (grad_mu.size() != n) throw PreconditionError("grad_mu has wrong length");
  const double total = rho.sum();
  const double weighted = rho.dot(grad_mu);
  Vector d(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    d(i) = rho(i) * grad_mu(i) - rho(i) / total * weighted;
    sum += d(i);
  }
  d(n - 1) = n == 1 ? 0.0 : -sum;
  return d;
}

Vector relative_velocity_flux(const ReducedOperators& ops, double eps, const Vector& grad_mu) {
  if (grad_mu.size() != ops.d_full.rows()) throw PreconditionError("grad_mu has wrong length");
  return -eps * (ops.d_full * grad_mu);
}

Matrix reduced_energy_hessian(const Vector& d2h) {
  const Eigen::Index m = d2h.size() - 1;
  Matrix hess = Matrix::Constant(m, m, d2h(m));
  for (Eigen::Index i = 0; i < m; ++i) hess(i, i) += d2h(i);
  return hess;
}

SpectrumReport parabolicity_check(const ReducedOperators& ops, const Matrix& hessian_red) {
  const Eigen::Index m = ops.d_tilde.rows();
  if (hessian_red.rows() != m || hessian_red.cols() != m) {
    throw PreconditionError("reduced Hessian has wrong shape");
  }
  SpectrumReport report;
  if (m == 0) {
    report.eigenvalues.resize(0);
    report.min_eigenvalue = std::numeric_limits<double>::infinity();
    return report;
  }
  Eigen::LLT<Matrix> llt(hessian_red);
  if (llt.info() != Eigen::Success) {
    throw PreconditionError("reduced Hessian is not symmetric positive definite");
  }
  const Matrix l = llt.matrixL();
  const Matrix sym = l.transpose() * ops.d_tilde * l;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
  report.eigenvalues = eig.eigenvalues();
  report.min_eigenvalue = report.eigenvalues(0);
  return report;
}

double coercivity_constant(const Matrix& b, const Vector& rho) {
  const Eigen::Index n = b.rows();
  if (n == 1) return std::numeric_limits<double>::infinity();
  const Eigen::Index m = n - 1;
  const Matrix tau = build_tau(b, rho);
  const Matrix q = q_matrix(rho);
  const Matrix form = q.transpose() * tau.topLeftCorner(m, m) * q;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (form + form.transpose()),
                                            Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0) / static_cast<double>(n);
}

double friction_dissipation(const Matrix& b, const Vector& rho, const Vector& v) {
  const Eigen::Index n = b.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dv = v(i) - v(j);
      sum += b(i, j) * rho(i) * rho(j) * dv * dv;
    }
  }
  return sum;
}

Vector friction_force(const Matrix& b, const Vector& rho, const Vector& v) {
  const Eigen::Index n = b.rows();
  Vector f = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) f(i) -= b(i, j) * rho(i) * rho(j) * (v(i) - v(j));
    }
  }
  return f;
}

void MixtureModel::validate() const {
  if (laws.empty()) throw ValidationError("model needs at least one species");
  if (laws.size() > static_cast<std::size_t>(kMaxSpecies)) {
    throw ValidationError("too many species (max " + std::to_string(kMaxSpecies) + ")");
  }
  for (const auto& law : laws) law.validate();
  if (b.rows() != static_cast<Eigen::Index>(laws.size())) {
    throw ValidationError("friction matrix size does not match species count");
  }
  validate_friction_matrix(b);
  if (!friction_graph_connected(b)) {
    throw ValidationError("friction graph is not connected");
  }
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be nonnegative");
}

}  // namespace ekmix

#pragma once

// Dense linear GMM: weighted solution, two-step optimal weighting, J-statistic
// and delta-method variances.

#include <Eigen/Dense>

#include <functional>

namespace ifeatt::gmm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PsdInverse {
  MatrixXd inverse;
  Index rank = 0;
  // Orthonormal basis of the directions whose eigenvalue fell below the cutoff.
  MatrixXd null_basis;
  double max_eigenvalue = 0.0;
};

// Eigendecomposition pseudo-inverse of a symmetric matrix. Eigenvalues below
// rtol * max-eigenvalue are treated as zero. Throws NonSymmetric.
PsdInverse psd_inverse(const MatrixXd& a, double rtol = 1e-10);

// Column rank of a matrix via column-pivoted QR, threshold relative to the
// largest pivot.
Index numeric_rank(const MatrixXd& a, double rtol = 1e-10);

// argmin_g (mzy - mzx g)' w (mzy - mzx g).
// Exactly identified systems are solved directly and do not depend on w.
VectorXd solve_linear_gmm(const MatrixXd& mzx, const VectorXd& mzy, const MatrixXd& w);

struct MomentSystem {
  MatrixXd mzx;  // m1 x l1, averaged Z_i X_i'
  VectorXd mzy;  // m1, averaged Z_i Y_i
  // Returns the m1 x n matrix whose i-th column is Z_i U_i(gamma).
  std::function<MatrixXd(const VectorXd& gamma)> unit_moments;
  Index n = 0;
};

// Builds a MomentSystem from per-unit products stored contiguously:
// zx is m1 x (n * l1) with unit i occupying columns [i*l1, (i+1)*l1),
// zy is m1 x n. Averages are accumulated in unit order.
MomentSystem make_moment_system(MatrixXd zx, MatrixXd zy);

struct GmmFit {
  VectorXd gamma;
  VectorXd first_step_gamma;
  MatrixXd omega;           // n^-1 sum Z_i U_i U_i' Z_i' at the final gamma
  MatrixXd sigma;           // asymptotic covariance of sqrt(n)(gamma_hat - gamma)
  MatrixXd weighting_used;  // weighting of the final step
  double j_stat = 0.0;
  Index j_dof = 0;
  Index omega_rank = 0;
  Index n = 0;
  bool exactly_identified = false;
};

struct TwoStepOptions {
  double psd_rtol = 1e-10;
  bool compute_inference = true;  // when false, omega and sigma are left empty
};

// Two-step efficient GMM. The second step weights by the pseudo-inverse of the
// centered first-step moment covariance. Its null space (moment combinations
// that are exact identities in the sample) gets the weight of the least
// precise retained direction, and j_dof is the rank of that covariance minus
// the parameters the remaining moments identify.
// sigma is the sandwich covariance at the final estimate, which reduces to
// (M' Omega^-1 M)^-1 when Omega is nonsingular.
GmmFit two_step_fit(const MomentSystem& system, const MatrixXd& first_step_w,
                    const TwoStepOptions& options = {});
GmmFit two_step_fit(const MomentSystem& system, const TwoStepOptions& options = {});

// Upper-tail chi-square probability; dof 0 yields 1.
double chi2_upper_tail(double statistic, Index dof);
double chi2_quantile(double probability, Index dof);

struct DeltaMethod {
  double variance = 0.0;        // grad' sigma grad
  double standard_error = 0.0;  // sqrt(variance / n)
};

DeltaMethod delta_method(const VectorXd& grad, const MatrixXd& sigma, Index n);

}  // namespace ifeatt::gmm

#include "ifeatt/gmm.hpp"

#include "ifeatt/error.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace ifeatt::gmm {

namespace {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains NaN or Inf");
  }
}

std::string dims(const MatrixXd& a) {
  std::ostringstream os;
  os << a.rows() << "x" << a.cols();
  return os.str();
}

// Returns S with S'S = w for a symmetric positive semidefinite w.
MatrixXd weight_root(const MatrixXd& w) {
  const MatrixXd sym = 0.5 * (w + w.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  VectorXd values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  for (Index k = 0; k < values.size(); ++k) {
    if (values(k) < -1e-10 * top) {
      throw Error(ErrorCode::InvalidArgument, "weighting matrix is not positive semidefinite");
    }
    values(k) = std::sqrt(std::max(values(k), 0.0));
  }
  return values.asDiagonal() * eig.eigenvectors().transpose();
}

MatrixXd symmetrized(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

PsdInverse psd_inverse(const MatrixXd& a, double rtol) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "psd_inverse needs a square matrix, got " + dims(a));
  }
  require_finite(a, "matrix");
  const Index k = a.rows();
  PsdInverse out;
  out.inverse = MatrixXd::Zero(k, k);
  out.null_basis = MatrixXd::Identity(k, k);
  if (k == 0) return out;

  const double scale = a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorCode::NonSymmetric, "matrix is not symmetric");
  }
  if (scale == 0.0) return out;

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(a));
  const VectorXd& values = eig.eigenvalues();
  const MatrixXd& vectors = eig.eigenvectors();
  out.max_eigenvalue = values.maxCoeff();
  const double cutoff = rtol * out.max_eigenvalue;

  std::vector<Index> kept;
  std::vector<Index> dropped;
  for (Index j = 0; j < k; ++j) {
    if (out.max_eigenvalue > 0.0 && values(j) > cutoff) {
      kept.push_back(j);
    } else {
      dropped.push_back(j);
    }
  }
  out.rank = static_cast<Index>(kept.size());
  for (Index j : kept) {
    out.inverse.noalias() += (1.0 / values(j)) * vectors.col(j) * vectors.col(j).transpose();
  }
  out.inverse = symmetrized(out.inverse);
  out.null_basis.resize(k, static_cast<Index>(dropped.size()));
  for (std::size_t j = 0; j < dropped.size(); ++j) {
    out.null_basis.col(static_cast<Index>(j)) = vectors.col(dropped[j]);
  }
  return out;
}

Index numeric_rank(const MatrixXd& a, double rtol) {
  if (a.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(rtol);
  return qr.rank();
}

VectorXd solve_linear_gmm(const MatrixXd& mzx, const VectorXd& mzy, const MatrixXd& w) {
  const Index m = mzx.rows();
  const Index l = mzx.cols();
  if (mzy.size() != m || w.rows() != m || w.cols() != m) {
    throw Error(ErrorCode::DimensionMismatch, "mzx " + dims(mzx) + ", mzy " +
                                                  std::to_string(mzy.size()) + ", w " + dims(w));
  }
  if (m < l) {
    throw Error(ErrorCode::DimensionMismatch, "fewer moments than parameters: " + dims(mzx));
  }
  require_finite(mzx, "mzx");
  require_finite(mzy, "mzy");
  require_finite(w, "weighting matrix");

  Eigen::ColPivHouseholderQR<MatrixXd> qr_m(mzx);
  qr_m.setThreshold(1e-10);
  if (qr_m.rank() < l) {
    throw Error(ErrorCode::RankDeficient, "moment Jacobian has rank " + std::to_string(qr_m.rank()) +
                                              " < " + std::to_string(l) + " parameters");
  }
  if (m == l) {
    return qr_m.solve(mzy);
  }

  const MatrixXd root = weight_root(w);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(root * mzx);
  qr.setThreshold(1e-10);
  if (qr.rank() < l) {
    throw Error(ErrorCode::RankDeficient, "weighted moment Jacobian has rank " +
                                              std::to_string(qr.rank()) + " < " +
                                              std::to_string(l));
  }
  return qr.solve(root * mzy);
}

MomentSystem make_moment_system(MatrixXd zx, MatrixXd zy) {
  const Index m = zy.rows();
  const Index n = zy.cols();
  if (n == 0 || zx.rows() != m || zx.cols() % n != 0) {
    throw Error(ErrorCode::DimensionMismatch,
                "per-unit blocks do not line up: zx " + dims(zx) + ", zy " + dims(zy));
  }
  const Index l = zx.cols() / n;

  MomentSystem sys;
  sys.n = n;
  sys.mzx = MatrixXd::Zero(m, l);
  sys.mzy = VectorXd::Zero(m);
  for (Index i = 0; i < n; ++i) {
    sys.mzx += zx.middleCols(i * l, l);
    sys.mzy += zy.col(i);
  }
  sys.mzx /= static_cast<double>(n);
  sys.mzy /= static_cast<double>(n);

  auto zx_store = std::make_shared<const MatrixXd>(std::move(zx));
  auto zy_store = std::make_shared<const MatrixXd>(std::move(zy));
  sys.unit_moments = [zx_store, zy_store, l, n](const VectorXd& gamma) {
    MatrixXd out = *zy_store;
    for (Index i = 0; i < n; ++i) {
      out.col(i).noalias() -= zx_store->middleCols(i * l, l) * gamma;
    }
    return out;
  };
  return sys;
}

namespace {

MatrixXd moment_covariance(const MomentSystem& system, const VectorXd& gamma) {
  const MatrixXd g = system.unit_moments(gamma);
  if (g.rows() != system.mzx.rows() || g.cols() != system.n) {
    throw Error(ErrorCode::DimensionMismatch, "unit_moments returned " + dims(g));
  }
  MatrixXd omega = (g * g.transpose()) / static_cast<double>(system.n);
  return symmetrized(omega);
}

}  // namespace

GmmFit two_step_fit(const MomentSystem& system, const MatrixXd& first_step_w,
                    const TwoStepOptions& options) {
  const Index m = system.mzx.rows();
  const Index l = system.mzx.cols();
  if (system.n < 1) {
    throw Error(ErrorCode::InvalidArgument, "moment system has no units");
  }

  GmmFit fit;
  fit.n = system.n;
  fit.j_dof = m - l;
  fit.exactly_identified = (m == l);
  fit.first_step_gamma = solve_linear_gmm(system.mzx, system.mzy, first_step_w);
  fit.gamma = fit.first_step_gamma;
  fit.weighting_used = first_step_w;

  if (fit.exactly_identified && !options.compute_inference) {
    return fit;
  }

  if (!fit.exactly_identified) {
    // Centered, so that moment combinations that are deterministic in the
    // sample (exact identities among the moments) have exactly zero variance.
    const VectorXd gbar1 = system.mzy - system.mzx * fit.first_step_gamma;
    const MatrixXd omega1 = moment_covariance(system, fit.first_step_gamma) - gbar1 * gbar1.transpose();
    // Inverted on the correlation scale so that rescaling individual moments
    // rescales the weighting exactly, including the null-space fill below.
    VectorXd scale = omega1.diagonal();
    for (Index j = 0; j < m; ++j) scale(j) = scale(j) > 0.0 ? 1.0 / std::sqrt(scale(j)) : 1.0;
    const PsdInverse pinv =
        psd_inverse(scale.asDiagonal() * omega1 * scale.asDiagonal(), options.psd_rtol);
    if (pinv.rank == 0) {
      throw Error(ErrorCode::OmegaSingular, "first-step moment covariance is numerically zero");
    }
    // Zero-variance directions are identities among the moments and carry no
    // sampling information. They get the weight of the least precise retained
    // direction, and the J degrees of freedom count the stochastic moments
    // alone.
    MatrixXd w2 = pinv.inverse;
    if (pinv.null_basis.cols() > 0) {
      w2.noalias() += (1.0 / pinv.max_eigenvalue) * pinv.null_basis * pinv.null_basis.transpose();
      const Index identified = numeric_rank(pinv.inverse * (scale.asDiagonal() * system.mzx), options.psd_rtol);
      fit.j_dof = pinv.rank - identified;
    }
    fit.weighting_used = symmetrized(scale.asDiagonal() * w2 * scale.asDiagonal());
    fit.gamma = solve_linear_gmm(system.mzx, system.mzy, fit.weighting_used);
  }

  const VectorXd gbar = system.mzy - system.mzx * fit.gamma;
  fit.j_stat = static_cast<double>(system.n) * gbar.dot(fit.weighting_used * gbar);
  if (fit.exactly_identified) fit.j_stat = std::max(fit.j_stat, 0.0);

  if (!options.compute_inference) {
    return fit;
  }

  fit.omega = moment_covariance(system, fit.gamma);
  fit.omega_rank = psd_inverse(fit.omega, options.psd_rtol).rank;

  if (fit.exactly_identified) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(system.mzx);
    const MatrixXd left = qr.solve(fit.omega);
    fit.sigma = symmetrized(qr.solve(left.transpose()));
    return fit;
  }

  const MatrixXd root = weight_root(fit.weighting_used);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(root * system.mzx);
  const MatrixXd r = qr.matrixR().topLeftCorner(l, l).triangularView<Eigen::Upper>();
  const MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(l, l));
  const MatrixXd bread = qr.colsPermutation() * (r_inv * r_inv.transpose()) *
                         qr.colsPermutation().transpose();
  const MatrixXd wm = fit.weighting_used * system.mzx;
  const MatrixXd meat = wm.transpose() * fit.omega * wm;
  fit.sigma = symmetrized(bread * meat * bread);
  return fit;
}

GmmFit two_step_fit(const MomentSystem& system, const TwoStepOptions& options) {
  const Index m = system.mzx.rows();
  return two_step_fit(system, MatrixXd::Identity(m, m), options);
}

double chi2_upper_tail(double statistic, Index dof) {
  if (dof <= 0) return 1.0;
  if (!(statistic > 0.0)) return 1.0;
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

double chi2_quantile(double probability, Index dof) {
  if (dof <= 0) return 0.0;
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::quantile(dist, probability);
}

DeltaMethod delta_method(const VectorXd& grad, const MatrixXd& sigma, Index n) {
  if (sigma.rows() != grad.size() || sigma.cols() != grad.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient length " + std::to_string(grad.size()) +
                                                  " vs sigma " + dims(sigma));
  }
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample size must be positive");
  require_finite(grad, "gradient");
  require_finite(sigma, "sigma");
  DeltaMethod out;
  out.variance = std::max(grad.dot(sigma * grad), 0.0);
  out.standard_error = std::sqrt(out.variance / static_cast<double>(n));
  return out;
}

}  // namespace ifeatt::gmm

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gikf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raised when a matrix that must be invertible (e.g. an innovation
// covariance) is numerically singular.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Induced 2-norm of a symmetric matrix (largest eigenvalue magnitude).
inline double symmetric_norm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Symmetric positive-semidefinite matrix. Entries are symmetrized on
/// construction; validation rejects matrices whose smallest eigenvalue is
/// below -tol with tol = 1e-9 * max(1, ||m||).
class PsdMatrix {
 public:
  explicit PsdMatrix(Matrix m) : mat_(symmetrize(m)) {
    const double scale = std::max(1.0, symmetric_norm(mat_));
    if (min_eigenvalue(mat_) < -1e-9 * scale) {
      throw std::invalid_argument("PsdMatrix: matrix is not positive semidefinite");
    }
  }

  // Symmetrizes but skips the eigenvalue check; for operator outputs that
  // are PSD by construction.
  static PsdMatrix trusted(Matrix m) { return PsdMatrix(std::move(m), Trusted{}); }

  static PsdMatrix zero(int dim) { return trusted(Matrix::Zero(dim, dim)); }
  static PsdMatrix identity(int dim) { return trusted(Matrix::Identity(dim, dim)); }
  static PsdMatrix scaled_identity(int dim, double c) {
    return PsdMatrix(c * Matrix::Identity(dim, dim));
  }

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Matrix& mat() const { return mat_; }

 private:
  struct Trusted {};
  PsdMatrix(Matrix m, Trusted) : mat_(symmetrize(std::move(m))) {}

  Matrix mat_;
};

inline double spectral_norm(const PsdMatrix& x) { return symmetric_norm(x.mat()); }

/// Partial order on the PSD cone: X <= Y iff min eigenvalue of (Y - X) >= -tol.
inline bool psd_leq(const PsdMatrix& x, const PsdMatrix& y, double tol) {
  if (x.dim() != y.dim()) {
    throw std::invalid_argument("psd_leq: dimension mismatch");
  }
  return min_eigenvalue(y.mat() - x.mat()) >= -tol;
}

// Relative comparison tolerance at the scale of the operands.
inline double order_tol(double rel, const PsdMatrix& x, const PsdMatrix& y) {
  return rel * std::max({1.0, spectral_norm(x), spectral_norm(y)});
}

/// Per-sensor observation model y = C x + v, v ~ N(0, R) with R strictly
/// positive definite. C may be all-zero (a non-sensing agent).
struct SensorModel {
  Matrix C;
  PsdMatrix R;

  SensorModel(Matrix c, PsdMatrix r) : C(std::move(c)), R(std::move(r)) {
    if (C.rows() != R.dim()) {
      throw std::invalid_argument("SensorModel: C row count must match dim(R)");
    }
    if (min_eigenvalue(R.mat()) <= 0.0) {
      throw std::invalid_argument("SensorModel: R must be strictly positive definite");
    }
  }

  int obs_dim() const { return static_cast<int>(C.rows()); }
  bool is_blind() const { return C.isZero(0.0); }
};

/// Signal dynamics x' = F x + w, w ~ N(0, Q), initial covariance P0, plus the
/// per-sensor observation models.
struct SystemModel {
  Matrix F;
  PsdMatrix Q;
  PsdMatrix P0;
  std::vector<SensorModel> sensors;

  SystemModel(Matrix f, PsdMatrix q, PsdMatrix p0, std::vector<SensorModel> s)
      : F(std::move(f)), Q(std::move(q)), P0(std::move(p0)), sensors(std::move(s)) {
    const int m = static_cast<int>(F.rows());
    if (F.cols() != m) throw std::invalid_argument("SystemModel: F must be square");
    if (Q.dim() != m) throw std::invalid_argument("SystemModel: dim(Q) != dim(F)");
    if (P0.dim() != m) throw std::invalid_argument("SystemModel: dim(P0) != dim(F)");
    for (const auto& sensor : sensors) {
      if (sensor.C.cols() != m) {
        throw std::invalid_argument("SystemModel: sensor C column count != state dim");
      }
    }
  }

  int state_dim() const { return static_cast<int>(F.rows()); }
  int sensor_count() const { return static_cast<int>(sensors.size()); }

  // Non-degenerate process noise; several distributional results require it.
  bool has_nondegenerate_noise() const { return min_eigenvalue(Q.mat()) > 0.0; }
};

namespace detail {

// Solves S Z = B for S symmetric positive definite, declaring singularity
// when the smallest Cholesky pivot falls below 1e-12 x the largest.
inline Matrix spd_solve(const Matrix& s, const Matrix& b, const char* context) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(context) + ": matrix is not positive definite");
  }
  const Vector d = llt.matrixLLT().diagonal().cwiseAbs2();
  if (d.minCoeff() < 1e-12 * d.maxCoeff()) {
    throw NumericalError(std::string(context) + ": matrix is numerically singular");
  }
  return llt.solve(b);
}

}  // namespace detail

/// Lyapunov operator f0(X) = F X F' + Q.
inline PsdMatrix lyapunov_step(const SystemModel& model, const PsdMatrix& x) {
  if (x.dim() != model.state_dim()) {
    throw std::invalid_argument("lyapunov_step: dimension mismatch");
  }
  return PsdMatrix::trusted(model.F * x.mat() * model.F.transpose() + model.Q.mat());
}

/// Riccati operator of sensor n (0-based):
///   f_n(X) = F X F' + Q - F X C' (C X C' + R)^-1 C X F'.
/// Reduces to the Lyapunov operator when C is all-zero.
inline PsdMatrix riccati_step(const SystemModel& model, int sensor_index,
                              const PsdMatrix& x) {
  if (sensor_index < 0 || sensor_index >= model.sensor_count()) {
    throw std::invalid_argument("riccati_step: sensor index out of range");
  }
  if (x.dim() != model.state_dim()) {
    throw std::invalid_argument("riccati_step: dimension mismatch");
  }
  const SensorModel& sensor = model.sensors[sensor_index];
  if (sensor.is_blind()) return lyapunov_step(model, x);

  const Matrix cx = sensor.C * x.mat();                       // C X
  const Matrix s = symmetrize(cx * sensor.C.transpose() + sensor.R.mat());
  const Matrix gain_term = detail::spd_solve(s, cx, "riccati_step");  // S^-1 C X
  const Matrix fx = model.F * x.mat();
  return PsdMatrix::trusted(fx * model.F.transpose() + model.Q.mat() -
                            fx * sensor.C.transpose() * gain_term * model.F.transpose());
}

}  // namespace gikf

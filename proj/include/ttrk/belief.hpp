#pragma once

#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "ttrk/dynamics.hpp"
#include "ttrk/geom.hpp"
#include "ttrk/sensing.hpp"

namespace ttrk {

/// Gaussian belief over one target's [position, velocity].
struct Belief {
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Identity();
  bool operator==(const Belief&) const = default;
};

struct BeliefParams {
  double q_b = 0.5;
  double sigma0_pos = 30.0;  // m^2
  double sigma0_vel = 3.0;   // (m/s)^2
};

/// Raised when a covariance stops being positive definite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Mat4 initial_covariance(const BeliefParams& p);

Belief predict(const Belief& b, const Mat4& A, const Mat4& W);
Mat4 predict_covariance(const Mat4& cov, const Mat4& A, const Mat4& W);

/// Jacobian of range-bearing with respect to the 4-D target state.
Eigen::Matrix<double, 2, 4> obs_jacobian(const Pose2& x, const Vec2& mean_pos);

/// log det of a symmetric positive-definite matrix. Throws NumericalError otherwise.
double logdet(const Mat4& cov);

/// Joseph-form linear-Gaussian correction, symmetrized. Shared by the EKF and
/// by covariance-only rollouts; `innovation` may be zero for the latter.
template <int N, int M>
void joseph_update(Eigen::Matrix<double, N, 1>& mean, Eigen::Matrix<double, N, N>& cov,
                   const Eigen::Matrix<double, M, N>& H, const Eigen::Matrix<double, M, 1>& innovation,
                   const Eigen::Matrix<double, M, M>& R) {
  using MatN = Eigen::Matrix<double, N, N>;
  const Eigen::Matrix<double, M, M> S = H * cov * H.transpose() + R;
  const Eigen::Matrix<double, N, M> K = cov * H.transpose() * S.inverse();
  mean += K * innovation;
  const MatN I_KH = MatN::Identity() - K * H;
  MatN next = I_KH * cov * I_KH.transpose() + K * R * K.transpose();
  next = 0.5 * (next + next.transpose());
  if (!next.allFinite() || Eigen::LLT<MatN>(next).info() != Eigen::Success) {
    throw NumericalError("covariance update produced a non-SPD matrix");
  }
  cov = next;
}

/// EKF correction with a range-bearing measurement taken from pose x.
Belief update(const Belief& b, const Measurement& z, const Pose2& x, const Mat2& V);

/// Covariance after a (measurement-independent) EKF correction at the mean.
Mat4 update_covariance(const Mat4& cov, const Pose2& x, const Vec2& mean_pos, const Mat2& V);

}  // namespace ttrk

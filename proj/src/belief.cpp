#include "ttrk/belief.hpp"

#include <cmath>

namespace ttrk {

Mat4 initial_covariance(const BeliefParams& p) {
  Mat4 c = Mat4::Zero();
  c(0, 0) = c(1, 1) = p.sigma0_pos;
  c(2, 2) = c(3, 3) = p.sigma0_vel;
  return c;
}

Mat4 predict_covariance(const Mat4& cov, const Mat4& A, const Mat4& W) {
  Mat4 next = A * cov * A.transpose() + W;
  return 0.5 * (next + next.transpose());
}

Belief predict(const Belief& b, const Mat4& A, const Mat4& W) {
  return {A * b.mean, predict_covariance(b.cov, A, W)};
}

Eigen::Matrix<double, 2, 4> obs_jacobian(const Pose2& x, const Vec2& mean_pos) {
  const RangeBearing rb = range_bearing(x, mean_pos);
  const double bearing = x.theta + rb.alpha;
  Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
  H(0, 0) = (mean_pos.x() - x.x1) / rb.r;
  H(0, 1) = (mean_pos.y() - x.x2) / rb.r;
  H(1, 0) = -std::sin(bearing) / rb.r;
  H(1, 1) = std::cos(bearing) / rb.r;
  return H;
}

double logdet(const Mat4& cov) {
  const Eigen::LLT<Mat4> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("logdet of a non-SPD matrix");
  const Mat4 L = llt.matrixL();
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += std::log(L(i, i));
  return 2.0 * s;
}

Belief update(const Belief& b, const Measurement& z, const Pose2& x, const Mat2& V) {
  const Vec2 pos = b.mean.head<2>();
  const RangeBearing predicted = range_bearing(x, pos);
  const auto H = obs_jacobian(x, pos);
  const Eigen::Vector2d innovation{z.r - predicted.r, wrap_angle(z.alpha - predicted.alpha)};
  Belief out = b;
  joseph_update<4, 2>(out.mean, out.cov, H, innovation, V);
  return out;
}

Mat4 update_covariance(const Mat4& cov, const Pose2& x, const Vec2& mean_pos, const Mat2& V) {
  Vec4 dummy = Vec4::Zero();
  Mat4 out = cov;
  joseph_update<4, 2>(dummy, out, obs_jacobian(x, mean_pos), Eigen::Vector2d::Zero(), V);
  return out;
}

}  // namespace ttrk

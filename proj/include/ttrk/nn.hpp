#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "ttrk/rng.hpp"

namespace ttrk {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  Matrix value;
  Matrix grad;
};

/// Valid-padding 2-D convolution. Activations are column-per-sample with
/// (channel, row, col) ordering inside a column.
class Conv2d {
 public:
  Conv2d(int in_channels, int in_size, int out_channels, int kernel, int stride);

  int out_size() const { return out_size_; }
  int in_features() const { return in_c_ * in_size_ * in_size_; }
  int out_features() const { return out_c_ * out_size_ * out_size_; }

  Matrix forward(const Matrix& x);
  /// Accumulates parameter gradients; returns the input gradient.
  Matrix backward(const Matrix& dy);

  Parameter weight;  // out_c x (in_c * k * k)
  Parameter bias;    // out_c x 1

 private:
  void im2col(const double* x, Matrix& col) const;
  void col2im(const Matrix& col, double* dx) const;

  int in_c_, in_size_, out_c_, k_, stride_, out_size_;
  std::vector<Matrix> cols_;
};

class Dense {
 public:
  Dense(int in, int out);

  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);

  Parameter weight;  // out x in
  Parameter bias;    // out x 1

 private:
  Matrix x_;
};

class ReLU {
 public:
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy) const;

 private:
  Matrix mask_;
};

struct NetworkShape {
  int in_channels = 5;
  int in_size = 25;
  int conv1_filters = 20;
  int conv1_kernel = 4;
  int conv1_stride = 3;
  int conv2_filters = 40;
  int conv2_kernel = 3;
  int conv2_stride = 2;
  int phi_dim = 8;
  std::vector<int> hidden{512, 512, 512};
  int n_actions = 12;

  /// Layer sizes from the paper: 20@4x4/3, 40@3x3/2, 3x512.
  static NetworkShape paper(int phi_dim);
  /// Smaller variant for single-core training: 8 and 16 filters, 2x128.
  static NetworkShape desk(int phi_dim);
  /// Very small variant for gradient checks.
  static NetworkShape tiny();
  static NetworkShape by_name(const std::string& profile, int phi_dim);

  bool operator==(const NetworkShape&) const = default;
};

nlohmann::json to_json(const NetworkShape& s);
NetworkShape network_shape_from_json(const nlohmann::json& j);

/// Conv-conv-flatten, concatenated with phi, then dense layers and a linear head.
class QNetwork {
 public:
  explicit QNetwork(const NetworkShape& shape);

  const NetworkShape& shape() const { return shape_; }
  int map_features() const { return conv1_.in_features(); }
  int conv_features() const { return conv2_.out_features(); }

  /// maps: map_features x B, phi: phi_dim x B. Returns n_actions x B.
  Matrix forward(const Matrix& maps, const Matrix& phi);
  /// Back-propagates dL/dQ from the most recent forward call.
  void backward(const Matrix& dq);

  void init(Rng& rng);
  void zero_grad();
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;

  /// Copies parameter values from another network of the same shape.
  void copy_from(const QNetwork& other);
  bool all_finite() const;

 private:
  NetworkShape shape_;
  Conv2d conv1_;
  ReLU relu1_;
  Conv2d conv2_;
  ReLU relu2_;
  std::vector<Dense> dense_;
  std::vector<ReLU> relus_;
  Dense head_;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const QNetwork& net, AdamConfig cfg);

  void step(QNetwork& net);
  std::int64_t t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  std::vector<Matrix>& m() { return m_; }
  std::vector<Matrix>& v() { return v_; }
  const std::vector<Matrix>& m() const { return m_; }
  const std::vector<Matrix>& v() const { return v_; }
  void set_t(std::int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace ttrk

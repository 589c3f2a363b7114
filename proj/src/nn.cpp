#include "ttrk/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace ttrk {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rows(const Matrix& x, Eigen::Index rows, const char* who) {
  if (x.rows() != rows) {
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(rows) +
                                " input rows, got " + std::to_string(x.rows()));
  }
}

}  // namespace

Conv2d::Conv2d(int in_channels, int in_size, int out_channels, int kernel, int stride)
    : in_c_(in_channels), in_size_(in_size), out_c_(out_channels), k_(kernel), stride_(stride) {
  if (in_size < kernel || stride < 1) throw std::invalid_argument("Conv2d: bad geometry");
  out_size_ = (in_size - kernel) / stride + 1;
  weight.value = Matrix::Zero(out_c_, in_c_ * k_ * k_);
  weight.grad = Matrix::Zero(out_c_, in_c_ * k_ * k_);
  bias.value = Matrix::Zero(out_c_, 1);
  bias.grad = Matrix::Zero(out_c_, 1);
}

void Conv2d::im2col(const double* x, Matrix& col) const {
  const int P = out_size_ * out_size_;
  col.resize(in_c_ * k_ * k_, P);
  for (int c = 0; c < in_c_; ++c) {
    for (int ki = 0; ki < k_; ++ki) {
      for (int kj = 0; kj < k_; ++kj) {
        const int row = (c * k_ + ki) * k_ + kj;
        for (int oi = 0; oi < out_size_; ++oi) {
          const double* src = x + (c * in_size_ + oi * stride_ + ki) * in_size_ + kj;
          for (int oj = 0; oj < out_size_; ++oj) col(row, oi * out_size_ + oj) = src[oj * stride_];
        }
      }
    }
  }
}

void Conv2d::col2im(const Matrix& col, double* dx) const {
  for (int c = 0; c < in_c_; ++c) {
    for (int ki = 0; ki < k_; ++ki) {
      for (int kj = 0; kj < k_; ++kj) {
        const int row = (c * k_ + ki) * k_ + kj;
        for (int oi = 0; oi < out_size_; ++oi) {
          double* dst = dx + (c * in_size_ + oi * stride_ + ki) * in_size_ + kj;
          for (int oj = 0; oj < out_size_; ++oj) dst[oj * stride_] += col(row, oi * out_size_ + oj);
        }
      }
    }
  }
}

Matrix Conv2d::forward(const Matrix& x) {
  require_rows(x, in_features(), "Conv2d");
  const Eigen::Index B = x.cols();
  const int P = out_size_ * out_size_;
  cols_.resize(B);
  Matrix y(out_features(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    im2col(x.col(b).data(), cols_[b]);
    Eigen::Map<RowMajor> yb(y.col(b).data(), out_c_, P);
    yb.noalias() = weight.value * cols_[b];
    yb.colwise() += bias.value.col(0);
  }
  return y;
}

Matrix Conv2d::backward(const Matrix& dy) {
  require_rows(dy, out_features(), "Conv2d backward");
  const Eigen::Index B = dy.cols();
  const int P = out_size_ * out_size_;
  Matrix dx = Matrix::Zero(in_features(), B);
  Matrix dcol;
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::Map<const RowMajor> dyb(dy.col(b).data(), out_c_, P);
    weight.grad.noalias() += dyb * cols_[b].transpose();
    bias.grad += dyb.rowwise().sum();
    dcol.noalias() = weight.value.transpose() * dyb;
    col2im(dcol, dx.col(b).data());
  }
  return dx;
}

Dense::Dense(int in, int out) {
  weight.value = Matrix::Zero(out, in);
  weight.grad = Matrix::Zero(out, in);
  bias.value = Matrix::Zero(out, 1);
  bias.grad = Matrix::Zero(out, 1);
}

Matrix Dense::forward(const Matrix& x) {
  require_rows(x, weight.value.cols(), "Dense");
  x_ = x;
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Dense::backward(const Matrix& dy) {
  weight.grad.noalias() += dy * x_.transpose();
  bias.grad += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

Matrix ReLU::forward(const Matrix& x) {
  mask_ = (x.array() > 0.0).cast<double>();
  return x.cwiseProduct(mask_);
}

Matrix ReLU::backward(const Matrix& dy) const { return dy.cwiseProduct(mask_); }

NetworkShape NetworkShape::paper(int phi_dim) {
  NetworkShape s;
  s.phi_dim = phi_dim;
  return s;
}

NetworkShape NetworkShape::desk(int phi_dim) {
  NetworkShape s;
  s.conv1_filters = 8;
  s.conv2_filters = 16;
  s.hidden = {128, 128};
  s.phi_dim = phi_dim;
  return s;
}

NetworkShape NetworkShape::tiny() {
  NetworkShape s;
  s.in_channels = 2;
  s.in_size = 10;  // 10 -> 3 -> 1
  s.conv1_filters = 3;
  s.conv2_filters = 4;
  s.hidden = {6, 5};
  s.phi_dim = 3;
  return s;
}

NetworkShape NetworkShape::by_name(const std::string& profile, int phi_dim) {
  if (profile == "paper") return paper(phi_dim);
  if (profile == "desk") return desk(phi_dim);
  throw std::invalid_argument("unknown network profile '" + profile + "'");
}

nlohmann::json to_json(const NetworkShape& s) {
  return {{"in_channels", s.in_channels},     {"in_size", s.in_size},
          {"conv1_filters", s.conv1_filters}, {"conv1_kernel", s.conv1_kernel},
          {"conv1_stride", s.conv1_stride},   {"conv2_filters", s.conv2_filters},
          {"conv2_kernel", s.conv2_kernel},   {"conv2_stride", s.conv2_stride},
          {"phi_dim", s.phi_dim},             {"hidden", s.hidden},
          {"n_actions", s.n_actions}};
}

NetworkShape network_shape_from_json(const nlohmann::json& j) {
  NetworkShape s;
  s.in_channels = j.at("in_channels").get<int>();
  s.in_size = j.at("in_size").get<int>();
  s.conv1_filters = j.at("conv1_filters").get<int>();
  s.conv1_kernel = j.at("conv1_kernel").get<int>();
  s.conv1_stride = j.at("conv1_stride").get<int>();
  s.conv2_filters = j.at("conv2_filters").get<int>();
  s.conv2_kernel = j.at("conv2_kernel").get<int>();
  s.conv2_stride = j.at("conv2_stride").get<int>();
  s.phi_dim = j.at("phi_dim").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.n_actions = j.at("n_actions").get<int>();
  return s;
}

QNetwork::QNetwork(const NetworkShape& shape)
    : shape_(shape),
      conv1_(shape.in_channels, shape.in_size, shape.conv1_filters, shape.conv1_kernel,
             shape.conv1_stride),
      conv2_(shape.conv1_filters, conv1_.out_size(), shape.conv2_filters, shape.conv2_kernel,
             shape.conv2_stride),
      head_(shape.hidden.empty() ? conv2_.out_features() + shape.phi_dim : shape.hidden.back(),
            shape.n_actions) {
  int in = conv2_.out_features() + shape.phi_dim;
  for (int h : shape.hidden) {
    dense_.emplace_back(in, h);
    in = h;
  }
  relus_.resize(dense_.size());
}

Matrix QNetwork::forward(const Matrix& maps, const Matrix& phi) {
  require_rows(phi, shape_.phi_dim, "QNetwork phi");
  if (maps.cols() != phi.cols()) throw std::invalid_argument("QNetwork: batch size mismatch");
  const Matrix f = relu2_.forward(conv2_.forward(relu1_.forward(conv1_.forward(maps))));
  Matrix h(f.rows() + phi.rows(), f.cols());
  h << f, phi;
  for (std::size_t i = 0; i < dense_.size(); ++i) h = relus_[i].forward(dense_[i].forward(h));
  return head_.forward(h);
}

void QNetwork::backward(const Matrix& dq) {
  Matrix d = head_.backward(dq);
  for (std::size_t i = dense_.size(); i-- > 0;) d = dense_[i].backward(relus_[i].backward(d));
  const Matrix df = d.topRows(conv2_.out_features());
  conv1_.backward(relu1_.backward(conv2_.backward(relu2_.backward(df))));
}

std::vector<Parameter*> QNetwork::parameters() {
  std::vector<Parameter*> p{&conv1_.weight, &conv1_.bias, &conv2_.weight, &conv2_.bias};
  for (auto& d : dense_) {
    p.push_back(&d.weight);
    p.push_back(&d.bias);
  }
  p.push_back(&head_.weight);
  p.push_back(&head_.bias);
  return p;
}

std::vector<const Parameter*> QNetwork::parameters() const {
  auto mutable_params = const_cast<QNetwork*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void QNetwork::init(Rng& rng) {
  // He-normal weights, zero biases. parameters() alternates weight, bias.
  auto params = parameters();
  for (std::size_t i = 0; i < params.size(); i += 2) {
    Matrix& w = params[i]->value;
    const double sd = std::sqrt(2.0 / static_cast<double>(w.cols()));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = sd * rng.normal();
    params[i + 1]->value.setZero();
  }
}

void QNetwork::zero_grad() {
  for (auto* p : parameters()) p->grad.setZero();
}

void QNetwork::copy_from(const QNetwork& other) {
  if (!(other.shape_ == shape_)) throw std::invalid_argument("copy_from: shape mismatch");
  auto dst = parameters();
  auto src = other.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
}

bool QNetwork::all_finite() const {
  for (const auto* p : parameters()) {
    if (!p->value.allFinite()) return false;
  }
  return true;
}

Adam::Adam(const QNetwork& net, AdamConfig cfg) : cfg_(cfg) {
  for (const auto* p : net.parameters()) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(QNetwork& net) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = params[i]->grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    params[i]->value.array() -=
        cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

}  // namespace ttrk

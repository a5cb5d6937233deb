#include "pathfinder/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace pathfinder::nn {

namespace {

Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

Matrix activate(const Matrix& a, Activation act) {
  switch (act) {
    case Activation::Relu:
      return a.cwiseMax(0.0);
    case Activation::Sigmoid:
      return sigmoid(a);
    case Activation::Linear:
      break;
  }
  return a;
}

// d(out)/d(pre-activation) applied to an upstream gradient.
Matrix activation_grad(const Matrix& pre, const Matrix& post, const Matrix& upstream, Activation act) {
  switch (act) {
    case Activation::Relu:
      return (pre.array() > 0.0).cast<double>().matrix().cwiseProduct(upstream);
    case Activation::Sigmoid:
      return (post.array() * (1.0 - post.array()) * upstream.array()).matrix();
    case Activation::Linear:
      break;
  }
  return upstream;
}

Matrix affine(const Matrix& w, const Matrix& b, const Matrix& x) {
  Matrix out = w * x;
  out.colwise() += b.col(0);
  return out;
}

void check_rows(const Matrix& m, Eigen::Index rows, const char* what) {
  if (m.rows() != rows)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + " rows, got " +
                     std::to_string(m.rows()));
}

void check_same(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string(what) + ": shape mismatch");
}

ParamList zeros_like(const ParamList& params) {
  ParamList out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Matrix::Zero(p.rows(), p.cols()));
  return out;
}

}  // namespace

ParamList snapshot(const TensorRefs& tensors) {
  ParamList out;
  out.reserve(tensors.size());
  for (const auto* t : tensors) out.push_back(*t);
  return out;
}

void restore(const TensorRefs& tensors, const ParamList& values) {
  if (tensors.size() != values.size()) throw ShapeError("restore: tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    check_same(*tensors[i], values[i], "restore");
    *tensors[i] = values[i];
  }
}

std::size_t parameter_count(const TensorRefs& tensors) {
  std::size_t n = 0;
  for (const auto* t : tensors) n += static_cast<std::size_t>(t->size());
  return n;
}

void init_uniform(Matrix& m, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

// --- Mlp ---

Mlp::Mlp(Eigen::Index in, Eigen::Index hidden1, Eigen::Index hidden2, Eigen::Index out, Activation output,
         std::mt19937_64& rng)
    : output_(output) {
  const Eigen::Index shapes[3][2] = {{hidden1, in}, {hidden2, hidden1}, {out, hidden2}};
  for (const auto& s : shapes) {
    Matrix w(s[0], s[1]), b(s[0], 1);
    init_uniform(w, s[1], rng);
    init_uniform(b, s[1], rng);
    params_.push_back(std::move(w));
    params_.push_back(std::move(b));
  }
  grads_ = zeros_like(params_);
}

const Matrix& Mlp::forward(const Matrix& x) {
  check_rows(x, input_size(), "Mlp::forward");
  x_ = x;
  a1_ = affine(params_[0], params_[1], x_);
  h1_ = a1_.cwiseMax(0.0);
  a2_ = affine(params_[2], params_[3], h1_);
  h2_ = a2_.cwiseMax(0.0);
  a3_ = affine(params_[4], params_[5], h2_);
  out_ = activate(a3_, output_);
  cached_ = true;
  return out_;
}

Matrix Mlp::backward(const Matrix& grad_out) {
  if (!cached_) throw NoForwardPass();
  check_same(grad_out, out_, "Mlp::backward");
  return backward_preactivation(activation_grad(a3_, out_, grad_out, output_));
}

Matrix Mlp::backward_preactivation(const Matrix& d3) {
  if (!cached_) throw NoForwardPass();
  check_same(d3, out_, "Mlp::backward_preactivation");
  grads_[4] = d3 * h2_.transpose();
  grads_[5] = d3.rowwise().sum();
  const Matrix d2 = activation_grad(a2_, h2_, params_[4].transpose() * d3, Activation::Relu);
  grads_[2] = d2 * h1_.transpose();
  grads_[3] = d2.rowwise().sum();
  const Matrix d1 = activation_grad(a1_, h1_, params_[2].transpose() * d2, Activation::Relu);
  grads_[0] = d1 * x_.transpose();
  grads_[1] = d1.rowwise().sum();
  return params_[0].transpose() * d1;
}

// --- GruCell ---

GruCell::GruCell(Eigen::Index in, Eigen::Index hidden, std::mt19937_64& rng) {
  for (int gate = 0; gate < 3; ++gate) {
    Matrix w(hidden, in), u(hidden, hidden), b(hidden, 1);
    init_uniform(w, in, rng);
    init_uniform(u, hidden, rng);
    init_uniform(b, hidden, rng);
    params_.push_back(std::move(w));
    params_.push_back(std::move(u));
    params_.push_back(std::move(b));
  }
  grads_ = zeros_like(params_);
}

const Matrix& GruCell::forward(const Matrix& x, const Matrix& h) {
  check_rows(x, input_size(), "GruCell::forward(x)");
  check_rows(h, hidden_size(), "GruCell::forward(h)");
  if (x.cols() != h.cols()) throw ShapeError("GruCell::forward: batch mismatch");
  const auto& p = params_;
  x_ = x;
  h_ = h;
  Matrix az = p[0] * x + p[1] * h;
  az.colwise() += p[2].col(0);
  z_ = sigmoid(az);
  Matrix ar = p[3] * x + p[4] * h;
  ar.colwise() += p[5].col(0);
  r_ = sigmoid(ar);
  rh_ = r_.cwiseProduct(h);
  Matrix an = p[6] * x + p[7] * rh_;
  an.colwise() += p[8].col(0);
  n_ = an.array().tanh().matrix();
  h_new_ = ((1.0 - z_.array()) * n_.array() + z_.array() * h.array()).matrix();
  cached_ = true;
  return h_new_;
}

std::pair<Matrix, Matrix> GruCell::backward(const Matrix& grad_h_new) {
  if (!cached_) throw NoForwardPass();
  check_same(grad_h_new, h_new_, "GruCell::backward");
  const auto& p = params_;
  const auto g = grad_h_new.array();
  const Matrix dn = (g * (1.0 - z_.array())).matrix();
  const Matrix dz = (g * (h_.array() - n_.array())).matrix();
  Matrix dh = (g * z_.array()).matrix();

  const Matrix dan = (dn.array() * (1.0 - n_.array().square())).matrix();
  grads_[6] = dan * x_.transpose();
  grads_[7] = dan * rh_.transpose();
  grads_[8] = dan.rowwise().sum();
  const Matrix drh = p[7].transpose() * dan;
  dh += drh.cwiseProduct(r_);
  const Matrix dr = drh.cwiseProduct(h_);

  const Matrix daz = (dz.array() * z_.array() * (1.0 - z_.array())).matrix();
  const Matrix dar = (dr.array() * r_.array() * (1.0 - r_.array())).matrix();
  grads_[0] = daz * x_.transpose();
  grads_[1] = daz * h_.transpose();
  grads_[2] = daz.rowwise().sum();
  grads_[3] = dar * x_.transpose();
  grads_[4] = dar * h_.transpose();
  grads_[5] = dar.rowwise().sum();

  Matrix dx = p[0].transpose() * daz + p[3].transpose() * dar + p[6].transpose() * dan;
  dh += p[1].transpose() * daz + p[4].transpose() * dar;
  return {std::move(dx), std::move(dh)};
}

// --- PolicyNet ---

PolicyNet::PolicyNet(Eigen::Index state_size, Eigen::Index action_count, std::mt19937_64& rng)
    : gru_(state_size, kRecurrentUnits, rng),
      head_(kRecurrentUnits, kDenseUnits, kDenseUnits, action_count, Activation::Sigmoid, rng) {}

PolicyNet::Output PolicyNet::forward(const Matrix& states, const Matrix& hidden) {
  Output out;
  out.hidden = gru_.forward(states, hidden);
  out.scores = head_.forward(out.hidden);
  return out;
}

Matrix PolicyNet::backward(const Matrix& grad_scores, const Matrix* grad_hidden) {
  return finish_backward(head_.backward(grad_scores), grad_hidden);
}

Matrix PolicyNet::backward_logits(const Matrix& grad_logits, const Matrix* grad_hidden) {
  return finish_backward(head_.backward_preactivation(grad_logits), grad_hidden);
}

Matrix PolicyNet::finish_backward(Matrix dh, const Matrix* grad_hidden) {
  if (grad_hidden) {
    check_same(*grad_hidden, dh, "PolicyNet::backward");
    dh += *grad_hidden;
  }
  return gru_.backward(dh).second;
}

TensorRefs PolicyNet::tensors() {
  auto out = gru_.tensors();
  for (auto* t : head_.tensors()) out.push_back(t);
  return out;
}

TensorRefs PolicyNet::grad_tensors() {
  auto out = gru_.grad_tensors();
  for (auto* t : head_.grad_tensors()) out.push_back(t);
  return out;
}

// --- CriticNet ---

CriticNet::CriticNet(Eigen::Index state_size, Eigen::Index action_size, std::mt19937_64& rng)
    : net_(state_size + action_size, kDenseUnits, kDenseUnits, 1, Activation::Linear, rng), state_size_(state_size) {}

Matrix CriticNet::forward(const Matrix& states, const Matrix& actions) {
  check_rows(states, state_size_, "CriticNet::forward(states)");
  check_rows(actions, net_.input_size() - state_size_, "CriticNet::forward(actions)");
  if (states.cols() != actions.cols()) throw ShapeError("CriticNet::forward: batch mismatch");
  Matrix joint(states.rows() + actions.rows(), states.cols());
  joint << states, actions;
  return net_.forward(joint);
}

Matrix CriticNet::backward(const Matrix& grad_q) {
  const Matrix dx = net_.backward(grad_q);
  return dx.bottomRows(dx.rows() - state_size_);
}

Vector CriticNet::one_hot_values(const Matrix& states,
                                 const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs) const {
  check_rows(states, state_size_, "CriticNet::one_hot_values");
  const auto& p = net_.params();
  const auto actions = p[0].cols() - state_size_;
  const Matrix base = affine(p[0].leftCols(state_size_), p[1], states);
  Matrix h1(p[0].rows(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [j, i] = pairs[k];
    if (j < 0 || j >= states.cols() || i < 0 || i >= actions) throw ShapeError("one_hot_values: pair out of range");
    h1.col(static_cast<Eigen::Index>(k)) = (base.col(j) + p[0].col(state_size_ + i)).cwiseMax(0.0);
  }
  const Matrix h2 = affine(p[2], p[3], h1).cwiseMax(0.0);
  return affine(p[4], p[5], h2).row(0).transpose();
}

// --- training helpers ---

void soft_update(const TensorRefs& target, const TensorRefs& online, double tau) {
  if (target.size() != online.size()) throw ShapeError("soft_update: tensor count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    check_same(*target[i], *online[i], "soft_update");
    *target[i] = tau * *online[i] + (1.0 - tau) * *target[i];
  }
}

void soft_update(ParamList& target, const ParamList& online, double tau) {
  if (target.size() != online.size()) throw ShapeError("soft_update: tensor count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    check_same(target[i], online[i], "soft_update");
    target[i] = tau * online[i] + (1.0 - tau) * target[i];
  }
}

double mse(const Matrix& predictions, const Vector& targets) {
  if (predictions.rows() != 1 || predictions.cols() != targets.size()) throw ShapeError("mse: shape mismatch");
  if (targets.size() == 0) return 0.0;
  return (predictions.row(0).transpose() - targets).squaredNorm() / static_cast<double>(targets.size());
}

double critic_loss(CriticNet& critic, const Matrix& states, const Matrix& actions, const Vector& targets) {
  return mse(critic.forward(states, actions), targets);
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void Adam::step(const TensorRefs& params, const TensorRefs& grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam::step: tensor count mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam::step: parameter set changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    check_same(*params[i], *grads[i], "Adam::step");
    check_same(*params[i], m_[i], "Adam::step");
    const auto& g = grads[i]->array();
    m_[i].array() = beta1_ * m_[i].array() + (1.0 - beta1_) * g;
    v_[i].array() = beta2_ * v_[i].array() + (1.0 - beta2_) * g.square();
    params[i]->array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

// --- checkpoints ---

namespace {

constexpr char kMagic[8] = {'P', 'F', 'C', 'K', 'P', 'T', '0', '1'};

template <class T>
void put_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamList& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.rows()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.cols()));
  }
  for (const auto& p : params)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      for (Eigen::Index i = 0; i < p.rows(); ++i) put_le<double>(os, p(i, j));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

ParamList load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a checkpoint: " + path);
  const auto count = get_le<std::uint32_t>(is);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(count);
  for (auto& s : shapes) {
    s.first = get_le<std::uint32_t>(is);
    s.second = get_le<std::uint32_t>(is);
  }
  ParamList out;
  out.reserve(count);
  for (const auto& [rows, cols] : shapes) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = get_le<double>(is);
    out.push_back(std::move(m));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes in checkpoint " + path);
  return out;
}

}  // namespace pathfinder::nn

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pathfinder::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Parameter values of one network in declaration order (snapshots, checkpoints).
using ParamList = std::vector<Matrix>;
// Live views of a network's tensors in the same order. Valid while the
// network is alive and not moved.
using TensorRefs = std::vector<Matrix*>;

ParamList snapshot(const TensorRefs& tensors);
void restore(const TensorRefs& tensors, const ParamList& values);
std::size_t parameter_count(const TensorRefs& tensors);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoForwardPass : public std::logic_error {
 public:
  NoForwardPass() : std::logic_error("backward called without a recorded forward pass") {}
};

inline TensorRefs refs(ParamList& list) {
  TensorRefs out;
  for (auto& m : list) out.push_back(&m);
  return out;
}

enum class Activation : std::uint8_t { Linear, Relu, Sigmoid };

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Matrix& m, Eigen::Index fan_in, std::mt19937_64& rng);

// Three affine layers with ReLU on the two hidden layers. Inputs and outputs
// are column-batched: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  Mlp(Eigen::Index in, Eigen::Index hidden1, Eigen::Index hidden2, Eigen::Index out, Activation output,
      std::mt19937_64& rng);

  const Matrix& forward(const Matrix& x);
  // Fills grad_tensors() and returns d(loss)/d(input).
  Matrix backward(const Matrix& grad_out);
  // Same, given the gradient with respect to the output layer's pre-activation.
  Matrix backward_preactivation(const Matrix& grad_pre);

  TensorRefs tensors() { return refs(params_); }
  TensorRefs grad_tensors() { return refs(grads_); }
  const ParamList& params() const { return params_; }
  Eigen::Index input_size() const { return params_[0].cols(); }
  Eigen::Index output_size() const { return params_[4].rows(); }

 private:
  ParamList params_;  // W1 b1 W2 b2 W3 b3
  ParamList grads_;
  Activation output_ = Activation::Linear;
  bool cached_ = false;
  Matrix x_, a1_, h1_, a2_, h2_, a3_, out_;
};

// Gated recurrent unit, single time step:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * n + z * h
class GruCell {
 public:
  GruCell() = default;
  GruCell(Eigen::Index in, Eigen::Index hidden, std::mt19937_64& rng);

  const Matrix& forward(const Matrix& x, const Matrix& h);
  // Returns (d/dx, d/dh) and fills grad_tensors().
  std::pair<Matrix, Matrix> backward(const Matrix& grad_h_new);

  TensorRefs tensors() { return refs(params_); }
  TensorRefs grad_tensors() { return refs(grads_); }
  Eigen::Index input_size() const { return params_[0].cols(); }
  Eigen::Index hidden_size() const { return params_[0].rows(); }

 private:
  ParamList params_;  // Wz Uz bz Wr Ur br Wn Un bn
  ParamList grads_;
  bool cached_ = false;
  Matrix x_, h_, z_, r_, rh_, n_, h_new_;
};

inline constexpr Eigen::Index kRecurrentUnits = 32;
inline constexpr Eigen::Index kDenseUnits = 48;

// Actor: state -> GRU(32) -> 48 ReLU -> 48 ReLU -> sigmoid score per action.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(Eigen::Index state_size, Eigen::Index action_count, std::mt19937_64& rng);

  struct Output {
    Matrix scores;  // actions x batch, in (0, 1)
    Matrix hidden;  // 32 x batch
  };
  Output forward(const Matrix& states, const Matrix& hidden);
  // Gradients of a loss that depends on the scores (and optionally on the new
  // hidden state). Returns d/d(previous hidden).
  Matrix backward(const Matrix& grad_scores, const Matrix* grad_hidden = nullptr);
  // Same, with the gradient taken with respect to the pre-sigmoid logits.
  Matrix backward_logits(const Matrix& grad_logits, const Matrix* grad_hidden = nullptr);

  // GRU tensors followed by dense tensors.
  TensorRefs tensors();
  TensorRefs grad_tensors();

  Eigen::Index state_size() const { return gru_.input_size(); }
  Eigen::Index action_count() const { return head_.output_size(); }
  Matrix initial_hidden(Eigen::Index batch = 1) const { return Matrix::Zero(kRecurrentUnits, batch); }

  GruCell& gru() { return gru_; }
  Mlp& head() { return head_; }

 private:
  Matrix finish_backward(Matrix grad_head_input, const Matrix* grad_hidden);

  GruCell gru_;
  Mlp head_;
};

// Critic: [state; action] -> 48 ReLU -> 48 ReLU -> linear scalar Q.
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(Eigen::Index state_size, Eigen::Index action_size, std::mt19937_64& rng);

  // Returns 1 x batch.
  Matrix forward(const Matrix& states, const Matrix& actions);
  // Returns d/d(actions) and fills grad_tensors().
  Matrix backward(const Matrix& grad_q);

  // Q(states.col(j), e_i) for each (j, i) pair, where e_i is the i-th one-hot
  // action. Does not touch the recorded forward pass.
  Vector one_hot_values(const Matrix& states, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs) const;

  TensorRefs tensors() { return net_.tensors(); }
  TensorRefs grad_tensors() { return net_.grad_tensors(); }
  Eigen::Index state_size() const { return state_size_; }
  const Mlp& network() const { return net_; }

 private:
  Mlp net_;
  Eigen::Index state_size_ = 0;
};

// target <- tau * online + (1 - tau) * target, tensor by tensor.
void soft_update(const TensorRefs& target, const TensorRefs& online, double tau);
void soft_update(ParamList& target, const ParamList& online, double tau);

// (1/m) sum_j (y_j - q_j)^2
double mse(const Matrix& predictions, const Vector& targets);
// Evaluates the critic on the batch and returns the mean squared TD error.
double critic_loss(CriticNet& critic, const Matrix& states, const Matrix& actions, const Vector& targets);

// Adaptive-moment optimizer; moment state is keyed by tensor position.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(const TensorRefs& params, const TensorRefs& grads);
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  ParamList m_, v_;
};

// Flat binary checkpoint: "PFCKPT01", u32 tensor count, (u32 rows, u32 cols)
// per tensor, then every value as a little-endian IEEE-754 double in order.
void save_checkpoint(const std::string& path, const ParamList& params);
ParamList load_checkpoint(const std::string& path);

}  // namespace pathfinder::nn

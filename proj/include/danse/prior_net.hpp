#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace danse::prior_net {

struct Dims {
  int n = 2;   // measurement (input) dim
  int h = 30;  // GRU hidden size
  int m = 2;   // state (output) dim
  int ff = 32; // head hidden layer size

  bool operator==(const Dims&) const = default;
};

struct TensorRef {
  const char* name;
  double* data;
  long size;
  long rows;
  long cols;  // 1 for vectors
};

/// GRU weights, learned initial hidden state, and the two feed-forward
/// heads producing the prior mean and (pre-softplus) variance.
struct PriorNetParams {
  Eigen::MatrixXd Wz, Wr, Wh;  // h x n
  Eigen::MatrixXd Uz, Ur, Uh;  // h x h
  Eigen::VectorXd bz, br, bh;  // h
  Eigen::VectorXd h0;          // h
  Eigen::MatrixXd mean_W1;     // ff x h
  Eigen::VectorXd mean_b1;     // ff
  Eigen::MatrixXd mean_W2;     // m x ff
  Eigen::VectorXd mean_b2;     // m
  Eigen::MatrixXd var_W1;      // ff x h
  Eigen::VectorXd var_b1;      // ff
  Eigen::MatrixXd var_W2;      // m x ff
  Eigen::VectorXd var_b2;      // m

  static PriorNetParams zeros(const Dims& d);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases and h0.
  static PriorNetParams init(const Dims& d, std::uint64_t seed);

  Dims dims() const;
  std::vector<TensorRef> tensors();
  std::vector<TensorRef> tensors() const;

  // Flat-vector style helpers used by the optimizer.
  void axpy(double alpha, const PriorNetParams& other);
  void scale(double alpha);
  double squared_norm() const;
};

/// Forward trace of one trajectory: the per-step priors plus everything
/// the backward pass needs.
struct PriorSequence {
  Eigen::MatrixXd means;  // T x m
  Eigen::MatrixXd vars;   // T x m, softplus-floored, all >= 1e-6

  // trace
  Eigen::MatrixXd inputs;   // T x n (measurements fed to the GRU)
  Eigen::MatrixXd hidden;   // h x T; column t-1 is the state read by prior t
  Eigen::MatrixXd gate_z, gate_r, cand;  // h x (T-1)
  Eigen::MatrixXd u_mean, u_var;         // ff x T (head hidden activations)
  Eigen::MatrixXd var_pre;               // m x T (pre-softplus)

  int length() const { return static_cast<int>(means.rows()); }
};

constexpr double kVarFloor = 1e-6;

/// One GRU cell update: z/r gates, candidate, convex blend.
Eigen::VectorXd gru_step(const Eigen::VectorXd& h, const Eigen::VectorXd& y,
                         const PriorNetParams& p);

/// Causal prior sequence: the prior at step t depends on y_1..y_{t-1}
/// only; the t=1 prior reads the learned initial hidden state.
PriorSequence priors_forward(const Eigen::MatrixXd& y,
                             const PriorNetParams& p);

/// Exact reverse-mode gradient through heads, softplus and the unrolled
/// GRU, given dLoss/d(mean_t) and dLoss/d(var_t).
PriorNetParams priors_backward(const PriorSequence& seq,
                               const Eigen::MatrixXd& grad_means,
                               const Eigen::MatrixXd& grad_vars,
                               const PriorNetParams& p);

}  // namespace danse::prior_net

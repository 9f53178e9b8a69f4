#pragma once

#include "danse/gauss.hpp"
#include "danse/prior_net.hpp"
#include "danse/ssm.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace danse::learn {

struct TrainConfig {
  int batch_size = 64;
  int max_epochs = 2000;
  double lr0 = 1e-2;          // 5e-3 for supervised
  double lr_decay = 0.9;      // applied every max_epochs/6 epochs
  double weight_decay = 0.0;  // lambda of the l2 penalty
  int patience = 50;          // early-stop epochs without improvement
  double min_delta = 1e-4;    // required absolute improvement
  double val_fraction = 0.1;
  double clip_norm = 10.0;    // global gradient-norm clip
  std::uint64_t seed = 0;

  double lr_at(int epoch) const;
};

enum class TrainMode { Unsupervised, Supervised };

struct LossGrad {
  double loss = 0.0;
  prior_net::PriorNetParams grad;
};

/// Negative log-likelihood of the measurement forecasts (training loss
/// of the unsupervised mode), with its exact parameter gradient.
LossGrad unsupervised_loss(const Eigen::MatrixXd& y,
                           const prior_net::PriorNetParams& params,
                           const gauss::MeasurementModel& mm,
                           double weight_decay = 0.0);

/// Negative log-likelihood of the true states under the per-step
/// posteriors (supervised empirical-performance-limit loss); gradients
/// flow through the conjugate-update algebra into the prior network.
LossGrad supervised_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                         const prior_net::PriorNetParams& params,
                         const gauss::MeasurementModel& mm,
                         double weight_decay = 0.0);

struct AdamState {
  prior_net::PriorNetParams m1, m2;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const prior_net::Dims& d);
};

/// Bias-corrected Adam update, in place.
void adam_step(prior_net::PriorNetParams& params,
               const prior_net::PriorNetParams& grads, AdamState& state,
               double lr);

struct EpochLog {
  int epoch;
  double train_loss;
  double val_loss;
  double lr;
};

struct TrainResult {
  prior_net::PriorNetParams params;  // best-validation parameters
  std::vector<EpochLog> log;
  double best_val_loss = 0.0;
};

struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mini-batch Adam training with per-epoch shuffle, stepped learning
/// rate, a held-out validation split and early stopping.
TrainResult train(const ssm::TrajectoryBundle& dataset,
                  const gauss::MeasurementModel& mm, const TrainConfig& cfg,
                  TrainMode mode, prior_net::Dims dims = {});

}  // namespace danse::learn

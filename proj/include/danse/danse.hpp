#pragma once

#include "danse/gauss.hpp"
#include "danse/prior_net.hpp"

#include <vector>

namespace danse::filter {

/// Per-step output of one filtered trajectory. Point estimate is the
/// posterior mean; full Gaussians are kept for uncertainty bands.
struct FilterOutput {
  std::vector<gauss::Gaussian> priors;
  std::vector<gauss::Gaussian> posteriors;
  std::vector<gauss::Gaussian> forecasts;  // p(y_t | y_{1:t-1})
  std::vector<Eigen::MatrixXd> gains;
  Eigen::MatrixXd innovations;  // T x n
  Eigen::MatrixXd estimates;    // T x m, posterior means

  int length() const { return static_cast<int>(posteriors.size()); }

  /// Log-density of the factorized joint posterior at the given state
  /// trajectory: sum of per-step posterior log-pdfs.
  double joint_posterior_log_pdf(const Eigen::MatrixXd& x) const;
};

/// Run the prior network over y and apply the conjugate update at each
/// step: state estimation over the whole trajectory.
FilterOutput filter_trajectory(const Eigen::MatrixXd& y,
                               const prior_net::PriorNetParams& params,
                               const gauss::MeasurementModel& mm);

struct Forecast {
  gauss::Gaussian state;        // prior for step t+1
  gauss::Gaussian measurement;  // N(H m, Cw + H L H^T)
};

/// One-step-ahead forecast from a (possibly empty) measurement history.
Forecast forecast_next(const Eigen::MatrixXd& y_hist,
                       const prior_net::PriorNetParams& params,
                       const gauss::MeasurementModel& mm);

}  // namespace danse::filter

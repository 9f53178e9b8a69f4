#pragma once

#include "danse/gauss.hpp"
#include "danse/ssm.hpp"

#include <vector>

namespace danse::baselines {

struct UkfConfig {
  double alpha = 1e-3;
  double beta = 2.0;
  double kappa = 0.0;
};

struct FilterResult {
  std::vector<gauss::Gaussian> posteriors;
  Eigen::MatrixXd estimates;  // T x m posterior means
};

/// Standard Kalman filter for the linear model.
FilterResult kalman_filter(const Eigen::MatrixXd& y,
                           const ssm::LinearModel& model,
                           const gauss::MeasurementModel& mm,
                           const gauss::Gaussian& x0);

/// Extended Kalman filter; the Jacobian of x -> F(x) x is taken by
/// central finite differences. Works on either model kind (on a linear
/// model it reduces to the Kalman filter).
FilterResult ekf(const Eigen::MatrixXd& y, const ssm::ProcessModel& model,
                 const gauss::MeasurementModel& mm, const gauss::Gaussian& x0);

/// Unscented Kalman filter with standard lambda-weights.
FilterResult ukf(const Eigen::MatrixXd& y, const ssm::ProcessModel& model,
                 const gauss::MeasurementModel& mm, const gauss::Gaussian& x0,
                 const UkfConfig& cfg = {});

/// Finite-difference Jacobian of the one-step propagation map.
Eigen::MatrixXd propagation_jacobian(const ssm::ProcessModel& model,
                                     const Eigen::VectorXd& x);

/// Per-timestep weighted least squares, the memoryless baseline:
/// (H^T Cw^-1 H)^-1 H^T Cw^-1 y.
Eigen::VectorXd ls_estimate(const Eigen::VectorXd& y,
                            const gauss::MeasurementModel& mm);

/// Default initial beliefs (no access to the true state).
gauss::Gaussian default_x0(const ssm::ProcessModel& model);

}  // namespace danse::baselines

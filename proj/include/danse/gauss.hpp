#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace danse::gauss {

enum class CovTag { Diagonal, Full };

/// Multivariate normal with either a diagonal or a full covariance.
/// The covariance is always stored as a dense matrix; the tag records
/// which structure produced it.
struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  CovTag tag = CovTag::Full;

  int dim() const { return static_cast<int>(mean.size()); }

  static Gaussian diagonal(Eigen::VectorXd mean, const Eigen::VectorXd& var) {
    Gaussian g;
    g.cov = var.asDiagonal();
    g.mean = std::move(mean);
    g.tag = CovTag::Diagonal;
    return g;
  }
};

/// Linear measurement system y = H x + w, w ~ N(0, Cw).
struct MeasurementModel {
  Eigen::MatrixXd H;
  Eigen::MatrixXd Cw;

  int state_dim() const { return static_cast<int>(H.cols()); }
  int meas_dim() const { return static_cast<int>(H.rows()); }
};

struct PosteriorUpdate {
  Gaussian posterior;
  Eigen::MatrixXd gain;         // m x n
  Eigen::VectorXd innovation;   // n
  Eigen::MatrixXd innovation_cov;  // n x n
};

struct SingularCovariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Conjugate update of a Gaussian state prior with one linear-Gaussian
/// measurement. Innovation covariance is H L H^T + Cw; all solves go
/// through its Cholesky factor.
PosteriorUpdate posterior_update(const Gaussian& prior,
                                 const MeasurementModel& mm,
                                 const Eigen::VectorXd& y);

/// Marginal density of the next measurement: N(H m, Cw + H L H^T).
Gaussian predictive_measurement(const Gaussian& prior,
                                const MeasurementModel& mm);

/// Gaussian log-density at x, via Cholesky of the covariance.
double log_pdf(const Gaussian& g, const Eigen::VectorXd& x);

}  // namespace danse::gauss

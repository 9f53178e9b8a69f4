#include "danse/gauss.hpp"

#include <cmath>

namespace danse::gauss {

namespace {

constexpr double kVarianceFloor = 1e-12;

void check_dims(const Gaussian& prior, const MeasurementModel& mm) {
  if (mm.H.cols() != prior.mean.size())
    throw std::invalid_argument("measurement matrix columns != state dim");
  if (mm.Cw.rows() != mm.H.rows() || mm.Cw.cols() != mm.H.rows())
    throw std::invalid_argument("noise covariance shape != measurement dim");
  if (prior.cov.rows() != prior.mean.size() ||
      prior.cov.cols() != prior.mean.size())
    throw std::invalid_argument("prior covariance shape != state dim");
}

Eigen::MatrixXd floored_cov(const Gaussian& prior) {
  Eigen::MatrixXd L = prior.cov;
  for (int i = 0; i < L.rows(); ++i)
    if (L(i, i) < kVarianceFloor) L(i, i) = kVarianceFloor;
  return L;
}

}  // namespace

PosteriorUpdate posterior_update(const Gaussian& prior,
                                 const MeasurementModel& mm,
                                 const Eigen::VectorXd& y) {
  check_dims(prior, mm);
  if (y.size() != mm.H.rows())
    throw std::invalid_argument("measurement vector dim != H rows");

  const Eigen::MatrixXd L = floored_cov(prior);
  const Eigen::MatrixXd LHt = L * mm.H.transpose();
  Eigen::MatrixXd R = mm.H * LHt + mm.Cw;
  R = 0.5 * (R + R.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(R);
  const double min_pivot =
      llt.info() == Eigen::Success
          ? llt.matrixLLT().diagonal().minCoeff()
          : 0.0;
  if (llt.info() != Eigen::Success ||
      min_pivot * min_pivot <=
          kVarianceFloor * std::max(1.0, R.diagonal().maxCoeff()))
    throw SingularCovariance("innovation covariance is not positive definite");

  const Eigen::MatrixXd K = llt.solve(LHt.transpose()).transpose();
  const Eigen::VectorXd eps = y - mm.H * prior.mean;

  PosteriorUpdate out;
  out.gain = K;
  out.innovation = eps;
  out.innovation_cov = R;
  out.posterior.mean = prior.mean + K * eps;
  Eigen::MatrixXd P = L - K * R * K.transpose();
  out.posterior.cov = 0.5 * (P + P.transpose());
  out.posterior.tag = CovTag::Full;
  return out;
}

Gaussian predictive_measurement(const Gaussian& prior,
                                const MeasurementModel& mm) {
  check_dims(prior, mm);
  Gaussian g;
  g.mean = mm.H * prior.mean;
  Eigen::MatrixXd S = mm.Cw + mm.H * prior.cov * mm.H.transpose();
  g.cov = 0.5 * (S + S.transpose());
  g.tag = CovTag::Full;
  return g;
}

double log_pdf(const Gaussian& g, const Eigen::VectorXd& x) {
  if (x.size() != g.mean.size())
    throw std::invalid_argument("log_pdf: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("log_pdf: covariance is not positive definite");

  const Eigen::VectorXd d = x - g.mean;
  const Eigen::VectorXd z = llt.matrixL().solve(d);
  double logdet = 0.0;
  for (int i = 0; i < g.dim(); ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  constexpr double kLog2Pi = 1.8378770664093454836;
  return -0.5 * z.squaredNorm() - 0.5 * g.dim() * kLog2Pi - 0.5 * logdet;
}

}  // namespace danse::gauss

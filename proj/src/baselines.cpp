#include "danse/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace danse::baselines {

namespace {

gauss::Gaussian make_full(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  gauss::Gaussian g;
  g.mean = std::move(mean);
  g.cov = std::move(cov);
  g.tag = gauss::CovTag::Full;
  return g;
}

Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& P, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double process_noise_var(const ssm::ProcessModel& model) {
  if (const auto* lin = std::get_if<ssm::LinearModel>(&model))
    return lin->sigma_e2;
  return std::get<ssm::AttractorModel>(model).sigma_e2;
}

}  // namespace

FilterResult kalman_filter(const Eigen::MatrixXd& y,
                           const ssm::LinearModel& model,
                           const gauss::MeasurementModel& mm,
                           const gauss::Gaussian& x0) {
  const int T = static_cast<int>(y.rows());
  const int m = static_cast<int>(model.F.rows());
  FilterResult out;
  out.posteriors.reserve(T);
  out.estimates.resize(T, m);

  Eigen::VectorXd mean = x0.mean;
  Eigen::MatrixXd P = x0.cov;
  const Eigen::MatrixXd Q =
      model.sigma_e2 * Eigen::MatrixXd::Identity(m, m);
  for (int t = 0; t < T; ++t) {
    mean = model.F * mean;
    P = model.F * P * model.F.transpose() + Q;
    auto up = gauss::posterior_update(make_full(mean, P), mm,
                                      y.row(t).transpose());
    mean = up.posterior.mean;
    P = up.posterior.cov;
    out.estimates.row(t) = mean.transpose();
    out.posteriors.push_back(std::move(up.posterior));
  }
  return out;
}

Eigen::MatrixXd propagation_jacobian(const ssm::ProcessModel& model,
                                     const Eigen::VectorXd& x) {
  const int m = static_cast<int>(x.size());
  Eigen::MatrixXd J(m, m);
  for (int i = 0; i < m; ++i) {
    const double step = 1e-5 * (1.0 + std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    J.col(i) =
        (ssm::propagate(model, xp) - ssm::propagate(model, xm)) / (2 * step);
  }
  return J;
}

FilterResult ekf(const Eigen::MatrixXd& y, const ssm::ProcessModel& model,
                 const gauss::MeasurementModel& mm,
                 const gauss::Gaussian& x0) {
  const int T = static_cast<int>(y.rows());
  const int m = static_cast<int>(x0.mean.size());
  FilterResult out;
  out.posteriors.reserve(T);
  out.estimates.resize(T, m);

  const ssm::ProcessModel& pm = model;
  Eigen::VectorXd mean = x0.mean;
  Eigen::MatrixXd P = x0.cov;
  const Eigen::MatrixXd Q =
      process_noise_var(model) * Eigen::MatrixXd::Identity(m, m);
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd J = propagation_jacobian(pm, mean);
    mean = ssm::propagate(pm, mean);
    P = J * P * J.transpose() + Q;
    auto up = gauss::posterior_update(make_full(mean, P), mm,
                                      y.row(t).transpose());
    mean = up.posterior.mean;
    P = up.posterior.cov;
    out.estimates.row(t) = mean.transpose();
    out.posteriors.push_back(std::move(up.posterior));
  }
  return out;
}

FilterResult ukf(const Eigen::MatrixXd& y, const ssm::ProcessModel& model,
                 const gauss::MeasurementModel& mm, const gauss::Gaussian& x0,
                 const UkfConfig& cfg) {
  const int T = static_cast<int>(y.rows());
  const int m = static_cast<int>(x0.mean.size());
  const double lambda = cfg.alpha * cfg.alpha * (m + cfg.kappa) - m;
  const double c = m + lambda;
  const double w0m = lambda / c;
  const double w0c = w0m + 1.0 - cfg.alpha * cfg.alpha + cfg.beta;
  const double wi = 0.5 / c;

  const ssm::ProcessModel& pm = model;
  const Eigen::MatrixXd Q =
      process_noise_var(model) * Eigen::MatrixXd::Identity(m, m);

  FilterResult out;
  out.posteriors.reserve(T);
  out.estimates.resize(T, m);

  Eigen::VectorXd mean = x0.mean;
  Eigen::MatrixXd P = x0.cov;

  auto sqrt_cov = [&](const Eigen::MatrixXd& cov) -> Eigen::MatrixXd {
    Eigen::LLT<Eigen::MatrixXd> llt(c * cov);
    if (llt.info() == Eigen::Success)
      return Eigen::MatrixXd(llt.matrixL());
    Eigen::LLT<Eigen::MatrixXd> retry(c * clamp_psd(cov, 1e-12));
    if (retry.info() != Eigen::Success)
      throw gauss::SingularCovariance("ukf: sigma-point Cholesky failed");
    return Eigen::MatrixXd(retry.matrixL());
  };

  for (int t = 0; t < T; ++t) {
    // Sigma points of the current posterior, propagated through f.
    const Eigen::MatrixXd S = sqrt_cov(P);
    std::vector<Eigen::VectorXd> pts(2 * m + 1);
    pts[0] = mean;
    for (int i = 0; i < m; ++i) {
      pts[1 + i] = mean + S.col(i);
      pts[1 + m + i] = mean - S.col(i);
    }
    for (auto& pt : pts) pt = ssm::propagate(pm, pt);

    Eigen::VectorXd pred = w0m * pts[0];
    for (int i = 1; i < 2 * m + 1; ++i) pred += wi * pts[i];
    Eigen::MatrixXd Ppred = Q;
    {
      const Eigen::VectorXd d0 = pts[0] - pred;
      Ppred += w0c * d0 * d0.transpose();
      for (int i = 1; i < 2 * m + 1; ++i) {
        const Eigen::VectorXd di = pts[i] - pred;
        Ppred += wi * di * di.transpose();
      }
    }
    Ppred = 0.5 * (Ppred + Ppred.transpose()).eval();

    // Measurement model is linear, so the update is the exact conjugate
    // one on the predicted Gaussian.
    auto up = gauss::posterior_update(make_full(pred, Ppred), mm,
                                      y.row(t).transpose());
    mean = up.posterior.mean;
    P = up.posterior.cov;
    out.estimates.row(t) = mean.transpose();
    out.posteriors.push_back(std::move(up.posterior));
  }
  return out;
}

Eigen::VectorXd ls_estimate(const Eigen::VectorXd& y,
                            const gauss::MeasurementModel& mm) {
  Eigen::LLT<Eigen::MatrixXd> cw(mm.Cw);
  if (cw.info() != Eigen::Success)
    throw gauss::SingularCovariance("ls_estimate: Cw not positive definite");
  const Eigen::MatrixXd Wy = cw.solve(mm.H);  // Cw^-1 H
  const Eigen::MatrixXd A = mm.H.transpose() * Wy;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("ls_estimate: H is rank deficient");
  return llt.solve(Wy.transpose() * y);
}

gauss::Gaussian default_x0(const ssm::ProcessModel& model) {
  const int m = ssm::state_dim(model);
  gauss::Gaussian g;
  g.cov = 10.0 * Eigen::MatrixXd::Identity(m, m);
  g.tag = gauss::CovTag::Full;
  if (std::holds_alternative<ssm::LinearModel>(model)) {
    g.mean = Eigen::VectorXd::Zero(m);
  } else {
    g.mean = Eigen::Vector3d::Ones();
  }
  return g;
}

}  // namespace danse::baselines

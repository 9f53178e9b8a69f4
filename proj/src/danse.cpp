#include "danse/danse.hpp"

namespace danse::filter {

double FilterOutput::joint_posterior_log_pdf(const Eigen::MatrixXd& x) const {
  double acc = 0.0;
  for (int t = 0; t < length(); ++t)
    acc += gauss::log_pdf(posteriors[t], x.row(t).transpose());
  return acc;
}

FilterOutput filter_trajectory(const Eigen::MatrixXd& y,
                               const prior_net::PriorNetParams& params,
                               const gauss::MeasurementModel& mm) {
  const auto seq = prior_net::priors_forward(y, params);
  const int T = seq.length();

  FilterOutput out;
  out.priors.reserve(T);
  out.posteriors.reserve(T);
  out.forecasts.reserve(T);
  out.gains.reserve(T);
  out.innovations.resize(T, mm.meas_dim());
  out.estimates.resize(T, mm.state_dim());

  for (int t = 0; t < T; ++t) {
    gauss::Gaussian prior = gauss::Gaussian::diagonal(
        seq.means.row(t).transpose(), seq.vars.row(t).transpose());
    out.forecasts.push_back(gauss::predictive_measurement(prior, mm));
    auto up = gauss::posterior_update(prior, mm, y.row(t).transpose());
    out.innovations.row(t) = up.innovation.transpose();
    out.estimates.row(t) = up.posterior.mean.transpose();
    out.gains.push_back(std::move(up.gain));
    out.posteriors.push_back(std::move(up.posterior));
    out.priors.push_back(std::move(prior));
  }
  return out;
}

Forecast forecast_next(const Eigen::MatrixXd& y_hist,
                       const prior_net::PriorNetParams& params,
                       const gauss::MeasurementModel& mm) {
  Eigen::VectorXd h = params.h0;
  for (int t = 0; t < y_hist.rows(); ++t)
    h = prior_net::gru_step(h, y_hist.row(t).transpose(), params);

  // Heads, matching priors_forward.
  const Eigen::VectorXd um =
      (params.mean_W1 * h + params.mean_b1).array().tanh().matrix();
  const Eigen::VectorXd mean = params.mean_W2 * um + params.mean_b2;
  const Eigen::VectorXd uv =
      (params.var_W1 * h + params.var_b1).array().tanh().matrix();
  const Eigen::VectorXd vpre = params.var_W2 * uv + params.var_b2;
  Eigen::VectorXd var(vpre.size());
  for (int j = 0; j < vpre.size(); ++j) {
    const double x = vpre(j);
    var(j) = (x > 30.0 ? x : std::log1p(std::exp(x))) + prior_net::kVarFloor;
  }

  Forecast f;
  f.state = gauss::Gaussian::diagonal(mean, var);
  f.measurement = gauss::predictive_measurement(f.state, mm);
  return f;
}

}  // namespace danse::filter

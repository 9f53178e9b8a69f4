#include "danse/ssm.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace danse::ssm {

namespace {

constexpr int kBurnIn = 100;  // attractor start-up steps discarded

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd gaussian_vec(std::mt19937_64& rng, int dim, double stddev) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = stddev * normal(rng);
  return v;
}

}  // namespace

LinearModel LinearModel::default_2d() {
  LinearModel m;
  m.F = Eigen::MatrixXd{{0.9, 0.9}, {0.0, 0.9}};
  m.H = Eigen::MatrixXd::Identity(2, 2);
  m.sigma_e2 = std::pow(10.0, -10.0 / 10.0);
  return m;
}

AttractorModel AttractorModel::lorenz(double sigma_e2) {
  return AttractorModel{AttractorKind::Lorenz, 0.02, 5, sigma_e2};
}

AttractorModel AttractorModel::chen(double sigma_e2) {
  return AttractorModel{AttractorKind::Chen, 0.002, 5, sigma_e2};
}

int state_dim(const ProcessModel& model) {
  if (const auto* lin = std::get_if<LinearModel>(&model))
    return static_cast<int>(lin->F.rows());
  return 3;
}

std::string model_name(const ProcessModel& model) {
  if (std::holds_alternative<LinearModel>(model)) return "linear";
  return std::get<AttractorModel>(model).kind == AttractorKind::Lorenz
             ? "lorenz"
             : "chen";
}

std::vector<int> TrajectoryBundle::lengths() const {
  std::vector<int> out;
  out.reserve(measurements.size());
  for (const auto& y : measurements) out.push_back(static_cast<int>(y.rows()));
  return out;
}

TrajectoryBundle TrajectoryBundle::without_states() const {
  TrajectoryBundle b = *this;
  b.states.clear();
  b.has_states = false;
  return b;
}

Eigen::MatrixXd taylor_matrix_exp(const Eigen::MatrixXd& A, double delta,
                                  int order) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("taylor_matrix_exp: matrix must be square");
  if (order < 1) throw std::invalid_argument("taylor_matrix_exp: order >= 1");
  Eigen::MatrixXd Ad = A * delta;
  // Scale Ad down to a norm where the order-k truncation is far below
  // the 1e-6 accuracy contract, then square the result back up.
  int squarings = 0;
  double norm = Ad.norm();
  while (norm > 0.125 && squarings < 32) {
    Ad *= 0.5;
    norm *= 0.5;
    ++squarings;
  }
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::MatrixXd term = result;
  for (int k = 1; k <= order; ++k) {
    term = (term * Ad / static_cast<double>(k)).eval();
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = (result * result).eval();
  return result;
}

Eigen::Matrix3d attractor_coeff(const Eigen::Vector3d& x, AttractorKind kind) {
  const double x1 = x(0);
  Eigen::Matrix3d A;
  if (kind == AttractorKind::Lorenz) {
    A << -10.0, 10.0, 0.0,
          28.0, -1.0, -x1,
           0.0,   x1, -8.0 / 3.0;
  } else {
    A << -35.0, 35.0, 0.0,
          -7.0, 28.0, -x1,
           0.0,   x1, -3.0;
  }
  return A;
}

Eigen::Matrix3d attractor_transition(const Eigen::Vector3d& x_prev,
                                     const AttractorModel& model) {
  if (!x_prev.allFinite())
    throw std::invalid_argument("attractor_transition: non-finite state");
  return taylor_matrix_exp(attractor_coeff(x_prev, model.kind), model.delta,
                           model.taylor_order);
}

Eigen::VectorXd propagate(const ProcessModel& model, const Eigen::VectorXd& x) {
  if (const auto* lin = std::get_if<LinearModel>(&model)) return lin->F * x;
  const auto& att = std::get<AttractorModel>(model);
  return attractor_transition(x.head<3>(), att) * x;
}

TrajectoryBundle simulate(const ProcessModel& model, const Eigen::MatrixXd& H,
                          double sigma_w2, int n_traj,
                          const std::vector<int>& lengths,
                          std::uint64_t seed) {
  if (n_traj < 1) throw std::invalid_argument("simulate: n_traj >= 1");
  if (static_cast<int>(lengths.size()) != n_traj)
    throw std::invalid_argument("simulate: lengths size != n_traj");
  if (sigma_w2 <= 0.0) throw std::invalid_argument("simulate: sigma_w2 > 0");
  const int m = state_dim(model);
  if (H.cols() != m)
    throw std::invalid_argument("simulate: H columns != state dim");
  const int n = static_cast<int>(H.rows());
  const bool attractor = std::holds_alternative<AttractorModel>(model);
  const double sigma_e =
      std::sqrt(attractor ? std::get<AttractorModel>(model).sigma_e2
                          : std::get<LinearModel>(model).sigma_e2);
  const double sigma_w = std::sqrt(sigma_w2);

  TrajectoryBundle bundle;
  bundle.has_states = true;
  bundle.meta.model = model_name(model);
  bundle.meta.sigma_e2 = sigma_e * sigma_e;
  bundle.meta.sigma_w2 = sigma_w2;
  bundle.meta.seed = seed;
  bundle.states.resize(n_traj);
  bundle.measurements.resize(n_traj);

  for (int i = 0; i < n_traj; ++i) {
    const int T = lengths[i];
    if (T < 1) throw std::invalid_argument("simulate: length >= 1");
    auto rng = substream(seed, static_cast<std::uint64_t>(i));

    Eigen::VectorXd x;
    if (attractor) {
      x = Eigen::Vector3d::Ones() + gaussian_vec(rng, 3, 1e-2);
      for (int t = 0; t < kBurnIn; ++t)
        x = propagate(model, x) + gaussian_vec(rng, m, sigma_e);
    } else {
      x = gaussian_vec(rng, m, 1.0);
    }

    Eigen::MatrixXd xs(T, m), ys(T, n);
    for (int t = 0; t < T; ++t) {
      x = propagate(model, x) + gaussian_vec(rng, m, sigma_e);
      if (!x.allFinite())
        throw std::runtime_error("simulate: trajectory diverged");
      xs.row(t) = x.transpose();
      ys.row(t) = (H * x + gaussian_vec(rng, n, sigma_w)).transpose();
    }
    bundle.states[i] = std::move(xs);
    bundle.measurements[i] = std::move(ys);
  }
  return bundle;
}

TrajectoryBundle simulate(const ProcessModel& model, const Eigen::MatrixXd& H,
                          double sigma_w2, int n_traj, int T,
                          std::uint64_t seed) {
  return simulate(model, H, sigma_w2, n_traj, std::vector<int>(n_traj, T),
                  seed);
}

double calibrate_sigma_w2(const std::vector<Eigen::MatrixXd>& states,
                          const Eigen::MatrixXd& H, double target_smnr_db) {
  if (states.empty())
    throw std::invalid_argument("calibrate_sigma_w2: no state trajectories");
  if (!std::isfinite(target_smnr_db))
    throw std::invalid_argument("calibrate_sigma_w2: non-finite target");
  const int n = static_cast<int>(H.rows());

  // Per trajectory: 10 log10( sum_t ||Hx_t - mean(Hx)||^2 / (n T sigma_w2) ).
  // sigma_w2 factors out, so the calibration is exact in closed form.
  double acc_db = 0.0;
  for (const auto& xs : states) {
    const Eigen::MatrixXd clean = xs * H.transpose();  // T x n
    const Eigen::RowVectorXd mean = clean.colwise().mean();
    const double energy = (clean.rowwise() - mean).squaredNorm();
    const double T = static_cast<double>(clean.rows());
    if (energy <= 0.0)
      throw std::invalid_argument("calibrate_sigma_w2: zero-variance signal");
    acc_db += 10.0 * std::log10(energy / (n * T));
  }
  acc_db /= static_cast<double>(states.size());
  return std::pow(10.0, (acc_db - target_smnr_db) / 10.0);
}

}  // namespace danse::ssm

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace danse::ssm {

/// x_t = F x_{t-1} + e_t with isotropic process noise sigma_e2 * I.
struct LinearModel {
  Eigen::MatrixXd F;
  Eigen::MatrixXd H;
  double sigma_e2 = 0.1;

  /// Defaults used throughout the experiments: F = 0.9 * unit upper
  /// triangular 2x2, H = I2, sigma_e2 = 10^(-10/10).
  static LinearModel default_2d();
};

enum class AttractorKind { Lorenz, Chen };

/// x_t = exp(A(x_{t-1}) * delta) x_{t-1} + e_t, with the matrix
/// exponential truncated to a finite Taylor series.
struct AttractorModel {
  AttractorKind kind = AttractorKind::Lorenz;
  double delta = 0.02;
  int taylor_order = 5;
  double sigma_e2 = 0.1;

  static AttractorModel lorenz(double sigma_e2 = 0.1);
  static AttractorModel chen(double sigma_e2 = 0.1);
};

using ProcessModel = std::variant<LinearModel, AttractorModel>;

int state_dim(const ProcessModel& model);
std::string model_name(const ProcessModel& model);

struct BundleMeta {
  std::string model;
  double sigma_e2 = 0.0;
  double sigma_w2 = 0.0;
  double smnr_db = 0.0;
  std::uint64_t seed = 0;
};

/// N trajectories of measurements, optionally paired with the true
/// states. Rows are time steps.
struct TrajectoryBundle {
  std::vector<Eigen::MatrixXd> states;        // empty when unlabelled
  std::vector<Eigen::MatrixXd> measurements;  // each T_i x n
  bool has_states = false;
  BundleMeta meta;

  int size() const { return static_cast<int>(measurements.size()); }
  std::vector<int> lengths() const;

  /// Unlabelled copy for unsupervised training.
  TrajectoryBundle without_states() const;
};

/// Order-`order` Taylor polynomial of exp(A*delta), evaluated with
/// scaling-and-squaring so the result stays accurate at larger norms.
Eigen::MatrixXd taylor_matrix_exp(const Eigen::MatrixXd& A, double delta,
                                  int order);

/// State-dependent coefficient matrix of the attractor ODE at x.
Eigen::Matrix3d attractor_coeff(const Eigen::Vector3d& x, AttractorKind kind);

/// Discretized transition matrix exp(A(x_prev) * delta), truncated Taylor.
Eigen::Matrix3d attractor_transition(const Eigen::Vector3d& x_prev,
                                     const AttractorModel& model);

/// Deterministic propagation x -> F(x) x for either model kind.
Eigen::VectorXd propagate(const ProcessModel& model, const Eigen::VectorXd& x);

/// Draw N trajectories. Each trajectory i uses its own substream derived
/// from (seed, i), so the result is independent of generation order.
TrajectoryBundle simulate(const ProcessModel& model, const Eigen::MatrixXd& H,
                          double sigma_w2, int n_traj,
                          const std::vector<int>& lengths, std::uint64_t seed);
TrajectoryBundle simulate(const ProcessModel& model, const Eigen::MatrixXd& H,
                          double sigma_w2, int n_traj, int T,
                          std::uint64_t seed);

/// Measurement-noise variance that makes the empirical SMNR of the given
/// clean signals H x equal to the target.
double calibrate_sigma_w2(const std::vector<Eigen::MatrixXd>& states,
                          const Eigen::MatrixXd& H, double target_smnr_db);

}  // namespace danse::ssm

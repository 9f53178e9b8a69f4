#pragma once

#include "danse/gauss.hpp"
#include "danse/learn.hpp"
#include "danse/ssm.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace danse::harness {

/// Per-trajectory 10 log10(sum ||x - xhat||^2 / sum ||x||^2), then mean
/// and standard error over trajectories.
struct NmseResult {
  double mean_db = 0.0;
  double stderr_db = 0.0;
  int n_traj = 0;
};
NmseResult nmse(const std::vector<Eigen::MatrixXd>& x_true,
                const std::vector<Eigen::MatrixXd>& x_hat);

/// Empirical SMNR of a labelled bundle under the given measurement model.
double measure_smnr(const ssm::TrajectoryBundle& bundle,
                    const gauss::MeasurementModel& mm);

struct ExperimentSpec {
  std::string model = "linear";  // linear | lorenz | chen
  std::vector<double> smnr_grid_db = {0.0, 10.0, 20.0, 30.0};
  double sigma_e2_db = -10.0;
  int n_train = 200;
  int t_train = 200;
  int n_test = 50;
  int t_test = 400;
  std::vector<std::string> methods = {"LS", "KF", "DANSE"};
  // Mismatch knobs: when set, training data are generated under these
  // conditions instead of the test-cell ones.
  std::optional<double> train_smnr_db;
  std::optional<double> train_sigma_e2_db;
  // Rectangular random measurement matrix study (2x3, N(0,1) entries
  // drawn once from the experiment seed). Default is H = I.
  bool subsampled_h = false;
  std::uint64_t seed = 0;
  learn::TrainConfig train;

  static ExperimentSpec from_json_file(const std::string& path);
};

struct ResultRow {
  std::string method;
  double smnr_db;
  double nmse_db_mean;
  double nmse_db_stderr;
  int n_test;
  bool ok;  // false when training diverged for this cell
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::string to_csv() const;
  static ResultTable from_csv_file(const std::string& path);
};

ResultTable run_experiment(const ExperimentSpec& spec);

/// Labelled bundle at a calibrated SMNR: simulates states, solves for
/// the noise variance hitting the target, and regenerates with it.
ssm::TrajectoryBundle generate_bundle(const ssm::ProcessModel& model,
                                      const Eigen::MatrixXd& H,
                                      double smnr_db, int n_traj, int T,
                                      std::uint64_t seed);

/// Fixed-format floating point used in every CSV we emit, so that
/// same-seed runs are byte identical.
std::string format_double(double v);

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Minimal self-contained SVG line plot.
void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series);

}  // namespace danse::harness

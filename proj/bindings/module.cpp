// Python bindings for the core DANSE operations.

#include "danse/baselines.hpp"
#include "danse/danse.hpp"
#include "danse/gauss.hpp"
#include "danse/harness.hpp"
#include "danse/io.hpp"
#include "danse/learn.hpp"
#include "danse/ssm.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>

namespace py = pybind11;
using namespace danse;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ssm::ProcessModel make_model(const std::string& name, double sigma_e2) {
  if (name == "linear") {
    auto m = ssm::LinearModel::default_2d();
    m.sigma_e2 = sigma_e2;
    return m;
  }
  if (name == "lorenz") return ssm::AttractorModel::lorenz(sigma_e2);
  if (name == "chen") return ssm::AttractorModel::chen(sigma_e2);
  throw std::invalid_argument("unknown model: " + name);
}

gauss::Gaussian make_gaussian(const VectorXd& mean, const MatrixXd& cov) {
  gauss::Gaussian g;
  g.mean = mean;
  g.cov = cov;
  return g;
}

ssm::TrajectoryBundle make_bundle(
    const std::vector<MatrixXd>& measurements,
    const std::optional<std::vector<MatrixXd>>& states) {
  ssm::TrajectoryBundle b;
  b.measurements = measurements;
  if (states) {
    b.states = *states;
    b.has_states = true;
  }
  return b;
}

}  // namespace

PYBIND11_MODULE(_danse, mod) {
  mod.doc() = "RNN-parameterized Bayesian state estimation core";

  py::class_<prior_net::PriorNetParams>(mod, "PriorNet")
      .def_property_readonly("dims",
                             [](const prior_net::PriorNetParams& p) {
                               const auto d = p.dims();
                               return py::make_tuple(d.n, d.h, d.m, d.ff);
                             })
      .def("__repr__", [](const prior_net::PriorNetParams& p) {
        const auto d = p.dims();
        return "PriorNet(n=" + std::to_string(d.n) +
               ", h=" + std::to_string(d.h) + ", m=" + std::to_string(d.m) +
               ", ff=" + std::to_string(d.ff) + ")";
      });

  mod.def("taylor_matrix_exp", &ssm::taylor_matrix_exp, py::arg("A"),
          py::arg("delta"), py::arg("order") = 5);

  mod.def(
      "posterior_update",
      [](const VectorXd& prior_mean, const MatrixXd& prior_cov,
         const MatrixXd& H, const MatrixXd& Cw, const VectorXd& y) {
        const auto up = gauss::posterior_update(
            make_gaussian(prior_mean, prior_cov), {H, Cw}, y);
        return py::make_tuple(up.posterior.mean, up.posterior.cov, up.gain);
      },
      py::arg("prior_mean"), py::arg("prior_cov"), py::arg("H"),
      py::arg("Cw"), py::arg("y"),
      "Conjugate Gaussian update; returns (mean, cov, gain).");

  mod.def(
      "predictive_measurement",
      [](const VectorXd& prior_mean, const MatrixXd& prior_cov,
         const MatrixXd& H, const MatrixXd& Cw) {
        const auto p = gauss::predictive_measurement(
            make_gaussian(prior_mean, prior_cov), {H, Cw});
        return py::make_tuple(p.mean, p.cov);
      },
      py::arg("prior_mean"), py::arg("prior_cov"), py::arg("H"),
      py::arg("Cw"));

  mod.def(
      "log_pdf",
      [](const VectorXd& mean, const MatrixXd& cov, const VectorXd& x) {
        return gauss::log_pdf(make_gaussian(mean, cov), x);
      },
      py::arg("mean"), py::arg("cov"), py::arg("x"));

  mod.def(
      "generate",
      [](const std::string& model, int n_traj, int t, double smnr_db,
         double sigma_e2_db, std::uint64_t seed) {
        const auto pm =
            make_model(model, std::pow(10.0, sigma_e2_db / 10.0));
        const int n = ssm::state_dim(pm);
        const MatrixXd H = MatrixXd::Identity(n, n);
        const auto b =
            harness::generate_bundle(pm, H, smnr_db, n_traj, t, seed);
        py::dict out;
        out["states"] = b.states;
        out["measurements"] = b.measurements;
        out["H"] = H;
        out["sigma_w2"] = b.meta.sigma_w2;
        out["smnr_db"] = b.meta.smnr_db;
        return out;
      },
      py::arg("model"), py::arg("n_traj"), py::arg("t"), py::arg("smnr_db"),
      py::arg("sigma_e2_db") = -10.0, py::arg("seed") = 0);

  mod.def(
      "train",
      [](const std::vector<MatrixXd>& measurements, const MatrixXd& H,
         const MatrixXd& Cw, const std::string& mode,
         std::optional<std::vector<MatrixXd>> states, int epochs,
         int batch_size, double lr, int hidden, int ff,
         std::uint64_t seed) {
        learn::TrainConfig cfg;
        cfg.max_epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.lr0 = lr;
        cfg.seed = seed;
        const auto m = mode == "supervised" ? learn::TrainMode::Supervised
                                            : learn::TrainMode::Unsupervised;
        prior_net::Dims dims{static_cast<int>(H.rows()), hidden,
                             static_cast<int>(H.cols()), ff};
        const auto r = learn::train(make_bundle(measurements, states),
                                    {H, Cw}, cfg, m, dims);
        py::list log;
        for (const auto& e : r.log) {
          py::dict row;
          row["epoch"] = e.epoch;
          row["train_loss"] = e.train_loss;
          row["val_loss"] = e.val_loss;
          row["lr"] = e.lr;
          log.append(row);
        }
        return py::make_tuple(r.params, log, r.best_val_loss);
      },
      py::arg("measurements"), py::arg("H"), py::arg("Cw"),
      py::arg("mode") = "unsupervised", py::arg("states") = std::nullopt,
      py::arg("epochs") = 100, py::arg("batch_size") = 64,
      py::arg("lr") = 1e-2, py::arg("hidden") = 30, py::arg("ff") = 32,
      py::arg("seed") = 0,
      "Train a prior network; returns (net, epoch_log, best_val_loss).");

  mod.def(
      "filter_trajectory",
      [](const MatrixXd& y, const prior_net::PriorNetParams& net,
         const MatrixXd& H, const MatrixXd& Cw) {
        const auto out = filter::filter_trajectory(y, net, {H, Cw});
        const int T = out.length();
        const int m = static_cast<int>(out.estimates.cols());
        MatrixXd post_var(T, m), prior_mean(T, m), prior_var(T, m);
        for (int t = 0; t < T; ++t) {
          post_var.row(t) = out.posteriors[t].cov.diagonal().transpose();
          prior_mean.row(t) = out.priors[t].mean.transpose();
          prior_var.row(t) = out.priors[t].cov.diagonal().transpose();
        }
        py::dict d;
        d["estimates"] = out.estimates;
        d["posterior_var"] = post_var;
        d["prior_mean"] = prior_mean;
        d["prior_var"] = prior_var;
        d["innovations"] = out.innovations;
        return d;
      },
      py::arg("y"), py::arg("net"), py::arg("H"), py::arg("Cw"));

  mod.def(
      "forecast_next",
      [](const MatrixXd& y_hist, const prior_net::PriorNetParams& net,
         const MatrixXd& H, const MatrixXd& Cw) {
        const auto f = filter::forecast_next(y_hist, net, {H, Cw});
        py::dict d;
        d["state_mean"] = f.state.mean;
        d["state_cov"] = f.state.cov;
        d["measurement_mean"] = f.measurement.mean;
        d["measurement_cov"] = f.measurement.cov;
        return d;
      },
      py::arg("y_hist"), py::arg("net"), py::arg("H"), py::arg("Cw"));

  mod.def(
      "kalman_filter",
      [](const MatrixXd& y, const MatrixXd& F, const MatrixXd& H,
         double sigma_e2, const MatrixXd& Cw) {
        ssm::LinearModel model;
        model.F = F;
        model.H = H;
        model.sigma_e2 = sigma_e2;
        return baselines::kalman_filter(y, model, {H, Cw},
                                        baselines::default_x0(model))
            .estimates;
      },
      py::arg("y"), py::arg("F"), py::arg("H"), py::arg("sigma_e2"),
      py::arg("Cw"));

  mod.def(
      "nmse",
      [](const std::vector<MatrixXd>& x_true,
         const std::vector<MatrixXd>& x_hat) {
        const auto r = harness::nmse(x_true, x_hat);
        return py::make_tuple(r.mean_db, r.stderr_db);
      },
      py::arg("x_true"), py::arg("x_hat"),
      "Mean and standard error of the per-trajectory NMSE in dB.");

  mod.def(
      "measure_smnr",
      [](const std::vector<MatrixXd>& states,
         const std::vector<MatrixXd>& measurements, const MatrixXd& H,
         const MatrixXd& Cw) {
        return harness::measure_smnr(make_bundle(measurements, states),
                                     {H, Cw});
      },
      py::arg("states"), py::arg("measurements"), py::arg("H"),
      py::arg("Cw"));

  mod.def("save_checkpoint", &io::write_checkpoint, py::arg("path"),
          py::arg("net"));
  mod.def("load_checkpoint", &io::read_checkpoint, py::arg("path"));
}

#include "danse/baselines.hpp"
#include "danse/danse.hpp"
#include "danse/harness.hpp"
#include "danse/io.hpp"
#include "danse/learn.hpp"
#include "danse/ssm.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace danse;

gauss::MeasurementModel bundle_mm(const io::LoadedBundle& lb) {
  const int n = static_cast<int>(lb.H.rows());
  return {lb.H, lb.bundle.meta.sigma_w2 * Eigen::MatrixXd::Identity(n, n)};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
}

int cmd_generate(const std::string& model, int n_traj, int T, double smnr_db,
                 double sigma_e2_db, std::uint64_t seed,
                 const std::string& out) {
  const double sigma_e2 = std::pow(10.0, sigma_e2_db / 10.0);
  ssm::ProcessModel pm;
  if (model == "linear") {
    auto lin = ssm::LinearModel::default_2d();
    lin.sigma_e2 = sigma_e2;
    pm = lin;
  } else if (model == "lorenz") {
    pm = ssm::AttractorModel::lorenz(sigma_e2);
  } else if (model == "chen") {
    pm = ssm::AttractorModel::chen(sigma_e2);
  } else {
    throw std::invalid_argument("unknown model: " + model);
  }
  const int m = ssm::state_dim(pm);
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(m, m);
  auto bundle = harness::generate_bundle(pm, H, smnr_db, n_traj, T, seed);
  io::write_bundle(out, bundle, H);
  std::cout << "wrote " << out << " (N=" << n_traj << ", T=" << T
            << ", sigma_w2=" << harness::format_double(bundle.meta.sigma_w2)
            << ")\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& mode, int epochs,
              int batch_size, double lr, int patience, double weight_decay,
              int hidden, int ff, std::uint64_t seed,
              const std::string& out_checkpoint, const std::string& log_path) {
  const auto lb = io::read_bundle(data);
  const auto mm = bundle_mm(lb);

  learn::TrainConfig cfg;
  cfg.max_epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.lr0 = lr > 0 ? lr : (mode == "supervised" ? 5e-3 : 1e-2);
  cfg.patience = patience;
  cfg.weight_decay = weight_decay;
  cfg.seed = seed;

  prior_net::Dims dims;
  dims.h = hidden;
  dims.ff = ff;
  const auto tm = mode == "supervised" ? learn::TrainMode::Supervised
                                       : learn::TrainMode::Unsupervised;
  const auto result = learn::train(lb.bundle, mm, cfg, tm, dims);

  io::write_checkpoint(out_checkpoint, result.params);
  if (!log_path.empty()) {
    std::string csv = "epoch,train_loss,val_loss,lr\n";
    for (const auto& e : result.log)
      csv += std::to_string(e.epoch) + "," +
             harness::format_double(e.train_loss) + "," +
             harness::format_double(e.val_loss) + "," +
             harness::format_double(e.lr) + "\n";
    write_text(log_path, csv);
  }
  std::cout << "trained " << result.log.size() << " epochs, best val loss "
            << harness::format_double(result.best_val_loss) << "\n";
  return 0;
}

int cmd_filter(const std::string& data, const std::string& checkpoint,
               const std::string& out_csv) {
  const auto lb = io::read_bundle(data);
  const auto mm = bundle_mm(lb);
  const auto params = io::read_checkpoint(checkpoint);
  const int m = mm.state_dim();

  std::string csv = "traj,t";
  for (int j = 0; j < m; ++j) csv += ",mean_" + std::to_string(j);
  for (int j = 0; j < m; ++j) csv += ",var_" + std::to_string(j);
  csv += "\n";

  std::vector<Eigen::MatrixXd> estimates;
  for (int i = 0; i < lb.bundle.size(); ++i) {
    const auto out = filter::filter_trajectory(lb.bundle.measurements[i],
                                               params, mm);
    for (int t = 0; t < out.length(); ++t) {
      csv += std::to_string(i) + "," + std::to_string(t + 1);
      for (int j = 0; j < m; ++j)
        csv += "," + harness::format_double(out.posteriors[t].mean(j));
      for (int j = 0; j < m; ++j)
        csv += "," + harness::format_double(out.posteriors[t].cov(j, j));
      csv += "\n";
    }
    estimates.push_back(out.estimates);
  }
  write_text(out_csv, csv);
  if (lb.bundle.has_states) {
    const auto r = harness::nmse(lb.bundle.states, estimates);
    std::cout << "NMSE " << harness::format_double(r.mean_db) << " dB (+/- "
              << harness::format_double(r.stderr_db) << ")\n";
  }
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_forecast(const std::string& data, const std::string& checkpoint,
                 int horizon, const std::string& out_csv) {
  if (horizon != 1)
    throw std::invalid_argument("only --horizon 1 is supported");
  const auto lb = io::read_bundle(data);
  const auto mm = bundle_mm(lb);
  const auto params = io::read_checkpoint(checkpoint);
  const int n = mm.meas_dim();

  // Row t holds p(y_t | y_{1:t-1}); the last row extends one step past
  // the end of each trajectory.
  std::string csv = "traj,t";
  for (int j = 0; j < n; ++j) csv += ",mean_" + std::to_string(j);
  for (int j = 0; j < n; ++j) csv += ",var_" + std::to_string(j);
  csv += "\n";
  for (int i = 0; i < lb.bundle.size(); ++i) {
    const auto& y = lb.bundle.measurements[i];
    const auto out = filter::filter_trajectory(y, params, mm);
    auto emit = [&](int t, const gauss::Gaussian& g) {
      csv += std::to_string(i) + "," + std::to_string(t);
      for (int j = 0; j < n; ++j)
        csv += "," + harness::format_double(g.mean(j));
      for (int j = 0; j < n; ++j)
        csv += "," + harness::format_double(g.cov(j, j));
      csv += "\n";
    };
    for (int t = 0; t < out.length(); ++t) emit(t + 1, out.forecasts[t]);
    emit(out.length() + 1,
         filter::forecast_next(y, params, mm).measurement);
  }
  write_text(out_csv, csv);
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_evaluate(const std::string& spec_path, const std::string& out_table,
                 const std::string& out_plot) {
  const auto spec = harness::ExperimentSpec::from_json_file(spec_path);
  const auto table = harness::run_experiment(spec);
  write_text(out_table, table.to_csv());
  if (!out_plot.empty()) {
    std::vector<harness::PlotSeries> series;
    for (const auto& row : table.rows) {
      if (!row.ok) continue;
      auto it = std::find_if(series.begin(), series.end(), [&](auto& s) {
        return s.name == row.method;
      });
      if (it == series.end()) {
        series.push_back({row.method, {}});
        it = series.end() - 1;
      }
      it->points.emplace_back(row.smnr_db, row.nmse_db_mean);
    }
    harness::write_line_plot_svg(out_plot, "NMSE vs SMNR (" + spec.model + ")",
                                 "SMNR (dB)", "NMSE (dB)", series);
  }
  std::cout << "wrote " << out_table << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& tables,
                const std::string& out_plot, const std::string& out_csv) {
  std::vector<harness::PlotSeries> series;
  std::string merged = "table,method,smnr_db,nmse_db_mean,nmse_db_stderr\n";
  for (const auto& path : tables) {
    const auto table = harness::ResultTable::from_csv_file(path);
    for (const auto& row : table.rows) {
      if (!row.ok) continue;
      const std::string name = path + ":" + row.method;
      auto it = std::find_if(series.begin(), series.end(), [&](auto& s) {
        return s.name == name;
      });
      if (it == series.end()) {
        series.push_back({name, {}});
        it = series.end() - 1;
      }
      it->points.emplace_back(row.smnr_db, row.nmse_db_mean);
      merged += path + "," + row.method + "," +
                harness::format_double(row.smnr_db) + "," +
                harness::format_double(row.nmse_db_mean) + "," +
                harness::format_double(row.nmse_db_stderr) + "\n";
    }
  }
  harness::write_line_plot_svg(out_plot, "NMSE vs SMNR", "SMNR (dB)",
                               "NMSE (dB)", series);
  if (!out_csv.empty()) write_text(out_csv, merged);
  std::cout << "wrote " << out_plot << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DANSE state-estimation toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "simulate a trajectory bundle");
  std::string g_model = "linear", g_out;
  int g_n = 100, g_t = 200;
  double g_smnr = 20.0, g_sigma_e2_db = -10.0;
  std::uint64_t g_seed = 0;
  gen->add_option("--model", g_model)
      ->check(CLI::IsMember({"linear", "lorenz", "chen"}));
  gen->add_option("--n", g_n, "number of trajectories");
  gen->add_option("--t", g_t, "trajectory length");
  gen->add_option("--smnr-db", g_smnr);
  gen->add_option("--sigma-e2-db", g_sigma_e2_db);
  gen->add_option("--seed", g_seed);
  gen->add_option("--out", g_out)->required();

  // train
  auto* tr = app.add_subcommand("train", "train the prior network");
  std::string t_data, t_mode = "unsupervised", t_ckpt, t_log;
  int t_epochs = 2000, t_batch = 64, t_patience = 50, t_hidden = 30,
      t_ff = 32;
  double t_lr = -1.0, t_wd = 0.0;
  std::uint64_t t_seed = 0;
  tr->add_option("--data", t_data)->required();
  tr->add_option("--mode", t_mode)
      ->check(CLI::IsMember({"unsupervised", "supervised"}));
  tr->add_option("--epochs", t_epochs);
  tr->add_option("--batch-size", t_batch);
  tr->add_option("--lr", t_lr, "initial learning rate (default per mode)");
  tr->add_option("--patience", t_patience);
  tr->add_option("--weight-decay", t_wd);
  tr->add_option("--hidden", t_hidden, "GRU hidden size");
  tr->add_option("--ff", t_ff, "head hidden layer size");
  tr->add_option("--seed", t_seed);
  tr->add_option("--out-checkpoint", t_ckpt)->required();
  tr->add_option("--log", t_log, "per-epoch training log CSV");

  // filter
  auto* fl = app.add_subcommand("filter", "filter a bundle with a checkpoint");
  std::string f_data, f_ckpt, f_out;
  fl->add_option("--data", f_data)->required();
  fl->add_option("--checkpoint", f_ckpt)->required();
  fl->add_option("--out-csv", f_out)->required();

  // forecast
  auto* fc = app.add_subcommand("forecast", "one-step measurement forecasts");
  std::string c_data, c_ckpt, c_out;
  int c_horizon = 1;
  fc->add_option("--data", c_data)->required();
  fc->add_option("--checkpoint", c_ckpt)->required();
  fc->add_option("--horizon", c_horizon);
  fc->add_option("--out-csv", c_out)->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "run an experiment spec");
  std::string e_spec, e_table, e_plot;
  ev->add_option("--spec", e_spec)->required();
  ev->add_option("--out-table", e_table)->required();
  ev->add_option("--out-plot", e_plot, "optional SVG plot");

  // compare
  auto* cp = app.add_subcommand("compare", "plot result tables together");
  std::vector<std::string> p_tables;
  std::string p_plot, p_csv;
  cp->add_option("--tables", p_tables)->required()->expected(-1);
  cp->add_option("--out-plot", p_plot)->required();
  cp->add_option("--out-csv", p_csv, "optional merged CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_generate(g_model, g_n, g_t, g_smnr, g_sigma_e2_db, g_seed,
                          g_out);
    if (tr->parsed())
      return cmd_train(t_data, t_mode, t_epochs, t_batch, t_lr, t_patience,
                       t_wd, t_hidden, t_ff, t_seed, t_ckpt, t_log);
    if (fl->parsed()) return cmd_filter(f_data, f_ckpt, f_out);
    if (fc->parsed()) return cmd_forecast(c_data, c_ckpt, c_horizon, c_out);
    if (ev->parsed()) return cmd_evaluate(e_spec, e_table, e_plot);
    if (cp->parsed()) return cmd_compare(p_tables, p_plot, p_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

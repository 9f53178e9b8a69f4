#include "danse/harness.hpp"

#include "danse/baselines.hpp"
#include "danse/danse.hpp"
#include "danse/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace danse::harness {

using nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (a + 1) +
                    0xbf58476d1ce4e5b9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

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

double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace

NmseResult nmse(const std::vector<Eigen::MatrixXd>& x_true,
                const std::vector<Eigen::MatrixXd>& x_hat) {
  if (x_true.size() != x_hat.size() || x_true.empty())
    throw std::invalid_argument("nmse: trajectory count mismatch");
  std::vector<double> db;
  db.reserve(x_true.size());
  for (size_t i = 0; i < x_true.size(); ++i) {
    if (x_true[i].rows() != x_hat[i].rows() ||
        x_true[i].cols() != x_hat[i].cols())
      throw std::invalid_argument("nmse: shape mismatch");
    const double energy = x_true[i].squaredNorm();
    if (energy <= 0.0)
      throw std::invalid_argument("nmse: zero-energy true trajectory");
    db.push_back(10.0 *
                 std::log10((x_true[i] - x_hat[i]).squaredNorm() / energy));
  }
  NmseResult r;
  r.n_traj = static_cast<int>(db.size());
  for (double v : db) r.mean_db += v;
  r.mean_db /= r.n_traj;
  if (r.n_traj > 1) {
    double ss = 0.0;
    for (double v : db) ss += (v - r.mean_db) * (v - r.mean_db);
    r.stderr_db = std::sqrt(ss / (r.n_traj - 1)) / std::sqrt(double(r.n_traj));
  }
  return r;
}

double measure_smnr(const ssm::TrajectoryBundle& bundle,
                    const gauss::MeasurementModel& mm) {
  if (!bundle.has_states)
    throw std::invalid_argument("measure_smnr: bundle has no states");
  const double noise_power = mm.Cw.trace();  // n * sigma_w2
  double acc = 0.0;
  for (const auto& xs : bundle.states) {
    const Eigen::MatrixXd clean = xs * mm.H.transpose();
    const Eigen::RowVectorXd mean = clean.colwise().mean();
    const double energy = (clean.rowwise() - mean).squaredNorm();
    if (energy <= 0.0)
      throw std::invalid_argument("measure_smnr: zero-variance signal");
    acc += 10.0 * std::log10(energy /
                             (noise_power * static_cast<double>(clean.rows())));
  }
  return acc / static_cast<double>(bundle.states.size());
}

ssm::TrajectoryBundle generate_bundle(const ssm::ProcessModel& model,
                                      const Eigen::MatrixXd& H,
                                      double smnr_db, int n_traj, int T,
                                      std::uint64_t seed) {
  // The state stream is independent of sigma_w2, so regenerating with
  // the calibrated value keeps the states fixed.
  auto probe = ssm::simulate(model, H, 1.0, n_traj, T, seed);
  const double sigma_w2 = ssm::calibrate_sigma_w2(probe.states, H, smnr_db);
  auto bundle = ssm::simulate(model, H, sigma_w2, n_traj, T, seed);
  bundle.meta.smnr_db = smnr_db;
  return bundle;
}

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io::ParseError("cannot open spec: " + path);
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw io::ParseError("invalid spec JSON: " + path);

  ExperimentSpec s;
  s.model = j.value("model", s.model);
  if (j.contains("smnr_grid_db"))
    s.smnr_grid_db = j.at("smnr_grid_db").get<std::vector<double>>();
  s.sigma_e2_db = j.value("sigma_e2_db", s.sigma_e2_db);
  s.n_train = j.value("n_train", s.n_train);
  s.t_train = j.value("t_train", s.t_train);
  s.n_test = j.value("n_test", s.n_test);
  s.t_test = j.value("t_test", s.t_test);
  if (j.contains("methods"))
    s.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("train_smnr_db"))
    s.train_smnr_db = j.at("train_smnr_db").get<double>();
  if (j.contains("train_sigma_e2_db"))
    s.train_sigma_e2_db = j.at("train_sigma_e2_db").get<double>();
  s.subsampled_h = j.value("subsampled_h", s.subsampled_h);
  s.seed = j.value("seed", s.seed);
  if (j.contains("train")) {
    const json& t = j.at("train");
    s.train.batch_size = t.value("batch_size", s.train.batch_size);
    s.train.max_epochs = t.value("max_epochs", s.train.max_epochs);
    s.train.lr0 = t.value("lr0", s.train.lr0);
    s.train.weight_decay = t.value("weight_decay", s.train.weight_decay);
    s.train.patience = t.value("patience", s.train.patience);
    s.train.val_fraction = t.value("val_fraction", s.train.val_fraction);
  }
  if (s.smnr_grid_db.empty())
    throw std::invalid_argument("experiment spec: empty SMNR grid");
  return s;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string ResultTable::to_csv() const {
  std::string out = "method,smnr_db,nmse_db_mean,nmse_db_stderr,n_test,ok\n";
  for (const auto& r : rows) {
    out += r.method + "," + format_double(r.smnr_db) + "," +
           format_double(r.nmse_db_mean) + "," +
           format_double(r.nmse_db_stderr) + "," + std::to_string(r.n_test) +
           "," + (r.ok ? "1" : "0") + "\n";
  }
  return out;
}

ResultTable ResultTable::from_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io::ParseError("cannot open table: " + path);
  ResultTable table;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (first) {
      first = false;
      continue;  // header
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw io::ParseError("bad table row: " + line);
    ResultRow r;
    r.method = fields[0];
    r.smnr_db = std::stod(fields[1]);
    r.nmse_db_mean = fields[2] == "nan" ? NAN : std::stod(fields[2]);
    r.nmse_db_stderr = fields[3] == "nan" ? NAN : std::stod(fields[3]);
    r.n_test = std::stoi(fields[4]);
    r.ok = fields[5] == "1";
    table.rows.push_back(std::move(r));
  }
  return table;
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  const double sigma_e2 = db_to_lin(spec.sigma_e2_db);
  const ssm::ProcessModel model = make_model(spec.model, sigma_e2);
  const int m = ssm::state_dim(model);
  const bool linear = spec.model == "linear";

  Eigen::MatrixXd H;
  if (spec.subsampled_h) {
    std::mt19937_64 rng(mix_seed(spec.seed, 7, 7));
    std::normal_distribution<double> normal(0.0, 1.0);
    H.resize(2, m);
    for (int i = 0; i < H.rows(); ++i)
      for (int j = 0; j < H.cols(); ++j) H(i, j) = normal(rng);
  } else {
    H = Eigen::MatrixXd::Identity(m, m);
  }

  ResultTable table;
  for (size_t cell = 0; cell < spec.smnr_grid_db.size(); ++cell) {
    const double smnr = spec.smnr_grid_db[cell];
    const auto test = generate_bundle(model, H, smnr, spec.n_test,
                                      spec.t_test, mix_seed(spec.seed, cell, 1));
    gauss::MeasurementModel mm_test{
        H, test.meta.sigma_w2 *
               Eigen::MatrixXd::Identity(H.rows(), H.rows())};

    // Training data, possibly under mismatched conditions.
    ssm::TrajectoryBundle train_bundle;
    gauss::MeasurementModel mm_train = mm_test;
    const bool needs_training =
        std::find(spec.methods.begin(), spec.methods.end(), "DANSE") !=
            spec.methods.end() ||
        std::find(spec.methods.begin(), spec.methods.end(),
                  "DANSE-supervised") != spec.methods.end();
    if (needs_training) {
      const double train_smnr = spec.train_smnr_db.value_or(smnr);
      const double train_sigma_e2 =
          db_to_lin(spec.train_sigma_e2_db.value_or(spec.sigma_e2_db));
      const auto train_model = make_model(spec.model, train_sigma_e2);
      train_bundle =
          generate_bundle(train_model, H, train_smnr, spec.n_train,
                          spec.t_train, mix_seed(spec.seed, cell, 2));
      mm_train.Cw = train_bundle.meta.sigma_w2 *
                    Eigen::MatrixXd::Identity(H.rows(), H.rows());
    }

    for (const auto& method : spec.methods) {
      ResultRow row{method, smnr, NAN, NAN, spec.n_test, true};
      try {
        std::vector<Eigen::MatrixXd> estimates;
        estimates.reserve(test.size());
        if (method == "LS") {
          for (const auto& y : test.measurements) {
            Eigen::MatrixXd est(y.rows(), m);
            for (int t = 0; t < y.rows(); ++t)
              est.row(t) =
                  baselines::ls_estimate(y.row(t).transpose(), mm_test)
                      .transpose();
            estimates.push_back(std::move(est));
          }
        } else if (method == "KF") {
          if (!linear)
            throw std::invalid_argument("KF requires the linear model");
          const auto& lin = std::get<ssm::LinearModel>(model);
          const auto x0 = baselines::default_x0(model);
          for (const auto& y : test.measurements)
            estimates.push_back(
                baselines::kalman_filter(y, lin, mm_test, x0).estimates);
        } else if (method == "EKF" || method == "UKF") {
          if (linear)
            throw std::invalid_argument(method + " requires an attractor");
          const auto& att = std::get<ssm::AttractorModel>(model);
          const auto x0 = baselines::default_x0(model);
          for (const auto& y : test.measurements)
            estimates.push_back(
                method == "EKF"
                    ? baselines::ekf(y, att, mm_test, x0).estimates
                    : baselines::ukf(y, att, mm_test, x0).estimates);
        } else if (method == "DANSE" || method == "DANSE-supervised") {
          learn::TrainConfig cfg = spec.train;
          cfg.seed = mix_seed(spec.seed, cell, 3);
          auto mode = learn::TrainMode::Unsupervised;
          auto data = train_bundle.without_states();
          if (method == "DANSE-supervised") {
            mode = learn::TrainMode::Supervised;
            cfg.lr0 = 5e-3;
            data = train_bundle;
          }
          const auto trained = learn::train(data, mm_train, cfg, mode);
          for (const auto& y : test.measurements)
            estimates.push_back(
                filter::filter_trajectory(y, trained.params, mm_test)
                    .estimates);
        } else {
          throw std::invalid_argument("unknown method: " + method);
        }
        const auto r = nmse(test.states, estimates);
        row.nmse_db_mean = r.mean_db;
        row.nmse_db_stderr = r.stderr_db;
      } catch (const learn::DivergedError&) {
        row.ok = false;  // cell marked failed, run continues
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series) {
  constexpr int W = 640, Ht = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  auto py = [&](double y) {
    return Ht - mb - (y - ymin) / (ymax - ymin) * (Ht - mt - mb);
  };

  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                 "#d62728", "#9467bd", "#8c564b"};
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(W) + "\" height=\"" + std::to_string(Ht) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(W / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + title +
         "</text>\n";
  svg += "<text x=\"" + std::to_string(W / 2) + "\" y=\"" +
         std::to_string(Ht - 10) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + xlabel + "</text>\n";
  svg += "<text x=\"18\" y=\"" + std::to_string(Ht / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 "
         "18 " +
         std::to_string(Ht / 2) + ")\">" + ylabel + "</text>\n";
  // Axes.
  svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" +
         std::to_string(Ht - mb) + "\" x2=\"" + std::to_string(W - mr) +
         "\" y2=\"" + std::to_string(Ht - mb) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" +
         std::to_string(mt) + "\" x2=\"" + std::to_string(ml) + "\" y2=\"" +
         std::to_string(Ht - mb) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + k * (xmax - xmin) / 4;
    const double yv = ymin + k * (ymax - ymin) / 4;
    svg += "<text x=\"" + format_double(px(xv)) + "\" y=\"" +
           std::to_string(Ht - mb + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + format_double(xv) +
           "</text>\n";
    svg += "<text x=\"" + std::to_string(ml - 6) + "\" y=\"" +
           format_double(py(yv) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + format_double(yv) +
           "</text>\n";
  }
  int ci = 0;
  int legend_y = mt + 6;
  for (const auto& s : series) {
    const char* color = colors[ci % 6];
    std::string pts;
    for (const auto& [x, y] : s.points)
      pts += format_double(px(x)) + "," + format_double(py(y)) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    svg += "<text x=\"" + std::to_string(W - mr - 150) + "\" y=\"" +
           std::to_string(legend_y) + "\" font-size=\"12\" fill=\"" + color +
           "\">" + s.name + "</text>\n";
    legend_y += 16;
    ++ci;
  }
  svg += "</svg>\n";

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io::ParseError("cannot open for writing: " + path);
  f << svg;
}

}  // namespace danse::harness

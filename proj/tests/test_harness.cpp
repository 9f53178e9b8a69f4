#include "danse/harness.hpp"

#include "danse/io.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace danse;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("nmse hand examples") {
  SUBCASE("zero estimate gives 0 dB") {
    std::vector<MatrixXd> x{MatrixXd::Constant(4, 1, 2.0)};
    std::vector<MatrixXd> xhat{MatrixXd::Zero(4, 1)};
    const auto r = harness::nmse(x, xhat);
    CHECK(r.mean_db == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.n_traj == 1);
  }
  SUBCASE("relative error 1e-3 gives -60 dB") {
    std::mt19937_64 rng(1);
    std::vector<MatrixXd> x{oracles::random_mat(20, 3, rng)};
    std::vector<MatrixXd> xhat{1.001 * x[0]};
    const auto r = harness::nmse(x, xhat);
    CHECK(r.mean_db == doctest::Approx(-60.0).epsilon(1e-9));
  }
  SUBCASE("scalar example: error 1 against signal 4") {
    std::vector<MatrixXd> x{MatrixXd::Constant(1, 1, 2.0)};
    std::vector<MatrixXd> xhat{MatrixXd::Constant(1, 1, 1.0)};
    const auto r = harness::nmse(x, xhat);
    CHECK(r.mean_db == doctest::Approx(10.0 * std::log10(0.25)));
  }
  SUBCASE("identical trajectories have zero standard error") {
    std::mt19937_64 rng(2);
    const MatrixXd a = oracles::random_mat(10, 2, rng);
    std::vector<MatrixXd> x{a, a};
    std::vector<MatrixXd> xhat{0.9 * a, 0.9 * a};
    const auto r = harness::nmse(x, xhat);
    CHECK(r.stderr_db == doctest::Approx(0.0));
    CHECK(r.n_traj == 2);
  }
}

TEST_CASE("calibrated bundles hit the requested SMNR") {
  const auto model = ssm::LinearModel::default_2d();
  for (double target : {-10.0, 0.0, 20.0}) {
    const auto b =
        harness::generate_bundle(model, model.H, target, 8, 300, 77);
    const gauss::MeasurementModel mm{
        model.H, b.meta.sigma_w2 * MatrixXd::Identity(2, 2)};
    CHECK(std::abs(harness::measure_smnr(b, mm) - target) < 0.05);
    CHECK(b.meta.smnr_db == target);
  }
}

TEST_CASE("doubling the noise variance costs 3.0103 dB") {
  const auto model = ssm::LinearModel::default_2d();
  const auto b = harness::generate_bundle(model, model.H, 10.0, 4, 200, 5);
  const double s1 = harness::measure_smnr(
      b, {model.H, b.meta.sigma_w2 * MatrixXd::Identity(2, 2)});
  const double s2 = harness::measure_smnr(
      b, {model.H, 2.0 * b.meta.sigma_w2 * MatrixXd::Identity(2, 2)});
  CHECK(s1 - s2 == doctest::Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
}

TEST_CASE("bundle files round-trip bitwise") {
  const auto model = ssm::AttractorModel::lorenz();
  auto b = harness::generate_bundle(model, MatrixXd::Identity(3, 3), 10.0, 3,
                                    40, 321);
  const std::string path = tmp_path("danse_test_bundle.json");
  io::write_bundle(path, b, MatrixXd::Identity(3, 3));
  const auto loaded = io::read_bundle(path);

  REQUIRE(loaded.bundle.size() == b.size());
  for (int i = 0; i < b.size(); ++i) {
    CHECK(loaded.bundle.measurements[i] == b.measurements[i]);
    CHECK(loaded.bundle.states[i] == b.states[i]);
  }
  CHECK(loaded.H == MatrixXd::Identity(3, 3));
  CHECK(loaded.bundle.meta.sigma_w2 == b.meta.sigma_w2);
  CHECK(loaded.bundle.meta.model == b.meta.model);
  CHECK(loaded.bundle.meta.seed == b.meta.seed);

  SUBCASE("unlabelled bundles stay unlabelled") {
    io::write_bundle(path, b.without_states(), MatrixXd::Identity(3, 3));
    const auto ul = io::read_bundle(path);
    CHECK_FALSE(ul.bundle.has_states);
    CHECK(ul.bundle.states.empty());
    CHECK(ul.bundle.measurements[1] == b.measurements[1]);
  }

  SUBCASE("truncated payload is rejected") {
    io::write_bundle(path, b, MatrixXd::Identity(3, 3));
    std::filesystem::resize_file(path + ".bin",
                                 std::filesystem::file_size(path + ".bin") -
                                     8);
    CHECK_THROWS_AS(io::read_bundle(path), io::ParseError);
  }

  SUBCASE("garbage manifest is rejected") {
    std::ofstream(path) << "not json";
    CHECK_THROWS_AS(io::read_bundle(path), io::ParseError);
  }
}

TEST_CASE("checkpoint files round-trip and are order independent") {
  prior_net::Dims d{3, 5, 3, 4};
  auto p = prior_net::PriorNetParams::init(d, 9);
  const std::string path = tmp_path("danse_test_ckpt.json");
  io::write_checkpoint(path, p);

  SUBCASE("bitwise round trip") {
    const auto q = io::read_checkpoint(path);
    auto a = p.tensors();
    auto b = q.tensors();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
      for (long k = 0; k < a[i].size; ++k)
        CHECK(a[i].data[k] == b[i].data[k]);
  }

  SUBCASE("shuffled manifest order still loads") {
    auto j = nlohmann::json::parse(slurp(path));
    auto& tensors = j.at("tensors");
    std::reverse(tensors.begin(), tensors.end());
    std::ofstream(path) << j.dump();
    const auto q = io::read_checkpoint(path);
    CHECK(q.Wz == p.Wz);
    CHECK(q.var_b2 == p.var_b2);
  }

  SUBCASE("missing tensor is rejected") {
    auto j = nlohmann::json::parse(slurp(path));
    j.at("tensors").erase(0);
    std::ofstream(path) << j.dump();
    CHECK_THROWS_AS(io::read_checkpoint(path), io::ParseError);
  }
}

TEST_CASE("format_double is locale-free and stable") {
  CHECK(harness::format_double(0.25) == "0.25");
  CHECK(harness::format_double(-3.0) == "-3");
  CHECK(harness::format_double(std::nan("")) == "nan");
}

TEST_CASE("result tables round-trip through CSV") {
  harness::ResultTable t;
  t.rows.push_back({"KF", 10.0, -9.0830001, 0.125, 50, true});
  t.rows.push_back({"DANSE", 20.0, -8.982, 0.25, 50, false});
  const std::string path = tmp_path("danse_test_table.csv");
  std::ofstream(path) << t.to_csv();
  const auto u = harness::ResultTable::from_csv_file(path);
  REQUIRE(u.rows.size() == 2);
  CHECK(u.rows[0].method == "KF");
  CHECK(u.rows[0].nmse_db_mean == doctest::Approx(-9.0830001).epsilon(1e-9));
  CHECK(u.rows[1].ok == false);
  CHECK(u.rows[1].smnr_db == 20.0);
}

TEST_CASE("experiment specs parse from JSON") {
  const std::string path = tmp_path("danse_test_spec.json");
  std::ofstream(path) << R"({
    "model": "lorenz",
    "smnr_grid_db": [0, 10],
    "n_train": 12, "t_train": 30, "n_test": 4, "t_test": 25,
    "methods": ["LS", "UKF"],
    "train_smnr_db": 20.0,
    "seed": 99,
    "train": {"max_epochs": 3, "batch_size": 4}
  })";
  const auto spec = harness::ExperimentSpec::from_json_file(path);
  CHECK(spec.model == "lorenz");
  CHECK(spec.smnr_grid_db == std::vector<double>{0.0, 10.0});
  CHECK(spec.methods == std::vector<std::string>{"LS", "UKF"});
  REQUIRE(spec.train_smnr_db.has_value());
  CHECK(*spec.train_smnr_db == 20.0);
  CHECK_FALSE(spec.train_sigma_e2_db.has_value());
  CHECK(spec.seed == 99);
  CHECK(spec.train.max_epochs == 3);
  CHECK(spec.train.batch_size == 4);
}

TEST_CASE("run_experiment on classical methods") {
  harness::ExperimentSpec spec;
  spec.model = "linear";
  spec.smnr_grid_db = {0.0, 20.0};
  spec.n_train = 2;
  spec.t_train = 20;
  spec.n_test = 6;
  spec.t_test = 80;
  spec.methods = {"LS", "KF"};
  spec.seed = 31;

  const auto t1 = harness::run_experiment(spec);
  REQUIRE(t1.rows.size() == 4);

  SUBCASE("same seed reproduces the table exactly") {
    const auto t2 = harness::run_experiment(spec);
    CHECK(t1.to_csv() == t2.to_csv());
  }

  SUBCASE("KF beats LS at every SMNR") {
    for (const auto& kf : t1.rows) {
      if (kf.method != "KF") continue;
      for (const auto& ls : t1.rows)
        if (ls.method == "LS" && ls.smnr_db == kf.smnr_db)
          CHECK(kf.nmse_db_mean < ls.nmse_db_mean);
    }
  }

  SUBCASE("LS rows are finite and complete") {
    for (const auto& row : t1.rows) {
      if (row.method != "LS") continue;
      CHECK(row.ok);
      CHECK(row.n_test == 6);
      CHECK(std::isfinite(row.nmse_db_mean));
    }
  }
}

TEST_CASE("line plots emit well-formed SVG") {
  const std::string path = tmp_path("danse_test_plot.svg");
  harness::write_line_plot_svg(
      path, "NMSE vs SMNR", "SMNR (dB)", "NMSE (dB)",
      {{"KF", {{0.0, -1.0}, {10.0, -5.0}}},
       {"DANSE", {{0.0, -1.2}, {10.0, -5.5}}}});
  const std::string svg = slurp(path);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("KF") != std::string::npos);
  CHECK(svg.find("DANSE") != std::string::npos);
}

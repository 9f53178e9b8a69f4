#include "danse/learn.hpp"

#include "danse/danse.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace danse;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

prior_net::Dims tiny{/*n=*/2, /*h=*/3, /*m=*/2, /*ff=*/4};

gauss::MeasurementModel identity_mm(int n, double cw) {
  return {MatrixXd::Identity(n, n), cw * MatrixXd::Identity(n, n)};
}

// Inverse softplus: var_b2 value giving a requested head variance
// (before the 1e-6 floor).
double inv_softplus(double v) { return std::log(std::expm1(v)); }

}  // namespace

TEST_CASE("unsupervised loss reduces to the scalar NLL") {
  prior_net::Dims d1{1, 3, 1, 4};
  auto p = prior_net::PriorNetParams::zeros(d1);
  // Zero parameters: prior mean 0, variance softplus(0) + 1e-6.
  const double v = std::log(2.0) + 1e-6;
  gauss::MeasurementModel mm{MatrixXd::Identity(1, 1),
                             MatrixXd::Constant(1, 1, 1.0 - v)};
  const auto lg = learn::unsupervised_loss(MatrixXd::Zero(1, 1), p, mm);
  // Predictive is N(0, 1), evaluated at y = 0.
  CHECK(lg.loss == doctest::Approx(0.5 * std::log(2 * M_PI)).epsilon(1e-12));
}

TEST_CASE("unsupervised loss equals minus the forecast log-likelihood") {
  auto p = prior_net::PriorNetParams::init(tiny, 31);
  std::mt19937_64 rng(32);
  const MatrixXd y = oracles::random_mat(9, 2, rng);
  const auto mm = identity_mm(2, 0.8);
  const auto lg = learn::unsupervised_loss(y, p, mm);
  const auto out = filter::filter_trajectory(y, p, mm);
  double ref = 0.0;
  for (int t = 0; t < 9; ++t)
    ref -= gauss::log_pdf(out.forecasts[t], y.row(t).transpose());
  CHECK(std::abs(lg.loss - ref) < 1e-12);
}

TEST_CASE("supervised loss equals minus the posterior log-likelihood") {
  auto p = prior_net::PriorNetParams::init(tiny, 33);
  std::mt19937_64 rng(34);
  const MatrixXd y = oracles::random_mat(9, 2, rng);
  const MatrixXd x = oracles::random_mat(9, 2, rng);
  const auto mm = identity_mm(2, 0.8);
  const auto lg = learn::supervised_loss(x, y, p, mm);
  const auto out = filter::filter_trajectory(y, p, mm);
  double ref = 0.0;
  for (int t = 0; t < 9; ++t)
    ref -= gauss::log_pdf(out.posteriors[t], x.row(t).transpose());
  CHECK(std::abs(lg.loss - ref) < 1e-11);
}

TEST_CASE("supervised loss with posterior exactly N(x, I)") {
  // H = I, Cw = 2I and prior variance 2 give posterior covariance I;
  // choosing x = (m_prior + y)/2 makes the quadratic term vanish.
  auto p = prior_net::PriorNetParams::zeros(tiny);
  p.var_b2 = VectorXd::Constant(2, inv_softplus(2.0 - 1e-6));
  const auto mm = identity_mm(2, 2.0);
  const int T = 4;
  std::mt19937_64 rng(35);
  const MatrixXd y = oracles::random_mat(T, 2, rng);
  const MatrixXd x = 0.5 * y;  // prior mean is zero
  const auto lg = learn::supervised_loss(x, y, p, mm);
  CHECK(lg.loss ==
        doctest::Approx(T * (2.0 / 2.0) * std::log(2 * M_PI)).epsilon(1e-9));
}

TEST_CASE("loss gradients match finite differences") {
  auto p = prior_net::PriorNetParams::init(tiny, 41);
  p.h0 = VectorXd::Constant(3, 0.15);
  std::mt19937_64 rng(42);
  const int T = 6;
  const MatrixXd y = oracles::random_mat(T, 2, rng);
  const MatrixXd x = oracles::random_mat(T, 2, rng);
  gauss::MeasurementModel mm{oracles::random_mat(2, 2, rng),
                             oracles::random_spd(2, rng, 0.5, 1.5)};

  auto check_grad = [&](auto&& lossfn) {
    const auto lg = lossfn(p);
    auto grefs = lg.grad.tensors();
    auto prefs = p.tensors();
    const double step = 1e-6;
    double max_rel = 0.0;
    for (size_t ti = 0; ti < prefs.size(); ++ti) {
      for (long k = 0; k < prefs[ti].size; ++k) {
        const double saved = prefs[ti].data[k];
        prefs[ti].data[k] = saved + step;
        const double fp = lossfn(p).loss;
        prefs[ti].data[k] = saved - step;
        const double fm = lossfn(p).loss;
        prefs[ti].data[k] = saved;
        const double fd = (fp - fm) / (2 * step);
        const double rel = std::abs(fd - grefs[ti].data[k]) /
                           std::max(1e-5, std::abs(fd));
        max_rel = std::max(max_rel, rel);
      }
    }
    return max_rel;
  };

  SUBCASE("unsupervised") {
    CHECK(check_grad([&](const prior_net::PriorNetParams& q) {
            return learn::unsupervised_loss(y, q, mm);
          }) < 1e-4);
  }
  SUBCASE("supervised") {
    CHECK(check_grad([&](const prior_net::PriorNetParams& q) {
            return learn::supervised_loss(x, y, q, mm);
          }) < 1e-4);
  }
  SUBCASE("with weight decay") {
    CHECK(check_grad([&](const prior_net::PriorNetParams& q) {
            return learn::unsupervised_loss(y, q, mm, 0.01);
          }) < 1e-4);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto p = prior_net::PriorNetParams::init(tiny, 51);
    auto copy = p;
    auto st = learn::AdamState::init(tiny);
    learn::adam_step(p, prior_net::PriorNetParams::zeros(tiny), st, 0.1);
    CHECK(p.Wz == copy.Wz);
    CHECK(p.var_b2 == copy.var_b2);
  }
  SUBCASE("first step moves by -lr * sign(g)") {
    auto p = prior_net::PriorNetParams::zeros(tiny);
    auto g = prior_net::PriorNetParams::zeros(tiny);
    g.Wz(0, 0) = 3.7;
    g.bh(2) = -0.002;
    auto st = learn::AdamState::init(tiny);
    learn::adam_step(p, g, st, 0.01);
    CHECK(p.Wz(0, 0) == doctest::Approx(-0.01).epsilon(1e-5));
    CHECK(p.bh(2) == doctest::Approx(0.01).epsilon(1e-4));
  }
  SUBCASE("matches a hand-rolled scalar oracle over two steps") {
    const double grad = 0.5, lr = 0.05;
    double m = 0, v = 0, x = 1.0;
    for (int step = 1; step <= 2; ++step) {
      m = 0.9 * m + 0.1 * grad;
      v = 0.999 * v + 0.001 * grad * grad;
      const double mh = m / (1 - std::pow(0.9, step));
      const double vh = v / (1 - std::pow(0.999, step));
      x -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    auto p = prior_net::PriorNetParams::zeros(tiny);
    p.bz(0) = 1.0;
    auto g = prior_net::PriorNetParams::zeros(tiny);
    g.bz(0) = grad;
    auto st = learn::AdamState::init(tiny);
    learn::adam_step(p, g, st, lr);
    learn::adam_step(p, g, st, lr);
    CHECK(p.bz(0) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("training loop behaviour") {
  auto model = ssm::LinearModel::default_2d();
  const auto bundle = ssm::simulate(model, model.H, 0.05, 30, 40, 61);
  const auto mm = identity_mm(2, 0.05);

  learn::TrainConfig cfg;
  cfg.max_epochs = 8;
  cfg.batch_size = 8;
  cfg.patience = 8;
  cfg.seed = 99;

  SUBCASE("zero learning rate changes nothing") {
    cfg.lr0 = 0.0;
    const auto r = learn::train(bundle.without_states(), mm, cfg,
                                learn::TrainMode::Unsupervised);
    const auto fresh = prior_net::PriorNetParams::init(
        r.params.dims(), cfg.seed ^ 0x9e3779b97f4a7c15ull);
    CHECK(r.params.Wz == fresh.Wz);
    CHECK(r.params.mean_W2 == fresh.mean_W2);
  }

  SUBCASE("validation loss improves from the random initialization") {
    cfg.lr0 = 1e-2;
    const auto r = learn::train(bundle.without_states(), mm, cfg,
                                learn::TrainMode::Unsupervised);
    REQUIRE(r.log.size() >= 2);
    CHECK(r.log.back().val_loss < r.log.front().val_loss);
    CHECK(r.best_val_loss <= r.log.front().val_loss);
  }

  SUBCASE("seeded runs are identical") {
    cfg.lr0 = 1e-2;
    const auto a = learn::train(bundle.without_states(), mm, cfg,
                                learn::TrainMode::Unsupervised);
    const auto b = learn::train(bundle.without_states(), mm, cfg,
                                learn::TrainMode::Unsupervised);
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
      CHECK(a.log[i].train_loss == b.log[i].train_loss);
      CHECK(a.log[i].val_loss == b.log[i].val_loss);
    }
    CHECK(a.params.Uh == b.params.Uh);
  }

  SUBCASE("returned parameters achieve the best validation loss") {
    cfg.lr0 = 5e-2;  // deliberately noisy
    const auto r = learn::train(bundle.without_states(), mm, cfg,
                                learn::TrainMode::Unsupervised);
    double best_logged = 1e300;
    for (const auto& e : r.log) best_logged = std::min(best_logged, e.val_loss);
    CHECK(r.best_val_loss == doctest::Approx(best_logged));
  }

  SUBCASE("supervised mode requires states") {
    CHECK_THROWS_AS(learn::train(bundle.without_states(), mm, cfg,
                                 learn::TrainMode::Supervised),
                    std::invalid_argument);
  }

  SUBCASE("empty dataset is rejected") {
    CHECK_THROWS_AS(
        learn::train(ssm::TrajectoryBundle{}, mm, cfg,
                     learn::TrainMode::Unsupervised),
        std::invalid_argument);
  }
}

TEST_CASE("learning-rate schedule is a nonincreasing staircase") {
  learn::TrainConfig cfg;
  cfg.lr0 = 1e-2;
  cfg.max_epochs = 60;
  double prev = cfg.lr_at(0);
  CHECK(prev == 1e-2);
  for (int e = 1; e < 60; ++e) {
    const double lr = cfg.lr_at(e);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK(cfg.lr_at(10) == doctest::Approx(1e-2 * 0.9));
  CHECK(cfg.lr_at(59) == doctest::Approx(1e-2 * std::pow(0.9, 5)));
}

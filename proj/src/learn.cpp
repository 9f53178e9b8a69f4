#include "danse/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace danse::learn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct Chol {
  Eigen::LLT<Eigen::MatrixXd> llt;
  explicit Chol(const Eigen::MatrixXd& A) : llt(A) {
    if (llt.info() != Eigen::Success)
      throw gauss::SingularCovariance("Cholesky failure in loss");
  }
  double logdet() const {
    double s = 0.0;
    for (int i = 0; i < llt.matrixL().rows(); ++i)
      s += 2.0 * std::log(llt.matrixL()(i, i));
    return s;
  }
};

// Per-step pieces of the unsupervised NLL and its gradient w.r.t. the
// prior mean and diagonal variances.
void unsup_step(const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                const Eigen::VectorXd& v, const gauss::MeasurementModel& mm,
                double& loss, Eigen::VectorXd* g_mean,
                Eigen::VectorXd* g_var) {
  const int n = mm.meas_dim();
  Eigen::MatrixXd R = mm.Cw + mm.H * v.asDiagonal() * mm.H.transpose();
  R = 0.5 * (R + R.transpose()).eval();
  Chol ch(R);
  const Eigen::VectorXd eps = y - mm.H * m;
  const Eigen::VectorXd Sinv_eps = ch.llt.solve(eps);
  loss += 0.5 * eps.dot(Sinv_eps) + 0.5 * n * kLog2Pi + 0.5 * ch.logdet();
  if (!g_mean) return;

  *g_mean = -mm.H.transpose() * Sinv_eps;
  const Eigen::MatrixXd Sinv =
      ch.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd G_R =
      0.5 * (Sinv - Sinv_eps * Sinv_eps.transpose());
  *g_var = (mm.H.transpose() * G_R * mm.H).diagonal();
}

// Gradient of the supervised NLL through the conjugate-update algebra:
// with L = diag(v), S = (H L H^T + Cw)^-1 and M = H^T S H, the posterior
// is m + L H^T S eps, L - L M L; the chain rule w.r.t. (m, v) reduces to
// the closed forms below.
void sup_step(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
              const Eigen::VectorXd& m, const Eigen::VectorXd& v,
              const gauss::MeasurementModel& mm, double& loss,
              Eigen::VectorXd* g_mean, Eigen::VectorXd* g_var) {
  const int sm = mm.state_dim();
  const int n = mm.meas_dim();
  const Eigen::MatrixXd L = v.asDiagonal();
  Eigen::MatrixXd R = mm.Cw + mm.H * L * mm.H.transpose();
  R = 0.5 * (R + R.transpose()).eval();
  Chol chR(R);
  const Eigen::MatrixXd Sinv =
      chR.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd M = mm.H.transpose() * Sinv * mm.H;  // sm x sm
  const Eigen::VectorXd eps = y - mm.H * m;
  const Eigen::MatrixXd K = L * mm.H.transpose() * Sinv;
  const Eigen::VectorXd m_post = m + K * eps;
  Eigen::MatrixXd P = L - L * M * L;
  P = 0.5 * (P + P.transpose()).eval();
  Chol chP(P);

  const Eigen::VectorXd d = x - m_post;
  const Eigen::VectorXd Pinv_d = chP.llt.solve(d);
  loss += 0.5 * d.dot(Pinv_d) + 0.5 * sm * kLog2Pi + 0.5 * chP.logdet();
  if (!g_mean) return;

  const Eigen::VectorXd g_mpost = -Pinv_d;
  const Eigen::MatrixXd Pinv =
      chP.llt.solve(Eigen::MatrixXd::Identity(sm, sm));
  const Eigen::MatrixXd G_P = 0.5 * (Pinv - Pinv_d * Pinv_d.transpose());

  *g_mean = (Eigen::MatrixXd::Identity(sm, sm) - K * mm.H).transpose() *
            g_mpost;
  const Eigen::VectorXd a = mm.H.transpose() * Sinv * eps;
  const Eigen::MatrixXd IML = Eigen::MatrixXd::Identity(sm, sm) - M * L;
  const Eigen::VectorXd u = IML * g_mpost;
  const Eigen::MatrixXd G_L =
      u * a.transpose() + IML * G_P * IML.transpose();
  *g_var = G_L.diagonal();
}

LossGrad trajectory_loss(const Eigen::MatrixXd* x, const Eigen::MatrixXd& y,
                         const prior_net::PriorNetParams& params,
                         const gauss::MeasurementModel& mm,
                         double weight_decay, bool want_grad) {
  const auto seq = prior_net::priors_forward(y, params);
  const int T = seq.length();
  const int m_dim = mm.state_dim();

  LossGrad out;
  Eigen::MatrixXd g_means, g_vars;
  if (want_grad) {
    g_means.setZero(T, m_dim);
    g_vars.setZero(T, m_dim);
  }
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd gm, gv;
    const Eigen::VectorXd mean = seq.means.row(t).transpose();
    const Eigen::VectorXd var = seq.vars.row(t).transpose();
    if (x == nullptr) {
      unsup_step(y.row(t).transpose(), mean, var, mm, out.loss,
                 want_grad ? &gm : nullptr, want_grad ? &gv : nullptr);
    } else {
      sup_step(x->row(t).transpose(), y.row(t).transpose(), mean, var, mm,
               out.loss, want_grad ? &gm : nullptr,
               want_grad ? &gv : nullptr);
    }
    if (want_grad) {
      g_means.row(t) = gm.transpose();
      g_vars.row(t) = gv.transpose();
    }
  }
  if (want_grad)
    out.grad = prior_net::priors_backward(seq, g_means, g_vars, params);
  if (weight_decay > 0.0) {
    out.loss += weight_decay * params.squared_norm();
    if (want_grad) out.grad.axpy(2.0 * weight_decay, params);
  }
  if (!std::isfinite(out.loss))
    throw DivergedError("non-finite training loss");
  return out;
}

}  // namespace

double TrainConfig::lr_at(int epoch) const {
  const int step = std::max(1, (max_epochs + 5) / 6);  // ceil(max_epochs/6)
  return lr0 * std::pow(lr_decay, epoch / step);
}

LossGrad unsupervised_loss(const Eigen::MatrixXd& y,
                           const prior_net::PriorNetParams& params,
                           const gauss::MeasurementModel& mm,
                           double weight_decay) {
  return trajectory_loss(nullptr, y, params, mm, weight_decay, true);
}

LossGrad supervised_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                         const prior_net::PriorNetParams& params,
                         const gauss::MeasurementModel& mm,
                         double weight_decay) {
  return trajectory_loss(&x, y, params, mm, weight_decay, true);
}

AdamState AdamState::init(const prior_net::Dims& d) {
  AdamState s;
  s.m1 = prior_net::PriorNetParams::zeros(d);
  s.m2 = prior_net::PriorNetParams::zeros(d);
  return s;
}

void adam_step(prior_net::PriorNetParams& params,
               const prior_net::PriorNetParams& grads, AdamState& state,
               double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  auto pt = params.tensors();
  auto gt = grads.tensors();
  auto m1t = state.m1.tensors();
  auto m2t = state.m2.tensors();
  for (size_t i = 0; i < pt.size(); ++i) {
    Eigen::Map<Eigen::ArrayXd> p(pt[i].data, pt[i].size);
    Eigen::Map<const Eigen::ArrayXd> g(gt[i].data, gt[i].size);
    Eigen::Map<Eigen::ArrayXd> m1(m1t[i].data, m1t[i].size);
    Eigen::Map<Eigen::ArrayXd> m2(m2t[i].data, m2t[i].size);
    m1 = state.beta1 * m1 + (1.0 - state.beta1) * g;
    m2 = state.beta2 * m2 + (1.0 - state.beta2) * g.square();
    p -= lr * (m1 / bc1) / ((m2 / bc2).sqrt() + state.eps);
  }
}

TrainResult train(const ssm::TrajectoryBundle& dataset,
                  const gauss::MeasurementModel& mm, const TrainConfig& cfg,
                  TrainMode mode, prior_net::Dims dims) {
  const int N = dataset.size();
  if (N < 1) throw std::invalid_argument("train: empty dataset");
  if (mode == TrainMode::Supervised && !dataset.has_states)
    throw std::invalid_argument("train: supervised mode needs states");

  dims.n = static_cast<int>(dataset.measurements[0].cols());
  dims.m = mm.state_dim();

  // Held-out validation split, seeded.
  std::mt19937_64 rng(cfg.seed);
  std::vector<int> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  int n_val = static_cast<int>(std::floor(cfg.val_fraction * N));
  n_val = std::clamp(n_val, N > 1 ? 1 : 0, N - 1);
  std::vector<int> val_idx(idx.begin(), idx.begin() + n_val);
  std::vector<int> train_idx(idx.begin() + n_val, idx.end());

  auto eval_loss = [&](const prior_net::PriorNetParams& p, int i,
                       bool grad) {
    const Eigen::MatrixXd* x =
        mode == TrainMode::Supervised ? &dataset.states[i] : nullptr;
    return trajectory_loss(x, dataset.measurements[i], p, mm,
                           cfg.weight_decay, grad);
  };

  prior_net::PriorNetParams params = prior_net::PriorNetParams::init(
      dims, cfg.seed ^ 0x9e3779b97f4a7c15ull);
  AdamState adam = AdamState::init(dims);

  TrainResult result;
  result.params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::shuffle(train_idx.begin(), train_idx.end(), rng);

    double train_loss = 0.0;
    for (size_t start = 0; start < train_idx.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(train_idx.size(),
                                  start + static_cast<size_t>(cfg.batch_size));
      prior_net::PriorNetParams batch_grad =
          prior_net::PriorNetParams::zeros(dims);
      double batch_loss = 0.0;
      for (size_t k = start; k < end; ++k) {
        auto lg = eval_loss(params, train_idx[k], true);
        batch_loss += lg.loss;
        batch_grad.axpy(1.0, lg.grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      batch_loss *= inv;
      batch_grad.scale(inv);
      const double gnorm = std::sqrt(batch_grad.squared_norm());
      if (cfg.clip_norm > 0.0 && gnorm > cfg.clip_norm)
        batch_grad.scale(cfg.clip_norm / gnorm);
      adam_step(params, batch_grad, adam, lr);
      train_loss += batch_loss * static_cast<double>(end - start);
    }
    train_loss /= static_cast<double>(train_idx.size());

    double val_loss = 0.0;
    if (!val_idx.empty()) {
      for (int i : val_idx) val_loss += eval_loss(params, i, false).loss;
      val_loss /= static_cast<double>(val_idx.size());
    } else {
      val_loss = train_loss;
    }
    result.log.push_back({epoch, train_loss, val_loss, lr});

    if (val_loss < best_val - cfg.min_delta) {
      best_val = val_loss;
      result.params = params;
      since_best = 0;
    } else {
      since_best += 1;
      if (since_best >= cfg.patience) break;
    }
  }
  result.best_val_loss = best_val;
  return result;
}

}  // namespace danse::learn

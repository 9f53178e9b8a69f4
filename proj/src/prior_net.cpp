#include "danse/prior_net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace danse::prior_net {

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::ArrayXd sigmoid_arr(const Eigen::VectorXd& v) {
  return v.array().unaryExpr([](double x) { return sigmoid(x); });
}

}  // namespace

PriorNetParams PriorNetParams::zeros(const Dims& d) {
  PriorNetParams p;
  p.Wz = Eigen::MatrixXd::Zero(d.h, d.n);
  p.Wr = Eigen::MatrixXd::Zero(d.h, d.n);
  p.Wh = Eigen::MatrixXd::Zero(d.h, d.n);
  p.Uz = Eigen::MatrixXd::Zero(d.h, d.h);
  p.Ur = Eigen::MatrixXd::Zero(d.h, d.h);
  p.Uh = Eigen::MatrixXd::Zero(d.h, d.h);
  p.bz = Eigen::VectorXd::Zero(d.h);
  p.br = Eigen::VectorXd::Zero(d.h);
  p.bh = Eigen::VectorXd::Zero(d.h);
  p.h0 = Eigen::VectorXd::Zero(d.h);
  p.mean_W1 = Eigen::MatrixXd::Zero(d.ff, d.h);
  p.mean_b1 = Eigen::VectorXd::Zero(d.ff);
  p.mean_W2 = Eigen::MatrixXd::Zero(d.m, d.ff);
  p.mean_b2 = Eigen::VectorXd::Zero(d.m);
  p.var_W1 = Eigen::MatrixXd::Zero(d.ff, d.h);
  p.var_b1 = Eigen::VectorXd::Zero(d.ff);
  p.var_W2 = Eigen::MatrixXd::Zero(d.m, d.ff);
  p.var_b2 = Eigen::VectorXd::Zero(d.m);
  return p;
}

PriorNetParams PriorNetParams::init(const Dims& d, std::uint64_t seed) {
  PriorNetParams p = zeros(d);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d.h));
  std::uniform_real_distribution<double> uni(-bound, bound);
  for (Eigen::MatrixXd* w : {&p.Wz, &p.Wr, &p.Wh, &p.Uz, &p.Ur, &p.Uh,
                             &p.mean_W1, &p.mean_W2, &p.var_W1, &p.var_W2})
    for (long i = 0; i < w->size(); ++i) w->data()[i] = uni(rng);
  return p;
}

Dims PriorNetParams::dims() const {
  Dims d;
  d.h = static_cast<int>(Wz.rows());
  d.n = static_cast<int>(Wz.cols());
  d.ff = static_cast<int>(mean_W1.rows());
  d.m = static_cast<int>(mean_W2.rows());
  return d;
}

std::vector<TensorRef> PriorNetParams::tensors() {
  auto ref = [](const char* name, Eigen::MatrixXd& m) {
    return TensorRef{name, m.data(), m.size(), m.rows(), m.cols()};
  };
  auto vref = [](const char* name, Eigen::VectorXd& v) {
    return TensorRef{name, v.data(), v.size(), v.size(), 1};
  };
  return {
      ref("gru.Wz", Wz),        ref("gru.Wr", Wr),
      ref("gru.Wh", Wh),        ref("gru.Uz", Uz),
      ref("gru.Ur", Ur),        ref("gru.Uh", Uh),
      vref("gru.bz", bz),       vref("gru.br", br),
      vref("gru.bh", bh),       vref("gru.h0", h0),
      ref("mean.W1", mean_W1),  vref("mean.b1", mean_b1),
      ref("mean.W2", mean_W2),  vref("mean.b2", mean_b2),
      ref("var.W1", var_W1),    vref("var.b1", var_b1),
      ref("var.W2", var_W2),    vref("var.b2", var_b2),
  };
}

std::vector<TensorRef> PriorNetParams::tensors() const {
  return const_cast<PriorNetParams*>(this)->tensors();
}

void PriorNetParams::axpy(double alpha, const PriorNetParams& other) {
  auto a = tensors();
  auto b = other.tensors();
  for (size_t i = 0; i < a.size(); ++i)
    Eigen::Map<Eigen::VectorXd>(a[i].data, a[i].size) +=
        alpha * Eigen::Map<const Eigen::VectorXd>(b[i].data, b[i].size);
}

void PriorNetParams::scale(double alpha) {
  for (auto& t : tensors())
    Eigen::Map<Eigen::VectorXd>(t.data, t.size) *= alpha;
}

double PriorNetParams::squared_norm() const {
  double s = 0.0;
  for (const auto& t : tensors())
    s += Eigen::Map<const Eigen::VectorXd>(t.data, t.size).squaredNorm();
  return s;
}

Eigen::VectorXd gru_step(const Eigen::VectorXd& h, const Eigen::VectorXd& y,
                         const PriorNetParams& p) {
  const Eigen::VectorXd z =
      sigmoid_arr(p.Wz * y + p.Uz * h + p.bz).matrix();
  const Eigen::VectorXd r =
      sigmoid_arr(p.Wr * y + p.Ur * h + p.br).matrix();
  const Eigen::VectorXd hc =
      (p.Wh * y + p.Uh * (r.array() * h.array()).matrix() + p.bh)
          .array()
          .tanh()
          .matrix();
  return ((1.0 - z.array()) * h.array() + z.array() * hc.array()).matrix();
}

PriorSequence priors_forward(const Eigen::MatrixXd& y,
                             const PriorNetParams& p) {
  const Dims d = p.dims();
  const int T = static_cast<int>(y.rows());
  if (T < 1) throw std::invalid_argument("priors_forward: empty trajectory");
  if (y.cols() != d.n)
    throw std::invalid_argument("priors_forward: input dim mismatch");

  PriorSequence s;
  s.inputs = y;
  s.hidden.resize(d.h, T);
  s.gate_z.resize(d.h, T - 1);
  s.gate_r.resize(d.h, T - 1);
  s.cand.resize(d.h, T - 1);
  s.u_mean.resize(d.ff, T);
  s.u_var.resize(d.ff, T);
  s.var_pre.resize(d.m, T);
  s.means.resize(T, d.m);
  s.vars.resize(T, d.m);

  s.hidden.col(0) = p.h0;
  for (int t = 1; t < T; ++t) {
    const Eigen::VectorXd h = s.hidden.col(t - 1);
    const Eigen::VectorXd yin = y.row(t - 1).transpose();
    const Eigen::VectorXd z = sigmoid_arr(p.Wz * yin + p.Uz * h + p.bz);
    const Eigen::VectorXd r = sigmoid_arr(p.Wr * yin + p.Ur * h + p.br);
    const Eigen::VectorXd hc =
        (p.Wh * yin + p.Uh * (r.array() * h.array()).matrix() + p.bh)
            .array()
            .tanh()
            .matrix();
    s.gate_z.col(t - 1) = z;
    s.gate_r.col(t - 1) = r;
    s.cand.col(t - 1) = hc;
    s.hidden.col(t) =
        ((1.0 - z.array()) * h.array() + z.array() * hc.array()).matrix();
  }

  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd hs = s.hidden.col(t);
    s.u_mean.col(t) = (p.mean_W1 * hs + p.mean_b1).array().tanh().matrix();
    s.means.row(t) = (p.mean_W2 * s.u_mean.col(t) + p.mean_b2).transpose();
    s.u_var.col(t) = (p.var_W1 * hs + p.var_b1).array().tanh().matrix();
    s.var_pre.col(t) = p.var_W2 * s.u_var.col(t) + p.var_b2;
    for (int j = 0; j < d.m; ++j)
      s.vars(t, j) = softplus(s.var_pre(j, t)) + kVarFloor;
  }
  return s;
}

PriorNetParams priors_backward(const PriorSequence& seq,
                               const Eigen::MatrixXd& grad_means,
                               const Eigen::MatrixXd& grad_vars,
                               const PriorNetParams& p) {
  const Dims d = p.dims();
  const int T = seq.length();
  if (grad_means.rows() != T || grad_vars.rows() != T ||
      grad_means.cols() != d.m || grad_vars.cols() != d.m)
    throw std::invalid_argument("priors_backward: gradient shape mismatch");

  PriorNetParams g = PriorNetParams::zeros(d);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(d.h);

  for (int t = T - 1; t >= 0; --t) {
    // Heads.
    Eigen::VectorXd dh = carry;
    const Eigen::VectorXd hs = seq.hidden.col(t);
    {
      const Eigen::VectorXd gm = grad_means.row(t).transpose();
      const Eigen::VectorXd u = seq.u_mean.col(t);
      g.mean_b2 += gm;
      g.mean_W2 += gm * u.transpose();
      const Eigen::VectorXd du = p.mean_W2.transpose() * gm;
      const Eigen::VectorXd dpre =
          (du.array() * (1.0 - u.array().square())).matrix();
      g.mean_W1 += dpre * hs.transpose();
      g.mean_b1 += dpre;
      dh += p.mean_W1.transpose() * dpre;
    }
    {
      // d var / d var_pre = sigmoid(var_pre)
      Eigen::VectorXd gv = grad_vars.row(t).transpose();
      for (int j = 0; j < d.m; ++j) gv(j) *= sigmoid(seq.var_pre(j, t));
      const Eigen::VectorXd u = seq.u_var.col(t);
      g.var_b2 += gv;
      g.var_W2 += gv * u.transpose();
      const Eigen::VectorXd du = p.var_W2.transpose() * gv;
      const Eigen::VectorXd dpre =
          (du.array() * (1.0 - u.array().square())).matrix();
      g.var_W1 += dpre * hs.transpose();
      g.var_b1 += dpre;
      dh += p.var_W1.transpose() * dpre;
    }

    if (t == 0) {
      g.h0 += dh;
      break;
    }

    // GRU step t: hidden(t) from hidden(t-1) and inputs.row(t-1).
    const Eigen::VectorXd h = seq.hidden.col(t - 1);
    const Eigen::VectorXd yin = seq.inputs.row(t - 1).transpose();
    const Eigen::VectorXd z = seq.gate_z.col(t - 1);
    const Eigen::VectorXd r = seq.gate_r.col(t - 1);
    const Eigen::VectorXd hc = seq.cand.col(t - 1);

    const Eigen::VectorXd dhc = (dh.array() * z.array()).matrix();
    const Eigen::VectorXd dz =
        (dh.array() * (hc.array() - h.array())).matrix();
    Eigen::VectorXd dh_prev = (dh.array() * (1.0 - z.array())).matrix();

    const Eigen::VectorXd dac =
        (dhc.array() * (1.0 - hc.array().square())).matrix();
    g.Wh += dac * yin.transpose();
    g.Uh += dac * (r.array() * h.array()).matrix().transpose();
    g.bh += dac;
    const Eigen::VectorXd drh = p.Uh.transpose() * dac;
    const Eigen::VectorXd dr = (drh.array() * h.array()).matrix();
    dh_prev += (drh.array() * r.array()).matrix();

    const Eigen::VectorXd daz =
        (dz.array() * z.array() * (1.0 - z.array())).matrix();
    g.Wz += daz * yin.transpose();
    g.Uz += daz * h.transpose();
    g.bz += daz;
    dh_prev += p.Uz.transpose() * daz;

    const Eigen::VectorXd dar =
        (dr.array() * r.array() * (1.0 - r.array())).matrix();
    g.Wr += dar * yin.transpose();
    g.Ur += dar * h.transpose();
    g.br += dar;
    dh_prev += p.Ur.transpose() * dar;

    carry = dh_prev;
  }
  return g;
}

}  // namespace danse::prior_net

#include "invlab/estimators.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "invlab/kernels.hpp"

namespace invlab {

LinearModel mean_estimator(const LabeledDataset& data) {
  if (data.empty()) throw InvalidArgument("mean estimator of an empty dataset");
  return LinearModel(data.x().transpose() * data.y() / data.size());
}

LinearModel per_env_mean(const LabeledDataset& data, int env) {
  Vec sum = Vec::Zero(data.dim());
  int count = 0;
  for (int i = 0; i < data.size(); ++i) {
    if (data.env()[i] != env) continue;
    sum += data.y()[i] * data.x().row(i).transpose();
    ++count;
  }
  if (count == 0) throw InvalidArgument(fmt::format("environment {} has no rows", env));
  return LinearModel(sum / count);
}

std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::irmv1: return "irmv1";
    case PenaltyKind::vrex: return "vrex";
    case PenaltyKind::groupdro: return "groupdro";
    case PenaltyKind::moment_match: return "moment_match";
  }
  return "none";
}

PenaltyKind parse_penalty(std::string_view name) {
  for (auto k : {PenaltyKind::none, PenaltyKind::irmv1, PenaltyKind::vrex, PenaltyKind::groupdro,
                 PenaltyKind::moment_match})
    if (to_string(k) == name) return k;
  throw InvalidArgument(fmt::format("unknown penalty '{}'", name));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
  if (!(penalty_weight >= 0.0)) throw InvalidArgument("penalty_weight must be nonnegative");
  if (!(l2_weight >= 0.0)) throw InvalidArgument("l2_weight must be nonnegative");
  if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (anneal_iter && *anneal_iter < 0) throw InvalidArgument("anneal_iter must be nonnegative");
  if (log_every < 0) throw InvalidArgument("log_every must be nonnegative");
}

namespace {

double logistic(double m) { return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

double logistic_d1(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(m));
}

double logistic_d2(double m) {
  const double s = 1.0 / (1.0 + std::exp(-std::abs(m)));
  return s * (1.0 - s);
}

struct Objective {
  double loss = 0.0;
  double penalty = 0.0;
  double value = 0.0;  // loss + weight * penalty, without the l2 term
  Vec grad;            // d value / d margins
};

struct EnvIndex {
  std::vector<int> rows[2];
  void check() const {
    if (rows[0].empty() || rows[1].empty())
      throw InvalidArgument("environment penalty needs rows from both environments");
  }
};

EnvIndex index_envs(const std::vector<int>& env) {
  EnvIndex idx;
  for (int i = 0; i < static_cast<int>(env.size()); ++i) idx.rows[env[i] - 1].push_back(i);
  return idx;
}

Objective margin_objective(const Vec& m, const EnvIndex& idx, PenaltyKind kind, double weight,
                           bool penalty_active) {
  const Eigen::Index n = m.size();
  Objective out;
  out.grad.resize(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += logistic(m[i]);
    out.grad[i] = logistic_d1(m[i]) / n;
  }
  out.loss = loss / n;

  if (kind != PenaltyKind::none) idx.check();
  const double ne[2] = {static_cast<double>(idx.rows[0].size()),
                        static_cast<double>(idx.rows[1].size())};
  Vec dp = Vec::Zero(n);  // d penalty / d margins
  switch (kind) {
    case PenaltyKind::none:
      break;
    case PenaltyKind::irmv1: {
      for (int e = 0; e < 2; ++e) {
        double g = 0.0;
        for (int i : idx.rows[e]) g += m[i] * logistic_d1(m[i]);
        g /= ne[e];
        out.penalty += g * g;
        for (int i : idx.rows[e])
          dp[i] = 2.0 * g * (logistic_d1(m[i]) + m[i] * logistic_d2(m[i])) / ne[e];
      }
      break;
    }
    case PenaltyKind::vrex: {
      double risk[2];
      for (int e = 0; e < 2; ++e) {
        risk[e] = 0.0;
        for (int i : idx.rows[e]) risk[e] += logistic(m[i]);
        risk[e] /= ne[e];
      }
      const double mean = 0.5 * (risk[0] + risk[1]);
      out.penalty = 0.5 * ((risk[0] - mean) * (risk[0] - mean) + (risk[1] - mean) * (risk[1] - mean));
      for (int e = 0; e < 2; ++e)
        for (int i : idx.rows[e]) dp[i] = (risk[e] - mean) * logistic_d1(m[i]) / ne[e];
      break;
    }
    case PenaltyKind::groupdro: {
      // Excess of the worst environment's risk over the pooled risk, so a
      // weight of 1 gives the plain worst-group objective.
      double risk[2];
      for (int e = 0; e < 2; ++e) {
        risk[e] = 0.0;
        for (int i : idx.rows[e]) risk[e] += logistic(m[i]);
        risk[e] /= ne[e];
      }
      const int worst = risk[1] > risk[0] ? 1 : 0;
      out.penalty = risk[worst] - out.loss;
      for (int i : idx.rows[worst]) dp[i] = logistic_d1(m[i]) / ne[worst];
      dp -= out.grad;
      break;
    }
    case PenaltyKind::moment_match: {
      double mu[2], var[2];
      for (int e = 0; e < 2; ++e) {
        mu[e] = 0.0;
        for (int i : idx.rows[e]) mu[e] += m[i];
        mu[e] /= ne[e];
        var[e] = 0.0;
        for (int i : idx.rows[e]) var[e] += (m[i] - mu[e]) * (m[i] - mu[e]);
        var[e] /= ne[e];
      }
      const double dm = mu[0] - mu[1], dv = var[0] - var[1];
      out.penalty = dm * dm + dv * dv;
      for (int e = 0; e < 2; ++e) {
        const double sign = e == 0 ? 1.0 : -1.0;
        for (int i : idx.rows[e])
          dp[i] = sign * (2.0 * dm + 4.0 * dv * (m[i] - mu[e])) / ne[e];
      }
      break;
    }
  }
  const double w = penalty_active ? weight : 0.0;
  out.value = out.loss + w * out.penalty;
  if (w != 0.0) out.grad += w * dp;
  return out;
}

// Iterate in R^d.
struct PrimalOps {
  const RowMat& z;
  double l2;
  using State = Vec;
  Vec margins(const State& w) const { return z * w; }
  double sqnorm(const State& w) const { return w.squaredNorm(); }
  double grad_norm2(const State& w, const Vec& g) const {
    return (z.transpose() * g + 2.0 * l2 * w).squaredNorm();
  }
  State step(const State& w, const Vec& g, double eta) const {
    return w - eta * (z.transpose() * g + 2.0 * l2 * w);
  }
  Vec to_w(const State& w) const { return w; }
};

// Iterate w = c * w0 + Z^T a. Every gradient lies in span{z_i} plus the
// l2 shrinkage of w, so this representation is closed under the update.
struct SpanState {
  double c = 1.0;
  Vec a;
};

struct SpanOps {
  const RowMat& z;
  const Mat& k;
  const Vec& w0;
  const Vec& m0;  // Z w0
  double w0sq;
  double l2;
  using State = SpanState;
  Vec margins(const State& s) const { return s.c * m0 + k * s.a; }
  double sqnorm(const State& s) const {
    return s.c * s.c * w0sq + 2.0 * s.c * s.a.dot(m0) + s.a.dot(k * s.a);
  }
  double grad_norm2(const State& s, const Vec& g) const {
    const Vec h = g + 2.0 * l2 * s.a;
    const double v = h.dot(k * h) + 4.0 * l2 * s.c * h.dot(m0) + 4.0 * l2 * l2 * s.c * s.c * w0sq;
    return std::max(v, 0.0);
  }
  State step(const State& s, const Vec& g, double eta) const {
    const double shrink = 1.0 - 2.0 * eta * l2;
    return {s.c * shrink, shrink * s.a - eta * g};
  }
  Vec to_w(const State& s) const { return s.c * w0 + z.transpose() * s.a; }
};

template <class Ops>
TrainResult run_gd(const Ops& ops, typename Ops::State state, const EnvIndex& idx,
                   const TrainConfig& cfg) {
  std::vector<TraceRow> trace;
  auto active = [&](int it) { return !cfg.anneal_iter || it >= *cfg.anneal_iter; };
  auto evaluate = [&](const typename Ops::State& s, int it, Vec& m) {
    m = ops.margins(s);
    Objective o = margin_objective(m, idx, cfg.penalty, cfg.penalty_weight, active(it));
    o.value += cfg.l2_weight * ops.sqnorm(s);
    return o;
  };
  auto log_row = [&](int it, const Objective& o, const Vec& m, const typename Ops::State& s) {
    const double nrm = std::sqrt(std::max(ops.sqnorm(s), 0.0));
    int wrong = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) wrong += m[i] <= 0.0;
    trace.push_back({it, o.loss, o.penalty, static_cast<double>(wrong) / m.size(),
                     nrm > 0.0 ? m.minCoeff() / nrm : 0.0});
  };

  double eta = cfg.learning_rate;
  Vec m;
  Objective obj = evaluate(state, 0, m);
  if (!std::isfinite(obj.value)) throw NumericalError("objective is not finite at the start point");
  int it = 0;
  bool converged = false;
  for (; it < cfg.max_iters; ++it) {
    if (it > 0 && cfg.anneal_iter && it == *cfg.anneal_iter) obj = evaluate(state, it, m);
    if (cfg.log_every > 0 ? it % cfg.log_every == 0 : it == 0) log_row(it, obj, m, state);
    if (std::sqrt(ops.grad_norm2(state, obj.grad)) <= cfg.tolerance) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (eta > 1e-30) {
      auto cand = ops.step(state, obj.grad, eta);
      Vec mc;
      Objective oc = evaluate(cand, it, mc);
      if (std::isfinite(oc.value) && oc.value <= obj.value) {
        state = std::move(cand);
        obj = std::move(oc);
        m = std::move(mc);
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    // No descent left at rounding level: treat as a stationary point.
    if (!accepted) {
      converged = true;
      break;
    }
  }
  if (!std::isfinite(obj.value)) throw NumericalError("objective became non-finite");
  log_row(it, obj, m, state);
  return {LinearModel(ops.to_w(state)), std::move(trace), it, converged, obj.value, eta};
}

}  // namespace

double objective_value(const LabeledDataset& data, const Vec& w, const TrainConfig& config,
                       bool penalty_active) {
  const Vec m = data.signed_rows() * w;
  const EnvIndex idx = index_envs(data.env());
  return margin_objective(m, idx, config.penalty, config.penalty_weight, penalty_active).value +
         config.l2_weight * w.squaredNorm();
}

Vec objective_gradient(const LabeledDataset& data, const Vec& w, const TrainConfig& config,
                       bool penalty_active) {
  const RowMat z = data.signed_rows();
  const EnvIndex idx = index_envs(data.env());
  const Objective o = margin_objective(z * w, idx, config.penalty, config.penalty_weight,
                                       penalty_active);
  return z.transpose() * o.grad + 2.0 * config.l2_weight * w;
}

double penalty_value(const LabeledDataset& data, const Vec& w, PenaltyKind kind) {
  const Vec m = data.signed_rows() * w;
  return margin_objective(m, index_envs(data.env()), kind, 1.0, true).penalty;
}

TrainResult gd_train(const LabeledDataset& data, const TrainConfig& config) {
  return gd_train_from(data, config, Vec::Zero(data.dim()));
}

TrainResult gd_train_from(const LabeledDataset& data, const TrainConfig& config, const Vec& init) {
  config.validate();
  if (data.empty()) throw InvalidArgument("cannot train on an empty dataset");
  if (init.size() != data.dim()) throw InvalidArgument("start point has the wrong dimension");
  const EnvIndex idx = index_envs(data.env());
  if (config.penalty != PenaltyKind::none) idx.check();
  const RowMat z = data.signed_rows();
  if (data.dim() > data.size()) {
    const Mat k = gram_parallel(z);
    const Vec m0 = z * init;
    SpanOps ops{z, k, init, m0, init.squaredNorm(), config.l2_weight};
    return run_gd(ops, SpanState{1.0, Vec::Zero(data.size())}, idx, config);
  }
  PrimalOps ops{z, config.l2_weight};
  return run_gd(ops, Vec(init), idx, config);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iter,loss,penalty,train_err,margin\n";
  for (const auto& r : trace)
    fmt::print(out, "{},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.iter, r.loss, r.penalty, r.train_err,
               r.margin);
}

}  // namespace invlab

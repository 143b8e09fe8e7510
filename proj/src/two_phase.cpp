#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "invlab/estimators.hpp"

namespace invlab {

namespace {

struct Split {
  LabeledDataset train;
  LabeledDataset fine;
};

Split split_environment(const LabeledDataset& s, double fraction, std::uint64_t seed) {
  std::vector<int> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 engine(mix64(seed));
  std::shuffle(order.begin(), order.end(), engine);
  const int n_train = static_cast<int>(std::floor(fraction * s.size()));
  if (n_train < 1 || n_train >= s.size())
    throw InvalidArgument(fmt::format(
        "split fraction {} leaves an empty part of an environment with {} rows", fraction, s.size()));
  std::vector<int> train(order.begin(), order.begin() + n_train);
  std::vector<int> fine(order.begin() + n_train, order.end());
  return {s.subset(train), s.subset(fine)};
}

double signed_score_sum(const Vec& w, const LabeledDataset& data) {
  return (data.x() * w).dot(data.y());
}

Vec train_mean(const LabeledDataset& data) {
  return data.x().transpose() * data.y() / data.size();
}

}  // namespace

std::string TwoPhaseDiagnostics::to_json() const {
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["w_1"] = vec(w_1);
  j["w_2"] = vec(w_2);
  j["constraint_coeffs"] = {a_1, a_2};
  j["v_pos"] = {v_pos[0], v_pos[1]};
  j["v_neg"] = {v_neg[0], v_neg[1]};
  j["chosen"] = chose_pos ? "pos" : "neg";
  j["scores"] = {score_pos, score_neg};
  j["split_seed"] = split_seed;
  j["stage2"] = stage2 == Stage2::eopp ? "eopp" : "vrex";
  j["v"] = {v[0], v[1]};
  return j.dump();
}

TwoPhaseResult two_phase_learn(const LabeledDataset& s_1, const LabeledDataset& s_2, Rng& rng,
                               const TwoPhaseOptions& options) {
  if (s_1.size() < 2 || s_2.size() < 2)
    throw InvalidArgument("each environment needs at least two rows");
  if (s_1.dim() != s_2.dim()) throw InvalidArgument("environments differ in dimension");
  if (!(options.split_fraction > 0.0 && options.split_fraction < 1.0))
    throw InvalidArgument("split fraction must lie in (0, 1)");

  TwoPhaseDiagnostics diag;
  diag.stage2 = options.stage2;
  diag.split_seed = rng.next_u64();
  const Split p1 = split_environment(s_1, options.split_fraction, derive_seed({diag.split_seed, 1}));
  const Split p2 = split_environment(s_2, options.split_fraction, derive_seed({diag.split_seed, 2}));

  diag.w_1 = train_mean(p1.train);
  diag.w_2 = train_mean(p2.train);

  // a_e = T_1(w_e) - T_2(w_e), T_k the mean score over positives of fine half k.
  auto t = [](const Vec& w, const LabeledDataset& fine, int e) {
    try {
      return positive_mean_score(w, fine);
    } catch (const NoPositiveExamples&) {
      throw NoPositiveExamples(
          fmt::format("fine-tuning half of environment {} has no positive rows", e));
    }
  };
  diag.a_1 = t(diag.w_1, p1.fine, 1) - t(diag.w_1, p2.fine, 2);
  diag.a_2 = t(diag.w_2, p1.fine, 1) - t(diag.w_2, p2.fine, 2);

  const LabeledDataset fine = LabeledDataset::concat(p1.fine, p2.fine);
  const double s1 = signed_score_sum(diag.w_1, fine);
  const double s2 = signed_score_sum(diag.w_2, fine);

  if (options.stage2 == Stage2::eopp) {
    const double scale = std::max(std::abs(diag.a_1), std::abs(diag.a_2));
    if (scale < 1e-15)
      throw NumericalError("both equal-opportunity constraint coefficients vanish");
    diag.v_pos = Eigen::Vector2d(-diag.a_2, diag.a_1) / scale;
    diag.v_neg = -diag.v_pos;
    diag.score_pos = diag.v_pos[0] * s1 + diag.v_pos[1] * s2;
    diag.score_neg = diag.v_neg[0] * s1 + diag.v_neg[1] * s2;
    if (diag.score_pos != diag.score_neg) {
      diag.chose_pos = diag.score_pos > diag.score_neg;
    } else {
      diag.chose_pos = diag.v_pos.sum() >= 0.0;
    }
    diag.v = diag.chose_pos ? diag.v_pos : diag.v_neg;
  } else {
    // Logistic fit on the two projected features with a risk-variance penalty.
    RowMat proj(fine.size(), 2);
    proj.col(0) = fine.x() * diag.w_1;
    proj.col(1) = fine.x() * diag.w_2;
    LabeledDataset reduced(std::move(proj), fine.y(), fine.env());
    TrainResult fit = gd_train(reduced, options.vrex);
    const Vec& v = fit.model.w();
    diag.v = Eigen::Vector2d(v[0], v[1]);
    diag.v_pos = diag.v / diag.v.cwiseAbs().maxCoeff();
    diag.v_neg = -diag.v_pos;
    diag.score_pos = diag.v_pos[0] * s1 + diag.v_pos[1] * s2;
    diag.score_neg = -diag.score_pos;
    diag.chose_pos = true;
  }
  Vec w = diag.v[0] * diag.w_1 + diag.v[1] * diag.w_2;
  return {LinearModel(std::move(w)), std::move(diag)};
}

}  // namespace invlab

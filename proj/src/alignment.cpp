#include "invlab/estimators.hpp"

namespace invlab {

std::vector<AlignmentRow> irm_margin_alignment(const std::vector<AlignmentCase>& grid,
                                               const AlignmentConfig& config) {
  std::vector<AlignmentRow> rows(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t c = 0; c < grid.size(); ++c) {
    const AlignmentCase& cs = grid[c];
    AlignmentRow& row = rows[c];
    row.d = cs.instance.dim();
    row.seed = cs.seed;
    try {
      Rng rng = Rng::stream(cs.seed, row.d, "alignment", 0);
      const LabeledDataset data = sample_dataset(cs.instance, rng);
      const MaxMarginResult svm = max_margin(data, config.max_margin_tol);

      TrainConfig irm;
      irm.penalty = PenaltyKind::irmv1;
      irm.penalty_weight = config.irm_weight;
      irm.max_iters = config.iters_per_stage;
      irm.tolerance = config.tolerance;
      Vec w = Vec::Zero(data.dim());
      for (double l2 : config.l2_schedule) {
        irm.l2_weight = l2;
        w = gd_train_from(data, irm, w).model.w();
      }
      row.cosine_irm = cosine_similarity(w, svm.model.w());

      TrainConfig erm;
      erm.max_iters = config.erm_iters;
      erm.tolerance = config.tolerance;
      row.cosine_erm = cosine_similarity(gd_train(data, erm).model.w(), svm.model.w());
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }
  return rows;
}

}  // namespace invlab

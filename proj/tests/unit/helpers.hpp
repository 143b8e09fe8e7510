#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "invlab/core_model.hpp"

namespace testing {

inline invlab::Vec random_vec(int d, invlab::Rng& rng) {
  invlab::Vec v(d);
  for (int j = 0; j < d; ++j) v[j] = rng.normal();
  return v;
}

inline invlab::Vec unit(int d, int j, double scale = 1.0) {
  invlab::Vec v = invlab::Vec::Zero(d);
  v[j] = scale;
  return v;
}

// Instance with mu_c = r_c e_1 and mu_s = r_s e_2.
inline invlab::ProblemInstance axis_instance(int d, double r_c, double r_s, double theta_1,
                                             double theta_2, int n_1, int n_2, double sigma) {
  invlab::ProblemInstance inst;
  inst.mu_c = unit(d, 0, r_c);
  inst.mu_s = unit(d, 1, r_s);
  inst.theta_1 = theta_1;
  inst.theta_2 = theta_2;
  inst.n_1 = n_1;
  inst.n_2 = n_2;
  inst.sigma = sigma;
  return inst;
}

inline invlab::LabeledDataset sample(const invlab::ProblemInstance& inst, std::uint64_t seed) {
  invlab::Rng rng(seed);
  return invlab::sample_dataset(inst, rng);
}

// Dataset from explicit rows.
inline invlab::LabeledDataset rows(const std::vector<invlab::Vec>& x, const std::vector<double>& y,
                                   const std::vector<int>& env) {
  invlab::RowMat m(x.size(), x.empty() ? 0 : x[0].size());
  for (size_t i = 0; i < x.size(); ++i) m.row(i) = x[i].transpose();
  invlab::Vec yy(y.size());
  for (size_t i = 0; i < y.size(); ++i) yy[i] = y[i];
  return invlab::LabeledDataset(m, yy, env);
}

}  // namespace testing

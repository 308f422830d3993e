#pragma once

#include <random>
#include <vector>

#include "reap/core.hpp"

namespace reap::testing {

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index d, double lo = 0.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = u(rng);
  return v;
}

inline Matrix random_symmetric(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = n(rng);
  return 0.5 * (m + m.transpose());
}

inline Matrix random_psd(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = n(rng);
  Matrix a = g * g.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  return a / eig.eigenvalues().maxCoeff();
}

// Random confidence set whose preferences are generated by a hidden truth
// matrix, so the set always contains that truth.
struct RandomInstance {
  FeatureVector x0;
  std::vector<FeatureVector> pool;
  Matrix truth;
  ConfidenceSetSpec spec;
};

inline RandomInstance random_instance(std::mt19937_64& rng, Eigen::Index d,
                                      std::size_t num_cuts, double margin = 0.01) {
  RandomInstance inst;
  inst.x0 = random_vector(rng, d);
  inst.truth = random_psd(rng, d);
  const std::size_t n = num_cuts + 2;
  for (std::size_t i = 0; i < n; ++i) inst.pool.push_back(random_vector(rng, d));
  PreferenceSet prefs(margin);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t guard = 0;
  while (prefs.size() < num_cuts && guard++ < 1000) {
    std::size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    if (cost(inst.truth, inst.pool[i], inst.x0) > cost(inst.truth, inst.pool[j], inst.x0)) {
      std::swap(i, j);
    }
    prefs.add(i, j);
  }
  inst.spec = make_spec(prefs, inst.pool, inst.x0);
  return inst;
}

}  // namespace reap::testing

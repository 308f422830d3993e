#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "reap/error.hpp"

namespace reap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A point in the scaled feature space.
using FeatureVector = Eigen::VectorXd;

inline constexpr double kSymmetryRejectTol = 1e-8;
inline constexpr double kPsdEigenFloor = -1e-9;

/// Symmetric positive semidefinite matrix parametrising a Mahalanobis cost
/// (x - x0)^T A (x - x0). Inputs are symmetrised on construction; inputs that
/// are visibly asymmetric or have an eigenvalue below -1e-9 are rejected.
class CostMatrix {
 public:
  explicit CostMatrix(const Matrix& entries);

  static CostMatrix identity(Eigen::Index d, double scale = 1.0);

  const Matrix& entries() const { return entries_; }
  Eigen::Index dim() const { return entries_.rows(); }
  double max_eigenvalue() const;

 private:
  Matrix entries_;
};

/// The cut M_ij whose Frobenius inner product with A is the cost difference
/// c_A(x_i, x0) - c_A(x_j, x0).
class CutMatrix {
 public:
  CutMatrix(Matrix entries, std::size_t i, std::size_t j)
      : entries_(std::move(entries)), i_(i), j_(j) {}

  const Matrix& entries() const { return entries_; }
  std::size_t i() const { return i_; }
  std::size_t j() const { return j_; }
  double norm() const { return entries_.norm(); }

 private:
  Matrix entries_;
  std::size_t i_;
  std::size_t j_;
};

struct OrderedPair {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const OrderedPair&, const OrderedPair&) = default;
};

/// Revealed preferences x_i P x_j, stored in insertion order.
class PreferenceSet {
 public:
  PreferenceSet() = default;
  explicit PreferenceSet(double margin) : margin_(margin) {}

  // Returns false (and leaves the set unchanged) for a duplicate pair.
  bool add(std::size_t i, std::size_t j);
  bool contains(std::size_t i, std::size_t j) const;

  const std::vector<OrderedPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  double margin() const { return margin_; }

 private:
  std::vector<OrderedPair> pairs_;
  double margin_ = 0.0;
};

/// The confidence set U_P = {0 <= A <= I, <A, M_ij> <= eps}.
struct ConfidenceSetSpec {
  std::vector<CutMatrix> cuts;
  double margin = 0.0;
  Eigen::Index dimension = 0;
};

double cost(const CostMatrix& a, const FeatureVector& x, const FeatureVector& x0);
double cost(const Matrix& a, const FeatureVector& x, const FeatureVector& x0);

CutMatrix pair_matrix(const FeatureVector& xi, const FeatureVector& xj,
                      const FeatureVector& x0, std::size_t i = 0,
                      std::size_t j = 0);

double frobenius_inner(const Matrix& a, const Matrix& b);

/// Builds the confidence-set description for a preference set over `pool`.
ConfidenceSetSpec make_spec(const PreferenceSet& prefs,
                            const std::vector<FeatureVector>& pool,
                            const FeatureVector& x0);

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what);

// Row-major nested-array JSON for vectors and matrices.
nlohmann::json to_json(const Vector& v);
nlohmann::json to_json(const Matrix& m);
Vector vector_from_json(const nlohmann::json& j);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace reap

#include "reap/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace reap {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNotPsd: return "not_psd";
    case ErrorCode::kAsymmetric: return "asymmetric";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kToleranceFailure: return "tolerance_failure";
    case ErrorCode::kNonConvergence: return "non_convergence";
    case ErrorCode::kPoolExhausted: return "pool_exhausted";
    case ErrorCode::kUnreachable: return "unreachable";
    case ErrorCode::kBudgetExceeded: return "budget_exceeded";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kSingleClass: return "single_class";
    case ErrorCode::kSubjectPositive: return "subject_already_positive";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kInvalidPlan: return "invalid_plan";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": dimension " + std::to_string(a) +
                    " vs " + std::to_string(b));
  }
}

CostMatrix::CostMatrix(const Matrix& entries) {
  if (entries.rows() != entries.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "cost matrix must be square");
  }
  if (!entries.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "cost matrix has non-finite entries");
  }
  const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
  if (entries.size() > 0 && asym > kSymmetryRejectTol) {
    throw Error(ErrorCode::kAsymmetric,
                "cost matrix asymmetry " + std::to_string(asym));
  }
  entries_ = 0.5 * (entries + entries.transpose());
  if (entries_.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < kPsdEigenFloor) {
      throw Error(ErrorCode::kNotPsd,
                  "cost matrix min eigenvalue " +
                      std::to_string(eig.eigenvalues().minCoeff()));
    }
  }
}

CostMatrix CostMatrix::identity(Eigen::Index d, double scale) {
  return CostMatrix(scale * Matrix::Identity(d, d));
}

double CostMatrix::max_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

bool PreferenceSet::add(std::size_t i, std::size_t j) {
  if (contains(i, j)) return false;
  pairs_.push_back({i, j});
  return true;
}

bool PreferenceSet::contains(std::size_t i, std::size_t j) const {
  return std::find(pairs_.begin(), pairs_.end(), OrderedPair{i, j}) != pairs_.end();
}

double cost(const Matrix& a, const FeatureVector& x, const FeatureVector& x0) {
  require_same_dim(x.size(), x0.size(), "cost");
  require_same_dim(a.rows(), x.size(), "cost");
  const Vector delta = x - x0;
  return delta.dot(a * delta);
}

double cost(const CostMatrix& a, const FeatureVector& x, const FeatureVector& x0) {
  return cost(a.entries(), x, x0);
}

CutMatrix pair_matrix(const FeatureVector& xi, const FeatureVector& xj,
                      const FeatureVector& x0, std::size_t i, std::size_t j) {
  require_same_dim(xi.size(), xj.size(), "pair_matrix");
  require_same_dim(xi.size(), x0.size(), "pair_matrix");
  const Vector diff = xj - xi;
  Matrix m = xi * xi.transpose() - xj * xj.transpose() + diff * x0.transpose() +
             x0 * diff.transpose();
  return CutMatrix(std::move(m), i, j);
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "frobenius_inner: shape mismatch");
  }
  return a.cwiseProduct(b).sum();
}

ConfidenceSetSpec make_spec(const PreferenceSet& prefs,
                            const std::vector<FeatureVector>& pool,
                            const FeatureVector& x0) {
  ConfidenceSetSpec spec;
  spec.margin = prefs.margin();
  spec.dimension = x0.size();
  spec.cuts.reserve(prefs.size());
  for (const auto& p : prefs.pairs()) {
    if (p.i >= pool.size() || p.j >= pool.size()) {
      throw Error(ErrorCode::kInvalidArgument, "preference index out of range");
    }
    spec.cuts.push_back(pair_matrix(pool[p.i], pool[p.j], x0, p.i, p.j));
  }
  return spec;
}

nlohmann::json to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Vector vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParse, "expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::kParse, "expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    if (!std::isfinite(v[static_cast<Eigen::Index>(i)])) {
      throw Error(ErrorCode::kParse, "non-finite number");
    }
  }
  return v;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParse, "expected nested arrays");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[static_cast<std::size_t>(r)]);
    if (row.size() != cols) throw Error(ErrorCode::kParse, "ragged matrix rows");
    m.row(r) = row.transpose();
  }
  return m;
}

}  // namespace reap

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "reap/core.hpp"

namespace reap {

enum class FeatureKind { kContinuous, kCategorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  std::vector<std::string> categories;  // categorical only, >= 2
};

struct DatasetSchema {
  std::vector<FeatureSpec> features;
  std::string label;
  std::string positive_label = "1";  // label value mapped to class 1

  static DatasetSchema from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

DatasetSchema load_schema(const std::string& path);

// One input feature after preprocessing: a single scaled column for a
// continuous feature, a one-hot block for a categorical one.
struct ColumnBlock {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  Eigen::Index offset = 0;
  Eigen::Index width = 1;
  double min = 0.0;
  double max = 1.0;
  std::vector<std::string> categories;
};

struct Dataset {
  std::string name;
  Matrix x;            // N x d, scaled
  std::vector<int> y;  // ground-truth labels in {0, 1}
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<ColumnBlock> blocks;

  Eigen::Index dim() const { return x.cols(); }
  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  FeatureVector row(std::size_t i) const { return x.row(static_cast<Eigen::Index>(i)); }

  /// Original-unit view of a scaled point: {name: number | category}.
  /// Categorical blocks report the arg-max category.
  nlohmann::json unscale(const FeatureVector& v) const;
  /// Inverse of unscale for raw feature values given by name.
  FeatureVector scale(const nlohmann::json& raw) const;
  /// Per-feature change from `from` to `to` in original units.
  nlohmann::json deltas(const FeatureVector& from, const FeatureVector& to) const;
};

/// Reads a CSV with a header row, scales continuous columns to [0, 1],
/// one-hot encodes categorical ones and makes an 80/20 split.
Dataset load_csv(const std::string& path, const DatasetSchema& schema,
                 std::uint64_t split_seed = 0);
Dataset parse_csv(const std::string& text, const DatasetSchema& schema,
                  std::uint64_t split_seed = 0);

/// Label of a raw synthetic point: 1 iff x2 >= 1 + x1 + 2 x1^2 + x1^3 - x1^4.
int synthetic_label(double x1, double x2);

/// n points uniform on [-2, 4] x [-2, 7], labelled by synthetic_label, scaled.
Dataset gen_synthetic(std::size_t n, std::mt19937_64& rng);

/// Differentiable probability model f(x) in (0, 1); class 1 iff f(x) >= 0.5.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Eigen::Index dim() const = 0;
  /// Pre-sigmoid score z(x); f(x) = sigmoid(z(x)).
  virtual double score(const FeatureVector& x) const = 0;
  virtual Vector score_gradient(const FeatureVector& x) const = 0;
  virtual nlohmann::json to_json() const = 0;

  double probability(const FeatureVector& x) const;
  Vector gradient(const FeatureVector& x) const;
  bool predict(const FeatureVector& x) const { return probability(x) >= 0.5; }
  double accuracy(const Dataset& data, const std::vector<std::size_t>& rows) const;
};

class Mlp : public Classifier {
 public:
  Mlp(std::vector<Matrix> weights, std::vector<Vector> biases);

  Eigen::Index dim() const override { return weights_.front().cols(); }
  double score(const FeatureVector& x) const override;
  Vector score_gradient(const FeatureVector& x) const override;
  nlohmann::json to_json() const override;

  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }

 private:
  std::vector<Matrix> weights_;  // layer l maps R^{cols} -> R^{rows}
  std::vector<Vector> biases_;
};

class LogisticRegression : public Classifier {
 public:
  LogisticRegression(Vector w, double b) : w_(std::move(w)), b_(b) {}

  Eigen::Index dim() const override { return w_.size(); }
  double score(const FeatureVector& x) const override;
  Vector score_gradient(const FeatureVector& x) const override;
  nlohmann::json to_json() const override;

  const Vector& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  Vector w_;
  double b_;
};

struct TrainConfig {
  std::vector<int> hidden = {20, 50, 20};
  int epochs = 200;
  double lr = 1e-3;
  int batch = 32;
  std::uint64_t seed = 0;
};

/// MLP with ReLU hidden layers and a sigmoid output, trained with Adam on
/// binary cross-entropy over the train split.
std::unique_ptr<Mlp> train_classifier(const Dataset& data, const TrainConfig& cfg = {});

/// L2-regularised logistic regression fitted by Newton's method.
std::unique_ptr<LogisticRegression> train_logistic(const Dataset& data, double l2 = 1e-4);

std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& j);

/// Rows (from `rows`) that the classifier assigns to class 1 and to class 0.
struct Partition {
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
};
Partition partition(const Dataset& data, const Classifier& clf,
                    const std::vector<std::size_t>& rows);

}  // namespace reap

#include "reap/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace reap {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// RFC 4180 style records: quoted fields may contain commas, quotes ("") and
// newlines.
std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(field);
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::kParse, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<double> parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool label_matches(const std::string& value, const std::string& positive) {
  const auto a = parse_number(value);
  const auto b = parse_number(positive);
  if (a && b) return *a == *b;
  return trim(value) == trim(positive);
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

void split_80_20(Dataset& d, std::uint64_t seed) {
  const std::size_t n = d.size();
  const auto idx = shuffled(n, seed);
  auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  d.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(d.train.begin(), d.train.end());
  std::sort(d.test.begin(), d.test.end());
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Keeps f strictly inside (0, 1) where the logistic saturates in double.
double clamp_probability(double p) { return std::clamp(p, 1e-15, 1.0 - 1e-15); }

}  // namespace

DatasetSchema DatasetSchema::from_json(const nlohmann::json& j) {
  DatasetSchema s;
  try {
    s.label = j.at("label").get<std::string>();
    if (j.contains("positive_label")) {
      const auto& p = j["positive_label"];
      s.positive_label = p.is_string() ? p.get<std::string>() : p.dump();
    }
    for (const auto& f : j.at("features")) {
      FeatureSpec spec;
      spec.name = f.at("name").get<std::string>();
      const std::string kind = f.value("kind", "continuous");
      if (kind == "continuous") {
        spec.kind = FeatureKind::kContinuous;
      } else if (kind == "categorical") {
        spec.kind = FeatureKind::kCategorical;
        for (const auto& c : f.at("categories")) {
          spec.categories.push_back(c.is_string() ? c.get<std::string>() : c.dump());
        }
      } else {
        throw Error(ErrorCode::kParse, "unknown feature kind: " + kind);
      }
      s.features.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("schema: ") + e.what());
  }
  std::map<std::string, int> seen;
  for (const auto& f : s.features) {
    if (seen[f.name]++ > 0) throw Error(ErrorCode::kParse, "duplicate feature: " + f.name);
    if (f.kind == FeatureKind::kCategorical && f.categories.size() < 2) {
      throw Error(ErrorCode::kParse, "categorical feature needs >= 2 categories: " + f.name);
    }
  }
  if (s.features.empty()) throw Error(ErrorCode::kParse, "schema has no features");
  return s;
}

nlohmann::json DatasetSchema::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json e = {{"name", f.name},
                        {"kind", f.kind == FeatureKind::kContinuous ? "continuous" : "categorical"}};
    if (f.kind == FeatureKind::kCategorical) e["categories"] = f.categories;
    feats.push_back(e);
  }
  return {{"label", label}, {"positive_label", positive_label}, {"features", feats}};
}

DatasetSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open schema: " + path);
  try {
    return DatasetSchema::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("schema: ") + e.what());
  }
}

nlohmann::json Dataset::unscale(const FeatureVector& v) const {
  require_same_dim(v.size(), dim(), "unscale");
  nlohmann::json out = nlohmann::json::object();
  for (const auto& b : blocks) {
    if (b.kind == FeatureKind::kContinuous) {
      out[b.name] = b.min + v[b.offset] * (b.max - b.min);
    } else {
      Eigen::Index arg = 0;
      v.segment(b.offset, b.width).maxCoeff(&arg);
      out[b.name] = b.categories[static_cast<std::size_t>(arg)];
    }
  }
  return out;
}

FeatureVector Dataset::scale(const nlohmann::json& raw) const {
  FeatureVector v = FeatureVector::Zero(dim());
  for (const auto& b : blocks) {
    if (!raw.contains(b.name)) throw Error(ErrorCode::kParse, "missing feature: " + b.name);
    const auto& value = raw[b.name];
    if (b.kind == FeatureKind::kContinuous) {
      if (!value.is_number()) throw Error(ErrorCode::kParse, "non-numeric value for " + b.name);
      v[b.offset] = (value.get<double>() - b.min) / (b.max - b.min);
    } else {
      const std::string cat = value.is_string() ? value.get<std::string>() : value.dump();
      const auto it = std::find(b.categories.begin(), b.categories.end(), cat);
      if (it == b.categories.end()) {
        throw Error(ErrorCode::kParse, "unseen category '" + cat + "' for " + b.name);
      }
      v[b.offset + (it - b.categories.begin())] = 1.0;
    }
  }
  return v;
}

nlohmann::json Dataset::deltas(const FeatureVector& from, const FeatureVector& to) const {
  const auto a = unscale(from);
  const auto b = unscale(to);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& blk : blocks) {
    nlohmann::json e = {{"from", a[blk.name]}, {"to", b[blk.name]}};
    if (blk.kind == FeatureKind::kContinuous) {
      e["delta"] = b[blk.name].get<double>() - a[blk.name].get<double>();
    }
    e["changed"] = a[blk.name] != b[blk.name];
    out[blk.name] = e;
  }
  return out;
}

Dataset load_csv(const std::string& path, const DatasetSchema& schema,
                 std::uint64_t split_seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open CSV: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Dataset d = parse_csv(ss.str(), schema, split_seed);
  const auto slash = path.find_last_of('/');
  d.name = path.substr(slash == std::string::npos ? 0 : slash + 1);
  return d;
}

Dataset parse_csv(const std::string& text, const DatasetSchema& schema,
                  std::uint64_t split_seed) {
  const auto records = parse_records(text);
  if (records.size() < 3) throw Error(ErrorCode::kParse, "CSV needs a header and >= 2 rows");
  const auto& header = records.front();
  auto column = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (trim(header[c]) == name) return c;
    }
    throw Error(ErrorCode::kParse, "missing column: " + name);
  };
  const std::size_t label_col = column(schema.label);
  std::vector<std::size_t> cols;
  for (const auto& f : schema.features) cols.push_back(column(f.name));

  const std::size_t n = records.size() - 1;
  Dataset d;
  Eigen::Index width = 0;
  for (const auto& f : schema.features) {
    ColumnBlock b;
    b.name = f.name;
    b.kind = f.kind;
    b.offset = width;
    b.width = f.kind == FeatureKind::kContinuous
                  ? 1
                  : static_cast<Eigen::Index>(f.categories.size());
    b.categories = f.categories;
    width += b.width;
    d.blocks.push_back(std::move(b));
  }
  d.x = Matrix::Zero(static_cast<Eigen::Index>(n), width);
  d.y.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    const auto line = std::to_string(r + 2);
    if (rec.size() != header.size()) {
      throw Error(ErrorCode::kParse, "line " + line + ": wrong number of fields");
    }
    d.y[r] = label_matches(rec[label_col], schema.positive_label) ? 1 : 0;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& b = d.blocks[f];
      const std::string& raw = rec[cols[f]];
      const auto row = static_cast<Eigen::Index>(r);
      if (b.kind == FeatureKind::kContinuous) {
        const auto v = parse_number(raw);
        if (!v) {
          throw Error(ErrorCode::kParse,
                      "line " + line + ": non-numeric value '" + raw + "' for " + b.name);
        }
        d.x(row, b.offset) = *v;
      } else {
        const std::string cat = trim(raw);
        const auto it = std::find(b.categories.begin(), b.categories.end(), cat);
        if (it == b.categories.end()) {
          throw Error(ErrorCode::kParse,
                      "line " + line + ": unseen category '" + cat + "' for " + b.name);
        }
        d.x(row, b.offset + (it - b.categories.begin())) = 1.0;
      }
    }
  }
  for (auto& b : d.blocks) {
    if (b.kind != FeatureKind::kContinuous) continue;
    auto col = d.x.col(b.offset);
    b.min = col.minCoeff();
    b.max = col.maxCoeff();
    if (!(b.max > b.min)) throw Error(ErrorCode::kParse, "constant column: " + b.name);
    col = (col.array() - b.min) / (b.max - b.min);
  }
  split_80_20(d, split_seed);
  return d;
}

int synthetic_label(double x1, double x2) {
  const double boundary = 1.0 + x1 + 2.0 * x1 * x1 + x1 * x1 * x1 - x1 * x1 * x1 * x1;
  return x2 >= boundary ? 1 : 0;
}

Dataset gen_synthetic(std::size_t n, std::mt19937_64& rng) {
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic dataset needs n >= 2");
  std::uniform_real_distribution<double> u1(-2.0, 4.0), u2(-2.0, 7.0);
  Dataset d;
  d.name = "synthetic";
  d.x.resize(static_cast<Eigen::Index>(n), 2);
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = u1(rng);
    const double x2 = u2(rng);
    d.x(static_cast<Eigen::Index>(i), 0) = x1;
    d.x(static_cast<Eigen::Index>(i), 1) = x2;
    d.y[i] = synthetic_label(x1, x2);
  }
  for (Eigen::Index c = 0; c < 2; ++c) {
    ColumnBlock b;
    b.name = c == 0 ? "x1" : "x2";
    b.offset = c;
    b.min = d.x.col(c).minCoeff();
    b.max = d.x.col(c).maxCoeff();
    d.x.col(c) = (d.x.col(c).array() - b.min) / (b.max - b.min);
    d.blocks.push_back(std::move(b));
  }
  split_80_20(d, rng());
  return d;
}

double Classifier::accuracy(const Dataset& data, const std::vector<std::size_t>& rows) const {
  if (rows.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto r : rows) hits += (predict(data.row(r)) ? 1 : 0) == data.y[r];
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

Mlp::Mlp(std::vector<Matrix> weights, std::vector<Vector> biases)
    : weights_(std::move(weights)), biases_(std::move(biases)) {
  if (weights_.empty() || weights_.size() != biases_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "MLP needs matching weight and bias lists");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    require_same_dim(biases_[l].size(), weights_[l].rows(), "MLP bias");
    if (l > 0) require_same_dim(weights_[l].cols(), weights_[l - 1].rows(), "MLP layer");
  }
  require_same_dim(weights_.back().rows(), 1, "MLP output");
}

double Classifier::probability(const FeatureVector& x) const {
  return clamp_probability(sigmoid(score(x)));
}

Vector Classifier::gradient(const FeatureVector& x) const {
  const double p = sigmoid(score(x));
  return p * (1.0 - p) * score_gradient(x);
}

double Mlp::score(const FeatureVector& x) const {
  require_same_dim(x.size(), dim(), "MLP input");
  Vector h = x;
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
    h = (weights_[l] * h + biases_[l]).cwiseMax(0.0);
  }
  return (weights_.back() * h + biases_.back())[0];
}

Vector Mlp::score_gradient(const FeatureVector& x) const {
  require_same_dim(x.size(), dim(), "MLP input");
  std::vector<Vector> pre;
  Vector h = x;
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
    pre.push_back(weights_[l] * h + biases_[l]);
    h = pre.back().cwiseMax(0.0);
  }
  Vector g = weights_.back().row(0).transpose();
  for (std::size_t l = weights_.size() - 1; l-- > 0;) {
    g = g.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
    g = weights_[l].transpose() * g;
  }
  return g;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array({dim()});
  nlohmann::json w = nlohmann::json::array(), b = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    layers.push_back(weights_[l].rows());
    w.push_back(reap::to_json(weights_[l]));
    b.push_back(reap::to_json(biases_[l]));
  }
  return {{"kind", "mlp"}, {"layers", layers}, {"weights", w}, {"biases", b}};
}

double LogisticRegression::score(const FeatureVector& x) const {
  require_same_dim(x.size(), dim(), "logistic input");
  return w_.dot(x) + b_;
}

Vector LogisticRegression::score_gradient(const FeatureVector&) const { return w_; }

nlohmann::json LogisticRegression::to_json() const {
  return {{"kind", "logistic"}, {"weights", reap::to_json(w_)}, {"bias", b_}};
}

namespace {

void require_two_classes(const Dataset& data) {
  if (data.train.empty()) throw Error(ErrorCode::kSingleClass, "empty training split");
  bool pos = false, neg = false;
  for (auto r : data.train) (data.y[r] ? pos : neg) = true;
  if (!pos || !neg) throw Error(ErrorCode::kSingleClass, "training data has a single class");
}

struct Adam {
  Matrix m, v;
  void init(Eigen::Index r, Eigen::Index c) {
    m = Matrix::Zero(r, c);
    v = Matrix::Zero(r, c);
  }
  template <typename P, typename G>
  void step(P& param, const G& grad, double lr, int t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace

std::unique_ptr<Mlp> train_classifier(const Dataset& data, const TrainConfig& cfg) {
  require_two_classes(data);
  if (cfg.epochs < 1 || cfg.batch < 1 || !(cfg.lr > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid training configuration");
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> sizes{data.dim()};
  for (int h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(1);
  const std::size_t layers = sizes.size() - 1;
  std::vector<Matrix> w(layers);
  std::vector<Vector> b(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l]));
    std::uniform_real_distribution<double> u(-limit, limit);
    w[l].resize(sizes[l + 1], sizes[l]);
    for (Eigen::Index i = 0; i < w[l].size(); ++i) w[l].data()[i] = u(rng);
    b[l] = Vector::Zero(sizes[l + 1]);
  }
  std::vector<Adam> aw(layers), ab(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    aw[l].init(w[l].rows(), w[l].cols());
    ab[l].init(b[l].rows(), 1);
  }

  std::vector<std::size_t> order = data.train;
  int t = 0;
  std::vector<Matrix> acts(layers + 1), pre(layers);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const auto bs = static_cast<Eigen::Index>(end - start);
      Matrix x(data.dim(), bs);
      Eigen::RowVectorXd y(bs);
      for (Eigen::Index k = 0; k < bs; ++k) {
        const std::size_t r = order[start + static_cast<std::size_t>(k)];
        x.col(k) = data.row(r);
        y[k] = data.y[r];
      }
      acts[0] = x;
      for (std::size_t l = 0; l < layers; ++l) {
        pre[l] = (w[l] * acts[l]).colwise() + b[l];
        acts[l + 1] = l + 1 < layers ? Matrix(pre[l].cwiseMax(0.0)) : pre[l];
      }
      // Cross-entropy on the sigmoid output: d loss / d logit = p - y.
      Matrix delta = (acts[layers].unaryExpr([](double z) { return sigmoid(z); }) -
                      Matrix(y)) /
                     static_cast<double>(bs);
      ++t;
      for (std::size_t l = layers; l-- > 0;) {
        const Matrix gw = delta * acts[l].transpose();
        const Vector gb = delta.rowwise().sum();
        if (l > 0) {
          delta = (w[l].transpose() * delta)
                      .cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        aw[l].step(w[l], gw, cfg.lr, t);
        ab[l].step(b[l], gb, cfg.lr, t);
      }
    }
  }
  return std::make_unique<Mlp>(std::move(w), std::move(b));
}

std::unique_ptr<LogisticRegression> train_logistic(const Dataset& data, double l2) {
  require_two_classes(data);
  const Eigen::Index d = data.dim();
  const auto n = static_cast<Eigen::Index>(data.train.size());
  Matrix x(n, d + 1);
  Vector y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t r = data.train[static_cast<std::size_t>(k)];
    x.row(k).head(d) = data.x.row(static_cast<Eigen::Index>(r));
    x(k, d) = 1.0;
    y[k] = data.y[r];
  }
  Vector theta = Vector::Zero(d + 1);
  Matrix reg = l2 * static_cast<double>(n) * Matrix::Identity(d + 1, d + 1);
  reg(d, d) = 1e-12;
  for (int it = 0; it < 100; ++it) {
    const Vector p = (x * theta).unaryExpr([](double z) { return sigmoid(z); });
    const Vector grad = x.transpose() * (p - y) + reg * theta;
    const Vector wts = p.cwiseProduct(Vector::Ones(n) - p);
    const Matrix h = x.transpose() * wts.asDiagonal() * x + reg;
    const Vector step = h.ldlt().solve(grad);
    theta -= step;
    if (step.norm() < 1e-10) break;
  }
  return std::make_unique<LogisticRegression>(theta.head(d), theta[d]);
}

std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind");
    if (kind == "logistic") {
      return std::make_unique<LogisticRegression>(vector_from_json(j.at("weights")),
                                                  j.at("bias").get<double>());
    }
    if (kind == "mlp") {
      std::vector<Matrix> w;
      std::vector<Vector> b;
      for (const auto& m : j.at("weights")) w.push_back(matrix_from_json(m));
      for (const auto& v : j.at("biases")) b.push_back(vector_from_json(v));
      return std::make_unique<Mlp>(std::move(w), std::move(b));
    }
    throw Error(ErrorCode::kParse, "unknown classifier kind: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("classifier checkpoint: ") + e.what());
  }
}

Partition partition(const Dataset& data, const Classifier& clf,
                    const std::vector<std::size_t>& rows) {
  Partition p;
  for (auto r : rows) (clf.predict(data.row(r)) ? p.positive : p.negative).push_back(r);
  return p;
}

}  // namespace reap

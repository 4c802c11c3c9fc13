#include "sparsebench/tree_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace sparsebench {

SplitChoice best_split(const Matrix& X, const Vector& y, const std::vector<int>& samples,
                       const std::vector<int>& features, int min_samples_leaf) {
  SplitChoice best;
  const int n = static_cast<int>(samples.size());
  if (n < 2 * min_samples_leaf) return best;

  double total_sum = 0.0;
  for (int s : samples) total_sum += y(s);
  const double parent_score = total_sum * total_sum / n;

  std::vector<std::pair<double, double>> vals(n);  // (x, y) sorted by x
  std::vector<int> feats = features;
  std::sort(feats.begin(), feats.end());
  for (int f : feats) {
    for (int i = 0; i < n; ++i) vals[i] = {X(samples[i], f), y(samples[i])};
    std::sort(vals.begin(), vals.end());
    double left_sum = 0.0;
    for (int i = 0; i < n - 1; ++i) {
      left_sum += vals[i].second;
      if (vals[i].first == vals[i + 1].first) continue;
      int n_left = i + 1, n_right = n - n_left;
      if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;
      double right_sum = total_sum - left_sum;
      double score = left_sum * left_sum / n_left + right_sum * right_sum / n_right - parent_score;
      if (score > 0.0 && (!best.valid || score > best.sse_reduction)) {
        best.valid = true;
        best.feature = f;
        best.threshold = vals[i].first + 0.5 * (vals[i + 1].first - vals[i].first);
        best.sse_reduction = score;
      }
    }
  }
  return best;
}

namespace {

int build_node(RegressionTree& tree, const Matrix& X, const Vector& y, std::vector<int>& samples,
               int depth, int max_depth, int min_samples_leaf, int max_features, Rng* feature_rng) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  double mean = 0.0;
  for (int s : samples) mean += y(s);
  mean /= static_cast<double>(samples.size());
  tree.nodes[idx].value = mean;

  bool at_depth_limit = max_depth >= 0 && depth >= max_depth;
  if (at_depth_limit || static_cast<int>(samples.size()) < 2 * min_samples_leaf) return idx;

  const int p = static_cast<int>(X.cols());
  std::vector<int> feats(p);
  std::iota(feats.begin(), feats.end(), 0);
  if (feature_rng && max_features > 0 && max_features < p) {
    for (int i = 0; i < max_features; ++i) {
      int j = i + static_cast<int>(feature_rng->below(p - i));
      std::swap(feats[i], feats[j]);
    }
    feats.resize(max_features);
  }

  SplitChoice split = best_split(X, y, samples, feats, min_samples_leaf);
  if (!split.valid) return idx;

  std::vector<int> left, right;
  for (int s : samples)
    (X(s, split.feature) <= split.threshold ? left : right).push_back(s);
  samples.clear();
  samples.shrink_to_fit();

  int l = build_node(tree, X, y, left, depth + 1, max_depth, min_samples_leaf, max_features, feature_rng);
  int r = build_node(tree, X, y, right, depth + 1, max_depth, min_samples_leaf, max_features, feature_rng);
  tree.nodes[idx].is_leaf = false;
  tree.nodes[idx].feature = split.feature;
  tree.nodes[idx].threshold = split.threshold;
  tree.nodes[idx].left = l;
  tree.nodes[idx].right = r;
  return idx;
}

}  // namespace

RegressionTree fit_tree(const Matrix& X, const Vector& y, const std::vector<int>& samples,
                        int max_depth, int min_samples_leaf, int max_features, Rng* feature_rng) {
  if (samples.empty()) throw ValidationError("fit_tree needs at least one sample");
  RegressionTree tree;
  std::vector<int> work = samples;
  build_node(tree, X, y, work, 0, max_depth, min_samples_leaf, max_features, feature_rng);
  return tree;
}

EnsembleFit fit_random_forest(const Matrix& X, const Vector& y, const ForestConfig& cfg, std::uint64_t seed) {
  if (cfg.n_trees < 1) throw ValidationError("n_trees must be >= 1");
  if (X.rows() != y.size() || X.rows() < 1) throw ValidationError("rows(X) must equal len(y)");
  EnsembleFit ens;
  ens.kind = EnsembleKind::RandomForest;
  ens.seed = seed;
  ens.n_cols = static_cast<int>(X.cols());
  const int n = static_cast<int>(X.rows());
  ens.trees.resize(cfg.n_trees);
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(seed, "rf_tree", static_cast<std::uint64_t>(t)));
    std::vector<int> boot(n);
    for (int i = 0; i < n; ++i) boot[i] = static_cast<int>(rng.below(n));
    ens.trees[t] = fit_tree(X, y, boot, cfg.max_depth, cfg.min_samples_leaf, cfg.max_features, &rng);
  }
  return ens;
}

EnsembleFit fit_gradient_boosting(const Matrix& X, const Vector& y, const BoostConfig& cfg, std::uint64_t seed) {
  if (cfg.n_trees < 1) throw ValidationError("n_trees must be >= 1");
  if (cfg.learning_rate <= 0 || cfg.learning_rate > 1)
    throw ValidationError("learning_rate must be in (0,1]");
  if (X.rows() != y.size() || X.rows() < 1) throw ValidationError("rows(X) must equal len(y)");
  EnsembleFit ens;
  ens.kind = EnsembleKind::GradientBoosting;
  ens.seed = seed;
  ens.n_cols = static_cast<int>(X.cols());
  ens.learning_rate = cfg.learning_rate;
  ens.base_prediction = y.mean();

  const int n = static_cast<int>(X.rows());
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  Vector current = Vector::Constant(n, ens.base_prediction);
  for (int t = 0; t < cfg.n_trees; ++t) {
    Vector residual = y - current;
    RegressionTree tree = fit_tree(X, residual, all, cfg.max_depth, 1, -1, nullptr);
    for (int i = 0; i < n; ++i) current(i) += cfg.learning_rate * tree.predict_row(X.row(i));
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

Vector predict(const EnsembleFit& ens, const Matrix& X) {
  if (static_cast<int>(X.cols()) != ens.n_cols)
    throw ValidationError("prediction column count mismatch");
  const int n = static_cast<int>(X.rows());
  Vector out = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& tree : ens.trees) acc += tree.predict_row(X.row(i));
    out(i) = ens.kind == EnsembleKind::RandomForest
                 ? acc / static_cast<double>(ens.trees.size())
                 : ens.base_prediction + ens.learning_rate * acc;
  }
  return out;
}

std::vector<double> gb_stagewise_mse(const EnsembleFit& ens, const Matrix& X, const Vector& y) {
  if (ens.kind != EnsembleKind::GradientBoosting) throw ValidationError("stagewise MSE is GB-only");
  const int n = static_cast<int>(X.rows());
  Vector current = Vector::Constant(n, ens.base_prediction);
  std::vector<double> mse;
  for (const auto& tree : ens.trees) {
    for (int i = 0; i < n; ++i) current(i) += ens.learning_rate * tree.predict_row(X.row(i));
    mse.push_back((y - current).squaredNorm() / n);
  }
  return mse;
}

std::string ensemble_to_json_text(const EnsembleFit& ens, const std::string& column_digest) {
  nlohmann::json doc;
  doc["kind"] = ens.kind == EnsembleKind::RandomForest ? "RandomForest" : "GradientBoosting";
  doc["learning_rate"] = ens.learning_rate;
  doc["base_prediction"] = ens.base_prediction;
  doc["seed"] = ens.seed;
  doc["n_cols"] = ens.n_cols;
  doc["column_meta_digest"] = column_digest;
  doc["trees"] = nlohmann::json::array();
  for (const auto& tree : ens.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : tree.nodes)
      nodes.push_back({{"leaf", nd.is_leaf},
                       {"value", nd.value},
                       {"feature", nd.feature},
                       {"threshold", nd.threshold},
                       {"left", nd.left},
                       {"right", nd.right}});
    doc["trees"].push_back(std::move(nodes));
  }
  return doc.dump() + "\n";
}

EnsembleFit ensemble_from_json_text(const std::string& text) {
  auto doc = nlohmann::json::parse(text);
  EnsembleFit ens;
  ens.kind = doc.at("kind").get<std::string>() == "RandomForest" ? EnsembleKind::RandomForest
                                                                 : EnsembleKind::GradientBoosting;
  ens.learning_rate = doc.at("learning_rate").get<double>();
  ens.base_prediction = doc.at("base_prediction").get<double>();
  ens.seed = doc.at("seed").get<std::uint64_t>();
  ens.n_cols = doc.at("n_cols").get<int>();
  for (const auto& jt : doc.at("trees")) {
    RegressionTree tree;
    for (const auto& jn : jt) {
      TreeNode nd;
      nd.is_leaf = jn.at("leaf").get<bool>();
      nd.value = jn.at("value").get<double>();
      nd.feature = jn.at("feature").get<int>();
      nd.threshold = jn.at("threshold").get<double>();
      nd.left = jn.at("left").get<int>();
      nd.right = jn.at("right").get<int>();
      tree.nodes.push_back(nd);
    }
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

}  // namespace sparsebench

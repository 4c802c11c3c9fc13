#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsebench/common.hpp"

namespace sparsebench {

struct TreeNode {
  bool is_leaf = true;
  double value = 0.0;     // leaf prediction
  int feature = -1;       // internal node split
  double threshold = 0.0;
  int left = -1;
  int right = -1;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int i = 0;
    while (!nodes[i].is_leaf) i = row(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
  }
};

struct SplitChoice {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  double sse_reduction = 0.0;
};

// Best variance-reduction split over the given samples and candidate
// features. Thresholds are midpoints between consecutive sorted unique
// values; ties break to lowest feature index then lowest threshold.
SplitChoice best_split(const Matrix& X, const Vector& y, const std::vector<int>& samples,
                       const std::vector<int>& features, int min_samples_leaf);

enum class EnsembleKind { RandomForest, GradientBoosting };

struct EnsembleFit {
  EnsembleKind kind = EnsembleKind::RandomForest;
  std::vector<RegressionTree> trees;
  double learning_rate = 0.0;   // GB only
  double base_prediction = 0.0; // GB only
  std::uint64_t seed = 0;
  int n_cols = 0;

  int n_trees() const { return static_cast<int>(trees.size()); }
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = -1;        // < 0 means unlimited
  int min_samples_leaf = 1;
  int max_features = -1;     // < 0 means all features
};

struct BoostConfig {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
};

EnsembleFit fit_random_forest(const Matrix& X, const Vector& y, const ForestConfig& cfg, std::uint64_t seed);
EnsembleFit fit_gradient_boosting(const Matrix& X, const Vector& y, const BoostConfig& cfg, std::uint64_t seed);

// Single tree fit on given samples (exposed for oracles and boosting).
RegressionTree fit_tree(const Matrix& X, const Vector& y, const std::vector<int>& samples,
                        int max_depth, int min_samples_leaf, int max_features, Rng* feature_rng);

Vector predict(const EnsembleFit& ens, const Matrix& X);

// Per-stage training MSE of a gradient boosting fit, recomputed on (X, y).
std::vector<double> gb_stagewise_mse(const EnsembleFit& ens, const Matrix& X, const Vector& y);

std::string ensemble_to_json_text(const EnsembleFit& ens, const std::string& column_digest = "");
EnsembleFit ensemble_from_json_text(const std::string& text);

}  // namespace sparsebench

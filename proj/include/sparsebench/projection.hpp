#pragma once

#include <map>
#include <string>
#include <vector>

#include "sparsebench/common.hpp"
#include "sparsebench/harness.hpp"

namespace sparsebench {

struct TsneConfig {
  double perplexity = 5.0;
  int n_iter = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;
  double learning_rate = 200.0;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  int momentum_switch_iter = 250;
  double entropy_tol = 1e-5;
  std::uint64_t seed = 0;
};

struct TsneDiagnostics {
  Matrix P;                        // symmetric joint probabilities
  std::vector<double> kl_history;  // KL(P||Q) per iteration (un-exaggerated P)
};

// Symmetric joint probabilities from Gaussian kernels, per-point bandwidth
// solved by binary search to match the target perplexity.
Matrix joint_probabilities(const Matrix& X, double perplexity, double entropy_tol = 1e-5);

// Exact t-SNE: N is small (55 factors), so the O(N^2) gradient is fine.
Matrix tsne(const Matrix& X, const TsneConfig& cfg, TsneDiagnostics* diag = nullptr);

// Task-averaged per-factor embedding summaries: for each factor, the mean
// over tasks of (column means of the projection matrix + bias).
std::map<std::string, std::vector<double>> factor_vectors(const FactorRanking& ranking);

struct AtlasEntry {
  int index = 0;  // 1-based, codebook factor order
  std::string factor;
  Project project = Project::Survey;
  double x = 0.0;
  double y = 0.0;
  double inverse_rank = 0.0;
};

std::vector<AtlasEntry> build_atlas(const Codebook& cb, const FactorRanking& ranking,
                                    const TsneConfig& cfg);

std::string atlas_to_csv(const std::vector<AtlasEntry>& atlas);

}  // namespace sparsebench

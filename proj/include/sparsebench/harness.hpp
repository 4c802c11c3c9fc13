#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparsebench/dataio.hpp"
#include "sparsebench/neural.hpp"
#include "sparsebench/preprocess.hpp"
#include "sparsebench/tree_models.hpp"

namespace sparsebench {

enum class Model {
  LinearRegression,
  RidgeRegression,
  LassoRegression,
  RandomForest,
  GradientBoosting,
  Dnn,
  EmbedDnn
};

std::string model_name(Model m);
std::optional<Model> model_from_string(const std::string& s);
std::vector<Model> all_models();

enum class OutcomeMeasure { Comp, Ef, Em };
enum class Timepoint { M2, M3, Delta };

struct PredictionTask {
  std::string name;             // e.g. "COMP_M2", "EF_delta"
  OutcomeMeasure measure = OutcomeMeasure::Comp;
  Timepoint time = Timepoint::M2;
  bool exclude_cognitive = true;  // no cognitive predictors for M2 targets
  HeadKind head = HeadKind::Relu; // linear head for delta targets

  std::string base_outcome(Timepoint t) const;
};

// The nine tasks: {COMP, EF, EM} x {M2, M3, delta}.
std::vector<PredictionTask> standard_tasks();
std::vector<PredictionTask> tasks_by_name(const std::vector<std::string>& names);

// Outcome vector for a task (delta = M3 - M2); nullopt where either side is
// missing.
std::vector<std::optional<double>> task_outcome(const Dataset& ds, const PredictionTask& task);
// Predictor-variable mask over ds.columns() for a task.
std::vector<bool> task_predictor_mask(const Dataset& ds, const PredictionTask& task);

double rmse(const Vector& predictions, const Vector& targets);

struct SplitResult {
  std::string task;
  Model model = Model::LinearRegression;
  int split = 0;
  double rmse = 0.0;
  bool failed = false;
  std::string error;
};

struct SampleRecord {
  std::string task;
  Model model = Model::LinearRegression;
  int split = 0;
  int row = 0;          // dataset row index of the test sample
  int sparsity = 0;     // predictor-cell sparsity of that row
  double abs_error = 0.0;
};

struct EvalReport {
  std::vector<std::string> task_names;
  std::vector<Model> models;
  int n_splits = 0;
  std::vector<SplitResult> cells;
  std::vector<SampleRecord> samples;
  // digest of the train-row index set per (task, split); identical across
  // models by construction (paired splits)
  std::map<std::pair<std::string, int>, std::uint64_t> split_digests;

  std::vector<double> split_rmses(const std::string& task, Model m) const;
  double mean_rmse(const std::string& task, Model m) const;
  double sd_rmse(const std::string& task, Model m) const;  // population convention
};

struct HarnessOptions {
  int n_splits = 10;
  double train_frac = 0.75;
  double ridge_lambda = 1.0;
  double lasso_lambda = 1.0;
  double lasso_tol = 1e-7;
  int lasso_max_iter = 10000;
  ForestConfig forest;
  BoostConfig boost;
  TrainConfig train;  // applies to dnn / embed_dnn; seed field is ignored
  int jobs = 0;       // 0 = available parallelism
  PreprocessOptions preprocess;
};

EvalReport run_benchmark(const Dataset& ds, const std::vector<PredictionTask>& tasks,
                         const std::vector<Model>& models, const HarnessOptions& opts,
                         std::uint64_t seed);

struct RankEntry {
  Model model = Model::LinearRegression;
  double mean_rmse = 0.0;
  double sd_rmse = 0.0;
  double rank = 0.0;  // mid-rank on ties
};

std::vector<RankEntry> rank_models(const EvalReport& report, const std::string& task);

// Mid-ranks (1-based, ascending) of a value vector.
std::vector<double> mid_ranks(const std::vector<double>& values);

struct FactorTaskResult {
  std::string task;
  std::string factor;
  double rmse = 0.0;
  double rank = 0.0;
  std::vector<double> embedding_vector;  // column means of the projection + bias (16 values)
  bool failed = false;
};

struct FactorRanking {
  std::vector<FactorTaskResult> results;
  std::vector<std::string> factors;           // ranked factors in codebook order
  std::map<std::string, double> average_rank; // across participating tasks
  std::map<std::string, double> inverse_rank; // 1 / average rank

  const FactorTaskResult* find(const std::string& task, const std::string& factor) const;
};

FactorRanking rank_factors(const Dataset& ds, const std::vector<PredictionTask>& tasks,
                           const HarnessOptions& opts, std::uint64_t seed);

// Flat (model, sparsity, abs error) view of the per-sample records.
struct FlatSparsityRecord {
  std::string model;
  int sparsity = 0;
  double abs_error = 0.0;
};
std::vector<FlatSparsityRecord> sparsity_records(const EvalReport& report);

// Builds the factor-grouped embedding layout from a design matrix, factors in
// codebook order.
EmbeddingSpec embedding_spec_for(const DesignMatrix& dm, const Codebook& cb, int embed_dim = 16);

std::uint64_t row_set_digest(const std::vector<int>& rows);

std::string report_to_csv(const EvalReport& report);
std::string samples_to_csv(const EvalReport& report);
std::string report_summary_json(const EvalReport& report);
std::string factor_ranking_to_csv(const FactorRanking& fr);

}  // namespace sparsebench

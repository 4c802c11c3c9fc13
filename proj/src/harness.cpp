#include "sparsebench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sparsebench/linear_models.hpp"

namespace sparsebench {

std::string model_name(Model m) {
  switch (m) {
    case Model::LinearRegression: return "linear_regression";
    case Model::RidgeRegression: return "ridge_regression";
    case Model::LassoRegression: return "lasso_regression";
    case Model::RandomForest: return "random_forest";
    case Model::GradientBoosting: return "gradient_boosting";
    case Model::Dnn: return "dnn";
    case Model::EmbedDnn: return "embed_dnn";
  }
  return "?";
}

std::optional<Model> model_from_string(const std::string& s) {
  if (s == "ols" || s == "linear" || s == "linear_regression") return Model::LinearRegression;
  if (s == "ridge" || s == "ridge_regression") return Model::RidgeRegression;
  if (s == "lasso" || s == "lasso_regression") return Model::LassoRegression;
  if (s == "rf" || s == "random_forest") return Model::RandomForest;
  if (s == "gb" || s == "xgboost" || s == "gradient_boosting") return Model::GradientBoosting;
  if (s == "dnn") return Model::Dnn;
  if (s == "embed_dnn") return Model::EmbedDnn;
  return std::nullopt;
}

std::vector<Model> all_models() {
  return {Model::LinearRegression, Model::RidgeRegression, Model::LassoRegression,
          Model::RandomForest,     Model::GradientBoosting, Model::Dnn,
          Model::EmbedDnn};
}

namespace {

std::string measure_name(OutcomeMeasure m) {
  switch (m) {
    case OutcomeMeasure::Comp: return "COMP";
    case OutcomeMeasure::Ef: return "EF";
    case OutcomeMeasure::Em: return "EM";
  }
  return "?";
}

}  // namespace

std::string PredictionTask::base_outcome(Timepoint t) const {
  return measure_name(measure) + (t == Timepoint::M2 ? "_M2" : "_M3");
}

std::vector<PredictionTask> standard_tasks() {
  std::vector<PredictionTask> tasks;
  for (auto m : {OutcomeMeasure::Comp, OutcomeMeasure::Ef, OutcomeMeasure::Em}) {
    for (auto t : {Timepoint::M2, Timepoint::M3, Timepoint::Delta}) {
      PredictionTask task;
      task.measure = m;
      task.time = t;
      task.name = measure_name(m) + std::string(t == Timepoint::M2   ? "_M2"
                                                : t == Timepoint::M3 ? "_M3"
                                                                     : "_delta");
      task.exclude_cognitive = t == Timepoint::M2;
      task.head = t == Timepoint::Delta ? HeadKind::Linear : HeadKind::Relu;
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

std::vector<PredictionTask> tasks_by_name(const std::vector<std::string>& names) {
  auto all = standard_tasks();
  std::vector<PredictionTask> out;
  for (const auto& n : names) {
    auto it = std::find_if(all.begin(), all.end(), [&](const PredictionTask& t) { return t.name == n; });
    if (it == all.end()) throw ValidationError("unknown task '" + n + "'");
    out.push_back(*it);
  }
  return out;
}

std::vector<std::optional<double>> task_outcome(const Dataset& ds, const PredictionTask& task) {
  if (task.time != Timepoint::Delta) return ds.outcome(task.base_outcome(task.time));
  const auto& m2 = ds.outcome(task.base_outcome(Timepoint::M2));
  const auto& m3 = ds.outcome(task.base_outcome(Timepoint::M3));
  std::vector<std::optional<double>> out(m2.size());
  for (std::size_t i = 0; i < m2.size(); ++i)
    if (m2[i] && m3[i]) out[i] = *m3[i] - *m2[i];
  return out;
}

std::vector<bool> task_predictor_mask(const Dataset& ds, const PredictionTask& task) {
  std::vector<bool> mask(ds.columns().size(), true);
  if (task.exclude_cognitive)
    for (std::size_t c = 0; c < ds.columns().size(); ++c)
      if (ds.columns()[c]->project == Project::Cognitive) mask[c] = false;
  return mask;
}

double rmse(const Vector& predictions, const Vector& targets) {
  if (predictions.size() != targets.size()) throw ValidationError("rmse length mismatch");
  if (predictions.size() == 0) throw ValidationError("rmse of empty vectors");
  return std::sqrt((predictions - targets).squaredNorm() / predictions.size());
}

std::uint64_t row_set_digest(const std::vector<int>& rows) {
  std::vector<int> sorted = rows;
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t h = 1469598103934665603ULL;
  for (int r : sorted) {
    for (int b = 0; b < 4; ++b) {
      h ^= static_cast<unsigned char>(r >> (8 * b));
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::vector<double> EvalReport::split_rmses(const std::string& task, Model m) const {
  std::vector<double> out;
  for (const auto& c : cells)
    if (c.task == task && c.model == m && !c.failed) out.push_back(c.rmse);
  return out;
}

double EvalReport::mean_rmse(const std::string& task, Model m) const {
  auto v = split_rmses(task, m);
  if (v.empty()) throw ValidationError("no results for " + task + "/" + model_name(m));
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double EvalReport::sd_rmse(const std::string& task, Model m) const {
  auto v = split_rmses(task, m);
  if (v.empty()) throw ValidationError("no results for " + task + "/" + model_name(m));
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / v.size());  // population convention
}

EmbeddingSpec embedding_spec_for(const DesignMatrix& dm, const Codebook& cb, int embed_dim) {
  EmbeddingSpec emb;
  emb.embed_dim = embed_dim;
  for (const auto& f : cb.factors()) {
    std::vector<int> cols;
    for (std::size_t c = 0; c < dm.column_meta.size(); ++c)
      if (dm.column_meta[c].factor == f.name) cols.push_back(static_cast<int>(c));
    if (cols.empty()) continue;
    emb.factor_names.push_back(f.name);
    emb.factor_columns.push_back(std::move(cols));
  }
  return emb;
}

namespace {

Eigen::MatrixXf to_float(const Matrix& m) { return m.cast<float>(); }

void run_parallel(int n_jobs, int jobs_requested, const std::function<void(int)>& fn) {
  int workers = jobs_requested > 0 ? jobs_requested
                                   : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, n_jobs);
  if (workers <= 1) {
    for (int i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

Vector fit_and_predict(Model model, const Matrix& Xtr, const Vector& ytr, const Matrix& Xte,
                       const DesignMatrix& dm_train, const Codebook& cb, HeadKind head,
                       const HarnessOptions& opts, std::uint64_t job_seed) {
  switch (model) {
    case Model::LinearRegression:
      return predict(fit_ols(Xtr, ytr), Xte);
    case Model::RidgeRegression:
      return predict(fit_ridge(Xtr, ytr, opts.ridge_lambda), Xte);
    case Model::LassoRegression:
      return predict(fit_lasso(Xtr, ytr, opts.lasso_lambda, opts.lasso_tol, opts.lasso_max_iter), Xte);
    case Model::RandomForest:
      return predict(fit_random_forest(Xtr, ytr, opts.forest, job_seed), Xte);
    case Model::GradientBoosting:
      return predict(fit_gradient_boosting(Xtr, ytr, opts.boost, job_seed), Xte);
    case Model::Dnn:
    case Model::EmbedDnn: {
      NetSpec spec;
      spec.input_width = static_cast<int>(Xtr.cols());
      spec.head = head;
      if (model == Model::EmbedDnn) spec.embedding = embedding_spec_for(dm_train, cb);
      TrainConfig cfg = opts.train;
      cfg.seed = job_seed;
      auto trained = train_net<float>(to_float(Xtr), ytr.cast<float>(), spec, cfg);
      return trained.net.predict(to_float(Xte)).cast<double>();
    }
  }
  throw Error("unreachable model");
}

}  // namespace

EvalReport run_benchmark(const Dataset& ds, const std::vector<PredictionTask>& tasks,
                         const std::vector<Model>& models, const HarnessOptions& opts,
                         std::uint64_t seed) {
  EvalReport report;
  report.models = models;
  report.n_splits = opts.n_splits;
  for (const auto& t : tasks) report.task_names.push_back(t.name);

  // Rows with a present outcome, per task (splits are per task).
  std::vector<std::vector<int>> task_rows(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto outcome = task_outcome(ds, tasks[t]);
    for (int r = 0; r < ds.n_rows(); ++r)
      if (outcome[r]) task_rows[t].push_back(r);
    if (static_cast<int>(task_rows[t].size()) < 8)
      throw ValidationError("task '" + tasks[t].name + "' has fewer than 8 rows with outcomes");
  }

  const int n_jobs = static_cast<int>(tasks.size()) * opts.n_splits;
  const std::size_t n_models = models.size();
  report.cells.resize(static_cast<std::size_t>(n_jobs) * n_models);
  std::vector<std::vector<SampleRecord>> job_samples(n_jobs);
  std::vector<std::pair<std::pair<std::string, int>, std::uint64_t>> job_digests(n_jobs);

  auto run_job = [&](int job) {
    const int t = job / opts.n_splits;
    const int split = job % opts.n_splits;
    const PredictionTask& task = tasks[t];
    auto outcome = task_outcome(ds, task);

    // Paired splits: the partition depends on (task, split) only, never on
    // the model.
    std::vector<int> rows = task_rows[t];
    Rng split_rng(derive_seed(seed, "split:" + task.name, static_cast<std::uint64_t>(split)));
    split_rng.shuffle(rows);
    int n_train = static_cast<int>(std::lround(opts.train_frac * rows.size()));
    n_train = std::clamp(n_train, 2, static_cast<int>(rows.size()) - 1);
    std::vector<int> train_rows(rows.begin(), rows.begin() + n_train);
    std::vector<int> test_rows(rows.begin() + n_train, rows.end());
    job_digests[job] = {{task.name, split}, row_set_digest(train_rows)};

    for (std::size_t m = 0; m < n_models; ++m) {
      SplitResult& cell = report.cells[static_cast<std::size_t>(job) * n_models + m];
      cell.task = task.name;
      cell.model = models[m];
      cell.split = split;
      try {
        auto mask = task_predictor_mask(ds, task);
        auto [dm_train, dm_test] = fit_transform_subset(ds, train_rows, test_rows, mask, opts.preprocess);
        Vector ytr(train_rows.size()), yte(test_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) ytr(i) = *outcome[train_rows[i]];
        for (std::size_t i = 0; i < test_rows.size(); ++i) yte(i) = *outcome[test_rows[i]];

        std::uint64_t job_seed =
            derive_seed(seed, "fit:" + task.name + ":" + model_name(models[m]),
                        static_cast<std::uint64_t>(split));
        Vector pred = fit_and_predict(models[m], dm_train.values, ytr, dm_test.values, dm_train,
                                      ds.codebook(), task.head, opts, job_seed);
        cell.rmse = rmse(pred, yte);
        for (std::size_t i = 0; i < test_rows.size(); ++i)
          job_samples[job].push_back({task.name, models[m], split, test_rows[i],
                                      dm_test.row_sparsity[i], std::abs(pred(i) - yte(i))});
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
    }
  };

  run_parallel(n_jobs, opts.jobs, run_job);

  for (int j = 0; j < n_jobs; ++j) {
    report.split_digests[job_digests[j].first] = job_digests[j].second;
    report.samples.insert(report.samples.end(), job_samples[j].begin(), job_samples[j].end());
  }

  bool any_ok = std::any_of(report.cells.begin(), report.cells.end(),
                            [](const SplitResult& c) { return !c.failed; });
  if (!any_ok) throw Error("all fits failed");
  return report;
}

std::vector<double> mid_ranks(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double mid = (i + j) / 2.0 + 1.0;
    for (int k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

std::vector<RankEntry> rank_models(const EvalReport& report, const std::string& task) {
  std::vector<RankEntry> out;
  std::vector<double> means;
  for (Model m : report.models) {
    RankEntry e;
    e.model = m;
    e.mean_rmse = report.mean_rmse(task, m);  // throws on missing model results
    e.sd_rmse = report.sd_rmse(task, m);
    means.push_back(e.mean_rmse);
    out.push_back(e);
  }
  auto ranks = mid_ranks(means);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = ranks[i];
  return out;
}

const FactorTaskResult* FactorRanking::find(const std::string& task, const std::string& factor) const {
  for (const auto& r : results)
    if (r.task == task && r.factor == factor) return &r;
  return nullptr;
}

FactorRanking rank_factors(const Dataset& ds, const std::vector<PredictionTask>& tasks,
                           const HarnessOptions& opts, std::uint64_t seed) {
  const Codebook& cb = ds.codebook();
  FactorRanking out;

  struct TaskContext {
    DesignMatrix dm_train, dm_test;
    Vector ytr, yte;
    std::vector<std::string> factors;  // participating factors, codebook order
  };
  std::vector<TaskContext> ctx(tasks.size());

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const PredictionTask& task = tasks[t];
    auto outcome = task_outcome(ds, task);
    std::vector<int> rows;
    for (int r = 0; r < ds.n_rows(); ++r)
      if (outcome[r]) rows.push_back(r);
    if (rows.size() < 8) throw ValidationError("task '" + task.name + "' has fewer than 8 rows");
    Rng split_rng(derive_seed(seed, "factor_split:" + task.name));
    split_rng.shuffle(rows);
    int n_train = std::clamp(static_cast<int>(std::lround(opts.train_frac * rows.size())), 2,
                             static_cast<int>(rows.size()) - 1);
    std::vector<int> train_rows(rows.begin(), rows.begin() + n_train);
    std::vector<int> test_rows(rows.begin() + n_train, rows.end());
    auto mask = task_predictor_mask(ds, task);
    auto [dm_train, dm_test] = fit_transform_subset(ds, train_rows, test_rows, mask, opts.preprocess);
    ctx[t].dm_train = std::move(dm_train);
    ctx[t].dm_test = std::move(dm_test);
    ctx[t].ytr.resize(train_rows.size());
    ctx[t].yte.resize(test_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) ctx[t].ytr(i) = *outcome[train_rows[i]];
    for (std::size_t i = 0; i < test_rows.size(); ++i) ctx[t].yte(i) = *outcome[test_rows[i]];
    // Cognitive factors participate only where cognitive predictors are in play.
    for (const auto& f : cb.factors()) {
      if (task.exclude_cognitive && f.project == Project::Cognitive) continue;
      bool has_cols = false;
      for (const auto& m : ctx[t].dm_train.column_meta)
        if (m.factor == f.name) has_cols = true;
      if (has_cols) ctx[t].factors.push_back(f.name);
    }
  }

  struct Job {
    int task_idx;
    std::string factor;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (const auto& f : ctx[t].factors) jobs.push_back({static_cast<int>(t), f});
  std::vector<FactorTaskResult> results(jobs.size());

  run_parallel(static_cast<int>(jobs.size()), opts.jobs, [&](int j) {
    const Job& job = jobs[j];
    const TaskContext& c = ctx[job.task_idx];
    FactorTaskResult& res = results[j];
    res.task = tasks[job.task_idx].name;
    res.factor = job.factor;
    try {
      NetSpec spec;
      spec.input_width = c.dm_train.n_cols();
      spec.head = tasks[job.task_idx].head;
      EmbeddingSpec emb;
      emb.embed_dim = 16;
      emb.factor_names = {job.factor};
      emb.factor_columns = {c.dm_train.columns_for_factor(job.factor)};
      spec.embedding = emb;
      TrainConfig cfg = opts.train;
      cfg.seed = derive_seed(seed, "factor_fit:" + res.task + ":" + job.factor);
      auto trained = train_net<float>(to_float(c.dm_train.values), c.ytr.cast<float>(), spec, cfg);
      Vector pred = trained.net.predict(to_float(c.dm_test.values)).cast<double>();
      res.rmse = rmse(pred, c.yte);
      const auto& layer = trained.net.embed[0];
      res.embedding_vector.resize(16);
      for (int d = 0; d < 16; ++d)
        res.embedding_vector[d] = layer.W.col(d).template cast<double>().mean() +
                                  static_cast<double>(layer.b(d));
    } catch (const std::exception& e) {
      res.failed = true;
    }
  });

  out.results = std::move(results);

  // Per-task mid-ranks over successful factors.
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    std::vector<std::size_t> idx;
    std::vector<double> rmses;
    for (std::size_t j = 0; j < jobs.size(); ++j)
      if (jobs[j].task_idx == static_cast<int>(t) && !out.results[j].failed) {
        idx.push_back(j);
        rmses.push_back(out.results[j].rmse);
      }
    auto ranks = mid_ranks(rmses);
    for (std::size_t k = 0; k < idx.size(); ++k) out.results[idx[k]].rank = ranks[k];
  }

  for (const auto& f : cb.factors()) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : out.results)
      if (r.factor == f.name && !r.failed) {
        sum += r.rank;
        ++count;
      }
    if (count == 0) continue;
    out.factors.push_back(f.name);
    out.average_rank[f.name] = sum / count;
    out.inverse_rank[f.name] = 1.0 / (sum / count);
  }
  return out;
}

std::vector<FlatSparsityRecord> sparsity_records(const EvalReport& report) {
  std::vector<FlatSparsityRecord> out;
  out.reserve(report.samples.size());
  for (const auto& s : report.samples)
    out.push_back({model_name(s.model), s.sparsity, s.abs_error});
  return out;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "task,model,split,rmse,failed\n";
  for (const auto& c : report.cells) {
    out << c.task << ',' << model_name(c.model) << ',' << c.split << ',';
    if (c.failed)
      out << ",true\n";
    else
      out << c.rmse << ",false\n";
  }
  return out.str();
}

std::string samples_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "task,model,split,row,sparsity,abs_error\n";
  for (const auto& s : report.samples)
    out << s.task << ',' << model_name(s.model) << ',' << s.split << ',' << s.row << ','
        << s.sparsity << ',' << s.abs_error << '\n';
  return out.str();
}

std::string report_summary_json(const EvalReport& report) {
  nlohmann::json doc;
  doc["n_splits"] = report.n_splits;
  doc["tasks"] = nlohmann::json::array();
  for (const auto& task : report.task_names) {
    nlohmann::json jt;
    jt["task"] = task;
    jt["models"] = nlohmann::json::array();
    try {
      for (const auto& e : rank_models(report, task))
        jt["models"].push_back({{"model", model_name(e.model)},
                                {"mean_rmse", e.mean_rmse},
                                {"sd_rmse", e.sd_rmse},
                                {"rank", e.rank}});
    } catch (const std::exception& e) {
      jt["error"] = e.what();
    }
    doc["tasks"].push_back(std::move(jt));
  }
  return doc.dump(2) + "\n";
}

std::string factor_ranking_to_csv(const FactorRanking& fr) {
  std::ostringstream out;
  out << "factor,average_rank,inverse_rank\n";
  for (const auto& f : fr.factors)
    out << f << ',' << fr.average_rank.at(f) << ',' << fr.inverse_rank.at(f) << '\n';
  return out.str();
}

}  // namespace sparsebench

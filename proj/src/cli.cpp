#include "sparsebench/cli.hpp"

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparsebench/dataio.hpp"
#include "sparsebench/harness.hpp"
#include "sparsebench/projection.hpp"
#include "sparsebench/stats.hpp"

namespace sparsebench {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
}

std::uint64_t file_digest(const std::string& path) {
  std::string bytes = read_file(path);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    std::uint64_t seed, const json& config) {
  json doc;
  doc["command"] = command;
  doc["seed"] = seed;
  doc["config"] = config;
  doc["config_digest"] = std::hash<std::string>{}(config.dump());
  doc["version"] = "sparsebench 0.1.0";
  doc["timestamp"] = static_cast<long>(std::time(nullptr));
  doc["inputs"] = json::array();
  for (const auto& p : inputs) doc["inputs"].push_back({{"path", p}, {"digest", file_digest(p)}});
  doc["outputs"] = outputs;
  write_file((fs::path(out_dir) / "manifest.json").string(), doc.dump(2) + "\n");
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<PredictionTask> parse_tasks(const std::string& arg) {
  if (arg == "all") return standard_tasks();
  return tasks_by_name(split_list(arg));
}

std::vector<Model> parse_models(const std::string& arg) {
  if (arg == "all") return all_models();
  std::vector<Model> out;
  for (const auto& name : split_list(arg)) {
    auto m = model_from_string(name);
    if (!m) {
      std::string valid;
      for (Model mm : all_models()) valid += (valid.empty() ? "" : ", ") + model_name(mm);
      throw ValidationError("unknown model '" + name + "'; valid names: " + valid);
    }
    out.push_back(*m);
  }
  return out;
}

int default_jobs() {
  if (const char* env = std::getenv("SPARSEBENCH_JOBS")) {
    int j = std::atoi(env);
    if (j > 0) return j;
  }
  return 0;  // harness resolves 0 to available parallelism
}

struct NetFlags {
  int epochs = -1;
  int patience = -1;
  int batch_size = -1;
  double lr = -1.0;

  void apply(TrainConfig& cfg) const {
    if (epochs > 0) cfg.max_epochs = epochs;
    if (patience > 0) cfg.early_stop_patience = patience;
    if (batch_size > 0) cfg.batch_size = batch_size;
    if (lr > 0) cfg.learning_rate = lr;
  }
};

json ranking_to_json(const FactorRanking& fr) {
  json doc;
  doc["results"] = json::array();
  for (const auto& r : fr.results)
    doc["results"].push_back({{"task", r.task},
                              {"factor", r.factor},
                              {"rmse", r.rmse},
                              {"rank", r.rank},
                              {"failed", r.failed},
                              {"vector", r.embedding_vector}});
  doc["factors"] = fr.factors;
  doc["average_rank"] = fr.average_rank;
  doc["inverse_rank"] = fr.inverse_rank;
  return doc;
}

FactorRanking ranking_from_json(const json& doc) {
  FactorRanking fr;
  for (const auto& jr : doc.at("results")) {
    FactorTaskResult r;
    r.task = jr.at("task").get<std::string>();
    r.factor = jr.at("factor").get<std::string>();
    r.rmse = jr.at("rmse").get<double>();
    r.rank = jr.at("rank").get<double>();
    r.failed = jr.at("failed").get<bool>();
    r.embedding_vector = jr.at("vector").get<std::vector<double>>();
    fr.results.push_back(std::move(r));
  }
  fr.factors = doc.at("factors").get<std::vector<std::string>>();
  fr.average_rank = doc.at("average_rank").get<std::map<std::string, double>>();
  fr.inverse_rank = doc.at("inverse_rank").get<std::map<std::string, double>>();
  return fr;
}

// report.csv -> (model names, per-task mean RMSE per model) for the t-tests.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> task_means_from_report_csv(
    const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("task,model,split,rmse", 0) != 0)
    throw ValidationError("malformed report CSV header");
  std::map<std::string, std::map<std::string, std::vector<double>>> by_model_task;
  std::vector<std::string> model_order, task_order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_list(line);
    if (f.size() < 5) {
      // failed cells have an empty rmse field which split_list drops
      continue;
    }
    if (f[4] == "true") continue;
    const std::string& task = f[0];
    const std::string& model = f[1];
    by_model_task[model][task].push_back(std::stod(f[3]));
    if (std::find(model_order.begin(), model_order.end(), model) == model_order.end())
      model_order.push_back(model);
    if (std::find(task_order.begin(), task_order.end(), task) == task_order.end())
      task_order.push_back(task);
  }
  std::vector<std::vector<double>> means;
  for (const auto& m : model_order) {
    std::vector<double> row;
    for (const auto& t : task_order) {
      const auto& v = by_model_task[m][t];
      if (v.empty()) throw ValidationError("model '" + m + "' has no results for task '" + t + "'");
      double s = 0.0;
      for (double x : v) s += x;
      row.push_back(s / v.size());
    }
    means.push_back(std::move(row));
  }
  return {model_order, means};
}

std::vector<SparsityRecord> records_from_samples_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("task,model,split,row,sparsity,abs_error", 0) != 0)
    throw ValidationError("malformed samples CSV header");
  std::vector<SparsityRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_list(line);
    if (f.size() != 6) throw ValidationError("malformed samples CSV row");
    out.push_back({f[1], std::stod(f[4]), std::stod(f[5])});
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Sparse tabular regression benchmark"};
  app.require_subcommand(1);

  std::string config_path, codebook_path, data_path, out_dir;
  std::string tasks_arg = "all", models_arg = "all";
  std::string report_path, samples_path, details_path;
  int splits = 10, jobs = default_jobs();
  double train_frac = 0.75, perplexity = 5.0;
  std::uint64_t seed = 0;
  NetFlags net;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset with planted structure");
  gen->add_option("--config", config_path, "SynthConfig JSON file")->required();
  gen->add_option("--codebook", codebook_path)->required();
  gen->add_option("--out", out_dir)->required();

  auto* ing = app.add_subcommand("ingest", "Validate and normalize a dataset against a codebook");
  ing->add_option("--codebook", codebook_path)->required();
  ing->add_option("--data", data_path)->required();
  ing->add_option("--out", out_dir)->required();

  auto* bench = app.add_subcommand("benchmark", "Run the cross-validated model comparison");
  bench->add_option("--data", data_path)->required();
  bench->add_option("--codebook", codebook_path)->required();
  bench->add_option("--tasks", tasks_arg, "comma list or 'all'");
  bench->add_option("--models", models_arg, "comma list or 'all'");
  bench->add_option("--splits", splits);
  bench->add_option("--train-frac", train_frac);
  bench->add_option("--seed", seed);
  bench->add_option("--jobs", jobs);
  bench->add_option("--epochs", net.epochs, "net epoch ceiling override");
  bench->add_option("--patience", net.patience, "net early-stop patience override");
  bench->add_option("--batch-size", net.batch_size);
  bench->add_option("--lr", net.lr);
  bench->add_option("--out", out_dir)->required();

  auto* rank = app.add_subcommand("rank-factors", "Per-factor embedding nets and importance ranks");
  rank->add_option("--data", data_path)->required();
  rank->add_option("--codebook", codebook_path)->required();
  rank->add_option("--tasks", tasks_arg);
  rank->add_option("--seed", seed);
  rank->add_option("--jobs", jobs);
  rank->add_option("--epochs", net.epochs);
  rank->add_option("--patience", net.patience);
  rank->add_option("--out", out_dir)->required();

  auto* stats_cmd = app.add_subcommand("stats", "Pairwise t-tests and sparsity-interaction ANOVA");
  stats_cmd->add_option("--report", report_path)->required();
  stats_cmd->add_option("--samples", samples_path)->required();
  stats_cmd->add_option("--out", out_dir)->required();

  auto* proj = app.add_subcommand("project", "t-SNE atlas of factor embeddings");
  proj->add_option("--details", details_path, "factor_details.json from rank-factors")->required();
  proj->add_option("--codebook", codebook_path)->required();
  proj->add_option("--perplexity", perplexity);
  proj->add_option("--seed", seed);
  proj->add_option("--out", out_dir)->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      Codebook cb = load_codebook(codebook_path);
      SynthConfig cfg = load_synth_config(config_path);
      SynthResult result = generate_synthetic(cb, cfg);
      ensure_out_dir(out_dir);
      export_dataset(result.dataset, (fs::path(out_dir) / "dataset.csv").string());
      export_ground_truth(result.truth, (fs::path(out_dir) / "ground_truth.json").string());
      write_manifest(out_dir, "gen-synth", {config_path, codebook_path},
                     {"dataset.csv", "ground_truth.json"}, cfg.seed,
                     json::parse(read_file(config_path)));
      return 0;
    }
    if (ing->parsed()) {
      Codebook cb = load_codebook(codebook_path);
      Dataset ds = ingest(cb, data_path);
      ensure_out_dir(out_dir);
      export_dataset(ds, (fs::path(out_dir) / "dataset.csv").string());
      json cfg = {{"sparsity", sparsity(ds)},
                  {"rows", ds.n_rows()},
                  {"columns", ds.n_cols()}};
      write_manifest(out_dir, "ingest", {codebook_path, data_path}, {"dataset.csv"}, 0, cfg);
      std::cout << "ingested " << ds.n_rows() << " rows, " << ds.n_cols()
                << " variables, sparsity " << sparsity(ds) << "\n";
      return 0;
    }
    if (bench->parsed()) {
      Codebook cb = load_codebook(codebook_path);
      Dataset ds = ingest(cb, data_path);
      auto tasks = parse_tasks(tasks_arg);
      auto models = parse_models(models_arg);
      HarnessOptions opts;
      opts.n_splits = splits;
      opts.train_frac = train_frac;
      opts.jobs = jobs;
      net.apply(opts.train);
      EvalReport report = run_benchmark(ds, tasks, models, opts, seed);
      ensure_out_dir(out_dir);
      write_file((fs::path(out_dir) / "report.csv").string(), report_to_csv(report));
      write_file((fs::path(out_dir) / "samples.csv").string(), samples_to_csv(report));
      write_file((fs::path(out_dir) / "summary.json").string(), report_summary_json(report));
      json cfg = {{"tasks", tasks_arg}, {"models", models_arg}, {"splits", splits},
                  {"train_frac", train_frac}};
      write_manifest(out_dir, "benchmark", {data_path, codebook_path},
                     {"report.csv", "samples.csv", "summary.json"}, seed, cfg);
      int failures = 0;
      for (const auto& c : report.cells)
        if (c.failed) ++failures;
      if (failures > 0)
        std::cerr << "warning: " << failures << " of " << report.cells.size() << " fits failed\n";
      return 0;
    }
    if (rank->parsed()) {
      Codebook cb = load_codebook(codebook_path);
      Dataset ds = ingest(cb, data_path);
      auto tasks = parse_tasks(tasks_arg);
      HarnessOptions opts;
      opts.jobs = jobs;
      net.apply(opts.train);
      FactorRanking fr = rank_factors(ds, tasks, opts, seed);
      ensure_out_dir(out_dir);
      write_file((fs::path(out_dir) / "factor_ranking.csv").string(), factor_ranking_to_csv(fr));
      write_file((fs::path(out_dir) / "factor_details.json").string(),
                 ranking_to_json(fr).dump(2) + "\n");
      write_manifest(out_dir, "rank-factors", {data_path, codebook_path},
                     {"factor_ranking.csv", "factor_details.json"}, seed,
                     json{{"tasks", tasks_arg}});
      return 0;
    }
    if (stats_cmd->parsed()) {
      auto [model_names, means] = task_means_from_report_csv(read_file(report_path));
      auto ttests = ttest_matrix(model_names, means);
      ensure_out_dir(out_dir);
      write_file((fs::path(out_dir) / "ttests.csv").string(), ttest_results_to_csv(ttests));
      auto records = records_from_samples_csv(read_file(samples_path));
      AnovaResult anova = sparsity_anova(records);
      write_file((fs::path(out_dir) / "anova.json").string(), anova_to_json_text(anova));
      write_manifest(out_dir, "stats", {report_path, samples_path}, {"ttests.csv", "anova.json"},
                     0, json::object());
      return 0;
    }
    if (proj->parsed()) {
      Codebook cb = load_codebook(codebook_path);
      FactorRanking fr = ranking_from_json(json::parse(read_file(details_path)));
      TsneConfig cfg;
      cfg.perplexity = perplexity;
      cfg.seed = seed;
      auto atlas = build_atlas(cb, fr, cfg);
      ensure_out_dir(out_dir);
      write_file((fs::path(out_dir) / "atlas.csv").string(), atlas_to_csv(atlas));
      write_manifest(out_dir, "project", {details_path, codebook_path}, {"atlas.csv"}, seed,
                     json{{"perplexity", perplexity}});
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::string(e.what()).find("all fits failed") != std::string::npos ? 4 : 2;
  }
  return 2;
}

}  // namespace sparsebench

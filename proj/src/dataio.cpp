#include "sparsebench/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sparsebench {

using nlohmann::json;

Dataset::Dataset(Codebook cb, std::vector<std::string> participant_ids, std::vector<Cell> cells,
                 std::map<std::string, std::vector<std::optional<double>>> outcomes)
    : codebook_(std::make_shared<Codebook>(std::move(cb))),
      participant_ids_(std::move(participant_ids)),
      cells_(std::move(cells)),
      outcomes_(std::move(outcomes)) {
  for (const auto& v : codebook_->variables())
    if (v.included) columns_.push_back(&v);
  if (cells_.size() != participant_ids_.size() * columns_.size())
    throw ValidationError("dataset grid is " + std::to_string(cells_.size()) + " cells, expected " +
                          std::to_string(participant_ids_.size() * columns_.size()));
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const Cell& c = cells_[i];
    if (!c.is_present()) continue;
    const VariableSpec* var = columns_[i % columns_.size()];
    if (!std::isfinite(c.value))
      throw ValidationError("non-finite value in variable '" + var->id + "'");
    if (var->kind == VarKind::Categorical &&
        (c.value < 0 || c.value >= static_cast<double>(var->levels.size()) ||
         c.value != std::floor(c.value)))
      throw ValidationError("level index out of range in variable '" + var->id + "'");
  }
  for (const auto& [name, vals] : outcomes_)
    if (vals.size() != participant_ids_.size())
      throw ValidationError("outcome '" + name + "' length mismatch");
}

const std::vector<std::optional<double>>& Dataset::outcome(const std::string& name) const {
  auto it = outcomes_.find(name);
  if (it == outcomes_.end()) throw ValidationError("unknown outcome '" + name + "'");
  return it->second;
}

std::int64_t sparsity(const Dataset& ds) {
  std::int64_t n = 0;
  for (int r = 0; r < ds.n_rows(); ++r)
    for (int c = 0; c < ds.n_cols(); ++c)
      if (!ds.cell(r, c).is_present()) ++n;
  return n;
}

std::vector<int> sparsity_per_row(const Dataset& ds) {
  std::vector<int> out(ds.n_rows(), 0);
  for (int r = 0; r < ds.n_rows(); ++r)
    for (int c = 0; c < ds.n_cols(); ++c)
      if (!ds.cell(r, c).is_present()) ++out[r];
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::optional<double> parse_number(const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset ingest_text(const Codebook& cb, const std::string& csv_text, const SentinelConfig& sentinels) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty data file", 1);
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "participant_id")
    throw ParseError("first column must be 'participant_id'", 1);

  std::vector<const VariableSpec*> expected;
  for (const auto& v : cb.variables())
    if (v.included) expected.push_back(&v);

  std::size_t pos = 1;
  for (const auto* v : expected) {
    if (pos >= header.size() || header[pos] != v->id)
      throw ParseError("header/codebook mismatch: expected column '" + v->id + "'" +
                           (pos < header.size() ? ", found '" + header[pos] + "'" : " past end of header"),
                       1);
    ++pos;
  }
  std::vector<std::string> outcome_names;
  for (; pos < header.size(); ++pos) {
    if (header[pos].rfind("outcome:", 0) != 0)
      throw ParseError("unexpected trailing column '" + header[pos] + "'", 1);
    outcome_names.push_back(header[pos].substr(8));
  }

  std::vector<std::string> ids;
  std::vector<Cell> cells;
  std::map<std::string, std::vector<std::optional<double>>> outcomes;
  for (const auto& name : outcome_names) outcomes[name] = {};

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError("row has " + std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(header.size()),
                       lineno);
    ids.push_back(fields[0]);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const std::string& tok = fields[1 + i];
      const VariableSpec* var = expected[i];
      if (tok == sentinels.missing)
        cells.push_back(Cell::missing());
      else if (tok == sentinels.invalid)
        cells.push_back(Cell::invalid());
      else if (tok == sentinels.inapplicable)
        cells.push_back(Cell::inapplicable());
      else if (var->kind == VarKind::Numerical) {
        auto v = parse_number(tok);
        if (!v) throw ParseError("unparseable numeric token '" + tok + "' in column '" + var->id + "'", lineno);
        cells.push_back(Cell::present(*v));
      } else {
        auto it = std::find(var->levels.begin(), var->levels.end(), tok);
        if (it == var->levels.end())
          throw ParseError("token '" + tok + "' is not a level of '" + var->id + "' and not a sentinel", lineno);
        cells.push_back(Cell::present(static_cast<double>(it - var->levels.begin())));
      }
    }
    for (std::size_t i = 0; i < outcome_names.size(); ++i) {
      const std::string& tok = fields[1 + expected.size() + i];
      if (tok == sentinels.missing || tok == sentinels.invalid || tok == sentinels.inapplicable) {
        outcomes[outcome_names[i]].push_back(std::nullopt);
      } else {
        auto v = parse_number(tok);
        if (!v) throw ParseError("unparseable outcome token '" + tok + "'", lineno);
        outcomes[outcome_names[i]].push_back(v);
      }
    }
  }

  // Zero-variance columns: every Present cell identical. Demoted to
  // included=false in the returned dataset's codebook view.
  std::vector<std::string> zero_var;
  std::vector<bool> keep(expected.size(), true);
  for (std::size_t c = 0; c < expected.size(); ++c) {
    bool seen = false, varies = false;
    double first = 0.0;
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const Cell& cell = cells[r * expected.size() + c];
      if (!cell.is_present()) continue;
      if (!seen) {
        seen = true;
        first = cell.value;
      } else if (cell.value != first) {
        varies = true;
        break;
      }
    }
    if (seen && !varies) {
      zero_var.push_back(expected[c]->id);
      keep[c] = false;
    }
  }

  Codebook effective = cb.with_excluded(zero_var);
  if (!zero_var.empty()) {
    std::vector<Cell> pruned;
    pruned.reserve(ids.size() * (expected.size() - zero_var.size()));
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t c = 0; c < expected.size(); ++c)
        if (keep[c]) pruned.push_back(cells[r * expected.size() + c]);
    cells = std::move(pruned);
  }
  return Dataset(std::move(effective), std::move(ids), std::move(cells), std::move(outcomes));
}

Dataset ingest(const Codebook& cb, const std::string& data_path, const SentinelConfig& sentinels) {
  std::ifstream in(data_path);
  if (!in) throw IoError("cannot open data file '" + data_path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ingest_text(cb, ss.str(), sentinels);
}

std::string dataset_to_csv_text(const Dataset& ds, const SentinelConfig& sentinels) {
  std::ostringstream out;
  out << "participant_id";
  for (const auto* v : ds.columns()) out << ',' << v->id;
  for (const auto& [name, vals] : ds.outcomes()) out << ",outcome:" << name;
  out << '\n';
  for (int r = 0; r < ds.n_rows(); ++r) {
    out << ds.participant_ids()[r];
    for (int c = 0; c < ds.n_cols(); ++c) {
      const Cell& cell = ds.cell(r, c);
      out << ',';
      switch (cell.state) {
        case CellState::Missing: out << sentinels.missing; break;
        case CellState::Invalid: out << sentinels.invalid; break;
        case CellState::Inapplicable: out << sentinels.inapplicable; break;
        case CellState::Present:
          if (ds.columns()[c]->kind == VarKind::Categorical)
            out << ds.columns()[c]->levels[static_cast<int>(cell.value)];
          else
            out << format_number(cell.value);
          break;
      }
    }
    for (const auto& [name, vals] : ds.outcomes()) {
      out << ',';
      if (vals[r]) out << format_number(*vals[r]);
    }
    out << '\n';
  }
  return out.str();
}

void export_dataset(const Dataset& ds, const std::string& path, const SentinelConfig& sentinels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write data file '" + path + "'");
  out << dataset_to_csv_text(ds, sentinels);
}

void SynthConfig::validate() const {
  if (n_participants < 2) throw ValidationError("n_participants must be >= 2");
  if (factor_latents < 1) throw ValidationError("factor_latents must be >= 1");
  if (noise_sd < 0) throw ValidationError("noise_sd must be >= 0");
  if (missing_rate < 0 || missing_rate > 1) throw ValidationError("missing_rate must be in [0,1]");
  for (double r : row_missing_rates)
    if (r < 0 || r > 1) throw ValidationError("row_missing_rates entries must be in [0,1]");
  if (outcome_missing_rate < 0 || outcome_missing_rate > 1)
    throw ValidationError("outcome_missing_rate must be in [0,1]");
  if (signal_factors < 1) throw ValidationError("signal_factors must be >= 1");
}

namespace {

const char* kOutcomeNames[6] = {"EF_M2", "EM_M2", "COMP_M2", "EF_M3", "EM_M3", "COMP_M3"};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Weight layout per outcome: S*L linear weights followed by S within-factor
// product weights (zero for Linear outcomes).
double eval_outcome(const SynthGroundTruth& gt, const std::vector<double>& w, double shift, int row) {
  const int L = gt.latents_per_factor;
  const int S = gt.signal_factors;
  double acc = shift;
  for (int f = 0; f < S; ++f) {
    for (int k = 0; k < L; ++k) acc += w[f * L + k] * gt.latents(row, f * L + k);
    if (L >= 2) acc += w[S * L + f] * gt.latents(row, f * L) * gt.latents(row, f * L + 1);
  }
  return acc;
}

}  // namespace

double true_outcome(const SynthGroundTruth& gt, const std::string& outcome, int row) {
  auto it = gt.outcome_weights.find(outcome);
  if (it == gt.outcome_weights.end()) throw ValidationError("unknown outcome '" + outcome + "'");
  return eval_outcome(gt, it->second, gt.outcome_shift.at(outcome), row);
}

SynthResult generate_synthetic(const Codebook& cb, const SynthConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_participants;
  const int F = static_cast<int>(cb.factors().size());
  const int L = cfg.factor_latents;
  const int S = std::min(cfg.signal_factors, F);

  SynthGroundTruth gt;
  gt.latents_per_factor = L;
  gt.signal_factors = S;
  gt.outcome_fn = cfg.outcome_fn;

  Rng latent_rng(derive_seed(cfg.seed, "latents"));
  gt.latents = Matrix(n, F * L);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < F * L; ++j) gt.latents(i, j) = latent_rng.normal();

  std::vector<const VariableSpec*> included;
  for (const auto& v : cb.variables())
    if (v.included) included.push_back(&v);

  std::unordered_map<std::string, int> factor_of;
  for (int f = 0; f < F; ++f) factor_of[cb.factors()[f].name] = f;

  // Variable loadings: L weights + intercept.
  Rng load_rng(derive_seed(cfg.seed, "loadings"));
  gt.loadings.resize(included.size());
  for (auto& w : gt.loadings) {
    w.resize(L + 1);
    for (int k = 0; k < L; ++k) w[k] = load_rng.normal() / std::sqrt(static_cast<double>(L));
    w[L] = 0.5 * load_rng.normal();
  }

  // Outcome weights for EF and EM; COMP is their average; M3 = M2 plus a
  // latent-driven drift so delta targets carry signal too.
  Rng w_rng(derive_seed(cfg.seed, "outcome_weights"));
  auto draw_weights = [&](double prod_scale) {
    std::vector<double> w(S * L + S, 0.0);
    for (int j = 0; j < S * L; ++j) w[j] = w_rng.normal();
    for (int f = 0; f < S; ++f)
      w[S * L + f] = cfg.outcome_fn == OutcomeFn::Nonlinear ? prod_scale * (w_rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.8 + 0.8 * w_rng.uniform())
                                                            : 0.0;
    return w;
  };
  auto add = [](const std::vector<double>& a, const std::vector<double>& b, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
    return out;
  };
  std::vector<double> ef = draw_weights(1.5), em = draw_weights(1.5);
  std::vector<double> drift_ef = draw_weights(0.5), drift_em = draw_weights(0.5);
  gt.outcome_weights["EF_M2"] = ef;
  gt.outcome_weights["EM_M2"] = em;
  gt.outcome_weights["COMP_M2"] = add(ef, em, 1.0);
  for (auto& x : gt.outcome_weights["COMP_M2"]) x *= 0.5;
  gt.outcome_weights["EF_M3"] = add(ef, drift_ef, 0.4);
  gt.outcome_weights["EM_M3"] = add(em, drift_em, 0.4);
  gt.outcome_weights["COMP_M3"] = add(gt.outcome_weights["EF_M3"], gt.outcome_weights["EM_M3"], 1.0);
  for (auto& x : gt.outcome_weights["COMP_M3"]) x *= 0.5;
  for (const char* name : kOutcomeNames) gt.outcome_shift[name] = 12.0;
  gt.outcome_shift["EF_M3"] = 11.5;  // downward drift on average
  gt.outcome_shift["EM_M3"] = 11.5;
  gt.outcome_shift["COMP_M3"] = 11.5;

  // Cell values.
  Rng noise_rng(derive_seed(cfg.seed, "noise"));
  std::vector<Cell> cells(static_cast<std::size_t>(n) * included.size());
  for (int i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < included.size(); ++c) {
      const VariableSpec* var = included[c];
      int f = factor_of.at(var->factor);
      const auto& w = gt.loadings[c];
      double raw = w[L];
      for (int k = 0; k < L; ++k) raw += w[k] * gt.latents(i, f * L + k);
      raw += cfg.noise_sd * noise_rng.normal();
      Cell& cell = cells[static_cast<std::size_t>(i) * included.size() + c];
      if (var->kind == VarKind::Numerical) {
        cell = Cell::present(raw);
      } else {
        int m = static_cast<int>(var->levels.size());
        int lvl = std::min(m - 1, static_cast<int>(sigmoid(raw) * m));
        cell = Cell::present(static_cast<double>(lvl));
      }
    }
  }

  // Outcomes with observation noise.
  std::map<std::string, std::vector<std::optional<double>>> outcomes;
  Rng out_rng(derive_seed(cfg.seed, "outcome_noise"));
  for (const char* name : kOutcomeNames) {
    auto& col = outcomes[name];
    col.resize(n);
    for (int i = 0; i < n; ++i)
      col[i] = true_outcome(gt, name, i) + cfg.noise_sd * out_rng.normal();
  }

  // Masking, applied after generation so true values stay recoverable.
  Rng mask_rng(derive_seed(cfg.seed, "mask"));
  std::vector<double> row_rate(n, cfg.missing_rate);
  if (!cfg.row_missing_rates.empty())
    for (int i = 0; i < n; ++i)
      row_rate[i] = cfg.row_missing_rates[mask_rng.below(cfg.row_missing_rates.size())];
  auto absent_cell = [&]() {
    double u = mask_rng.uniform();
    if (u < 0.5) return Cell::missing();
    if (u < 0.75) return Cell::invalid();
    return Cell::inapplicable();
  };
  if (cfg.mechanism == MissingMechanism::McarUniform) {
    for (int i = 0; i < n; ++i)
      for (std::size_t c = 0; c < included.size(); ++c)
        if (mask_rng.uniform() < row_rate[i])
          cells[static_cast<std::size_t>(i) * included.size() + c] = absent_cell();
  } else {
    for (int i = 0; i < n; ++i)
      for (int f = 0; f < F; ++f)
        if (mask_rng.uniform() < row_rate[i]) {
          Cell blocked = absent_cell();
          for (std::size_t c = 0; c < included.size(); ++c)
            if (factor_of.at(included[c]->factor) == f)
              cells[static_cast<std::size_t>(i) * included.size() + c] = blocked;
        }
  }
  if (cfg.outcome_missing_rate > 0) {
    Rng orng(derive_seed(cfg.seed, "outcome_mask"));
    for (auto& [name, col] : outcomes)
      for (int i = 0; i < n; ++i)
        if (orng.uniform() < cfg.outcome_missing_rate) col[i] = std::nullopt;
  }

  std::vector<std::string> ids;
  ids.reserve(n);
  for (int i = 0; i < n; ++i) ids.push_back("P" + std::to_string(i + 1));

  return SynthResult{Dataset(cb, std::move(ids), std::move(cells), std::move(outcomes)), std::move(gt)};
}

std::string ground_truth_to_json_text(const SynthGroundTruth& gt) {
  json doc;
  doc["latents_per_factor"] = gt.latents_per_factor;
  doc["signal_factors"] = gt.signal_factors;
  doc["outcome_fn"] = gt.outcome_fn == OutcomeFn::Linear ? "Linear" : "Nonlinear";
  json lat = json::array();
  for (Eigen::Index i = 0; i < gt.latents.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < gt.latents.cols(); ++j) row.push_back(gt.latents(i, j));
    lat.push_back(std::move(row));
  }
  doc["latents"] = std::move(lat);
  doc["loadings"] = gt.loadings;
  doc["outcome_weights"] = gt.outcome_weights;
  doc["outcome_shift"] = gt.outcome_shift;
  return doc.dump() + "\n";
}

void export_ground_truth(const SynthGroundTruth& gt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ground truth file '" + path + "'");
  out << ground_truth_to_json_text(gt);
}

SynthConfig synth_config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), 1);
  }
  SynthConfig cfg;
  if (doc.contains("n_participants")) cfg.n_participants = doc["n_participants"].get<int>();
  if (doc.contains("factor_latents")) cfg.factor_latents = doc["factor_latents"].get<int>();
  if (doc.contains("noise_sd")) cfg.noise_sd = doc["noise_sd"].get<double>();
  if (doc.contains("missing_rate")) cfg.missing_rate = doc["missing_rate"].get<double>();
  if (doc.contains("row_missing_rates"))
    cfg.row_missing_rates = doc["row_missing_rates"].get<std::vector<double>>();
  if (doc.contains("mechanism")) {
    std::string m = doc["mechanism"].get<std::string>();
    if (m == "mcar")
      cfg.mechanism = MissingMechanism::McarUniform;
    else if (m == "factor_block")
      cfg.mechanism = MissingMechanism::FactorBlock;
    else
      throw ValidationError("unknown mechanism '" + m + "' (expected mcar or factor_block)");
  }
  if (doc.contains("outcome_fn")) {
    std::string f = doc["outcome_fn"].get<std::string>();
    if (f == "Linear")
      cfg.outcome_fn = OutcomeFn::Linear;
    else if (f == "Nonlinear")
      cfg.outcome_fn = OutcomeFn::Nonlinear;
    else
      throw ValidationError("unknown outcome_fn '" + f + "'");
  }
  if (doc.contains("outcome_missing_rate")) cfg.outcome_missing_rate = doc["outcome_missing_rate"].get<double>();
  if (doc.contains("signal_factors")) cfg.signal_factors = doc["signal_factors"].get<int>();
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return synth_config_from_json_text(ss.str());
}

}  // namespace sparsebench

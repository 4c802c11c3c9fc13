#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sparsebench/codebook.hpp"
#include "sparsebench/common.hpp"

namespace sparsebench {

enum class CellState : std::uint8_t { Present, Missing, Invalid, Inapplicable };

struct Cell {
  CellState state = CellState::Missing;
  // Numerical value or categorical level index when Present; undefined otherwise.
  double value = 0.0;

  static Cell present(double v) { return {CellState::Present, v}; }
  static Cell missing() { return {CellState::Missing, 0.0}; }
  static Cell invalid() { return {CellState::Invalid, 0.0}; }
  static Cell inapplicable() { return {CellState::Inapplicable, 0.0}; }
  bool is_present() const { return state == CellState::Present; }
};

// Sentinel tokens for absent cells in CSV files.
struct SentinelConfig {
  std::string missing = "";        // empty cell
  std::string invalid = "INVALID";
  std::string inapplicable = "INAPP";
};

// participant x included-variable grid plus named outcome columns.
// Immutable after construction.
class Dataset {
 public:
  Dataset(Codebook cb, std::vector<std::string> participant_ids, std::vector<Cell> cells,
          std::map<std::string, std::vector<std::optional<double>>> outcomes);

  const Codebook& codebook() const { return *codebook_; }
  const std::vector<std::string>& participant_ids() const { return participant_ids_; }
  int n_rows() const { return static_cast<int>(participant_ids_.size()); }
  int n_cols() const { return static_cast<int>(columns_.size()); }

  // Included variables, in codebook order; defines the grid column layout.
  const std::vector<const VariableSpec*>& columns() const { return columns_; }
  const Cell& cell(int row, int col) const { return cells_[static_cast<std::size_t>(row) * columns_.size() + col]; }

  const std::map<std::string, std::vector<std::optional<double>>>& outcomes() const { return outcomes_; }
  const std::vector<std::optional<double>>& outcome(const std::string& name) const;

 private:
  std::shared_ptr<const Codebook> codebook_;
  std::vector<const VariableSpec*> columns_;
  std::vector<std::string> participant_ids_;
  std::vector<Cell> cells_;
  std::map<std::string, std::vector<std::optional<double>>> outcomes_;
};

// Total count of non-Present cells.
std::int64_t sparsity(const Dataset& ds);
// Per-row counts of non-Present cells; sums to sparsity(ds).
std::vector<int> sparsity_per_row(const Dataset& ds);

Dataset ingest(const Codebook& cb, const std::string& data_path, const SentinelConfig& sentinels = {});
Dataset ingest_text(const Codebook& cb, const std::string& csv_text, const SentinelConfig& sentinels = {});
void export_dataset(const Dataset& ds, const std::string& path, const SentinelConfig& sentinels = {});
std::string dataset_to_csv_text(const Dataset& ds, const SentinelConfig& sentinels = {});

enum class MissingMechanism { McarUniform, FactorBlock };
enum class OutcomeFn { Linear, Nonlinear };

struct SynthConfig {
  int n_participants = 100;
  int factor_latents = 2;
  double noise_sd = 0.1;
  double missing_rate = 0.0;
  MissingMechanism mechanism = MissingMechanism::McarUniform;
  // When non-empty, each participant is assigned one of these rates instead of
  // missing_rate, giving within-dataset sparsity variation.
  std::vector<double> row_missing_rates;
  OutcomeFn outcome_fn = OutcomeFn::Linear;
  double outcome_missing_rate = 0.0;
  int signal_factors = 4;  // leading factors whose latents drive the outcomes
  std::uint64_t seed = 0;

  void validate() const;
};

// Generator ground truth kept alongside the dataset so test oracles can
// recompute outcomes exactly.
struct SynthGroundTruth {
  // latents(i, f * L + k) = latent k of factor f for participant i
  Matrix latents;
  int latents_per_factor = 0;
  // per variable: loading vector over its factor's latents (+ intercept last)
  std::vector<std::vector<double>> loadings;
  // per outcome name: weight per (signal factor, latent) pair, plus shift
  std::map<std::string, std::vector<double>> outcome_weights;
  std::map<std::string, double> outcome_shift;
  OutcomeFn outcome_fn = OutcomeFn::Linear;
  int signal_factors = 0;
};

struct SynthResult {
  Dataset dataset;
  SynthGroundTruth truth;
};

SynthResult generate_synthetic(const Codebook& cb, const SynthConfig& cfg);

// Recompute an outcome's noiseless value from ground truth (oracle hook).
double true_outcome(const SynthGroundTruth& gt, const std::string& outcome, int row);

std::string ground_truth_to_json_text(const SynthGroundTruth& gt);
void export_ground_truth(const SynthGroundTruth& gt, const std::string& path);

SynthConfig synth_config_from_json_text(const std::string& text);
SynthConfig load_synth_config(const std::string& path);

}  // namespace sparsebench

#include "sparsebench/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace sparsebench {

std::vector<int> DesignMatrix::columns_for_factor(const std::string& factor) const {
  bool seen = false;
  std::vector<int> out;
  for (std::size_t i = 0; i < column_meta.size(); ++i)
    if (column_meta[i].factor == factor) {
      out.push_back(static_cast<int>(i));
      seen = true;
    }
  if (!seen) throw ValidationError("unknown factor '" + factor + "' in design matrix");
  return out;
}

std::vector<std::string> DesignMatrix::factors_in_order() const {
  std::vector<std::string> out;
  for (const auto& m : column_meta)
    if (out.empty() || out.back() != m.factor) {
      if (std::find(out.begin(), out.end(), m.factor) == out.end()) out.push_back(m.factor);
    }
  return out;
}

std::pair<DesignMatrix, DesignMatrix> fit_transform_subset(const Dataset& ds,
                                                           const std::vector<int>& train_rows,
                                                           const std::vector<int>& apply_rows,
                                                           const std::vector<bool>& use_column,
                                                           const PreprocessOptions& opts) {
  const auto& cols = ds.columns();
  if (use_column.size() != cols.size())
    throw ValidationError("use_column mask length mismatch");

  // Scaler fit on training rows only; columns with <2 Present training values
  // are dropped.
  struct NumStat {
    double mean = 0.0, sd = 1.0;
    bool keep = true;
  };
  std::vector<NumStat> stats(cols.size());
  std::vector<std::string> dropped;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (!use_column[c] || cols[c]->kind != VarKind::Numerical) continue;
    double sum = 0.0, sumsq = 0.0;
    int n = 0;
    for (int r : train_rows) {
      const Cell& cell = ds.cell(r, static_cast<int>(c));
      if (!cell.is_present()) continue;
      sum += cell.value;
      sumsq += cell.value * cell.value;
      ++n;
    }
    if (n < 2) {
      stats[c].keep = false;
      dropped.push_back(cols[c]->id);
      continue;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    if (!opts.population_sd) var *= static_cast<double>(n) / (n - 1);
    double sd = std::sqrt(std::max(var, 0.0));
    if (sd <= 0.0) {
      stats[c].keep = false;
      dropped.push_back(cols[c]->id);
      continue;
    }
    stats[c] = {mean, sd, true};
  }

  std::vector<ColumnMeta> meta;
  std::vector<ScalerParam> scalers;
  struct Block {
    std::size_t src_col;
    int first_out;
    int width;       // one-hot width or 1
    int indicator;   // output column of the missingness indicator, or -1
  };
  std::vector<Block> blocks;
  int out_col = 0;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (!use_column[c]) continue;
    const VariableSpec* v = cols[c];
    if (v->kind == VarKind::Numerical) {
      if (!stats[c].keep) continue;
      meta.push_back({v->id, v->factor, VarKind::Numerical, -1, false});
      scalers.push_back({v->id, stats[c].mean, stats[c].sd});
      blocks.push_back({c, out_col, 1, -1});
      out_col += 1;
    } else {
      for (int l = 0; l < static_cast<int>(v->levels.size()); ++l)
        meta.push_back({v->id, v->factor, VarKind::Categorical, l, false});
      blocks.push_back({c, out_col, static_cast<int>(v->levels.size()), -1});
      out_col += static_cast<int>(v->levels.size());
    }
    if (opts.missingness_indicators) {
      meta.push_back({v->id, v->factor, v->kind, -1, true});
      blocks.back().indicator = out_col;
      out_col += 1;
    }
  }

  auto build = [&](const std::vector<int>& rows) {
    DesignMatrix dm;
    dm.column_meta = meta;
    dm.scaler_params = scalers;
    dm.dropped_variables = dropped;
    dm.values = Matrix::Zero(static_cast<int>(rows.size()), out_col);
    dm.row_sparsity.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      int r = rows[i];
      int sparse = 0;
      for (std::size_t c = 0; c < cols.size(); ++c)
        if (use_column[c] && !ds.cell(r, static_cast<int>(c)).is_present()) ++sparse;
      dm.row_sparsity[i] = sparse;
      for (const Block& b : blocks) {
        const Cell& cell = ds.cell(r, static_cast<int>(b.src_col));
        if (cell.is_present()) {
          if (cols[b.src_col]->kind == VarKind::Numerical)
            dm.values(static_cast<int>(i), b.first_out) =
                (cell.value - stats[b.src_col].mean) / stats[b.src_col].sd;
          else
            dm.values(static_cast<int>(i), b.first_out + static_cast<int>(cell.value)) = 1.0;
        } else if (b.indicator >= 0) {
          dm.values(static_cast<int>(i), b.indicator) = 1.0;
        }
        // Absent numerical stays 0 (= training mean); absent categorical
        // stays an all-zero one-hot block.
      }
    }
    return dm;
  };

  return {build(train_rows), build(apply_rows)};
}

std::pair<DesignMatrix, DesignMatrix> fit_transform(const Dataset& ds,
                                                    const std::vector<int>& train_rows,
                                                    const std::vector<int>& apply_rows,
                                                    const PreprocessOptions& opts) {
  std::vector<bool> all(ds.columns().size(), true);
  return fit_transform_subset(ds, train_rows, apply_rows, all, opts);
}

DesignMatrix fit_transform_all(const Dataset& ds, const PreprocessOptions& opts) {
  std::vector<int> rows(ds.n_rows());
  for (int i = 0; i < ds.n_rows(); ++i) rows[i] = i;
  return fit_transform(ds, rows, rows, opts).first;
}

std::string design_matrix_sidecar_json(const DesignMatrix& dm) {
  nlohmann::json doc;
  doc["columns"] = nlohmann::json::array();
  for (const auto& m : dm.column_meta)
    doc["columns"].push_back({{"variable", m.variable_id},
                              {"factor", m.factor},
                              {"kind", to_string(m.kind)},
                              {"level", m.level},
                              {"indicator", m.indicator}});
  doc["scalers"] = nlohmann::json::array();
  for (const auto& s : dm.scaler_params)
    doc["scalers"].push_back({{"variable", s.variable_id}, {"mean", s.mean}, {"sd", s.sd}});
  doc["dropped_variables"] = dm.dropped_variables;
  return doc.dump(2) + "\n";
}

void export_design_matrix(const DesignMatrix& dm, const std::string& csv_path, const std::string& sidecar_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write '" + csv_path + "'");
  for (std::size_t c = 0; c < dm.column_meta.size(); ++c) {
    if (c) csv << ',';
    const auto& m = dm.column_meta[c];
    csv << m.variable_id;
    if (m.level >= 0) csv << "=" << m.level;
    if (m.indicator) csv << ":absent";
  }
  csv << '\n';
  char buf[32];
  for (int r = 0; r < dm.n_rows(); ++r) {
    for (int c = 0; c < dm.n_cols(); ++c) {
      if (c) csv << ',';
      std::snprintf(buf, sizeof buf, "%.17g", dm.values(r, c));
      csv << buf;
    }
    csv << '\n';
  }
  std::ofstream side(sidecar_path);
  if (!side) throw IoError("cannot write '" + sidecar_path + "'");
  side << design_matrix_sidecar_json(dm);
}

}  // namespace sparsebench

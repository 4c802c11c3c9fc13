#pragma once

#include <string>
#include <vector>

#include "sparsebench/dataio.hpp"

namespace sparsebench {

struct ColumnMeta {
  std::string variable_id;
  std::string factor;
  VarKind kind = VarKind::Numerical;
  int level = -1;  // one-hot level index; -1 for numerical and indicator columns
  bool indicator = false;
};

struct ScalerParam {
  std::string variable_id;
  double mean = 0.0;
  double sd = 1.0;
};

struct PreprocessOptions {
  bool population_sd = true;  // divide by n; false for n-1
  bool missingness_indicators = false;
};

// Dense numeric view of a Dataset row subset. Numericals are z-scored with
// statistics fitted on training rows only, categoricals one-hot encoded,
// absent cells imputed (mean for numericals, all-zero block for categoricals).
struct DesignMatrix {
  Matrix values;
  std::vector<ColumnMeta> column_meta;
  std::vector<int> row_sparsity;
  std::vector<ScalerParam> scaler_params;
  std::vector<std::string> dropped_variables;  // <2 Present training values

  int n_rows() const { return static_cast<int>(values.rows()); }
  int n_cols() const { return static_cast<int>(values.cols()); }
  std::vector<int> columns_for_factor(const std::string& factor) const;
  std::vector<std::string> factors_in_order() const;
};

std::pair<DesignMatrix, DesignMatrix> fit_transform(const Dataset& ds,
                                                    const std::vector<int>& train_rows,
                                                    const std::vector<int>& apply_rows,
                                                    const PreprocessOptions& opts = {});

// Convenience: fit and apply on the same rows.
DesignMatrix fit_transform_all(const Dataset& ds, const PreprocessOptions& opts = {});

// Variant that restricts to a subset of predictor variables (by id).
std::pair<DesignMatrix, DesignMatrix> fit_transform_subset(const Dataset& ds,
                                                           const std::vector<int>& train_rows,
                                                           const std::vector<int>& apply_rows,
                                                           const std::vector<bool>& use_column,
                                                           const PreprocessOptions& opts = {});

std::string design_matrix_sidecar_json(const DesignMatrix& dm);
void export_design_matrix(const DesignMatrix& dm, const std::string& csv_path, const std::string& sidecar_path);

}  // namespace sparsebench

#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sparsebench/common.hpp"

namespace sparsebench {

enum class Project { Survey, Cognitive, DailyDiary, Biomarkers };
enum class VarKind { Numerical, Categorical };

std::string to_string(Project p);
std::string to_string(VarKind k);
std::optional<Project> project_from_string(const std::string& s);

struct VariableSpec {
  std::string id;
  Project project = Project::Survey;
  std::string factor;
  VarKind kind = VarKind::Numerical;
  std::vector<std::string> levels;  // Categorical only, >= 2 entries
  bool included = true;
};

struct FactorSpec {
  std::string name;
  Project project = Project::Survey;
};

// Immutable after load; the project -> factor -> variable hierarchy that
// drives preprocessing, embeddings and factor ranking.
class Codebook {
 public:
  Codebook() = default;
  Codebook(std::vector<FactorSpec> factors, std::vector<VariableSpec> variables);

  const std::vector<VariableSpec>& variables() const { return variables_; }
  const std::vector<FactorSpec>& factors() const { return factors_; }

  bool has_factor(const std::string& name) const;
  Project factor_project(const std::string& name) const;

  // Included variables tagged with the factor, in codebook order.
  std::vector<const VariableSpec*> factor_variables(const std::string& factor) const;

  // (categorical, numerical) over included variables.
  std::pair<int, int> kind_counts() const;
  int included_count() const;

  const VariableSpec* find_variable(const std::string& id) const;

  // Returns a copy with the given variable ids demoted to included=false.
  Codebook with_excluded(const std::vector<std::string>& ids) const;

 private:
  void validate();

  std::vector<FactorSpec> factors_;
  std::vector<VariableSpec> variables_;
  std::unordered_map<std::string, std::size_t> factor_index_;
  std::unordered_map<std::string, std::size_t> variable_index_;
};

Codebook load_codebook(const std::string& path);
Codebook codebook_from_json_text(const std::string& text);
void save_codebook(const Codebook& cb, const std::string& path);
std::string codebook_to_json_text(const Codebook& cb);

}  // namespace sparsebench

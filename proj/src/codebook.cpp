#include "sparsebench/codebook.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sparsebench {

using nlohmann::json;

std::string to_string(Project p) {
  switch (p) {
    case Project::Survey: return "Survey";
    case Project::Cognitive: return "Cognitive";
    case Project::DailyDiary: return "DailyDiary";
    case Project::Biomarkers: return "Biomarkers";
  }
  return "?";
}

std::string to_string(VarKind k) { return k == VarKind::Numerical ? "Numerical" : "Categorical"; }

std::optional<Project> project_from_string(const std::string& s) {
  if (s == "Survey") return Project::Survey;
  if (s == "Cognitive") return Project::Cognitive;
  if (s == "DailyDiary") return Project::DailyDiary;
  if (s == "Biomarkers") return Project::Biomarkers;
  return std::nullopt;
}

Codebook::Codebook(std::vector<FactorSpec> factors, std::vector<VariableSpec> variables)
    : factors_(std::move(factors)), variables_(std::move(variables)) {
  validate();
}

void Codebook::validate() {
  factor_index_.clear();
  variable_index_.clear();
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (!factor_index_.emplace(factors_[i].name, i).second)
      throw ValidationError("duplicate factor '" + factors_[i].name + "'");
  }
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    const auto& v = variables_[i];
    if (!variable_index_.emplace(v.id, i).second)
      throw ValidationError("DuplicateVariableId(\"" + v.id + "\")");
    auto it = factor_index_.find(v.factor);
    if (it == factor_index_.end())
      throw ValidationError("variable '" + v.id + "' references unknown factor '" + v.factor + "'");
    if (factors_[it->second].project != v.project)
      throw ValidationError("variable '" + v.id + "' project does not match factor '" + v.factor +
                            "' project " + to_string(factors_[it->second].project));
    if (v.kind == VarKind::Categorical) {
      if (v.levels.size() < 2)
        throw ValidationError("categorical variable '" + v.id + "' needs >= 2 levels");
    } else if (!v.levels.empty()) {
      throw ValidationError("numerical variable '" + v.id + "' must not declare levels");
    }
  }
}

bool Codebook::has_factor(const std::string& name) const { return factor_index_.count(name) > 0; }

Project Codebook::factor_project(const std::string& name) const {
  auto it = factor_index_.find(name);
  if (it == factor_index_.end()) throw ValidationError("unknown factor '" + name + "'");
  return factors_[it->second].project;
}

std::vector<const VariableSpec*> Codebook::factor_variables(const std::string& factor) const {
  if (!has_factor(factor)) throw ValidationError("unknown factor '" + factor + "'");
  std::vector<const VariableSpec*> out;
  for (const auto& v : variables_)
    if (v.included && v.factor == factor) out.push_back(&v);
  return out;
}

std::pair<int, int> Codebook::kind_counts() const {
  int cat = 0, num = 0;
  for (const auto& v : variables_) {
    if (!v.included) continue;
    (v.kind == VarKind::Categorical ? cat : num)++;
  }
  return {cat, num};
}

int Codebook::included_count() const {
  return static_cast<int>(std::count_if(variables_.begin(), variables_.end(),
                                        [](const VariableSpec& v) { return v.included; }));
}

const VariableSpec* Codebook::find_variable(const std::string& id) const {
  auto it = variable_index_.find(id);
  return it == variable_index_.end() ? nullptr : &variables_[it->second];
}

Codebook Codebook::with_excluded(const std::vector<std::string>& ids) const {
  Codebook copy = *this;
  for (const auto& id : ids) {
    auto it = copy.variable_index_.find(id);
    if (it == copy.variable_index_.end()) throw ValidationError("unknown variable '" + id + "'");
    copy.variables_[it->second].included = false;
  }
  return copy;
}

namespace {

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ValidationError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

Codebook codebook_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), line_of_offset(text, e.byte));
  }
  if (!doc.is_object()) throw ValidationError("codebook document must be a JSON object");
  reject_unknown_keys(doc, {"factors", "variables"}, "codebook");

  std::vector<FactorSpec> factors;
  for (const auto& f : doc.at("factors")) {
    reject_unknown_keys(f, {"name", "project"}, "factor");
    FactorSpec spec;
    spec.name = f.at("name").get<std::string>();
    auto proj = project_from_string(f.at("project").get<std::string>());
    if (!proj) throw ValidationError("factor '" + spec.name + "' references unknown project '" +
                                     f.at("project").get<std::string>() + "'");
    spec.project = *proj;
    factors.push_back(std::move(spec));
  }

  std::vector<VariableSpec> variables;
  for (const auto& v : doc.at("variables")) {
    reject_unknown_keys(v, {"id", "project", "factor", "kind", "levels", "included"}, "variable");
    VariableSpec spec;
    spec.id = v.at("id").get<std::string>();
    auto proj = project_from_string(v.at("project").get<std::string>());
    if (!proj) throw ValidationError("variable '" + spec.id + "' references unknown project '" +
                                     v.at("project").get<std::string>() + "'");
    spec.project = *proj;
    spec.factor = v.at("factor").get<std::string>();
    std::string kind = v.at("kind").get<std::string>();
    if (kind == "Numerical")
      spec.kind = VarKind::Numerical;
    else if (kind == "Categorical")
      spec.kind = VarKind::Categorical;
    else
      throw ValidationError("variable '" + spec.id + "' has unknown kind '" + kind + "'");
    if (v.contains("levels")) spec.levels = v.at("levels").get<std::vector<std::string>>();
    spec.included = v.at("included").get<bool>();
    variables.push_back(std::move(spec));
  }
  return Codebook(std::move(factors), std::move(variables));
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open codebook file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return codebook_from_json_text(ss.str());
}

std::string codebook_to_json_text(const Codebook& cb) {
  json doc;
  doc["factors"] = json::array();
  for (const auto& f : cb.factors())
    doc["factors"].push_back({{"name", f.name}, {"project", to_string(f.project)}});
  doc["variables"] = json::array();
  for (const auto& v : cb.variables()) {
    json jv = {{"id", v.id},
               {"project", to_string(v.project)},
               {"factor", v.factor},
               {"kind", to_string(v.kind)},
               {"included", v.included}};
    if (v.kind == VarKind::Categorical) jv["levels"] = v.levels;
    doc["variables"].push_back(std::move(jv));
  }
  return doc.dump(2) + "\n";
}

void save_codebook(const Codebook& cb, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write codebook file '" + path + "'");
  out << codebook_to_json_text(cb);
}

}  // namespace sparsebench

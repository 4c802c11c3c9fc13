#pragma once

// Shared fixture builders for the test suites.

#include <string>
#include <vector>

#include "sparsebench/codebook.hpp"
#include "sparsebench/dataio.hpp"

namespace sparsebench::testing {

// F factors spread over the four projects, each with n_num numerical and
// n_cat categorical(3-level) variables. Factor i is named "F<i>".
inline Codebook make_codebook(int n_factors, int n_num = 2, int n_cat = 1,
                              int n_cognitive_factors = 1) {
  std::vector<FactorSpec> factors;
  std::vector<VariableSpec> variables;
  for (int f = 0; f < n_factors; ++f) {
    FactorSpec fs;
    fs.name = "F" + std::to_string(f);
    // Keep at least one Cognitive factor so M3 tasks differ from M2 tasks.
    fs.project = f < n_cognitive_factors
                     ? Project::Cognitive
                     : std::vector<Project>{Project::Survey, Project::DailyDiary,
                                            Project::Biomarkers}[f % 3];
    factors.push_back(fs);
    for (int v = 0; v < n_num; ++v) {
      VariableSpec vs;
      vs.id = fs.name + "_n" + std::to_string(v);
      vs.project = fs.project;
      vs.factor = fs.name;
      vs.kind = VarKind::Numerical;
      variables.push_back(vs);
    }
    for (int v = 0; v < n_cat; ++v) {
      VariableSpec vs;
      vs.id = fs.name + "_c" + std::to_string(v);
      vs.project = fs.project;
      vs.factor = fs.name;
      vs.kind = VarKind::Categorical;
      vs.levels = {"lo", "mid", "hi"};
      variables.push_back(vs);
    }
  }
  return Codebook(std::move(factors), std::move(variables));
}

inline SynthConfig make_synth_config(int n, std::uint64_t seed, OutcomeFn fn = OutcomeFn::Linear,
                                     double noise_sd = 0.1, double missing_rate = 0.0) {
  SynthConfig cfg;
  cfg.n_participants = n;
  cfg.factor_latents = 2;
  cfg.noise_sd = noise_sd;
  cfg.missing_rate = missing_rate;
  cfg.outcome_fn = fn;
  cfg.seed = seed;
  return cfg;
}

}  // namespace sparsebench::testing

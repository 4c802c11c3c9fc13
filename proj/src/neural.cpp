#include "sparsebench/neural.hpp"

#include <fstream>

#include <json.hpp>

namespace sparsebench {

namespace {

using nlohmann::json;

// Checkpoint tensor order: the parameter tensors followed by each block's
// batchnorm running statistics.
std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXf>>> checkpoint_tensors(Net& net) {
  std::vector<std::pair<std::string, Eigen::Map<Eigen::VectorXf>>> out;
  for (auto& r : net.tensors()) out.emplace_back(r.name, Eigen::Map<Eigen::VectorXf>(r.data, r.size));
  for (std::size_t l = 0; l < net.bnorm.size(); ++l) {
    out.emplace_back("bnorm" + std::to_string(l) + ".run_mean",
                     Eigen::Map<Eigen::VectorXf>(net.bnorm[l].run_mean.data(), net.bnorm[l].run_mean.size()));
    out.emplace_back("bnorm" + std::to_string(l) + ".run_var",
                     Eigen::Map<Eigen::VectorXf>(net.bnorm[l].run_var.data(), net.bnorm[l].run_var.size()));
  }
  return out;
}

json spec_to_json(const NetSpec& spec) {
  json j;
  j["input_width"] = spec.input_width;
  j["head"] = spec.head == HeadKind::Relu ? "relu" : "linear";
  j["hidden"] = spec.hidden;
  j["n_blocks"] = spec.n_blocks;
  j["dropout_p"] = spec.dropout_p;
  j["leaky_slope"] = spec.leaky_slope;
  j["bn_momentum"] = spec.bn_momentum;
  j["bn_eps"] = spec.bn_eps;
  if (spec.embedding) {
    j["embedding"] = {{"factor_names", spec.embedding->factor_names},
                      {"factor_columns", spec.embedding->factor_columns},
                      {"embed_dim", spec.embedding->embed_dim}};
  }
  return j;
}

NetSpec spec_from_json(const json& j) {
  NetSpec spec;
  spec.input_width = j.at("input_width").get<int>();
  spec.head = j.at("head").get<std::string>() == "relu" ? HeadKind::Relu : HeadKind::Linear;
  spec.hidden = j.at("hidden").get<int>();
  spec.n_blocks = j.at("n_blocks").get<int>();
  spec.dropout_p = j.at("dropout_p").get<double>();
  spec.leaky_slope = j.at("leaky_slope").get<double>();
  spec.bn_momentum = j.at("bn_momentum").get<double>();
  spec.bn_eps = j.at("bn_eps").get<double>();
  if (j.contains("embedding")) {
    EmbeddingSpec emb;
    emb.factor_names = j["embedding"].at("factor_names").get<std::vector<std::string>>();
    emb.factor_columns = j["embedding"].at("factor_columns").get<std::vector<std::vector<int>>>();
    emb.embed_dim = j["embedding"].at("embed_dim").get<int>();
    spec.embedding = std::move(emb);
  }
  return spec;
}

}  // namespace

void save_checkpoint(Net& net, const TrainConfig& cfg, int best_epoch, const std::string& blob_path,
                     const std::string& manifest_path) {
  auto tensors = checkpoint_tensors(net);
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot write checkpoint blob '" + blob_path + "'");
  json shapes = json::array();
  for (auto& [name, map] : tensors) {
    // Host is little-endian x86/ARM; floats written as-is.
    blob.write(reinterpret_cast<const char*>(map.data()),
               static_cast<std::streamsize>(map.size() * sizeof(float)));
    shapes.push_back({{"name", name}, {"size", map.size()}});
  }
  json manifest;
  manifest["spec"] = spec_to_json(net.spec);
  manifest["tensors"] = std::move(shapes);
  manifest["best_epoch"] = best_epoch;
  manifest["train_config"] = {{"batch_size", cfg.batch_size},
                              {"max_epochs", cfg.max_epochs},
                              {"learning_rate", cfg.learning_rate},
                              {"early_stop_patience", cfg.early_stop_patience},
                              {"val_fraction", cfg.val_fraction},
                              {"seed", cfg.seed}};
  std::ofstream mf(manifest_path);
  if (!mf) throw IoError("cannot write checkpoint manifest '" + manifest_path + "'");
  mf << manifest.dump(2) << "\n";
}

Net load_checkpoint(const std::string& blob_path, const std::string& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("cannot open checkpoint manifest '" + manifest_path + "'");
  json manifest = json::parse(mf);
  Net net = Net::make(spec_from_json(manifest.at("spec")), 0);
  auto tensors = checkpoint_tensors(net);
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot open checkpoint blob '" + blob_path + "'");
  const auto& shapes = manifest.at("tensors");
  if (shapes.size() != tensors.size()) throw ValidationError("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (shapes[i].at("name").get<std::string>() != tensors[i].first ||
        shapes[i].at("size").get<Eigen::Index>() != tensors[i].second.size())
      throw ValidationError("checkpoint tensor '" + tensors[i].first + "' shape mismatch");
    blob.read(reinterpret_cast<char*>(tensors[i].second.data()),
              static_cast<std::streamsize>(tensors[i].second.size() * sizeof(float)));
    if (!blob) throw Error("checkpoint blob truncated at tensor '" + tensors[i].first + "'");
  }
  return net;
}

}  // namespace sparsebench

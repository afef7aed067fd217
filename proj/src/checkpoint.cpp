#include <fstream>
#include <string>

#include <json.hpp>

#include "binary_io.hpp"
#include "gunlearn/error.hpp"
#include "gunlearn/model.hpp"

namespace gunlearn {

namespace {
constexpr const char* kCheckpointFormat = "gunlearn-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
  if (params.weights.empty()) throw ValidationError("checkpoint: no weight blocks");
  nlohmann::json header;
  header["format"] = kCheckpointFormat;
  header["version"] = kCheckpointVersion;
  header["architecture"] = to_string(params.architecture);
  header["num_features"] = params.num_features();
  header["num_classes"] = params.num_classes();
  header["hidden_dim"] = params.hidden_dim();
  header["sgc_hops"] = params.sgc_hops;
  header["seed"] = meta.seed;
  header["epochs"] = meta.epochs;
  auto blocks = nlohmann::json::array();
  const char* gcn_names[] = {"W0", "W1"};
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    const auto& w = params.weights[i];
    blocks.push_back({{"name", params.architecture == Architecture::GCN ? gcn_names[i] : "W"},
                      {"rows", w.rows()},
                      {"cols", w.cols()}});
  }
  header["blocks"] = blocks;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  out << header.dump() << '\n';
  for (const auto& w : params.weights) detail::write_f64_le(out, w.data());
  if (!out) throw IoError("checkpoint: write to '" + path + "' failed");
}

std::pair<ModelParams, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("checkpoint: missing header in " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint: malformed header in " + path + ": " + e.what());
  }
  try {
    if (header.at("format") != kCheckpointFormat ||
        header.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("checkpoint: unsupported format/version in " + path);
    }
    ModelParams params;
    params.architecture = parse_architecture(header.at("architecture").get<std::string>());
    params.sgc_hops = header.at("sgc_hops").get<std::size_t>();
    CheckpointMeta meta;
    meta.seed = header.at("seed").get<std::uint64_t>();
    meta.epochs = header.at("epochs").get<std::size_t>();
    const std::size_t expected_blocks = params.architecture == Architecture::GCN ? 2 : 1;
    if (header.at("blocks").size() != expected_blocks) {
      throw ValidationError("checkpoint: wrong number of weight blocks in " + path);
    }
    for (const auto& b : header.at("blocks")) {
      DenseMatrix w(b.at("rows").get<std::size_t>(), b.at("cols").get<std::size_t>());
      if (!detail::read_f64_le(in, w.data())) {
        throw ValidationError("checkpoint: truncated weight block '" +
                              b.at("name").get<std::string>() + "' in " + path);
      }
      params.weights.push_back(std::move(w));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      throw ValidationError("checkpoint: trailing bytes after weight blocks in " + path);
    }
    if (params.architecture == Architecture::GCN &&
        params.weights[0].cols() != params.weights[1].rows()) {
      throw ValidationError("checkpoint: W0/W1 shapes do not chain in " + path);
    }
    if (!params.all_finite()) throw ValidationError("checkpoint: non-finite weight in " + path);
    return {std::move(params), meta};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint: bad header field in " + path + ": " + e.what());
  }
}

}  // namespace gunlearn

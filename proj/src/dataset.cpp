#include "gunlearn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace gunlearn {

namespace fs = std::filesystem;
using Kind = DatasetError::Kind;

void DatasetBundle::validate() const {
  graph.validate();
  splits.validate(graph.num_nodes);
  if (format_version != kDatasetFormatVersion) {
    throw ValidationError("dataset: unsupported format_version " +
                          std::to_string(format_version));
  }
}

namespace {

fs::path require_file(const fs::path& dir, const char* name) {
  const fs::path p = dir / name;
  if (!fs::is_regular_file(p)) {
    throw DatasetError(Kind::MissingFile, "dataset: missing file " + p.string());
  }
  return p;
}

// Parses a non-negative or signed decimal integer occupying the whole token.
template <typename T>
bool parse_int(std::string_view token, T& out) {
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

IndexSet read_split(const nlohmann::json& splits, const char* name, std::size_t num_nodes) {
  IndexSet s = splits.at(name).get<IndexSet>();
  if (!is_sorted_unique(s)) {
    throw DatasetError(Kind::BadSplit,
                       std::string("dataset: split '") + name + "' is not sorted and unique");
  }
  if (!s.empty() && s.back() >= num_nodes) {
    throw DatasetError(Kind::BadSplit, std::string("dataset: split '") + name + "' index " +
                                           std::to_string(s.back()) + " out of range");
  }
  return s;
}

}  // namespace

DatasetBundle load_dataset(const std::string& directory) {
  const fs::path dir(directory);
  if (!fs::is_directory(dir)) {
    throw DatasetError(Kind::MissingFile, "dataset: directory " + directory + " not found");
  }
  const auto meta_path = require_file(dir, "meta.json");
  const auto features_path = require_file(dir, "features.bin");
  const auto labels_path = require_file(dir, "labels.txt");
  const auto edges_path = require_file(dir, "edges.txt");

  DatasetBundle bundle;
  Graph& g = bundle.graph;
  std::size_t num_features = 0;
  std::optional<std::size_t> declared_edges;
  {
    std::ifstream in(meta_path);
    if (!in) throw IoError("dataset: cannot read " + meta_path.string());
    try {
      const auto meta = nlohmann::json::parse(in);
      bundle.name = meta.at("name").get<std::string>();
      bundle.format_version = meta.at("format_version").get<int>();
      if (bundle.format_version != kDatasetFormatVersion) {
        throw DatasetError(Kind::Malformed, "dataset: unsupported format_version " +
                                                std::to_string(bundle.format_version));
      }
      g.num_nodes = meta.at("num_nodes").get<std::size_t>();
      num_features = meta.at("num_features").get<std::size_t>();
      g.num_classes = meta.at("num_classes").get<std::size_t>();
      if (meta.contains("num_edges")) declared_edges = meta.at("num_edges").get<std::size_t>();
      const auto& splits = meta.at("splits");
      bundle.splits.train = read_split(splits, "train", g.num_nodes);
      bundle.splits.val = read_split(splits, "val", g.num_nodes);
      bundle.splits.test = read_split(splits, "test", g.num_nodes);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(Kind::Malformed,
                         "dataset: malformed " + meta_path.string() + ": " + e.what());
    }
  }

  {
    const auto expected = static_cast<std::uintmax_t>(g.num_nodes) * num_features * 8;
    const auto actual = fs::file_size(features_path);
    if (actual != expected) {
      throw DatasetError(Kind::SizeMismatch,
                         "dataset: " + features_path.string() + " has " + std::to_string(actual) +
                             " bytes, expected " + std::to_string(expected) + " (8 * " +
                             std::to_string(g.num_nodes) + " * " + std::to_string(num_features) +
                             ")");
    }
    g.features = DenseMatrix(g.num_nodes, num_features);
    std::ifstream in(features_path, std::ios::binary);
    if (!in || !detail::read_f64_le(in, g.features.data())) {
      throw IoError("dataset: cannot read " + features_path.string());
    }
    if (!g.features.all_finite()) {
      throw DatasetError(Kind::Malformed, "dataset: non-finite value in " + features_path.string());
    }
  }

  {
    std::ifstream in(labels_path);
    if (!in) throw IoError("dataset: cannot read " + labels_path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto tok = trim(line);
      if (tok.empty()) continue;
      int label = 0;
      if (!parse_int(tok, label)) {
        throw DatasetError(Kind::Malformed, "dataset: labels.txt line " + std::to_string(lineno) +
                                                ": not an integer: '" + std::string(tok) + "'");
      }
      if (label < 0 || static_cast<std::size_t>(label) >= g.num_classes) {
        throw DatasetError(Kind::LabelOutOfRange,
                           "dataset: labels.txt line " + std::to_string(lineno) + ": label " +
                               std::to_string(label) + " outside [0, " +
                               std::to_string(g.num_classes) + ")");
      }
      g.labels.push_back(label);
    }
    if (g.labels.size() != g.num_nodes) {
      throw DatasetError(Kind::SizeMismatch, "dataset: labels.txt has " +
                                                 std::to_string(g.labels.size()) +
                                                 " labels for " + std::to_string(g.num_nodes) +
                                                 " nodes");
    }
  }

  {
    std::ifstream in(edges_path);
    if (!in) throw IoError("dataset: cannot read " + edges_path.string());
    std::set<std::pair<NodeIndex, NodeIndex>> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto text = trim(line);
      if (text.empty()) continue;
      const auto where = "dataset: edges.txt line " + std::to_string(lineno) + ": ";
      const auto space = text.find_first_of(" \t");
      NodeIndex u = 0;
      NodeIndex v = 0;
      if (space == std::string_view::npos || !parse_int(text.substr(0, space), u) ||
          !parse_int(trim(text.substr(space + 1)), v)) {
        throw DatasetError(Kind::Malformed, where + "expected 'u v', got '" + std::string(text) +
                                                "'");
      }
      if (u >= g.num_nodes || v >= g.num_nodes) {
        throw DatasetError(Kind::EdgeOutOfRange, where + "edge (" + std::to_string(u) + ", " +
                                                     std::to_string(v) + ") has an endpoint >= " +
                                                     std::to_string(g.num_nodes));
      }
      if (!(u < v)) {
        throw DatasetError(Kind::EdgeOrder, where + "edge (" + std::to_string(u) + ", " +
                                                std::to_string(v) + ") must satisfy u < v");
      }
      if (!seen.emplace(u, v).second) {
        throw DatasetError(Kind::DuplicateEdge, where + "duplicate edge (" + std::to_string(u) +
                                                    ", " + std::to_string(v) + ")");
      }
      g.edges.push_back({u, v});
    }
    if (declared_edges && *declared_edges != g.edges.size()) {
      throw DatasetError(Kind::SizeMismatch,
                         "dataset: meta.json declares " + std::to_string(*declared_edges) +
                             " edges, edges.txt has " + std::to_string(g.edges.size()));
    }
  }

  try {
    bundle.splits = merge_train_val(bundle.splits);
    bundle.validate();
  } catch (const DatasetError&) {
    throw;
  } catch (const Error& e) {
    throw DatasetError(Kind::BadSplit, std::string("dataset: ") + e.what());
  }
  return bundle;
}

void save_dataset(const DatasetBundle& bundle, const std::string& directory) {
  bundle.validate();
  const fs::path dir(directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("dataset: cannot create " + directory + ": " + ec.message());

  const Graph& g = bundle.graph;
  nlohmann::ordered_json meta;
  meta["name"] = bundle.name;
  meta["format_version"] = bundle.format_version;
  meta["num_nodes"] = g.num_nodes;
  meta["num_features"] = g.num_features();
  meta["num_classes"] = g.num_classes;
  meta["num_edges"] = g.edges.size();
  meta["splits"] = {{"train", bundle.splits.train},
                    {"val", bundle.splits.val},
                    {"test", bundle.splits.test}};

  auto open = [&](const char* name, std::ios::openmode mode) {
    std::ofstream out(dir / name, mode | std::ios::trunc);
    if (!out) throw IoError("dataset: cannot write " + (dir / name).string());
    return out;
  };
  auto finish = [&](std::ofstream& out, const char* name) {
    out.close();
    if (!out) throw IoError("dataset: write to " + (dir / name).string() + " failed");
  };

  auto meta_out = open("meta.json", std::ios::binary);
  meta_out << meta.dump(2) << '\n';
  finish(meta_out, "meta.json");

  auto features_out = open("features.bin", std::ios::binary);
  detail::write_f64_le(features_out, g.features.data());
  finish(features_out, "features.bin");

  auto labels_out = open("labels.txt", std::ios::binary);
  for (int label : g.labels) labels_out << label << '\n';
  finish(labels_out, "labels.txt");

  auto edges_out = open("edges.txt", std::ios::binary);
  for (const auto& e : g.edges) edges_out << std::min(e.u, e.v) << ' ' << std::max(e.u, e.v) << '\n';
  finish(edges_out, "edges.txt");
}

// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (num_nodes < 1) throw ValidationError("synthetic: num_nodes must be >= 1");
  if (num_features < 1) throw ValidationError("synthetic: num_features must be >= 1");
  if (num_classes < 1) throw ValidationError("synthetic: num_classes must be >= 1");
  if (num_classes > num_nodes) {
    throw ValidationError("synthetic: num_classes exceeds num_nodes");
  }
  if (!(p_inter >= 0.0 && p_inter <= p_intra && p_intra <= 1.0)) {
    throw ValidationError("synthetic: need 0 <= p_inter <= p_intra <= 1");
  }
  if (!std::isfinite(label_signal)) throw ValidationError("synthetic: label_signal not finite");
}

DatasetBundle generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  Rng label_rng = root.derive(1);
  Rng edge_rng = root.derive(2);
  Rng feature_rng = root.derive(3);
  Rng split_rng = root.derive(4);

  DatasetBundle bundle;
  bundle.name = "synthetic";
  Graph& g = bundle.graph;
  g.num_nodes = spec.num_nodes;
  g.num_classes = spec.num_classes;
  g.labels.resize(spec.num_nodes);
  for (std::size_t i = 0; i < spec.num_nodes; ++i) {
    g.labels[i] = static_cast<int>(i % spec.num_classes);
  }
  label_rng.shuffle(g.labels);

  for (NodeIndex u = 0; u < spec.num_nodes; ++u) {
    for (NodeIndex v = u + 1; v < spec.num_nodes; ++v) {
      const double p = g.labels[u] == g.labels[v] ? spec.p_intra : spec.p_inter;
      if (edge_rng.uniform() < p) g.edges.push_back({u, v});
    }
  }

  g.features = DenseMatrix(spec.num_nodes, spec.num_features);
  for (std::size_t i = 0; i < spec.num_nodes; ++i) {
    const auto c = static_cast<std::size_t>(g.labels[i]);
    for (std::size_t f = 0; f < spec.num_features; ++f) {
      g.features(i, f) = feature_rng.normal() + (f % spec.num_classes == c ? spec.label_signal : 0.0);
    }
  }

  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    IndexSet members;
    for (NodeIndex v = 0; v < spec.num_nodes; ++v) {
      if (static_cast<std::size_t>(g.labels[v]) == c) members.push_back(v);
    }
    split_rng.shuffle(members);
    const auto n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::round(0.4 * n));
    const auto n_val = std::min(members.size() - n_train,
                                static_cast<std::size_t>(std::round(0.1 * n)));
    for (std::size_t i = 0; i < members.size(); ++i) {
      auto& dst = i < n_train           ? bundle.splits.train
                  : i < n_train + n_val ? bundle.splits.val
                                        : bundle.splits.test;
      dst.push_back(members[i]);
    }
  }
  std::sort(bundle.splits.train.begin(), bundle.splits.train.end());
  std::sort(bundle.splits.val.begin(), bundle.splits.val.end());
  std::sort(bundle.splits.test.begin(), bundle.splits.test.end());
  bundle.splits = merge_train_val(bundle.splits);
  bundle.validate();
  return bundle;
}

DatasetBundle generate_synthetic(std::size_t num_nodes, std::size_t num_features,
                                 std::size_t num_classes, double p_intra, double p_inter,
                                 double label_signal, std::uint64_t seed) {
  return generate_synthetic(
      SyntheticSpec{num_nodes, num_features, num_classes, p_intra, p_inter, label_signal, seed});
}

}  // namespace gunlearn

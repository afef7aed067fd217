#pragma once

// Portable dataset directory:
//
//   meta.json     name, format_version, counts, train/val/test index arrays
//   features.bin  num_nodes * num_features little-endian float64, row-major
//   labels.txt    one integer class per line
//   edges.txt     "u v" per line, u < v, each undirected edge once

#include <cstdint>
#include <string>

#include "gunlearn/error.hpp"
#include "gunlearn/graph.hpp"

namespace gunlearn {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetBundle {
  Graph graph;
  /// train/val/test as stored; labeled = train U val, retained = labeled.
  SplitIndices splits;
  std::string name;
  int format_version = kDatasetFormatVersion;

  void validate() const;
  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

/// Loader failure naming the offending file and record.
class DatasetError : public ValidationError {
 public:
  enum class Kind {
    MissingFile,
    Malformed,
    SizeMismatch,
    LabelOutOfRange,
    EdgeOutOfRange,
    EdgeOrder,
    DuplicateEdge,
    BadSplit,
  };

  DatasetError(Kind kind, const std::string& what) : ValidationError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

DatasetBundle load_dataset(const std::string& directory);

/// Creates the directory if needed. Output bytes depend only on the bundle.
void save_dataset(const DatasetBundle& bundle, const std::string& directory);

struct SyntheticSpec {
  std::size_t num_nodes = 200;
  std::size_t num_features = 16;
  std::size_t num_classes = 4;
  double p_intra = 0.05;
  double p_inter = 0.005;
  double label_signal = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stochastic block model with balanced classes. Features are unit Gaussian
/// noise plus `label_signal` on every feature f with f % C == class.
/// Splits are stratified 40% train / 10% val / 50% test.
DatasetBundle generate_synthetic(const SyntheticSpec& spec);
DatasetBundle generate_synthetic(std::size_t num_nodes, std::size_t num_features,
                                 std::size_t num_classes, double p_intra, double p_inter,
                                 double label_signal, std::uint64_t seed);

}  // namespace gunlearn

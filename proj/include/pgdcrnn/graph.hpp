#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pgdcrnn/sparse.hpp"

namespace pgdcrnn {

class DistanceProvider;

struct SensorMeta {
  std::string sensor_id;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string district;
  std::string sensor_type;
  std::string lane_type;

  friend bool operator==(const SensorMeta &, const SensorMeta &) = default;
};

/// Bijection between sensor ids and dense node indices.
class NodeIndex {
 public:
  NodeIndex() = default;
  explicit NodeIndex(std::vector<std::string> ids);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::string &id(std::size_t index) const { return ids_.at(index); }
  /// Throws a data error for unknown ids.
  std::size_t index(const std::string &id) const;
  bool contains(const std::string &id) const { return lookup_.count(id) != 0; }
  const std::vector<std::string> &ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

enum class ThresholdOn {
  kDistanceSq,  // keep the edge when dist^2 <= threshold
  kWeight,      // keep the edge when exp(-dist^2 / sigma^2) >= threshold
};

enum class SigmaMode { kAuto, kFixed };

struct KernelConfig {
  ThresholdOn threshold_on = ThresholdOn::kDistanceSq;
  /// Squared miles for kDistanceSq, a weight in (0, 1] for kWeight.
  double threshold = 25.0;
  SigmaMode sigma_mode = SigmaMode::kAuto;
  /// Used only with SigmaMode::kFixed.
  double sigma = 1.0;
  bool self_loops = false;
};

/// Weighted directed sensor graph. Entry (i, j) of the adjacency is the
/// weight of edge i -> j. Immutable once built.
struct SensorGraph {
  std::vector<SensorMeta> nodes;
  NodeIndex index;
  SparseMatrix adjacency;
  /// Driving distance behind each stored weight, aligned with the CSR value
  /// order of `adjacency`. Empty when the graph was not built from distances.
  std::vector<double> edge_miles;
  KernelConfig kernel;
  /// The kernel width actually used.
  double sigma = 0.0;

  std::size_t n_nodes() const noexcept { return nodes.size(); }
  std::size_t n_edges() const noexcept { return adjacency.nnz(); }
};

using NodePair = std::pair<std::size_t, std::size_t>;

/// Sorts sensors by id so node indices do not depend on input row order.
std::vector<SensorMeta> canonical_order(std::vector<SensorMeta> meta);

void validate_meta(const std::vector<SensorMeta> &meta);

/// For every node, the min(k, N-1) other nodes nearest by great-circle
/// distance, ties broken by ascending node index.
std::set<NodePair> knn_candidates(const std::vector<SensorMeta> &meta, std::size_t k);

/// Thresholded Gaussian kernel over the candidate pairs. Under
/// SigmaMode::kAuto, sigma is the population standard deviation of all
/// queried distances.
SensorGraph build_adjacency(const std::vector<SensorMeta> &meta,
                            const std::set<NodePair> &pairs,
                            const DistanceProvider &provider,
                            const KernelConfig &config);

/// exp(-d^2 / sigma^2)
double gaussian_kernel(double miles, double sigma);

/// Graph over `meta` with explicit weights; used for tests and for graphs
/// derived from other graphs.
SensorGraph graph_from_weights(std::vector<SensorMeta> meta, SparseMatrix adjacency);

/// Metadata with placeholder ids "s0", "s1", ... and zero coordinates.
std::vector<SensorMeta> placeholder_meta(std::size_t n);

std::vector<SensorMeta> read_sensor_csv(const std::string &path);
void write_sensor_csv(const std::string &path, const std::vector<SensorMeta> &meta);

void save_graph(const std::string &path, const SensorGraph &graph);
SensorGraph load_graph(const std::string &path);

const char *to_string(ThresholdOn t);
ThresholdOn threshold_on_from_string(const std::string &s);

}  // namespace pgdcrnn

#pragma once

// Multilevel k-way partitioning: coarsen by heavy-edge matching, split the
// coarsest graph by recursive greedy bisection, then project back level by
// level with FM-style boundary refinement. Also overlap (halo) selection and
// per-part subgraph extraction.

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgdcrnn/graph.hpp"

namespace pgdcrnn {

class DistanceProvider;

struct PartitionAssignment {
  std::vector<std::size_t> part_of;
  std::size_t k = 0;

  std::vector<std::size_t> part_sizes() const;
  std::vector<std::size_t> members(std::size_t part) const;

  friend bool operator==(const PartitionAssignment &, const PartitionAssignment &) = default;
};

/// One coarsening step. `match_map` maps each node of the next-finer graph
/// to its node in `graph`; `vertex_weight` counts the original nodes merged
/// into each coarse node.
struct CoarseLevel {
  SparseMatrix graph;
  std::vector<std::size_t> vertex_weight;
  std::vector<std::size_t> match_map;
  std::size_t level = 0;
};

/// Per-pass record handed to refinement observers.
struct RefinePass {
  std::size_t level;  // 0 = finest (input) graph
  std::size_t pass;
  double cut_before;
  double cut_after;
  std::size_t moves_kept;
};
using RefineObserver = std::function<void(const RefinePass &)>;

/// Weight'(i,j) = Weight'(j,i) = w(i,j) + w(j,i).
SensorGraph symmetrize(const SensorGraph &graph);
SparseMatrix symmetrize(const SparseMatrix &adjacency);

/// Heavy-edge matching visiting nodes in `visit_order`. Returns the fine ->
/// coarse map; coarse ids are assigned in visit order.
std::vector<std::size_t> heavy_edge_matching(const SparseMatrix &sym,
                                             const std::vector<std::size_t> &visit_order,
                                             std::size_t *n_coarse);

/// Collapses `sym` through `match_map`; coarse weights are sums of the
/// constituent fine weights, internal edges vanish.
SparseMatrix contract(const SparseMatrix &sym, const std::vector<std::size_t> &match_map,
                      std::size_t n_coarse);

/// Coarse levels from the finest to the coarsest. Stops once the node count
/// is <= min_size or a matching would shrink the graph by less than 10%.
std::vector<CoarseLevel> coarsen(const SparseMatrix &sym, std::size_t min_size,
                                 std::uint64_t seed);

/// Recursive greedy graph-growing bisection on a (possibly coarse) graph.
PartitionAssignment initial_partition(const SparseMatrix &sym,
                                      const std::vector<std::size_t> &vertex_weight,
                                      std::size_t k, double imbalance, std::uint64_t seed);

/// Largest allowed part weight for `total` unit vertices in k parts.
std::size_t max_part_weight(std::size_t total, std::size_t k, double imbalance);

/// FM refinement on one level. Every pass keeps the best prefix of moves, so
/// the cut never increases across a pass. Returns the number of passes.
std::size_t refine_level(const SparseMatrix &sym, const std::vector<std::size_t> &vertex_weight,
                         PartitionAssignment &assignment, double imbalance,
                         std::size_t level, const RefineObserver &observer = {});

/// Projects a coarsest-level assignment to the finest graph, refining at
/// every level on the way (including the coarsest and the finest).
PartitionAssignment refine_uncoarsen(const SparseMatrix &finest_sym,
                                     const std::vector<CoarseLevel> &levels,
                                     PartitionAssignment coarsest, double imbalance,
                                     const RefineObserver &observer = {});

struct PartitionOptions {
  std::size_t k = 1;
  double imbalance = 0.05;
  std::uint64_t seed = 1;
  /// Coarsening target; 0 picks max(20, 10k).
  std::size_t coarsen_to = 0;
  RefineObserver observer;
};

PartitionAssignment partition_graph(const SensorGraph &graph, const PartitionOptions &options);

/// Total symmetrized weight between different parts, each undirected edge once.
double edge_cut(const SensorGraph &graph, const PartitionAssignment &assignment);
double edge_cut(const SparseMatrix &adjacency, const std::vector<std::size_t> &part_of);

struct OverlapOptions {
  std::size_t horizon_k = 30;
  double d_prime = 1.0;
};

/// Halo nodes for one part: each member's horizon_k nearest nodes that lie
/// outside the part, ordered by distance to the part, then greedily thinned
/// so that no two kept halos are within d_prime of each other (either
/// direction).
std::vector<std::size_t> add_overlap_nodes(const SensorGraph &graph,
                                           const PartitionAssignment &assignment,
                                           std::size_t part, const OverlapOptions &options,
                                           const DistanceProvider &provider);

/// Ranked halo candidates before thinning, with their distance to the part.
std::vector<std::pair<std::size_t, double>> overlap_candidates(
    const SensorGraph &graph, const PartitionAssignment &assignment, std::size_t part,
    std::size_t horizon_k, const DistanceProvider &provider);

/// Greedy thinning of ranked candidates.
std::vector<std::size_t> downsample_halos(const std::vector<std::size_t> &ranked,
                                          double d_prime, const DistanceProvider &provider);

/// One part's local graph. Local nodes are the part's members plus its
/// halos, in ascending global index order.
struct SubgraphBundle {
  std::size_t part = 0;
  SensorGraph graph;
  std::vector<std::size_t> local_to_global;
  std::unordered_map<std::size_t, std::size_t> global_to_local;
  std::vector<bool> halo;

  std::size_t n_local() const noexcept { return local_to_global.size(); }
  std::size_t n_owned() const;
};

/// Restricts `graph` to part + halos for every part. `halos` may be empty
/// (no overlap) or hold one list per part.
std::vector<SubgraphBundle> extract_subgraphs(const SensorGraph &graph,
                                              const PartitionAssignment &assignment,
                                              const std::vector<std::vector<std::size_t>> &halos);

/// Subgraph on an explicit ordered node set, keeping edges among them.
SensorGraph induced_subgraph(const SensorGraph &graph, const std::vector<std::size_t> &nodes);

void write_assignment_csv(const std::string &path, const SensorGraph &graph,
                          const PartitionAssignment &assignment);
PartitionAssignment read_assignment_csv(const std::string &path, const SensorGraph &graph);

/// Layout: <dir>/part_<i>/{graph.json,nodes.csv,halos.csv}.
void save_bundles(const std::string &dir, const std::vector<SubgraphBundle> &bundles);
std::vector<SubgraphBundle> load_bundles(const std::string &dir);
SubgraphBundle load_bundle(const std::string &part_dir);

}  // namespace pgdcrnn

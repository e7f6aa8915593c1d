#include "pgdcrnn/partition.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "pgdcrnn/csv.hpp"
#include "pgdcrnn/distance.hpp"
#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

std::vector<std::size_t> PartitionAssignment::part_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t p : part_of) ++sizes.at(p);
  return sizes;
}

std::vector<std::size_t> PartitionAssignment::members(std::size_t part) const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < part_of.size(); ++v) {
    if (part_of[v] == part) out.push_back(v);
  }
  return out;
}

std::size_t SubgraphBundle::n_owned() const {
  return static_cast<std::size_t>(std::count(halo.begin(), halo.end(), false));
}

SparseMatrix symmetrize(const SparseMatrix &adjacency) {
  std::vector<Triplet> t = adjacency.triplets();
  const std::size_t n = t.size();
  for (std::size_t e = 0; e < n; ++e) t.push_back({t[e].col, t[e].row, t[e].value});
  return SparseMatrix::from_triplets(adjacency.rows(), adjacency.cols(), std::move(t));
}

SensorGraph symmetrize(const SensorGraph &graph) {
  SensorGraph g = graph_from_weights(graph.nodes, symmetrize(graph.adjacency));
  g.kernel = graph.kernel;
  g.sigma = graph.sigma;
  return g;
}

namespace {

// Cut of a symmetric matrix: each undirected edge appears twice.
double sym_cut(const SparseMatrix &sym, const std::vector<std::size_t> &part_of) {
  double cut = 0.0;
  const auto &ptr = sym.row_ptr();
  const auto &idx = sym.col_idx();
  const auto &val = sym.values();
  for (std::size_t i = 0; i < sym.rows(); ++i) {
    for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) {
      if (part_of[i] != part_of[idx[p]]) cut += val[p];
    }
  }
  return cut / 2.0;
}

}  // namespace

double edge_cut(const SparseMatrix &adjacency, const std::vector<std::size_t> &part_of) {
  if (part_of.size() != adjacency.rows()) throw_config("edge_cut: assignment size mismatch");
  double cut = 0.0;
  const auto &ptr = adjacency.row_ptr();
  const auto &idx = adjacency.col_idx();
  const auto &val = adjacency.values();
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) {
      if (part_of[i] != part_of[idx[p]]) cut += val[p];
    }
  }
  return cut;
}

double edge_cut(const SensorGraph &graph, const PartitionAssignment &assignment) {
  return edge_cut(graph.adjacency, assignment.part_of);
}

std::vector<std::size_t> heavy_edge_matching(const SparseMatrix &sym,
                                             const std::vector<std::size_t> &visit_order,
                                             std::size_t *n_coarse) {
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  const std::size_t n = sym.rows();
  std::vector<std::size_t> map(n, kUnset);
  const auto &ptr = sym.row_ptr();
  const auto &idx = sym.col_idx();
  const auto &val = sym.values();
  std::size_t next = 0;
  for (std::size_t v : visit_order) {
    if (map[v] != kUnset) continue;
    std::size_t best = kUnset;
    double best_w = 0.0;
    for (std::size_t p = ptr[v]; p < ptr[v + 1]; ++p) {
      const std::size_t u = idx[p];
      if (u == v || map[u] != kUnset) continue;
      if (best == kUnset || val[p] > best_w || (val[p] == best_w && u < best)) {
        best = u;
        best_w = val[p];
      }
    }
    map[v] = next;
    if (best != kUnset) map[best] = next;
    ++next;
  }
  if (n_coarse) *n_coarse = next;
  return map;
}

SparseMatrix contract(const SparseMatrix &sym, const std::vector<std::size_t> &match_map,
                      std::size_t n_coarse) {
  std::vector<Triplet> t;
  for (const auto &e : sym.triplets()) {
    const std::size_t a = match_map[e.row], b = match_map[e.col];
    if (a != b) t.push_back({a, b, e.value});
  }
  return SparseMatrix::from_triplets(n_coarse, n_coarse, std::move(t));
}

std::vector<CoarseLevel> coarsen(const SparseMatrix &sym, std::size_t min_size,
                                 std::uint64_t seed) {
  std::vector<CoarseLevel> levels;
  std::mt19937_64 rng(seed);
  SparseMatrix current = sym;
  std::vector<std::size_t> weight(sym.rows(), 1);
  while (current.rows() > min_size) {
    const std::size_t n = current.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_coarse = 0;
    auto map = heavy_edge_matching(current, order, &n_coarse);
    if (static_cast<double>(n - n_coarse) < 0.1 * static_cast<double>(n)) break;
    CoarseLevel lvl;
    lvl.graph = contract(current, map, n_coarse);
    lvl.vertex_weight.assign(n_coarse, 0);
    for (std::size_t v = 0; v < n; ++v) lvl.vertex_weight[map[v]] += weight[v];
    lvl.match_map = std::move(map);
    lvl.level = levels.size() + 1;
    current = lvl.graph;
    weight = lvl.vertex_weight;
    levels.push_back(std::move(lvl));
  }
  return levels;
}

std::size_t max_part_weight(std::size_t total, std::size_t k, double imbalance) {
  const std::size_t even = (total + k - 1) / k;
  const double bound = static_cast<double>(even) * (1.0 + imbalance);
  return std::max(even, static_cast<std::size_t>(std::floor(bound + 1e-9)));
}

namespace {

struct Bisection {
  std::vector<std::size_t> left, right;
  double cut = 0.0;
};

// Greedy graph growing within `subset` from `start`: repeatedly absorbs the
// remaining node with the largest (weight into region - weight to the rest).
Bisection grow_region(const SparseMatrix &sym, const std::vector<std::size_t> &vw,
                      const std::vector<std::size_t> &subset, std::size_t start,
                      std::size_t k_left, std::size_t k_right, double target_left) {
  const std::size_t n = sym.rows();
  std::vector<char> in_subset(n, 0), in_region(n, 0);
  for (std::size_t v : subset) in_subset[v] = 1;
  const auto &ptr = sym.row_ptr();
  const auto &idx = sym.col_idx();
  const auto &val = sym.values();
  std::vector<double> to_region(n, 0.0), to_subset(n, 0.0);
  for (std::size_t v : subset) {
    for (std::size_t p = ptr[v]; p < ptr[v + 1]; ++p) {
      if (in_subset[idx[p]] && idx[p] != v) to_subset[v] += val[p];
    }
  }
  double weight = 0.0;
  std::size_t count = 0;
  std::size_t remaining = subset.size();
  auto absorb = [&](std::size_t v) {
    in_region[v] = 1;
    weight += static_cast<double>(vw[v]);
    ++count;
    --remaining;
    for (std::size_t p = ptr[v]; p < ptr[v + 1]; ++p) {
      if (in_subset[idx[p]]) to_region[idx[p]] += val[p];
    }
  };
  absorb(start);
  while (remaining > k_right) {
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t v : subset) {
      if (in_region[v]) continue;
      const double score = 2.0 * to_region[v] - to_subset[v];
      if (best == n || score > best_score || (score == best_score && v < best)) {
        best = v;
        best_score = score;
      }
    }
    if (count >= k_left) {
      const double now = std::abs(weight - target_left);
      const double next = std::abs(weight + static_cast<double>(vw[best]) - target_left);
      if (next > now || weight >= target_left) break;
    }
    absorb(best);
  }
  Bisection b;
  for (std::size_t v : subset) (in_region[v] ? b.left : b.right).push_back(v);
  for (std::size_t v : b.left) {
    for (std::size_t p = ptr[v]; p < ptr[v + 1]; ++p) {
      if (in_subset[idx[p]] && !in_region[idx[p]]) b.cut += val[p];
    }
  }
  return b;
}

void recursive_bisect(const SparseMatrix &sym, const std::vector<std::size_t> &vw,
                      const std::vector<std::size_t> &subset, std::size_t k, std::size_t first,
                      std::mt19937_64 &rng, std::vector<std::size_t> &part_of) {
  if (k == 1) {
    for (std::size_t v : subset) part_of[v] = first;
    return;
  }
  const std::size_t k_left = k / 2, k_right = k - k_left;
  double total = 0.0;
  for (std::size_t v : subset) total += static_cast<double>(vw[v]);
  const double target = total * static_cast<double>(k_left) / static_cast<double>(k);
  constexpr int kTrials = 8;
  Bisection best;
  bool have = false;
  std::uniform_int_distribution<std::size_t> pick(0, subset.size() - 1);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t start = subset[pick(rng)];
    Bisection b = grow_region(sym, vw, subset, start, k_left, k_right, target);
    double wl = 0.0;
    for (std::size_t v : b.left) wl += static_cast<double>(vw[v]);
    const double dev = std::abs(wl - target);
    double best_wl = 0.0;
    for (std::size_t v : best.left) best_wl += static_cast<double>(vw[v]);
    const double best_dev = std::abs(best_wl - target);
    if (!have || dev < best_dev - 1e-9 || (std::abs(dev - best_dev) <= 1e-9 && b.cut < best.cut)) {
      best = std::move(b);
      have = true;
    }
  }
  recursive_bisect(sym, vw, best.left, k_left, first, rng, part_of);
  recursive_bisect(sym, vw, best.right, k_right, first + k_left, rng, part_of);
}

}  // namespace

PartitionAssignment initial_partition(const SparseMatrix &sym,
                                      const std::vector<std::size_t> &vertex_weight,
                                      std::size_t k, double imbalance, std::uint64_t seed) {
  (void)imbalance;
  const std::size_t n = sym.rows();
  if (k < 1) throw_config("k must be at least 1");
  if (k > n) throw_config("k exceeds nodes");
  PartitionAssignment a;
  a.k = k;
  a.part_of.assign(n, 0);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(seed);
  recursive_bisect(sym, vertex_weight, all, k, 0, rng, a.part_of);
  return a;
}

namespace {

class LevelRefiner {
 public:
  LevelRefiner(const SparseMatrix &sym, const std::vector<std::size_t> &vw,
               PartitionAssignment &a, double imbalance)
      : sym_(sym), vw_(vw), a_(a), conn_(a.k, 0.0) {
    std::size_t total = 0;
    for (std::size_t w : vw) total += w;
    max_w_ = max_part_weight(total, a.k, imbalance);
    slack_ = *std::max_element(vw.begin(), vw.end());
    weight_.assign(a.k, 0);
    count_.assign(a.k, 0);
    for (std::size_t v = 0; v < a.part_of.size(); ++v) {
      weight_[a.part_of[v]] += vw[v];
      ++count_[a.part_of[v]];
    }
    eps_ = 1e-12;
    for (double w : sym.values()) eps_ += 1e-12 * w;
  }

  bool balanced() const {
    return std::all_of(weight_.begin(), weight_.end(), [&](std::size_t w) { return w <= max_w_; });
  }

  // Moves nodes out of overweight parts, least cut damage first.
  void rebalance() {
    for (std::size_t guard = 0; guard < a_.part_of.size() * 2 && !balanced(); ++guard) {
      std::size_t best_v = 0, best_b = 0;
      double best_gain = 0.0;
      bool found = false;
      for (std::size_t v = 0; v < a_.part_of.size(); ++v) {
        const std::size_t from = a_.part_of[v];
        if (weight_[from] <= max_w_ || count_[from] <= 1) continue;
        fill_conn(v);
        for (std::size_t b = 0; b < a_.k; ++b) {
          if (b == from || weight_[b] + vw_[v] > max_w_) continue;
          const double gain = conn_[b] - conn_[from];
          if (!found || gain > best_gain) {
            best_v = v, best_b = b, best_gain = gain, found = true;
          }
        }
        clear_conn(v);
      }
      if (!found) break;
      move(best_v, best_b);
    }
  }

  // One FM pass; returns the number of moves kept.
  std::size_t pass() {
    const std::size_t n = a_.part_of.size();
    std::vector<char> locked(n, 0);
    std::vector<std::pair<std::size_t, std::size_t>> moves;  // (node, from)
    double running = 0.0, best = 0.0;
    std::size_t best_len = 0;
    const bool start_balanced = balanced();
    constexpr std::size_t kPatience = 50;
    while (moves.size() - best_len < kPatience) {
      std::size_t best_v = n, best_b = 0;
      double best_gain = 0.0;
      for (std::size_t v = 0; v < n; ++v) {
        if (locked[v]) continue;
        const std::size_t from = a_.part_of[v];
        if (count_[from] <= 1) continue;
        fill_conn(v);
        for (std::size_t b : touched_) {
          if (b == from || conn_[b] <= 0.0) continue;
          if (weight_[b] + vw_[v] > max_w_ + slack_) continue;
          const double gain = conn_[b] - conn_[from];
          if (best_v == n || gain > best_gain) best_v = v, best_b = b, best_gain = gain;
        }
        clear_conn(v);
      }
      if (best_v == n) break;
      moves.emplace_back(best_v, a_.part_of[best_v]);
      move(best_v, best_b);
      locked[best_v] = 1;
      running -= best_gain;
      if (running < best - eps_ && (balanced() || !start_balanced)) {
        best = running;
        best_len = moves.size();
      }
    }
    while (moves.size() > best_len) {
      move(moves.back().first, moves.back().second);
      moves.pop_back();
    }
    return best_len;
  }

  void restore(const std::vector<std::size_t> &part_of) {
    for (std::size_t v = 0; v < part_of.size(); ++v) {
      if (a_.part_of[v] != part_of[v]) move(v, part_of[v]);
    }
  }

 private:
  void fill_conn(std::size_t v) {
    const auto &ptr = sym_.row_ptr();
    const auto &idx = sym_.col_idx();
    const auto &val = sym_.values();
    touched_.clear();
    for (std::size_t p = ptr[v]; p < ptr[v + 1]; ++p) {
      if (idx[p] == v) continue;
      const std::size_t b = a_.part_of[idx[p]];
      if (conn_[b] == 0.0) touched_.push_back(b);
      conn_[b] += val[p];
    }
    std::sort(touched_.begin(), touched_.end());
    touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
  }

  void clear_conn(std::size_t) {
    for (std::size_t b : touched_) conn_[b] = 0.0;
  }

  void move(std::size_t v, std::size_t to) {
    const std::size_t from = a_.part_of[v];
    weight_[from] -= vw_[v];
    --count_[from];
    weight_[to] += vw_[v];
    ++count_[to];
    a_.part_of[v] = to;
  }

  const SparseMatrix &sym_;
  const std::vector<std::size_t> &vw_;
  PartitionAssignment &a_;
  std::vector<double> conn_;
  std::vector<std::size_t> touched_;
  std::vector<std::size_t> weight_, count_;
  std::size_t max_w_ = 0, slack_ = 0;
  double eps_ = 0.0;
};

}  // namespace

std::size_t refine_level(const SparseMatrix &sym, const std::vector<std::size_t> &vertex_weight,
                         PartitionAssignment &assignment, double imbalance, std::size_t level,
                         const RefineObserver &observer) {
  if (assignment.k <= 1 || sym.rows() == 0) return 0;
  LevelRefiner refiner(sym, vertex_weight, assignment, imbalance);
  refiner.rebalance();
  constexpr std::size_t kMaxPasses = 16;
  std::size_t passes = 0;
  for (; passes < kMaxPasses;) {
    const std::vector<std::size_t> before = assignment.part_of;
    const double cut_before = sym_cut(sym, before);
    std::size_t kept = refiner.pass();
    double cut_after = sym_cut(sym, assignment.part_of);
    if (cut_after > cut_before) {
      // Round-off in the running gain picked a prefix that is not an
      // improvement; undo the whole pass.
      refiner.restore(before);
      cut_after = cut_before;
      kept = 0;
    }
    ++passes;
    if (observer) observer({level, passes - 1, cut_before, cut_after, kept});
    if (kept == 0 || !(cut_after < cut_before)) break;
  }
  return passes;
}

PartitionAssignment refine_uncoarsen(const SparseMatrix &finest_sym,
                                     const std::vector<CoarseLevel> &levels,
                                     PartitionAssignment assignment, double imbalance,
                                     const RefineObserver &observer) {
  for (std::size_t l = levels.size(); l-- > 0;) {
    const CoarseLevel &lvl = levels[l];
    if (assignment.part_of.size() != lvl.graph.rows()) {
      throw_config("refine_uncoarsen: assignment does not match the coarsest level");
    }
    refine_level(lvl.graph, lvl.vertex_weight, assignment, imbalance, l + 1, observer);
    std::vector<std::size_t> finer(lvl.match_map.size());
    for (std::size_t v = 0; v < finer.size(); ++v) finer[v] = assignment.part_of[lvl.match_map[v]];
    assignment.part_of = std::move(finer);
  }
  if (assignment.part_of.size() != finest_sym.rows()) {
    throw_config("refine_uncoarsen: assignment does not match the graph");
  }
  const std::vector<std::size_t> unit(finest_sym.rows(), 1);
  refine_level(finest_sym, unit, assignment, imbalance, 0, observer);
  return assignment;
}

PartitionAssignment partition_graph(const SensorGraph &graph, const PartitionOptions &options) {
  const std::size_t n = graph.n_nodes();
  if (options.k < 1) throw_config("k must be at least 1");
  if (options.k > n) throw_config("k exceeds nodes");
  if (options.k == 1) return PartitionAssignment{std::vector<std::size_t>(n, 0), 1};
  const SparseMatrix sym = symmetrize(graph.adjacency);
  const std::size_t target =
      options.coarsen_to ? options.coarsen_to : std::max<std::size_t>(20, 10 * options.k);
  const auto levels = coarsen(sym, target, options.seed);
  const SparseMatrix &coarsest = levels.empty() ? sym : levels.back().graph;
  const std::vector<std::size_t> vw =
      levels.empty() ? std::vector<std::size_t>(n, 1) : levels.back().vertex_weight;
  PartitionAssignment init =
      initial_partition(coarsest, vw, options.k, options.imbalance, options.seed + 1);
  return refine_uncoarsen(sym, levels, std::move(init), options.imbalance, options.observer);
}

std::vector<std::pair<std::size_t, double>> overlap_candidates(
    const SensorGraph &graph, const PartitionAssignment &assignment, std::size_t part,
    std::size_t horizon_k, const DistanceProvider &provider) {
  const std::size_t n = graph.n_nodes();
  if (horizon_k < 1) throw_config("horizon_k must be at least 1");
  if (assignment.part_of.size() != n) throw_config("assignment size mismatch");
  const auto members = assignment.members(part);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> to_part(n, kInf);
  std::vector<char> nominated(n, 0);
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t v : members) {
    ranked.clear();
    for (std::size_t u = 0; u < n; ++u) {
      if (u == v) continue;
      const double d = provider.distance(v, u);
      ranked.emplace_back(d, u);
      if (assignment.part_of[u] != part) to_part[u] = std::min(to_part[u], d);
    }
    const std::size_t take = std::min(horizon_k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                      ranked.end());
    for (std::size_t r = 0; r < take; ++r) {
      if (assignment.part_of[ranked[r].second] != part) nominated[ranked[r].second] = 1;
    }
  }
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t u = 0; u < n; ++u) {
    if (nominated[u]) out.emplace_back(u, to_part[u]);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  return out;
}

std::vector<std::size_t> downsample_halos(const std::vector<std::size_t> &ranked,
                                          double d_prime, const DistanceProvider &provider) {
  if (!(d_prime > 0.0)) throw_config("d_prime must be positive");
  std::vector<std::size_t> kept;
  for (std::size_t c : ranked) {
    bool far = true;
    for (std::size_t h : kept) {
      if (std::min(provider.distance(c, h), provider.distance(h, c)) <= d_prime) {
        far = false;
        break;
      }
    }
    if (far) kept.push_back(c);
  }
  return kept;
}

std::vector<std::size_t> add_overlap_nodes(const SensorGraph &graph,
                                           const PartitionAssignment &assignment,
                                           std::size_t part, const OverlapOptions &options,
                                           const DistanceProvider &provider) {
  if (!(options.d_prime > 0.0)) throw_config("d_prime must be positive");
  const auto candidates = overlap_candidates(graph, assignment, part, options.horizon_k, provider);
  std::vector<std::size_t> ranked;
  for (const auto &c : candidates) ranked.push_back(c.first);
  return downsample_halos(ranked, options.d_prime, provider);
}

SensorGraph induced_subgraph(const SensorGraph &graph, const std::vector<std::size_t> &nodes) {
  std::unordered_map<std::size_t, std::size_t> local;
  std::vector<SensorMeta> meta;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    local.emplace(nodes[i], i);
    meta.push_back(graph.nodes.at(nodes[i]));
  }
  struct Entry {
    std::size_t r, c;
    double w, miles;
  };
  std::vector<Entry> entries;
  const auto &ptr = graph.adjacency.row_ptr();
  const auto &idx = graph.adjacency.col_idx();
  const auto &val = graph.adjacency.values();
  const bool has_miles = graph.edge_miles.size() == graph.adjacency.nnz();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::size_t g = nodes[i];
    for (std::size_t p = ptr[g]; p < ptr[g + 1]; ++p) {
      auto it = local.find(idx[p]);
      if (it == local.end()) continue;
      entries.push_back({i, it->second, val[p], has_miles ? graph.edge_miles[p] : 0.0});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  std::vector<Triplet> t;
  std::vector<double> miles;
  for (const auto &e : entries) {
    t.push_back({e.r, e.c, e.w});
    miles.push_back(e.miles);
  }
  SensorGraph sub = graph_from_weights(std::move(meta),
                                       SparseMatrix::from_triplets(nodes.size(), nodes.size(), std::move(t)));
  if (has_miles) sub.edge_miles = std::move(miles);
  sub.kernel = graph.kernel;
  sub.sigma = graph.sigma;
  return sub;
}

std::vector<SubgraphBundle> extract_subgraphs(const SensorGraph &graph,
                                              const PartitionAssignment &assignment,
                                              const std::vector<std::vector<std::size_t>> &halos) {
  if (assignment.part_of.size() != graph.n_nodes()) throw_config("assignment size mismatch");
  if (!halos.empty() && halos.size() != assignment.k) {
    throw_config("need one halo list per part");
  }
  std::vector<SubgraphBundle> bundles;
  for (std::size_t part = 0; part < assignment.k; ++part) {
    std::vector<std::size_t> nodes = assignment.members(part);
    std::vector<char> is_halo(graph.n_nodes(), 0);
    if (!halos.empty()) {
      for (std::size_t h : halos[part]) {
        if (h >= graph.n_nodes()) throw_config("halo index out of range");
        if (assignment.part_of[h] == part) {
          throw_config("halo " + graph.nodes[h].sensor_id + " belongs to its own part");
        }
        if (!is_halo[h]) nodes.push_back(h);
        is_halo[h] = 1;
      }
    }
    std::sort(nodes.begin(), nodes.end());
    SubgraphBundle b;
    b.part = part;
    b.graph = induced_subgraph(graph, nodes);
    b.local_to_global = nodes;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      b.global_to_local.emplace(nodes[i], i);
      b.halo.push_back(is_halo[nodes[i]] != 0);
    }
    bundles.push_back(std::move(b));
  }
  return bundles;
}

void write_assignment_csv(const std::string &path, const SensorGraph &graph,
                          const PartitionAssignment &assignment) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << "sensor_id,part\n";
  for (std::size_t v = 0; v < graph.n_nodes(); ++v) {
    out << graph.nodes[v].sensor_id << ',' << assignment.part_of[v] << '\n';
  }
}

PartitionAssignment read_assignment_csv(const std::string &path, const SensorGraph &graph) {
  const csv::Table t = csv::read_file(path);
  const std::size_t c_id = t.column("sensor_id");
  const std::size_t c_part = t.column("part");
  PartitionAssignment a;
  a.part_of.assign(graph.n_nodes(), std::numeric_limits<std::size_t>::max());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + ":" + std::to_string(t.lines[r]);
    const long long p = csv::parse_int(t.rows[r][c_part], where + " part");
    if (p < 0) throw_data(where + ": negative part");
    a.part_of[graph.index.index(t.rows[r][c_id])] = static_cast<std::size_t>(p);
    a.k = std::max(a.k, static_cast<std::size_t>(p) + 1);
  }
  for (std::size_t v = 0; v < a.part_of.size(); ++v) {
    if (a.part_of[v] == std::numeric_limits<std::size_t>::max()) {
      throw_data(path + ": no part for sensor " + graph.nodes[v].sensor_id);
    }
  }
  return a;
}

void save_bundles(const std::string &dir, const std::vector<SubgraphBundle> &bundles) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto &b : bundles) {
    const fs::path pdir = fs::path(dir) / ("part_" + std::to_string(b.part));
    fs::create_directories(pdir);
    save_graph((pdir / "graph.json").string(), b.graph);
    std::ofstream nodes(pdir / "nodes.csv");
    nodes << "local,global,sensor_id,halo\n";
    for (std::size_t i = 0; i < b.n_local(); ++i) {
      nodes << i << ',' << b.local_to_global[i] << ',' << b.graph.nodes[i].sensor_id << ','
            << (b.halo[i] ? 1 : 0) << '\n';
    }
    std::ofstream halos(pdir / "halos.csv");
    halos << "sensor_id\n";
    for (std::size_t i = 0; i < b.n_local(); ++i) {
      if (b.halo[i]) halos << b.graph.nodes[i].sensor_id << '\n';
    }
  }
}

SubgraphBundle load_bundle(const std::string &part_dir) {
  namespace fs = std::filesystem;
  SubgraphBundle b;
  const std::string name = fs::path(part_dir).filename().string();
  if (name.rfind("part_", 0) == 0) {
    b.part = static_cast<std::size_t>(csv::parse_int(name.substr(5), part_dir));
  }
  b.graph = load_graph((fs::path(part_dir) / "graph.json").string());
  const csv::Table t = csv::read_file((fs::path(part_dir) / "nodes.csv").string());
  const std::size_t c_global = t.column("global");
  const std::size_t c_halo = t.column("halo");
  if (t.rows.size() != b.graph.n_nodes()) throw_data(part_dir + ": node table size mismatch");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto g = static_cast<std::size_t>(csv::parse_int(t.rows[r][c_global], part_dir));
    b.local_to_global.push_back(g);
    b.global_to_local.emplace(g, r);
    b.halo.push_back(t.rows[r][c_halo] == "1");
  }
  return b;
}

std::vector<SubgraphBundle> load_bundles(const std::string &dir) {
  namespace fs = std::filesystem;
  std::map<std::size_t, std::string> parts;
  if (!fs::is_directory(dir)) throw_data("bundle directory '" + dir + "' not found");
  for (const auto &entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && name.rfind("part_", 0) == 0) {
      parts[static_cast<std::size_t>(csv::parse_int(name.substr(5), dir))] = entry.path().string();
    }
  }
  std::vector<SubgraphBundle> out;
  for (const auto &[id, path] : parts) out.push_back(load_bundle(path));
  return out;
}

}  // namespace pgdcrnn

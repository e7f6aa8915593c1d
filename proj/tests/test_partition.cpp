#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "pgdcrnn/distance.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/partition.hpp"
#include "support.hpp"

using namespace pgdcrnn;
using namespace testing_support;

namespace {

double total_weight(const SparseMatrix &m) {
  double s = 0.0;
  for (double v : m.values()) s += v;
  return s;
}

SensorGraph grid_graph(std::size_t w, std::size_t h) {
  std::vector<Triplet> t;
  auto id = [&](std::size_t x, std::size_t y) { return y * w + x; };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (x + 1 < w) t.push_back({id(x, y), id(x + 1, y), 1.0});
      if (y + 1 < h) t.push_back({id(x, y + 1), id(x, y), 0.5});
    }
  }
  return graph_from_weights(placeholder_meta(w * h), SparseMatrix::from_triplets(w * h, w * h, t));
}

}  // namespace

TEST_CASE("symmetrize adds both directions") {
  const SparseMatrix a = SparseMatrix::from_triplets(3, 3, {{0, 1, 2.0}, {1, 0, 1.0}, {1, 2, 4.0}});
  const SparseMatrix s = symmetrize(a);
  CHECK(s.at(0, 1) == 3.0);
  CHECK(s.at(1, 0) == 3.0);
  CHECK(s.at(2, 1) == 4.0);
  CHECK(s == s.transpose());
}

TEST_CASE("edge cut counts each undirected edge once") {
  const SparseMatrix a = SparseMatrix::from_triplets(3, 3, {{0, 1, 2.0}, {1, 0, 1.0}, {1, 2, 4.0}});
  CHECK(edge_cut(a, {0, 1, 1}) == 3.0);
  CHECK(edge_cut(a, {0, 0, 1}) == 4.0);
  CHECK(edge_cut(a, {0, 0, 0}) == 0.0);
}

TEST_CASE("matching and contraction preserve weight") {
  std::mt19937_64 rng(8);
  const SparseMatrix sym = symmetrize(random_adjacency(30, 0.2, rng));
  std::vector<std::size_t> order(30);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t nc = 0;
  const auto map = heavy_edge_matching(sym, order, &nc);
  std::vector<std::size_t> members(nc, 0);
  for (std::size_t c : map) ++members.at(c);
  for (std::size_t m : members) CHECK((m == 1 || m == 2));
  // Matched pairs must be adjacent.
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = i + 1; j < 30; ++j) {
      if (map[i] == map[j]) CHECK(sym.contains(i, j));
    }
  }
  const SparseMatrix coarse = contract(sym, map, nc);
  double internal = 0.0;
  for (const auto &t : sym.triplets()) {
    if (map[t.row] == map[t.col]) internal += t.value;
  }
  CHECK(total_weight(coarse) == doctest::Approx(total_weight(sym) - internal));
  // Any coarse assignment has the same cut on both levels.
  std::vector<std::size_t> coarse_part(nc), fine_part(30);
  for (std::size_t c = 0; c < nc; ++c) coarse_part[c] = c % 2;
  for (std::size_t i = 0; i < 30; ++i) fine_part[i] = coarse_part[map[i]];
  CHECK(edge_cut(coarse, coarse_part) == doctest::Approx(edge_cut(sym, fine_part)));
}

TEST_CASE("coarsening shrinks and conserves vertex weight") {
  std::mt19937_64 rng(2);
  const SparseMatrix sym = symmetrize(random_adjacency(120, 0.05, rng));
  const auto levels = coarsen(sym, 20, 5);
  REQUIRE_FALSE(levels.empty());
  std::size_t prev = 120;
  for (const auto &l : levels) {
    CHECK(l.graph.rows() < prev);
    CHECK(l.match_map.size() == prev);
    CHECK(std::accumulate(l.vertex_weight.begin(), l.vertex_weight.end(), std::size_t{0}) == 120);
    prev = l.graph.rows();
  }
}

TEST_CASE("partition is balanced, deterministic and refinement never raises the cut") {
  const SensorGraph g = grid_graph(8, 6);
  for (std::size_t k : {2, 3, 4}) {
    std::vector<RefinePass> passes;
    PartitionOptions opts;
    opts.k = k;
    opts.seed = 3;
    opts.observer = [&](const RefinePass &p) { passes.push_back(p); };
    const PartitionAssignment a = partition_graph(g, opts);
    CHECK(a.k == k);
    const auto sizes = a.part_sizes();
    for (std::size_t s : sizes) {
      CHECK(s > 0);
      CHECK(s <= max_part_weight(48, k, opts.imbalance));
    }
    CHECK_FALSE(passes.empty());
    for (const auto &p : passes) CHECK(p.cut_after <= p.cut_before + 1e-12);
    opts.observer = nullptr;
    CHECK(partition_graph(g, opts) == a);
  }
  PartitionOptions bad;
  bad.k = 0;
  CHECK_THROWS_AS(partition_graph(g, bad), Error);
  bad.k = 100;
  CHECK_THROWS_AS(partition_graph(g, bad), Error);
}

TEST_CASE("partition recovers planted clusters") {
  std::mt19937_64 rng(17);
  std::vector<std::size_t> truth;
  const SparseMatrix adj = planted_two_cluster(40, rng, &truth);
  const SensorGraph g = graph_from_weights(placeholder_meta(40), adj);
  PartitionOptions opts;
  opts.k = 2;
  const PartitionAssignment a = partition_graph(g, opts);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < 40; ++i) agree += a.part_of[i] == truth[i];
  CHECK((agree == 40 || agree == 0));
}

TEST_CASE("refine_level on a bad start improves the cut") {
  const SensorGraph g = grid_graph(6, 2);
  const SparseMatrix sym = symmetrize(g.adjacency);
  PartitionAssignment a{{0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, 2};
  const double before = edge_cut(sym, a.part_of);
  std::vector<std::size_t> vw(12, 1);
  refine_level(sym, vw, a, 0.05, 0);
  CHECK(edge_cut(sym, a.part_of) < before);
  for (std::size_t s : a.part_sizes()) CHECK(s == 6);
}

TEST_CASE("halo selection: separation and maximality") {
  const auto meta = meta_along_meridian({0.0, 0.5, 1.0, 1.4, 1.6, 3.0, 3.2, 5.0});
  const SensorGraph g = graph_from_weights(meta, SparseMatrix(8, 8));
  const HaversineDistance hav(meta);
  const PartitionAssignment a{{0, 0, 0, 1, 1, 1, 1, 1}, 2};
  const auto cand = overlap_candidates(g, a, 0, 30, hav);
  REQUIRE(cand.size() == 5);
  CHECK(cand[0].first == 3);
  CHECK(cand[0].second == doctest::Approx(0.4).epsilon(1e-3));
  for (std::size_t i = 1; i < cand.size(); ++i) CHECK(cand[i - 1].second <= cand[i].second);
  const auto halos = add_overlap_nodes(g, a, 0, {30, 1.0}, hav);
  CHECK(halos == std::vector<std::size_t>{3, 5, 7});
  // Horizon limits nominations.
  CHECK(overlap_candidates(g, a, 0, 1, hav).size() == 1);
  CHECK_THROWS_AS(add_overlap_nodes(g, a, 0, {30, 0.0}, hav), Error);
}

TEST_CASE("halo thinning uses both directions of an asymmetric provider") {
  TableDistance t(3);
  t.set(0, 1, 5.0);
  t.set(1, 0, 0.5);
  t.set(0, 2, 5.0);
  t.set(2, 0, 5.0);
  t.set(1, 2, 5.0);
  t.set(2, 1, 5.0);
  CHECK(downsample_halos({0, 1, 2}, 1.0, t) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("subgraph extraction") {
  const SensorGraph g = grid_graph(4, 2);
  const PartitionAssignment a{{0, 0, 1, 1, 0, 0, 1, 1}, 2};
  const auto bundles = extract_subgraphs(g, a, {{2}, {1, 5}});
  REQUIRE(bundles.size() == 2);
  const auto &b0 = bundles[0];
  CHECK(b0.local_to_global == std::vector<std::size_t>{0, 1, 2, 4, 5});
  CHECK(b0.halo == std::vector<bool>{false, false, true, false, false});
  CHECK(b0.n_owned() == 4);
  CHECK(b0.graph.adjacency.at(1, 2) == 1.0);
  CHECK(b0.global_to_local.at(4) == 3);
  for (const auto &b : bundles) {
    for (std::size_t i = 0; i < b.n_local(); ++i) {
      for (std::size_t j = 0; j < b.n_local(); ++j) {
        CHECK(b.graph.adjacency.at(i, j) == g.adjacency.at(b.local_to_global[i], b.local_to_global[j]));
      }
    }
  }
  CHECK(extract_subgraphs(g, a, {})[1].n_local() == 4);
  CHECK_THROWS_AS(extract_subgraphs(g, a, {{1}, {}}), Error);  // halo inside own part
}

TEST_CASE("assignment and bundle files round trip") {
  TempDir dir("part");
  const SensorGraph g = grid_graph(3, 3);
  PartitionOptions opts;
  opts.k = 2;
  const PartitionAssignment a = partition_graph(g, opts);
  write_assignment_csv(dir.file("a.csv"), g, a);
  CHECK(read_assignment_csv(dir.file("a.csv"), g) == a);
  const auto bundles = extract_subgraphs(g, a, {});
  save_bundles(dir.file("b"), bundles);
  const auto back = load_bundles(dir.file("b"));
  REQUIRE(back.size() == bundles.size());
  for (std::size_t p = 0; p < back.size(); ++p) {
    CHECK(back[p].local_to_global == bundles[p].local_to_global);
    CHECK(back[p].halo == bundles[p].halo);
    CHECK(back[p].graph.adjacency == bundles[p].graph.adjacency);
  }
}

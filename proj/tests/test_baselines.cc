#include "doctest.h"
#include "oracle.hpp"

#include "cachecnn/baselines.hpp"

using namespace cachecnn;

namespace {

std::shared_ptr<const Network> default_network() {
  return make_network(build_topology(TopologyConfig{}));
}

}  // namespace

TEST_CASE("GCA picks the EC with the least expected hops") {
  const auto net = default_network();
  const oracle::Paths paths = oracle::bfs_paths(net->topology);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Instance inst = generate_instance(net, 5, InstanceRanges{}, seed);
    const Placement p = gca_placement(inst);
    for (int k = 0; k < 5; ++k) {
      std::vector<double> h(inst.num_ecs(), 0.0);
      for (int e = 0; e < inst.num_ecs(); ++e) {
        for (int a = 0; a < inst.num_ars(); ++a) h[e] += inst.mobility()(k, a) * paths.hops[a][e];
      }
      const int best = static_cast<int>(std::min_element(h.begin(), h.end()) - h.begin());
      CHECK(p[k] == best);
    }
    CHECK(gca(inst) == derive_routing(inst, p));
  }
}

TEST_CASE("GCA ignores capacities") {
  const auto net = default_network();
  const Instance inst = generate_instance(net, 5, InstanceRanges{}, 2);
  const Instance tight = inst.with_capacities(std::vector<double>(inst.num_ecs(), 1),
                                              std::vector<double>(inst.num_links(), 1));
  CHECK(gca_placement(tight) == gca_placement(inst));
}

TEST_CASE("RGC never accepts a worse placement") {
  const auto net = default_network();
  InstanceRanges r;
  r.hotspot = 1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = generate_instance(net, 5, r, seed);
    RgcConfig cfg;
    cfg.seed = seed;
    const RgcResult res = rgc_search(inst, cfg);
    REQUIRE(res.cost_trace.size() == 500);
    const double start =
        penalized_cost(inst, derive_routing(inst, gca_placement(inst))).penalized_total;
    CHECK(res.cost_trace.front() <= start);
    for (std::size_t i = 1; i < res.cost_trace.size(); ++i) {
      CHECK(res.cost_trace[i] <= res.cost_trace[i - 1]);
    }
    CHECK(res.cost_trace.back() ==
          penalized_cost(inst, res.assignment).penalized_total);
    CHECK(res.assignment == derive_routing(inst, res.placement));
  }
}

TEST_CASE("RGC is deterministic per seed") {
  const Instance inst = generate_instance(default_network(), 5, InstanceRanges{}, 9);
  RgcConfig cfg;
  cfg.epochs = 50;
  const RgcResult a = rgc_search(inst, cfg), b = rgc_search(inst, cfg);
  CHECK(a.cost_trace == b.cost_trace);
  CHECK(a.placement == b.placement);
  CHECK(rgc(inst, cfg) == a.assignment);
  cfg.epochs = 0;
  CHECK_THROWS_AS(rgc_search(inst, cfg), Error);
}

TEST_CASE("RGC moves only to neighbors or uncached") {
  // One flow: every accepted move is visible in the trace of placements.
  const auto net = default_network();
  const auto adj = ec_adjacency(net->topology, EcNeighborhood::kGraphAdjacent);
  const Instance inst = generate_instance(net, 1, InstanceRanges{}, 4);
  Placement prev = gca_placement(inst);
  for (int epochs = 1; epochs <= 30; ++epochs) {
    RgcConfig cfg;
    cfg.epochs = epochs;
    const Placement p = rgc_search(inst, cfg).placement;
    if (p != prev && prev[0] != kUncached && p[0] != kUncached) {
      const auto& nb = adj[prev[0]];
      CHECK(std::find(nb.begin(), nb.end(), p[0]) != nb.end());
    }
    prev = p;
  }
}

TEST_CASE("EC adjacency") {
  TopologyConfig small;
  small.depth = 2;
  small.ec_rule = EdgeCloudRule::kInternal;
  const Topology t = build_topology(small);
  const auto adj = ec_adjacency(t, EcNeighborhood::kGraphAdjacent);
  CHECK(adj[0] == std::vector<int>{1, 2});
  CHECK(adj[1] == std::vector<int>{0});
  CHECK(adj[2] == std::vector<int>{0});
  const auto all = ec_adjacency(t, EcNeighborhood::kAll);
  CHECK(all[1] == std::vector<int>{0, 2});

  // Symmetric where links exist; isolated ECs fall back to two nearest.
  const Topology d = build_topology(TopologyConfig{});
  const auto da = ec_adjacency(d, EcNeighborhood::kGraphAdjacent);
  for (int e = 0; e < d.num_edge_clouds(); ++e) {
    CHECK_FALSE(da[e].empty());
    CHECK(std::is_sorted(da[e].begin(), da[e].end()));
    CHECK(std::find(da[e].begin(), da[e].end(), e) == da[e].end());
  }
}

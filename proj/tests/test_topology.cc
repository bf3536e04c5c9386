#include <set>

#include "doctest.h"
#include "oracle.hpp"

#include "cachecnn/topology.hpp"

using namespace cachecnn;

TEST_CASE("binary tree of depth 3 has 8 ARs, 6 ECs and 14 links") {
  const Topology t = build_topology({});
  CHECK(t.num_nodes() == 15);
  CHECK(t.num_access_routers() == 8);
  CHECK(t.num_edge_clouds() == 6);
  CHECK(t.num_links() == 14);
  CHECK(t.access_routers() == std::vector<int>{7, 8, 9, 10, 11, 12, 13, 14});
  CHECK(t.edge_clouds() == std::vector<int>{1, 2, 3, 4, 5, 6});
  CHECK(t.datacenter_hops() == 12);
}

TEST_CASE("hop matrix of the default tree, worked by hand") {
  const auto net = make_network(build_topology({}));
  // Router 7 hangs off 3, which hangs off 1; router 2 is across the root.
  CHECK(net->hops(0, 0) == 2);
  CHECK(net->hops(0, 2) == 1);
  CHECK(net->hops(0, 1) == 4);
  CHECK(net->hops(0, 5) == 5);
  CHECK(net->hops(7, 5) == 1);
  CHECK(net->hops(7, 0) == 4);
}

TEST_CASE("path links match an independent BFS on trees") {
  for (int depth : {2, 3, 4}) {
    TopologyConfig cfg;
    cfg.depth = depth;
    cfg.ec_rule = EdgeCloudRule::kInternal;
    const auto net = make_network(build_topology(cfg));
    const oracle::Paths p = oracle::bfs_paths(net->topology);
    for (int a = 0; a < net->topology.num_access_routers(); ++a) {
      for (int e = 0; e < net->topology.num_edge_clouds(); ++e) {
        CHECK(net->hops(a, e) == p.hops[a][e]);
        std::set<int> lib(net->incidence.path_links(a, e).begin(),
                          net->incidence.path_links(a, e).end());
        std::set<int> ref(p.links[a][e].begin(), p.links[a][e].end());
        CHECK(lib == ref);
        for (int l = 0; l < net->topology.num_links(); ++l) {
          CHECK(net->incidence.on_path(l, a, e) == static_cast<bool>(ref.count(l)));
        }
      }
    }
  }
}

TEST_CASE("mesh links shorten hops but paths stay consistent") {
  TopologyConfig cfg;
  cfg.mesh_links = 3;
  cfg.seed = 5;
  const auto net = make_network(build_topology(cfg));
  CHECK(net->topology.num_links() == 17);
  const oracle::Paths p = oracle::bfs_paths(net->topology);
  for (int a = 0; a < net->topology.num_access_routers(); ++a) {
    for (int e = 0; e < net->topology.num_edge_clouds(); ++e) {
      CHECK(net->hops(a, e) == p.hops[a][e]);
      const auto& nodes = net->incidence.path_nodes(a, e);
      REQUIRE(nodes.size() == static_cast<std::size_t>(p.hops[a][e]) + 1);
      CHECK(nodes.front() == net->topology.access_routers()[a]);
      CHECK(nodes.back() == net->topology.edge_clouds()[e]);
      for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        CHECK(net->topology.link_index(nodes[i], nodes[i + 1]) >= 0);
      }
    }
  }
}

TEST_CASE("edge cloud rules") {
  TopologyConfig cfg;
  cfg.ec_rule = EdgeCloudRule::kLeaves;
  CHECK(build_topology(cfg).edge_clouds() == build_topology(cfg).access_routers());
  cfg.ec_rule = EdgeCloudRule::kLevel;
  cfg.ec_level = 1;
  CHECK(build_topology(cfg).edge_clouds() == std::vector<int>{1, 2});
  cfg.ec_rule = EdgeCloudRule::kExplicit;
  cfg.explicit_edge_clouds = {0, 4};
  CHECK(build_topology(cfg).edge_clouds() == std::vector<int>{0, 4});
}

TEST_CASE("invalid topologies are rejected") {
  CHECK_THROWS_AS(Topology(3, {{0, 1}}, {1}, {0}), Error);         // disconnected
  CHECK_THROWS_AS(Topology(2, {{0, 1}, {1, 0}}, {1}, {0}), Error);  // duplicate
  CHECK_THROWS_AS(Topology(2, {{1, 1}}, {1}, {0}), Error);          // self-loop
  CHECK_THROWS_AS(Topology(2, {{0, 1}}, {}, {0}), Error);           // no ARs
  TopologyConfig cfg;
  cfg.branching = 1;
  CHECK_THROWS_AS(build_topology(cfg), Error);
  cfg = {};
  cfg.mesh_links = 100;
  CHECK_THROWS_AS(build_topology(cfg), Error);
}

TEST_CASE("links are canonical: oriented and sorted") {
  const Topology t(4, {{3, 1}, {1, 0}, {2, 0}}, {3, 2}, {1});
  REQUIRE(t.num_links() == 3);
  CHECK(t.links()[0] == Link{0, 1});
  CHECK(t.links()[1] == Link{0, 2});
  CHECK(t.links()[2] == Link{1, 3});
  CHECK(t.link_index(3, 1) == 2);
  CHECK(t.link_index(2, 3) == -1);
  CHECK(t.distances_from(3) == std::vector<int>{2, 1, 3, 0});
}

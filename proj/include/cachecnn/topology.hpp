#ifndef CACHECNN_TOPOLOGY_HPP_
#define CACHECNN_TOPOLOGY_HPP_

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "cachecnn/common.hpp"

namespace cachecnn {

// An undirected link between two routers, stored with first < second.
struct Link {
  int first = 0;
  int second = 0;
  auto operator<=>(const Link&) const = default;
};

// Static network graph. Routers are numbered 0..num_nodes-1. The link list
// is kept sorted, so a link's position in links() is its stable index.
// Access routers and edge clouds keep the order they were given in; every
// AR/EC-indexed matrix in the library uses that order.
class Topology {
 public:
  static constexpr int kDefaultDatacenterHops = 12;

  // Canonicalizes the link list (orients each pair, sorts, rejects
  // duplicates and self-loops) and validates connectivity.
  Topology(int num_nodes, std::vector<Link> links,
           std::vector<int> access_routers, std::vector<int> edge_clouds,
           int datacenter_hops = kDefaultDatacenterHops);

  int num_nodes() const { return num_nodes_; }
  int num_links() const { return static_cast<int>(links_.size()); }
  int num_access_routers() const {
    return static_cast<int>(access_routers_.size());
  }
  int num_edge_clouds() const { return static_cast<int>(edge_clouds_.size()); }

  const std::vector<Link>& links() const { return links_; }
  const std::vector<int>& access_routers() const { return access_routers_; }
  const std::vector<int>& edge_clouds() const { return edge_clouds_; }
  int datacenter_hops() const { return datacenter_hops_; }

  // Neighbors of `node`, ascending.
  const std::vector<int>& neighbors(int node) const { return adjacency_[node]; }
  // Index of the link joining u and v, or -1.
  int link_index(int u, int v) const;

  // Breadth-first hop distances from `source` to every node.
  std::vector<int> distances_from(int source) const;

  bool operator==(const Topology& other) const;

 private:
  int num_nodes_;
  std::vector<Link> links_;
  std::vector<int> access_routers_;
  std::vector<int> edge_clouds_;
  int datacenter_hops_;
  std::vector<std::vector<int>> adjacency_;
};

enum class EdgeCloudRule {
  kInternalNonRoot,  // every non-leaf router except the root
  kInternal,         // every non-leaf router
  kLeaves,           // co-located with the access routers
  kLevel,            // all routers at depth `ec_level`
  kExplicit,         // exactly `explicit_edge_clouds`
};

struct TopologyConfig {
  int branching = 2;
  int depth = 3;
  // Extra links between sibling routers (same parent), chosen by `seed`.
  int mesh_links = 0;
  EdgeCloudRule ec_rule = EdgeCloudRule::kInternalNonRoot;
  int ec_level = 1;
  std::vector<int> explicit_edge_clouds;
  int datacenter_hops = Topology::kDefaultDatacenterHops;
  std::uint64_t seed = 1;
};

// Tree rooted at router 0 with routers numbered in breadth-first order;
// access routers are the leaves.
Topology build_topology(const TopologyConfig& config);

// N_ae: hops from access router a to edge cloud e on a shortest path.
class HopMatrix {
 public:
  HopMatrix() = default;
  explicit HopMatrix(Matrix<int> entries) : entries_(std::move(entries)) {}
  int operator()(int ar, int ec) const { return entries_(ar, ec); }
  const Matrix<int>& entries() const { return entries_; }

 private:
  Matrix<int> entries_;
};

HopMatrix hop_matrix(const Topology& topology);

// B_lae plus the canonical path behind it. The stored path for (a, e) is
// the lexicographically smallest node sequence among all shortest paths.
class IncidenceTensor {
 public:
  IncidenceTensor() = default;
  IncidenceTensor(int num_links, int num_ars, int num_ecs);

  bool on_path(int link, int ar, int ec) const {
    return entries_(link, ar, ec) != 0;
  }
  const std::vector<int>& path_links(int ar, int ec) const {
    return path_links_[ar * num_ecs_ + ec];
  }
  const std::vector<int>& path_nodes(int ar, int ec) const {
    return path_nodes_[ar * num_ecs_ + ec];
  }
  const Tensor3<std::uint8_t>& entries() const { return entries_; }

 private:
  friend IncidenceTensor incidence_tensor(const Topology&, const HopMatrix&);

  int num_ecs_ = 0;
  Tensor3<std::uint8_t> entries_;
  std::vector<std::vector<int>> path_links_;
  std::vector<std::vector<int>> path_nodes_;
};

IncidenceTensor incidence_tensor(const Topology& topology,
                                 const HopMatrix& hops);

// A topology together with the matrices derived from it. Instances share
// one immutable Network.
struct Network {
  Topology topology;
  HopMatrix hops;
  IncidenceTensor incidence;

  explicit Network(Topology t);
};

std::shared_ptr<const Network> make_network(Topology topology);

}  // namespace cachecnn

#endif  // CACHECNN_TOPOLOGY_HPP_

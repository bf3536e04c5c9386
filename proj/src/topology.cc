#include "cachecnn/topology.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <set>
#include <string>

namespace cachecnn {

Topology::Topology(int num_nodes, std::vector<Link> links,
                   std::vector<int> access_routers,
                   std::vector<int> edge_clouds, int datacenter_hops)
    : num_nodes_(num_nodes),
      links_(std::move(links)),
      access_routers_(std::move(access_routers)),
      edge_clouds_(std::move(edge_clouds)),
      datacenter_hops_(datacenter_hops) {
  if (num_nodes_ <= 0) throw Error("topology: no routers");
  for (Link& l : links_) {
    if (l.first > l.second) std::swap(l.first, l.second);
    if (l.first < 0 || l.second >= num_nodes_) {
      throw Error("topology: link endpoint out of range");
    }
    if (l.first == l.second) throw Error("topology: self-loop");
  }
  std::sort(links_.begin(), links_.end());
  if (std::adjacent_find(links_.begin(), links_.end()) != links_.end()) {
    throw Error("topology: duplicate link");
  }
  auto check_subset = [&](const std::vector<int>& ids, const char* what) {
    if (ids.empty()) throw Error(std::string("topology: no ") + what);
    std::set<int> seen;
    for (int id : ids) {
      if (id < 0 || id >= num_nodes_) {
        throw Error(std::string("topology: ") + what + " id out of range");
      }
      if (!seen.insert(id).second) {
        throw Error(std::string("topology: duplicate ") + what);
      }
    }
  };
  check_subset(access_routers_, "access routers");
  check_subset(edge_clouds_, "edge clouds");
  if (datacenter_hops_ <= 0) throw Error("topology: datacenter_hops must be > 0");

  adjacency_.assign(num_nodes_, {});
  for (const Link& l : links_) {
    adjacency_[l.first].push_back(l.second);
    adjacency_[l.second].push_back(l.first);
  }
  for (auto& n : adjacency_) std::sort(n.begin(), n.end());

  const std::vector<int> d = distances_from(0);
  if (std::any_of(d.begin(), d.end(), [](int x) { return x < 0; })) {
    throw Error("topology: graph is not connected");
  }
}

int Topology::link_index(int u, int v) const {
  const Link key{std::min(u, v), std::max(u, v)};
  auto it = std::lower_bound(links_.begin(), links_.end(), key);
  if (it == links_.end() || *it != key) return -1;
  return static_cast<int>(it - links_.begin());
}

std::vector<int> Topology::distances_from(int source) const {
  std::vector<int> dist(num_nodes_, -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adjacency_[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

bool Topology::operator==(const Topology& other) const {
  return num_nodes_ == other.num_nodes_ && links_ == other.links_ &&
         access_routers_ == other.access_routers_ &&
         edge_clouds_ == other.edge_clouds_ &&
         datacenter_hops_ == other.datacenter_hops_;
}

Topology build_topology(const TopologyConfig& config) {
  if (config.branching < 2) throw Error("build_topology: branching must be >= 2");
  if (config.depth < 1) throw Error("build_topology: depth must be >= 1");

  // Routers per level, numbered breadth-first.
  std::vector<std::vector<int>> levels{{0}};
  std::vector<int> parent{-1};
  std::vector<Link> links;
  int next = 1;
  for (int d = 1; d <= config.depth; ++d) {
    std::vector<int> level;
    for (int p : levels.back()) {
      for (int b = 0; b < config.branching; ++b) {
        level.push_back(next);
        parent.push_back(p);
        links.push_back({p, next});
        ++next;
      }
    }
    levels.push_back(std::move(level));
  }
  const int num_nodes = next;

  if (config.mesh_links > 0) {
    std::vector<Link> candidates;
    for (int u = 1; u < num_nodes; ++u) {
      for (int v = u + 1; v < num_nodes; ++v) {
        if (parent[u] == parent[v]) candidates.push_back({u, v});
      }
    }
    if (config.mesh_links > static_cast<int>(candidates.size())) {
      throw Error("build_topology: more mesh links requested than sibling pairs");
    }
    std::mt19937_64 rng(config.seed);
    for (int i = 0; i < config.mesh_links; ++i) {
      std::uniform_int_distribution<int> pick(
          i, static_cast<int>(candidates.size()) - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
      links.push_back(candidates[i]);
    }
  }

  const std::vector<int>& leaves = levels.back();
  std::vector<int> ecs;
  switch (config.ec_rule) {
    case EdgeCloudRule::kInternalNonRoot:
      for (int d = 1; d < config.depth; ++d) {
        ecs.insert(ecs.end(), levels[d].begin(), levels[d].end());
      }
      break;
    case EdgeCloudRule::kInternal:
      for (int d = 0; d < config.depth; ++d) {
        ecs.insert(ecs.end(), levels[d].begin(), levels[d].end());
      }
      break;
    case EdgeCloudRule::kLeaves:
      ecs = leaves;
      break;
    case EdgeCloudRule::kLevel:
      if (config.ec_level < 0 || config.ec_level > config.depth) {
        throw Error("build_topology: ec_level outside the tree");
      }
      ecs = levels[config.ec_level];
      break;
    case EdgeCloudRule::kExplicit:
      ecs = config.explicit_edge_clouds;
      break;
  }
  if (ecs.empty()) throw Error("build_topology: configuration yields no edge clouds");
  return Topology(num_nodes, std::move(links), leaves, std::move(ecs),
                  config.datacenter_hops);
}

HopMatrix hop_matrix(const Topology& topology) {
  const int num_ars = topology.num_access_routers();
  const int num_ecs = topology.num_edge_clouds();
  Matrix<int> n(num_ars, num_ecs);
  for (int a = 0; a < num_ars; ++a) {
    const std::vector<int> dist =
        topology.distances_from(topology.access_routers()[a]);
    for (int e = 0; e < num_ecs; ++e) n(a, e) = dist[topology.edge_clouds()[e]];
  }
  return HopMatrix(std::move(n));
}

IncidenceTensor::IncidenceTensor(int num_links, int num_ars, int num_ecs)
    : num_ecs_(num_ecs),
      entries_(num_links, num_ars, num_ecs, 0),
      path_links_(static_cast<std::size_t>(num_ars) * num_ecs),
      path_nodes_(static_cast<std::size_t>(num_ars) * num_ecs) {}

IncidenceTensor incidence_tensor(const Topology& topology,
                                 const HopMatrix& hops) {
  const int num_ars = topology.num_access_routers();
  const int num_ecs = topology.num_edge_clouds();
  IncidenceTensor out(topology.num_links(), num_ars, num_ecs);
  for (int e = 0; e < num_ecs; ++e) {
    const std::vector<int> to_ec =
        topology.distances_from(topology.edge_clouds()[e]);
    for (int a = 0; a < num_ars; ++a) {
      // Walking greedily through the smallest admissible neighbor yields the
      // lexicographically smallest shortest path.
      int node = topology.access_routers()[a];
      if (to_ec[node] != hops(a, e)) throw Error("incidence_tensor: stale hop matrix");
      std::vector<int>& nodes = out.path_nodes_[a * num_ecs + e];
      std::vector<int>& links = out.path_links_[a * num_ecs + e];
      nodes.push_back(node);
      while (to_ec[node] > 0) {
        int step = -1;
        for (int v : topology.neighbors(node)) {
          if (to_ec[v] == to_ec[node] - 1) {
            step = v;
            break;
          }
        }
        const int l = topology.link_index(node, step);
        links.push_back(l);
        out.entries_(l, a, e) = 1;
        nodes.push_back(step);
        node = step;
      }
    }
  }
  return out;
}

Network::Network(Topology t)
    : topology(std::move(t)),
      hops(hop_matrix(topology)),
      incidence(incidence_tensor(topology, hops)) {}

std::shared_ptr<const Network> make_network(Topology topology) {
  return std::make_shared<const Network>(std::move(topology));
}

}  // namespace cachecnn

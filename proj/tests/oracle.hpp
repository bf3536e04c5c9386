// Test-side reference implementations. Nothing here calls the library's
// cost, routing or solver code; only the instance data and the raw
// topology are read.
#ifndef CACHECNN_TESTS_ORACLE_HPP_
#define CACHECNN_TESTS_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "cachecnn/cost.hpp"
#include "cachecnn/instance.hpp"

namespace oracle {

using cachecnn::Instance;
using cachecnn::Topology;

// Hop counts and path links from a BFS that expands neighbors in
// ascending order. On trees the path is unique.
struct Paths {
  std::vector<std::vector<int>> hops;                     // [a][e]
  std::vector<std::vector<std::vector<int>>> links;       // [a][e] -> link indices
};

inline Paths bfs_paths(const Topology& topo) {
  const int n = topo.num_nodes();
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : topo.links()) {
    adj[l.first].push_back(l.second);
    adj[l.second].push_back(l.first);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  auto link_of = [&](int u, int v) {
    if (u > v) std::swap(u, v);
    for (int i = 0; i < topo.num_links(); ++i) {
      if (topo.links()[i].first == u && topo.links()[i].second == v) return i;
    }
    throw std::logic_error("no such link");
  };
  Paths p;
  const int A = topo.num_access_routers(), E = topo.num_edge_clouds();
  p.hops.assign(A, std::vector<int>(E));
  p.links.assign(A, std::vector<std::vector<int>>(E));
  for (int a = 0; a < A; ++a) {
    const int src = topo.access_routers()[a];
    std::vector<int> dist(n, -1), parent(n, -1);
    std::queue<int> q;
    dist[src] = 0;
    q.push(src);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          parent[v] = u;
          q.push(v);
        }
      }
    }
    for (int e = 0; e < E; ++e) {
      int v = topo.edge_clouds()[e];
      p.hops[a][e] = dist[v];
      while (v != src) {
        p.links[a][e].push_back(link_of(v, parent[v]));
        v = parent[v];
      }
    }
  }
  return p;
}

struct Evaluation {
  bool feasible = false;
  double caching = 0, hit = 0, miss = 0, total = 0;
};

// TC of an assignment straight from the objective terms. Infeasible
// assignments (strict EC capacity, link capacity, z <= x, single host)
// are reported with feasible = false and no cost.
inline Evaluation evaluate(const Instance& inst, const Paths& paths,
                           const cachecnn::Assignment& asg) {
  const int K = inst.num_flows(), A = inst.num_ars(), E = inst.num_ecs(),
            L = inst.num_links();
  Evaluation ev;
  std::vector<double> space(E, 0.0);
  std::vector<int> count(E, 0);
  for (int k = 0; k < K; ++k) {
    int hosts = 0;
    for (int e = 0; e < E; ++e) {
      if (asg.x(k, e)) {
        ++hosts;
        space[e] += inst.content_size()[k];
        ++count[e];
      }
    }
    if (hosts > 1) return ev;
  }
  for (int e = 0; e < E; ++e) {
    if (!(space[e] < inst.ec_space()[e])) return ev;
  }
  std::vector<double> load(L, 0.0);
  for (int k = 0; k < K; ++k) {
    std::vector<bool> used(L, false);
    double fetched = 0;
    for (int a = 0; a < A; ++a) {
      int n = 0;
      for (int e = 0; e < E; ++e) {
        if (!asg.z(k, a, e)) continue;
        if (!asg.x(k, e)) return ev;
        ++n;
        ev.hit += inst.mobility()(k, a) * paths.hops[a][e];
        fetched += inst.mobility()(k, a);
        for (int l : paths.links[a][e]) used[l] = true;
      }
      if (n > 1) return ev;
    }
    ev.miss += (1.0 - fetched) * inst.datacenter_hops();
    for (int l = 0; l < L; ++l) {
      if (used[l] != static_cast<bool>(asg.y(k, l))) return ev;
      if (used[l]) load[l] += inst.bandwidth()[k];
    }
  }
  for (int l = 0; l < L; ++l) {
    if (load[l] > inst.link_capacity()[l]) return ev;
  }
  for (int e = 0; e < E; ++e) {
    if (count[e]) ev.caching += count[e] / (1.0 - space[e] / inst.ec_space()[e]);
  }
  ev.total = inst.alpha() * ev.caching + inst.beta() * (ev.hit + ev.miss);
  ev.feasible = true;
  return ev;
}

struct Optimum {
  double total = std::numeric_limits<double>::infinity();
  cachecnn::Assignment assignment;
  long evaluated = 0;
};

// Enumerates every x in (|E| + 1)^K and, for each, every subset of the
// (flow, AR) pairs with p > 0 that fetch from the host instead of the data
// center. Throws when a placement has more than `max_pairs` pairs.
inline Optimum exhaustive(const Instance& inst, int max_pairs = 20) {
  const Paths paths = bfs_paths(inst.topology());
  const int K = inst.num_flows(), A = inst.num_ars(), E = inst.num_ecs(),
            L = inst.num_links();
  Optimum best;
  std::vector<int> choice(K, 0);  // 0..E-1 host, E uncached
  while (true) {
    std::vector<std::pair<int, int>> pairs;
    for (int k = 0; k < K; ++k) {
      if (choice[k] == E) continue;
      for (int a = 0; a < A; ++a) {
        if (inst.mobility()(k, a) > 0) pairs.emplace_back(k, a);
      }
    }
    if (static_cast<int>(pairs.size()) > max_pairs) throw std::runtime_error("too many pairs");
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs.size()); ++mask) {
      cachecnn::Assignment asg;
      asg.x = cachecnn::Matrix<std::uint8_t>(K, E, 0);
      asg.z = cachecnn::Tensor3<std::uint8_t>(K, A, E, 0);
      asg.y = cachecnn::Matrix<std::uint8_t>(K, L, 0);
      for (int k = 0; k < K; ++k) {
        if (choice[k] < E) asg.x(k, choice[k]) = 1;
      }
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!(mask >> i & 1)) continue;
        const auto [k, a] = pairs[i];
        asg.z(k, a, choice[k]) = 1;
        for (int l : paths.links[a][choice[k]]) asg.y(k, l) = 1;
      }
      const Evaluation ev = evaluate(inst, paths, asg);
      ++best.evaluated;
      if (ev.feasible && ev.total < best.total) {
        best.total = ev.total;
        best.assignment = asg;
      }
    }
    int k = 0;
    while (k < K && ++choice[k] > E) choice[k++] = 0;
    if (k == K) break;
  }
  return best;
}

// C^C = sum_e n_e / (1 - U_e) for a placement (EC per flow or kUncached).
inline double caching_direct(const Instance& inst, const cachecnn::Placement& p) {
  std::vector<double> u(inst.num_ecs(), 0.0);
  std::vector<int> n(inst.num_ecs(), 0);
  for (int k = 0; k < inst.num_flows(); ++k) {
    if (p[k] < 0) continue;
    u[p[k]] += inst.content_size()[k] / inst.ec_space()[p[k]];
    ++n[p[k]];
  }
  double c = 0;
  for (int e = 0; e < inst.num_ecs(); ++e) {
    if (n[e]) c += n[e] / (1.0 - u[e]);
  }
  return c;
}

}  // namespace oracle

#endif  // CACHECNN_TESTS_ORACLE_HPP_

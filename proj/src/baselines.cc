#include "cachecnn/baselines.hpp"

#include <algorithm>
#include <random>

namespace cachecnn {

std::vector<std::vector<int>> ec_adjacency(const Topology& t, EcNeighborhood rule) {
  const std::vector<int>& ecs = t.edge_clouds();
  const int n = static_cast<int>(ecs.size());
  std::vector<std::vector<int>> out(n);
  std::vector<int> index_of(t.num_nodes(), -1);
  for (int e = 0; e < n; ++e) index_of[ecs[e]] = e;
  for (int e = 0; e < n; ++e) {
    if (rule == EcNeighborhood::kAll) {
      for (int f = 0; f < n; ++f) {
        if (f != e) out[e].push_back(f);
      }
      continue;
    }
    for (int node : t.neighbors(ecs[e])) {
      if (index_of[node] >= 0) out[e].push_back(index_of[node]);
    }
    if (out[e].empty() && n > 1) {
      const std::vector<int> dist = t.distances_from(ecs[e]);
      std::vector<int> others;
      for (int f = 0; f < n; ++f) {
        if (f != e) others.push_back(f);
      }
      std::stable_sort(others.begin(), others.end(),
                       [&](int a, int b) { return dist[ecs[a]] < dist[ecs[b]]; });
      others.resize(std::min<std::size_t>(2, others.size()));
      out[e] = others;
    }
    std::sort(out[e].begin(), out[e].end());
  }
  return out;
}

Placement gca_placement(const Instance& inst) {
  Placement p(inst.num_flows());
  for (int k = 0; k < inst.num_flows(); ++k) {
    int best = 0;
    double best_hops = 0;
    for (int e = 0; e < inst.num_ecs(); ++e) {
      double h = 0;
      for (int a = 0; a < inst.num_ars(); ++a) h += inst.mobility()(k, a) * inst.hops(a, e);
      if (e == 0 || h < best_hops) {
        best = e;
        best_hops = h;
      }
    }
    p[k] = best;
  }
  return p;
}

Assignment gca(const Instance& inst) { return derive_routing(inst, gca_placement(inst)); }

RgcResult rgc_search(const Instance& inst, const RgcConfig& cfg) {
  if (cfg.epochs < 1) throw Error("rgc: epochs must be at least 1");
  const auto adjacency = ec_adjacency(inst.topology(), cfg.neighborhood);
  RgcResult r;
  r.placement = gca_placement(inst);
  double current =
      penalized_cost(inst, derive_routing(inst, r.placement), cfg.penalty).penalized_total;
  std::mt19937_64 rng(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const int k = std::uniform_int_distribution<int>(0, inst.num_flows() - 1)(rng);
    const int from = r.placement[k];
    int to;
    if (from == kUncached) {
      to = std::uniform_int_distribution<int>(0, inst.num_ecs() - 1)(rng);
    } else {
      const std::vector<int>& nb = adjacency[from];
      const int pick =
          std::uniform_int_distribution<int>(0, static_cast<int>(nb.size()))(rng);
      to = pick == static_cast<int>(nb.size()) ? kUncached : nb[pick];
    }
    Placement trial = r.placement;
    trial[k] = to;
    const double cost =
        penalized_cost(inst, derive_routing(inst, trial), cfg.penalty).penalized_total;
    if (cost < current) {
      r.placement = std::move(trial);
      current = cost;
    }
    r.cost_trace.push_back(current);
  }
  r.assignment = derive_routing(inst, r.placement);
  return r;
}

Assignment rgc(const Instance& inst, const RgcConfig& cfg) {
  return rgc_search(inst, cfg).assignment;
}

}  // namespace cachecnn

#ifndef CACHECNN_BASELINES_HPP_
#define CACHECNN_BASELINES_HPP_

#include <cstdint>
#include <vector>

#include "cachecnn/cost.hpp"
#include "cachecnn/instance.hpp"

namespace cachecnn {

enum class EcNeighborhood {
  // ECs joined by a link; an EC with none falls back to its two nearest ECs.
  kGraphAdjacent,
  // Every other EC.
  kAll,
};

// Neighbor EC indices per EC, sorted ascending.
std::vector<std::vector<int>> ec_adjacency(const Topology& topology,
                                           EcNeighborhood rule);

// Each flow goes to the EC with the least expected hop count
// sum_a p_ka N_ae, ties to the lower index. Capacities are not consulted.
Placement gca_placement(const Instance& instance);
Assignment gca(const Instance& instance);

struct RgcConfig {
  int epochs = 500;
  std::uint64_t seed = 1;
  EcNeighborhood neighborhood = EcNeighborhood::kGraphAdjacent;
  PenaltyOptions penalty;
};

struct RgcResult {
  Assignment assignment;
  Placement placement;
  std::vector<double> cost_trace;  // TC^N after each epoch
};

// Local search from the GCA placement. Each epoch moves one random flow to
// a random neighbor of its EC, to "uncached" with probability 1/(deg + 1),
// or from "uncached" to any EC; the move is kept only if TC^N drops.
RgcResult rgc_search(const Instance& instance, const RgcConfig& config = {});
Assignment rgc(const Instance& instance, const RgcConfig& config = {});

}  // namespace cachecnn

#endif  // CACHECNN_BASELINES_HPP_

#ifndef CACHECNN_SOLVER_HPP_
#define CACHECNN_SOLVER_HPP_

#include <cstdint>
#include <string>

#include "cachecnn/cost.hpp"
#include "cachecnn/instance.hpp"

namespace cachecnn {

struct SolverOptions {
  // Search nodes (partial placements) visited before giving up on a proof.
  std::int64_t node_limit = 200'000'000;
  // Largest number of (flow, AR) retrievals enumerated when a complete
  // placement overloads a link. Larger sets are repaired greedily and the
  // result loses its optimality proof.
  int max_reroute_pairs = 22;
};

enum class SearchProof {
  kExhaustive,  // no feasible assignment is cheaper
  kBounded,     // node limit or reroute cap hit; best incumbent only
};

struct OptimalSolution {
  Assignment assignment;
  CostBreakdown cost;
  std::int64_t nodes_explored = 0;
  SearchProof proof = SearchProof::kExhaustive;
};

// Depth-first branch-and-bound over x. Each flow picks one EC or stays
// uncached, largest content first. Placements that fill an EC are
// rejected; link overloads are resolved by choosing which retrievals fall
// back to the data center.
OptimalSolution solve_exact(const Instance& instance,
                            const SolverOptions& options = {});

// The admissible bound used by solve_exact for a partial placement in
// which flows with placement[k] == kUnassigned are still open. Exposed for
// testing.
inline constexpr int kUnassigned = -2;
double placement_lower_bound(const Instance& instance, const Placement& partial);

struct MilpOptions {
  // <= 0 selects the default: max(10 |K|, |A|, max_e w_e) when every s_k and
  // w_e is a whole number (then t_e <= w_e), otherwise 10 |K|.
  double big_m = 0;
};

double default_big_m(const Instance& instance);

// The mixed-integer program in CPLEX LP text format. Variables are
// x_k_e, y_k_l, z_k_a_e, t_e and chi_k_e (0-based indices).
std::string export_milp(const Instance& instance, const MilpOptions& options = {});

}  // namespace cachecnn

#endif  // CACHECNN_SOLVER_HPP_

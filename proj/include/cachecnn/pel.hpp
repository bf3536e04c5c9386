#ifndef CACHECNN_PEL_HPP_
#define CACHECNN_PEL_HPP_

#include <iosfwd>
#include <vector>

#include "cachecnn/cnn.hpp"
#include "cachecnn/cost.hpp"
#include "cachecnn/instance.hpp"

namespace cachecnn {

struct PelOptions {
  double delta = 0.001;
  PenaltyOptions penalty;
  // Candidates examined before stopping; <= 0 means all of them.
  int max_iterations = 0;
};

struct PelCandidate {
  int flow = 0;
  int label = 0;  // EC index, or |E| for uncached
  double probability = 0;
};

struct PelStep {
  int iteration = 0;
  PelCandidate candidate;
  double cost_before = 0;
  double cost_after = 0;
  bool accepted = false;
};

struct PelResult {
  Assignment assignment;
  Placement placement;
  double initial_cost = 0;  // TC^N of the per-flow argmax
  double final_cost = 0;
  std::vector<PelStep> trace;
};

// Starts from each flow's most probable class (ties to the lower class),
// then walks the remaining entries with probability > delta in descending
// order (ties by flow, then class), keeping a substitution only when it
// lowers TC^N. Retrieval and links follow derive_routing.
PelResult enhance(const Instance& instance, const ProbabilityMatrix& probabilities,
                  const PelOptions& options = {});

// The queue of candidates enhance() walks, in order.
std::vector<PelCandidate> pel_candidates(const ProbabilityMatrix& probabilities,
                                         double delta);

// Columns: iteration,flow,label,probability,cost_before,cost_after,accepted.
void write_pel_trace(std::ostream& out, const std::vector<PelStep>& trace);

}  // namespace cachecnn

#endif  // CACHECNN_PEL_HPP_

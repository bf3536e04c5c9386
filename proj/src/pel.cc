#include "cachecnn/pel.hpp"

#include <algorithm>
#include <ostream>

#include "cachecnn/serialization.hpp"

namespace cachecnn {
namespace {

int argmax_row(const ProbabilityMatrix& o, int k) {
  int best = 0;
  for (int c = 1; c < o.cols(); ++c) {
    if (o(k, c) > o(k, best)) best = c;
  }
  return best;
}

double tc_n(const Instance& inst, const Placement& p, const PenaltyOptions& penalty) {
  return penalized_cost(inst, derive_routing(inst, p), penalty).penalized_total;
}

}  // namespace

std::vector<PelCandidate> pel_candidates(const ProbabilityMatrix& o, double delta) {
  std::vector<PelCandidate> psi;
  for (int k = 0; k < o.rows(); ++k) {
    const int top = argmax_row(o, k);
    for (int c = 0; c < o.cols(); ++c) {
      if (c != top && o(k, c) - delta > 0) psi.push_back({k, c, o(k, c)});
    }
  }
  std::stable_sort(psi.begin(), psi.end(), [](const PelCandidate& a, const PelCandidate& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.flow != b.flow) return a.flow < b.flow;
    return a.label < b.label;
  });
  return psi;
}

PelResult enhance(const Instance& inst, const ProbabilityMatrix& o,
                  const PelOptions& options) {
  const int num_ecs = inst.num_ecs();
  if (o.rows() != inst.num_flows() || o.cols() != num_ecs + 1) {
    throw Error("enhance: probability matrix must be |K| x (|E| + 1)");
  }
  if (!(options.delta >= 0 && options.delta < 1)) {
    throw Error("enhance: delta must lie in [0, 1)");
  }
  std::vector<int> omega(inst.num_flows());
  for (int k = 0; k < inst.num_flows(); ++k) omega[k] = argmax_row(o, k);

  PelResult r;
  r.placement = placement_from_labels(omega, num_ecs);
  r.initial_cost = tc_n(inst, r.placement, options.penalty);
  double current = r.initial_cost;
  int iteration = 0;
  for (const PelCandidate& cand : pel_candidates(o, options.delta)) {
    if (options.max_iterations > 0 && iteration >= options.max_iterations) break;
    ++iteration;
    Placement trial = r.placement;
    trial[cand.flow] = cand.label == num_ecs ? kUncached : cand.label;
    const double cost = tc_n(inst, trial, options.penalty);
    const bool accept = cost < current;
    r.trace.push_back({iteration, cand, current, cost, accept});
    if (accept) {
      r.placement = std::move(trial);
      current = cost;
    }
  }
  r.final_cost = current;
  r.assignment = derive_routing(inst, r.placement);
  return r;
}

void write_pel_trace(std::ostream& out, const std::vector<PelStep>& trace) {
  out << "iteration,flow,label,probability,cost_before,cost_after,accepted\n";
  for (const PelStep& s : trace) {
    out << s.iteration << ',' << s.candidate.flow << ',' << s.candidate.label << ','
        << format_exact(s.candidate.probability) << ',' << format_exact(s.cost_before)
        << ',' << format_exact(s.cost_after) << ',' << (s.accepted ? 1 : 0) << '\n';
  }
}

}  // namespace cachecnn

#include <random>

#include "doctest.h"

#include "cachecnn/pel.hpp"

using namespace cachecnn;

namespace {

std::shared_ptr<const Network> small_tree() {
  TopologyConfig cfg;
  cfg.depth = 2;
  cfg.ec_rule = EdgeCloudRule::kInternal;
  return make_network(build_topology(cfg));
}

double tcn(const Instance& inst, const Placement& p) {
  return penalized_cost(inst, derive_routing(inst, p)).penalized_total;
}

ProbabilityMatrix random_probabilities(int rows, int cols, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.3, 1.0);
  ProbabilityMatrix o(rows, cols);
  for (int k = 0; k < rows; ++k) {
    double s = 0;
    for (int c = 0; c < cols; ++c) s += o(k, c) = g(rng);
    for (int c = 0; c < cols; ++c) o(k, c) /= s;
  }
  return o;
}

}  // namespace

TEST_CASE("candidates exclude the argmax and sort by probability") {
  ProbabilityMatrix o(3, 4, 0.0);
  const double rows[3][4] = {{0.2, 0, 0.8, 0}, {0.3, 0.3, 0.3, 0.1}, {0.0005, 0.2, 0.0995, 0.7}};
  for (int k = 0; k < 3; ++k) {
    for (int c = 0; c < 4; ++c) o(k, c) = rows[k][c];
  }
  const auto psi = pel_candidates(o, 0.001);
  // Row 1 ties: the argmax is class 0, so classes 1 and 2 remain.
  REQUIRE(psi.size() == 6);
  CHECK(psi[0].flow == 1);
  CHECK(psi[0].label == 1);
  CHECK(psi[1].flow == 1);
  CHECK(psi[1].label == 2);
  CHECK(psi[2].flow == 0);
  CHECK(psi[2].label == 0);
  CHECK(psi[3].flow == 2);
  CHECK(psi[3].label == 1);
  CHECK(psi[4].flow == 1);
  CHECK(psi[4].label == 3);
  CHECK(psi[5].flow == 2);
  CHECK(psi[5].label == 2);
  CHECK(pel_candidates(o, 0.5).empty());
}

TEST_CASE("enhance starts at the argmax and only keeps improvements") {
  const auto net = make_network(build_topology(TopologyConfig{}));
  InstanceRanges r;
  r.hotspot = 1;
  std::mt19937_64 rng(12);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = generate_instance(net, 5, r, seed);
    const ProbabilityMatrix o = random_probabilities(5, inst.num_ecs() + 1, rng);
    const PelResult res = enhance(inst, o);
    std::vector<int> top(5);
    for (int k = 0; k < 5; ++k) {
      for (int c = 1; c < o.cols(); ++c) {
        if (o(k, c) > o(k, top[k])) top[k] = c;
      }
    }
    CHECK(res.initial_cost == tcn(inst, placement_from_labels(top, inst.num_ecs())));
    CHECK(res.final_cost <= res.initial_cost);
    CHECK(res.final_cost == doctest::Approx(tcn(inst, res.placement)).epsilon(1e-12));
    CHECK(res.assignment == derive_routing(inst, res.placement));
    CHECK(res.trace.size() == pel_candidates(o, 0.001).size());
    double prev = res.initial_cost;
    for (const PelStep& s : res.trace) {
      CHECK(s.cost_before == prev);
      CHECK(s.accepted == (s.cost_after < s.cost_before));
      prev = s.accepted ? s.cost_after : s.cost_before;
    }
    CHECK(prev == res.final_cost);
  }
}

TEST_CASE("a large delta leaves the argmax untouched") {
  const auto net = make_network(build_topology(TopologyConfig{}));
  const Instance inst = generate_instance(net, 5, InstanceRanges{}, 3);
  ProbabilityMatrix o(5, inst.num_ecs() + 1, 0.0);
  for (int k = 0; k < 5; ++k) {
    o(k, k % o.cols()) = 0.6;
    o(k, (k + 1) % o.cols()) = 0.4;
  }
  PelOptions opt;
  opt.delta = 0.5;
  const PelResult res = enhance(inst, o, opt);
  CHECK(res.trace.empty());
  CHECK(res.final_cost == res.initial_cost);
  for (int k = 0; k < 5; ++k) {
    const int label = k % o.cols();
    CHECK(res.placement[k] == (label == inst.num_ecs() ? kUncached : label));
  }
  opt.delta = 0;
  opt.max_iterations = 2;
  CHECK(enhance(inst, o, opt).trace.size() == 2);
}

TEST_CASE("the worked example moves a flow to its runner-up EC") {
  // Flow 0 prefers EC 2 (0.8); the runner-up EC 0 is a hop closer to its ARs.
  Matrix<double> p(1, 4, 0.0);
  p(0, 0) = 0.5;
  p(0, 1) = 0.5;
  const Instance inst(small_tree(), p, {10}, {1}, {1000, 1000, 1000},
                      std::vector<double>(6, 100), 0.5, 0.5);
  ProbabilityMatrix o(1, 4, 0.0);
  o(0, 0) = 0.2;
  o(0, 2) = 0.8;
  const PelResult res = enhance(inst, o);
  REQUIRE(res.trace.size() == 1);
  CHECK(res.trace[0].candidate.label == 0);
  // EC 2 is three hops from ARs 0 and 1, EC 0 two: hits drop from 3 to 2.
  CHECK(res.trace[0].cost_before == doctest::Approx(0.5 * 1 / (1 - 0.01) + 0.5 * 3));
  CHECK(res.trace[0].accepted);
  CHECK(res.placement[0] == 0);
}

TEST_CASE("on a separable 3x3 grid PEL finds the exhaustive optimum") {
  // Capacities are huge, so each flow's cost barely depends on the others.
  Matrix<double> p(3, 4, 0.0);
  p(0, 0) = 0.7;
  p(0, 3) = 0.3;
  p(1, 1) = 0.9;
  p(2, 2) = 0.4;
  p(2, 3) = 0.4;
  const Instance inst(small_tree(), p, {10, 10, 10}, {1, 1, 1}, {1e7, 1e7, 1e7},
                      std::vector<double>(6, 1e4), 0.5, 0.5);
  ProbabilityMatrix o(3, 4, 0.0);
  // Class 3 (uncached) sits below delta for every flow.
  const double rows[3][4] = {{0.1, 0.2, 0.6995, 0.0005}, {0.5, 0.3, 0.1995, 0.0005},
                             {0.3, 0.4, 0.2995, 0.0005}};
  for (int k = 0; k < 3; ++k) {
    for (int c = 0; c < 4; ++c) o(k, c) = rows[k][c];
  }
  double best = 1e300;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 3; ++c) best = std::min(best, tcn(inst, Placement{a, b, c}));
    }
  }
  const PelResult res = enhance(inst, o);
  CHECK(res.final_cost == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("malformed inputs are rejected") {
  const Instance inst = generate_instance(small_tree(), 2, InstanceRanges{}, 1);
  CHECK_THROWS_AS(enhance(inst, ProbabilityMatrix(2, 3, 0.25)), Error);
  PelOptions opt;
  opt.delta = 1;
  CHECK_THROWS_AS(enhance(inst, ProbabilityMatrix(2, 4, 0.25), opt), Error);
}

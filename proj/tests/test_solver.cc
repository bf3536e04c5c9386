#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "oracle.hpp"

#include "cachecnn/lp_format.hpp"
#include "cachecnn/solver.hpp"

using namespace cachecnn;

namespace {

std::shared_ptr<const Network> small_tree() {
  TopologyConfig cfg;
  cfg.depth = 2;
  cfg.ec_rule = EdgeCloudRule::kInternal;
  return make_network(build_topology(cfg));
}

// Tight links and small ECs so both capacity families bind.
InstanceRanges tight_ranges() {
  InstanceRanges r;
  r.ec_space_min = 40;
  r.ec_space_max = 90;
  r.link_min = 4;
  r.link_max = 12;
  r.support_min = 1;
  r.support_max = 3;
  return r;
}

std::map<std::string, double> lp_point(const Instance& inst, const Assignment& a,
                                       double big_m) {
  std::map<std::string, double> v;
  const LinearizedCaching lin = linearized_caching(inst, a.x, big_m);
  for (int k = 0; k < inst.num_flows(); ++k) {
    for (int e = 0; e < inst.num_ecs(); ++e) {
      const std::string ke = std::to_string(k) + "_" + std::to_string(e);
      v["x_" + ke] = a.x(k, e);
      v["chi_" + ke] = lin.chi(k, e);
      for (int ar = 0; ar < inst.num_ars(); ++ar) {
        v["z_" + std::to_string(k) + "_" + std::to_string(ar) + "_" + std::to_string(e)] =
            a.z(k, ar, e);
      }
    }
    for (int l = 0; l < inst.num_links(); ++l) {
      v["y_" + std::to_string(k) + "_" + std::to_string(l)] = a.y(k, l);
    }
  }
  for (int e = 0; e < inst.num_ecs(); ++e) v["t_" + std::to_string(e)] = lin.t[e];
  return v;
}

}  // namespace

TEST_CASE("branch and bound equals exhaustive enumeration on small instances") {
  const auto net = small_tree();
  int with_reroute = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const int flows = 1 + static_cast<int>(seed % 3);
    const Instance inst = generate_instance(net, flows, tight_ranges(), seed);
    const OptimalSolution sol = solve_exact(inst);
    const oracle::Optimum ref = oracle::exhaustive(inst);
    REQUIRE(std::isfinite(ref.total));
    CHECK(sol.proof == SearchProof::kExhaustive);
    CHECK(std::abs(sol.cost.total - ref.total) <= 1e-9);
    CHECK(check_feasibility(inst, sol.assignment).feasible());
    // Count optima that had to send some retrieval back to the data center
    // although a closer host existed.
    const Assignment greedy = derive_routing(inst, sol.assignment.placement());
    with_reroute += !(greedy == sol.assignment);
  }
  CHECK(with_reroute > 0);
}

TEST_CASE("solution is never beaten by any single placement") {
  const auto net = make_network(build_topology({}));
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Instance inst = generate_instance(net, 5, {}, seed);
    const OptimalSolution sol = solve_exact(inst);
    std::uniform_int_distribution<int> pick(-1, inst.num_ecs() - 1);
    for (int trial = 0; trial < 200; ++trial) {
      Placement p(5);
      for (int& v : p) v = pick(rng);
      const Assignment a = derive_routing(inst, p);
      if (!check_feasibility(inst, a).feasible()) continue;
      CHECK(sol.cost.total <= total_cost(inst, a).total + 1e-9);
    }
  }
}

TEST_CASE("lower bound is admissible and exact on complete placements") {
  const auto net = make_network(build_topology({}));
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const Instance inst = generate_instance(net, 4, {}, seed);
    const OptimalSolution sol = solve_exact(inst);
    CHECK(placement_lower_bound(inst, Placement(4, kUnassigned)) <= sol.cost.total + 1e-9);

    const Placement full = sol.assignment.placement();
    CHECK(placement_lower_bound(inst, full) ==
          doctest::Approx(total_cost(inst, derive_routing(inst, full)).total));

    // Fix two flows at random and compare against every completion.
    std::uniform_int_distribution<int> pick(-1, inst.num_ecs() - 1);
    Placement partial(4, kUnassigned);
    partial[0] = pick(rng);
    partial[2] = pick(rng);
    const double bound = placement_lower_bound(inst, partial);
    for (int a = -1; a < inst.num_ecs(); ++a) {
      for (int b = -1; b < inst.num_ecs(); ++b) {
        Placement p = partial;
        p[1] = a;
        p[3] = b;
        const Assignment asg = derive_routing(inst, p);
        if (!check_feasibility(inst, asg).feasible()) continue;
        CHECK(bound <= total_cost(inst, asg).total + 1e-9);
      }
    }
  }
}

TEST_CASE("node limit yields a bounded incumbent") {
  const Instance inst = generate_instance(make_network(build_topology({})), 8, {}, 2);
  SolverOptions opt;
  opt.node_limit = 5;
  const OptimalSolution sol = solve_exact(inst, opt);
  CHECK(sol.proof == SearchProof::kBounded);
  CHECK(check_feasibility(inst, sol.assignment).feasible());
  CHECK(solve_exact(inst).cost.total <= sol.cost.total + 1e-9);
}

TEST_CASE("exported MILP: census, objective and feasibility of the optimum") {
  const auto net = make_network(build_topology({}));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance inst = generate_instance(net, 5, {}, seed);
    const std::string text = export_milp(inst);
    const LpModel lp = parse_lp(text);
    const MilpCensus census = milp_census(5, 8, 6, 14);
    CHECK(census.variables == 376);
    CHECK(census.constraints() == 541);
    CHECK(static_cast<long>(lp.variables.size()) == census.variables);
    CHECK(static_cast<long>(lp.rows.size()) == census.constraints());
    CHECK(static_cast<long>(lp.binaries.size()) == census.binaries);

    const OptimalSolution sol = solve_exact(inst);
    const double m = default_big_m(inst);
    const auto point = lp_point(inst, sol.assignment, m);
    CHECK(lp.objective_value(point) == doctest::Approx(sol.cost.total).epsilon(1e-12));
    CHECK(lp.max_violation(point) < 1e-9);
  }
}

TEST_CASE("default big-M covers t_e for whole-number sizes") {
  const Instance inst = generate_instance(make_network(build_topology({})), 5, {}, 1);
  double wmax = 0;
  for (double w : inst.ec_space()) wmax = std::max(wmax, w);
  CHECK(default_big_m(inst) == std::max(50.0, wmax));
  const std::string text = export_milp(inst, MilpOptions{777});
  CHECK(text.find("M=777") != std::string::npos);
}

TEST_CASE("an infeasible-looking EC still leaves the all-uncached optimum") {
  Matrix<double> p(1, 4, 0.0);
  p(0, 0) = 1.0;
  const Instance inst(small_tree(), p, {50}, {1}, {50, 50, 50}, std::vector<double>(6, 10),
                      0.5, 0.5);
  const OptimalSolution sol = solve_exact(inst);
  CHECK(sol.assignment.placement() == Placement{kUncached});
  CHECK(sol.cost.total == doctest::Approx(0.5 * 12));
}

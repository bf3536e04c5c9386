#include "cachecnn/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "cachecnn/serialization.hpp"

namespace cachecnn {
namespace {

// Per-flow quantities that do not depend on the other flows.
struct FlowTable {
  // Transmission cost C^T_k for each option; index E is "uncached".
  std::vector<std::vector<double>> transmission;
  // ARs retrieving from e when flow k is hosted at e.
  std::vector<std::vector<std::vector<int>>> retrieving;
  // Links with y_kl = 1 when flow k is hosted at e.
  std::vector<std::vector<std::vector<int>>> links;
  // beta * sum of p_ka (N^T - N_ae) over ARs whose path from e crosses l:
  // the extra cost of clearing flow k off link l, indexed [k][e][l].
  std::vector<std::vector<std::vector<double>>> clear_cost;
};

FlowTable tabulate_flows(const Instance& inst) {
  const int num_flows = inst.num_flows();
  const int num_ecs = inst.num_ecs();
  const double nt = inst.datacenter_hops();
  const IncidenceTensor& inc = inst.network().incidence;
  FlowTable t;
  t.transmission.assign(num_flows, std::vector<double>(num_ecs + 1, 0.0));
  t.retrieving.assign(num_flows, std::vector<std::vector<int>>(num_ecs));
  t.links.assign(num_flows, std::vector<std::vector<int>>(num_ecs));
  t.clear_cost.assign(num_flows, std::vector<std::vector<double>>(
                                     num_ecs, std::vector<double>(inst.num_links(), 0.0)));
  for (int k = 0; k < num_flows; ++k) {
    t.transmission[k][num_ecs] = nt;
    for (int e = 0; e < num_ecs; ++e) {
      double hit = 0, retrieved = 0;
      std::vector<std::uint8_t> used(inst.num_links(), 0);
      for (int a = 0; a < inst.num_ars(); ++a) {
        const double p = inst.mobility()(k, a);
        if (p <= 0 || inst.hops(a, e) >= nt) continue;
        hit += p * inst.hops(a, e);
        retrieved += p;
        t.retrieving[k][e].push_back(a);
        for (int l : inc.path_links(a, e)) {
          used[l] = 1;
          t.clear_cost[k][e][l] += inst.beta() * p * (nt - inst.hops(a, e));
        }
      }
      t.transmission[k][e] = hit + (1.0 - retrieved) * nt;
      for (int l = 0; l < inst.num_links(); ++l) {
        if (used[l]) t.links[k][e].push_back(l);
      }
    }
  }
  return t;
}

double ec_factor(double used, double space) { return 1.0 / (1.0 - used / space); }

// Cost of adding flow k to EC e on top of h hosted flows at utilization u:
// its own term plus the rise of the hosted terms, (h + 1) f(u + q) - h f(u)
// with f(U) = 1 / (1 - U). Since f is convex its increments are
// superadditive, so summing this over several new flows at one EC never
// overstates their joint cost.
double marginal_caching(double used, int hosted, double s, double space) {
  const double before = hosted ? hosted * ec_factor(used, space) : 0.0;
  return (hosted + 1) * ec_factor(used + s, space) - before;
}

// alpha * (hosted flows at current t_e) + beta * (committed transmission)
// + for each open flow its cheapest marginal option at current utilization.
double bound_from_state(const Instance& inst, const FlowTable& table,
                        const std::vector<double>& used,
                        const std::vector<int>& hosted, double transmission,
                        const std::vector<int>& open_flows) {
  const double alpha = inst.alpha();
  const double beta = inst.beta();
  const int num_ecs = inst.num_ecs();
  double caching = 0;
  for (int e = 0; e < num_ecs; ++e) {
    if (hosted[e]) caching += hosted[e] * ec_factor(used[e], inst.ec_space()[e]);
  }
  double lb = alpha * caching + beta * transmission;
  for (int k : open_flows) {
    const double s = inst.content_size()[k];
    double best = beta * table.transmission[k][num_ecs];
    for (int e = 0; e < num_ecs; ++e) {
      if (used[e] + s >= inst.ec_space()[e]) continue;
      best = std::min(best, alpha * marginal_caching(used[e], hosted[e], s,
                                                     inst.ec_space()[e]) +
                                beta * table.transmission[k][e]);
    }
    lb += best;
  }
  return lb;
}

class BranchAndBound {
 public:
  BranchAndBound(const Instance& inst, const SolverOptions& options)
      : inst_(inst),
        options_(options),
        num_flows_(inst.num_flows()),
        num_ecs_(inst.num_ecs()),
        table_(tabulate_flows(inst)),
        used_(num_ecs_, 0.0),
        hosted_(num_ecs_, 0),
        link_used_(inst.num_links(), 0.0),
        choice_(num_flows_, kUncached) {
    order_.resize(num_flows_);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
      return inst.content_size()[a] > inst.content_size()[b];
    });
    scratch_.resize(num_flows_);
    best_placement_.assign(num_flows_, kUncached);
    best_cost_ = 0;
    for (int k = 0; k < num_flows_; ++k) {
      best_cost_ += inst.beta() * table_.transmission[k][num_ecs_];
    }
  }

  OptimalSolution run() {
    search(0, 0.0);
    Assignment a = derive_routing(inst_, best_placement_);
    for (const auto& [k, ar] : best_dropped_) {
      for (int e = 0; e < num_ecs_; ++e) a.z(k, ar, e) = 0;
    }
    a.y = derive_links(inst_, a.z);
    OptimalSolution out{std::move(a), {}, nodes_,
                        aborted_ || approximate_ ? SearchProof::kBounded
                                                 : SearchProof::kExhaustive};
    out.cost = total_cost(inst_, out.assignment);
    return out;
  }

 private:
  double tolerance() const { return 1e-12 * (1.0 + std::abs(best_cost_)); }

  // Marginal cost of every feasible option of open flow k, cheapest first.
  void flow_options(int k, std::vector<std::pair<double, int>>& options) const {
    const double s = inst_.content_size()[k];
    options.clear();
    options.emplace_back(inst_.beta() * table_.transmission[k][num_ecs_], num_ecs_);
    for (int e = 0; e < num_ecs_; ++e) {
      if (used_[e] + s >= inst_.ec_space()[e]) continue;
      options.emplace_back(
          inst_.alpha() * marginal_caching(used_[e], hosted_[e], s, inst_.ec_space()[e]) +
              inst_.beta() * table_.transmission[k][e],
          e);
    }
    std::stable_sort(options.begin(), options.end());
  }

  // Branches on the open flow with the largest regret (gap between its two
  // cheapest options); the bound is the committed cost plus every open
  // flow's cheapest marginal option.
  void search(int depth, double transmission) {
    if (aborted_) return;
    if (++nodes_ > options_.node_limit) {
      aborted_ = true;
      return;
    }
    if (depth == num_flows_) {
      evaluate_leaf(transmission);
      return;
    }
    double committed = 0;
    for (int e = 0; e < num_ecs_; ++e) {
      if (hosted_[e]) committed += hosted_[e] * ec_factor(used_[e], inst_.ec_space()[e]);
    }
    committed = inst_.alpha() * committed + inst_.beta() * transmission +
                reroute_lower_bound(depth);
    if (committed >= best_cost_ - tolerance()) return;

    std::vector<std::pair<double, int>>& options = scratch_[depth];
    std::vector<std::pair<double, int>> candidate;
    double rest = 0;
    double best_regret = -1;
    int pick = -1;
    for (std::size_t i = depth; i < order_.size(); ++i) {
      const int k = order_[i];
      flow_options(k, candidate);
      rest += candidate.front().first;
      const double regret = candidate.size() > 1
                                ? candidate[1].first - candidate[0].first
                                : std::numeric_limits<double>::max();
      if (regret > best_regret) {
        best_regret = regret;
        pick = static_cast<int>(i);
        options.swap(candidate);
      }
    }
    if (committed + rest >= best_cost_ - tolerance()) return;

    std::swap(order_[depth], order_[pick]);
    const int k = order_[depth];
    const double s = inst_.content_size()[k];
    const double bw = inst_.bandwidth()[k];
    const double others = rest - options.front().first;
    for (const auto& [local, o] : options) {
      // Options are sorted, so later ones cannot pass this test either.
      if (committed + others + local >= best_cost_ - tolerance()) break;
      if (o == num_ecs_) {
        choice_[k] = kUncached;
        search(depth + 1, transmission + table_.transmission[k][o]);
        continue;
      }
      used_[o] += s;
      ++hosted_[o];
      for (int l : table_.links[k][o]) link_used_[l] += bw;
      choice_[k] = o;
      search(depth + 1, transmission + table_.transmission[k][o]);
      for (int l : table_.links[k][o]) link_used_[l] -= bw;
      --hosted_[o];
      used_[o] -= s;
    }
    choice_[k] = kUncached;
    std::swap(order_[depth], order_[pick]);
  }

  // Loads only grow as flows are added, so an overload among the committed
  // flows must be cleared by dropping some of their retrievals. Per link,
  // the cheapest fractional removal of the excess bandwidth bounds that
  // cost; the largest over links is a valid bound for all of them.
  double reroute_lower_bound(int depth) {
    double bound = 0;
    for (int l = 0; l < inst_.num_links(); ++l) {
      const double excess = link_used_[l] - inst_.link_capacity()[l];
      if (excess <= 0) continue;
      auto& items = knapsack_;
      items.clear();
      for (int i = 0; i < depth; ++i) {
        const int k = order_[i];
        const int e = choice_[k];
        if (e == kUncached) continue;
        const double c = table_.clear_cost[k][e][l];
        if (c > 0) items.emplace_back(c / inst_.bandwidth()[k], inst_.bandwidth()[k]);
      }
      std::sort(items.begin(), items.end());
      double need = excess, cost = 0;
      for (const auto& [ratio, weight] : items) {
        const double take = std::min(need, weight);
        cost += ratio * take;
        need -= take;
        if (need <= 0) break;
      }
      bound = std::max(bound, cost);
    }
    return bound;
  }

  void evaluate_leaf(double transmission) {
    double caching = 0;
    for (int e = 0; e < num_ecs_; ++e) {
      if (hosted_[e]) caching += hosted_[e] * ec_factor(used_[e], inst_.ec_space()[e]);
    }
    const double cost = inst_.alpha() * caching + inst_.beta() * transmission;
    if (cost >= best_cost_ - tolerance()) return;

    std::vector<int> violated;
    for (int l = 0; l < inst_.num_links(); ++l) {
      if (link_used_[l] > inst_.link_capacity()[l]) violated.push_back(l);
    }
    if (violated.empty()) {
      best_cost_ = cost;
      best_placement_ = choice_;
      best_dropped_.clear();
      return;
    }
    reroute(cost, violated);
  }

  // Some links are overloaded: pick the cheapest set of (flow, AR)
  // retrievals to send to the data center instead.
  void reroute(double base_cost, const std::vector<int>& violated) {
    const IncidenceTensor& inc = inst_.network().incidence;
    const double nt = inst_.datacenter_hops();
    struct Pair {
      int flow, ar, ec;
      double extra;
    };
    std::vector<Pair> pairs;
    // Path multiplicity per (flow, link) among retained retrievals.
    std::vector<std::vector<int>> multiplicity(
        num_flows_, std::vector<int>(inst_.num_links(), 0));
    for (int k = 0; k < num_flows_; ++k) {
      const int e = choice_[k];
      if (e == kUncached) continue;
      for (int a : table_.retrieving[k][e]) {
        bool crosses = false;
        for (int l : inc.path_links(a, e)) {
          ++multiplicity[k][l];
          crosses = crosses || std::find(violated.begin(), violated.end(), l) !=
                                   violated.end();
        }
        if (crosses) {
          pairs.push_back({k, a, e, inst_.beta() * inst_.mobility()(k, a) *
                                        (nt - inst_.hops(a, e))});
        }
      }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& a, const Pair& b) { return a.extra < b.extra; });

    std::vector<double> load = link_used_;
    auto drop = [&](const Pair& p, int delta) {
      for (int l : inc.path_links(p.ar, p.ec)) {
        if (delta < 0) {
          if (--multiplicity[p.flow][l] == 0) load[l] -= inst_.bandwidth()[p.flow];
        } else {
          if (multiplicity[p.flow][l]++ == 0) load[l] += inst_.bandwidth()[p.flow];
        }
      }
    };
    auto overloaded = [&] {
      for (int l : violated) {
        if (load[l] > inst_.link_capacity()[l]) return true;
      }
      return false;
    };

    std::vector<std::pair<int, int>> dropped;
    if (static_cast<int>(pairs.size()) > options_.max_reroute_pairs) {
      approximate_ = true;
      double extra = 0;
      for (const Pair& p : pairs) {
        if (!overloaded()) break;
        drop(p, -1);
        dropped.emplace_back(p.flow, p.ar);
        extra += p.extra;
      }
      if (base_cost + extra < best_cost_ - tolerance()) {
        best_cost_ = base_cost + extra;
        best_placement_ = choice_;
        best_dropped_ = dropped;
      }
      return;
    }

    // Include/exclude enumeration, pruned on the running extra cost.
    std::function<void(std::size_t, double)> visit = [&](std::size_t i, double extra) {
      if (base_cost + extra >= best_cost_ - tolerance()) return;
      if (!overloaded()) {
        best_cost_ = base_cost + extra;
        best_placement_ = choice_;
        best_dropped_ = dropped;
        return;
      }
      if (i == pairs.size()) return;
      visit(i + 1, extra);
      drop(pairs[i], -1);
      dropped.emplace_back(pairs[i].flow, pairs[i].ar);
      visit(i + 1, extra + pairs[i].extra);
      dropped.pop_back();
      drop(pairs[i], +1);
    };
    visit(0, 0.0);
  }

  const Instance& inst_;
  const SolverOptions& options_;
  const int num_flows_;
  const int num_ecs_;
  const FlowTable table_;
  std::vector<int> order_;
  std::vector<std::vector<std::pair<double, int>>> scratch_;
  std::vector<std::pair<double, double>> knapsack_;
  std::vector<double> used_;
  std::vector<int> hosted_;
  std::vector<double> link_used_;
  Placement choice_;

  double best_cost_;
  Placement best_placement_;
  std::vector<std::pair<int, int>> best_dropped_;
  std::int64_t nodes_ = 0;
  bool aborted_ = false;
  bool approximate_ = false;
};

void append_term(std::ostringstream& out, double coef, const std::string& var,
                 bool& first) {
  if (coef == 0) return;
  if (coef < 0) {
    out << (first ? "- " : " - ");
    coef = -coef;
  } else if (!first) {
    out << " + ";
  }
  if (coef != 1) out << format_exact(coef) << ' ';
  out << var;
  first = false;
}

std::string var_x(int k, int e) { return "x_" + std::to_string(k) + "_" + std::to_string(e); }
std::string var_y(int k, int l) { return "y_" + std::to_string(k) + "_" + std::to_string(l); }
std::string var_z(int k, int a, int e) {
  return "z_" + std::to_string(k) + "_" + std::to_string(a) + "_" + std::to_string(e);
}
std::string var_t(int e) { return "t_" + std::to_string(e); }
std::string var_chi(int k, int e) {
  return "chi_" + std::to_string(k) + "_" + std::to_string(e);
}

}  // namespace

OptimalSolution solve_exact(const Instance& instance, const SolverOptions& options) {
  return BranchAndBound(instance, options).run();
}

double placement_lower_bound(const Instance& instance, const Placement& partial) {
  if (static_cast<int>(partial.size()) != instance.num_flows()) {
    throw Error("placement_lower_bound: wrong length");
  }
  const FlowTable table = tabulate_flows(instance);
  std::vector<double> used(instance.num_ecs(), 0.0);
  std::vector<int> hosted(instance.num_ecs(), 0);
  std::vector<int> open;
  double transmission = 0;
  for (int k = 0; k < instance.num_flows(); ++k) {
    if (partial[k] == kUnassigned) {
      open.push_back(k);
    } else if (partial[k] == kUncached) {
      transmission += table.transmission[k][instance.num_ecs()];
    } else {
      used[partial[k]] += instance.content_size()[k];
      ++hosted[partial[k]];
      transmission += table.transmission[k][partial[k]];
    }
  }
  return bound_from_state(instance, table, used, hosted, transmission, open);
}

double default_big_m(const Instance& instance) {
  double m = std::max(10.0 * instance.num_flows(),
                      static_cast<double>(instance.num_ars()));
  auto whole = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return x == std::floor(x); });
  };
  if (whole(instance.content_size()) && whole(instance.ec_space())) {
    // U_e < 1 with whole sizes means 1 - U_e >= 1/w_e, so t_e <= w_e.
    for (double w : instance.ec_space()) m = std::max(m, w);
  }
  return m;
}

std::string export_milp(const Instance& inst, const MilpOptions& options) {
  const int num_flows = inst.num_flows();
  const int num_ars = inst.num_ars();
  const int num_ecs = inst.num_ecs();
  const int num_links = inst.num_links();
  const double big_m = options.big_m > 0 ? options.big_m : default_big_m(inst);
  const double nt = inst.datacenter_hops();
  const IncidenceTensor& inc = inst.network().incidence;
  const UtilizationRatios ratio = ratios(inst);

  std::ostringstream out;
  out << "\\ proactive edge caching placement\n";
  out << "\\ K=" << num_flows << " A=" << num_ars << " E=" << num_ecs
      << " L=" << num_links << " M=" << format_exact(big_m) << '\n';
  out << "Minimize\n obj: ";
  bool first = true;
  for (int k = 0; k < num_flows; ++k) {
    for (int e = 0; e < num_ecs; ++e) append_term(out, inst.alpha(), var_chi(k, e), first);
  }
  // beta * (sum p N z + sum_k (1 - sum p z) N^T)
  for (int k = 0; k < num_flows; ++k) {
    for (int a = 0; a < num_ars; ++a) {
      for (int e = 0; e < num_ecs; ++e) {
        append_term(out, inst.beta() * inst.mobility()(k, a) * (inst.hops(a, e) - nt),
                    var_z(k, a, e), first);
      }
    }
  }
  const double constant = inst.beta() * nt * num_flows;
  if (first) {
    out << format_exact(constant);
  } else if (constant != 0) {
    out << " + " << format_exact(constant);
  }
  out << "\nSubject To\n";

  auto row = [&](const std::string& name) {
    out << ' ' << name << ": ";
    first = true;
  };
  auto rhs = [&](const char* op, double value) {
    out << ' ' << op << ' ' << format_exact(value) << '\n';
  };

  for (int k = 0; k < num_flows; ++k) {
    row("c10b_" + std::to_string(k));
    for (int e = 0; e < num_ecs; ++e) append_term(out, 1, var_x(k, e), first);
    rhs("<=", 1);
  }
  for (int e = 0; e < num_ecs; ++e) {
    row("c10c_" + std::to_string(e));
    for (int k = 0; k < num_flows; ++k) {
      append_term(out, inst.content_size()[k], var_x(k, e), first);
    }
    rhs("<=", inst.ec_space()[e]);
  }
  for (int k = 0; k < num_flows; ++k) {
    for (int a = 0; a < num_ars; ++a) {
      row("c10d_" + std::to_string(k) + "_" + std::to_string(a));
      for (int e = 0; e < num_ecs; ++e) append_term(out, 1, var_z(k, a, e), first);
      rhs("<=", 1);
    }
  }
  for (int k = 0; k < num_flows; ++k) {
    for (int a = 0; a < num_ars; ++a) {
      for (int e = 0; e < num_ecs; ++e) {
        row("c10e_" + std::to_string(k) + "_" + std::to_string(a) + "_" +
            std::to_string(e));
        append_term(out, 1, var_z(k, a, e), first);
        append_term(out, -1, var_x(k, e), first);
        rhs("<=", 0);
      }
    }
  }
  for (int l = 0; l < num_links; ++l) {
    row("c10f_" + std::to_string(l));
    for (int k = 0; k < num_flows; ++k) {
      append_term(out, inst.bandwidth()[k], var_y(k, l), first);
    }
    rhs("<=", inst.link_capacity()[l]);
  }
  for (int k = 0; k < num_flows; ++k) {
    for (int l = 0; l < num_links; ++l) {
      const std::string suffix = std::to_string(k) + "_" + std::to_string(l);
      row("c10g_" + suffix);
      append_term(out, 1, var_y(k, l), first);
      for (int a = 0; a < num_ars; ++a) {
        for (int e = 0; e < num_ecs; ++e) {
          if (inc.on_path(l, a, e)) append_term(out, -1, var_z(k, a, e), first);
        }
      }
      rhs("<=", 0);
      row("c10h_" + suffix);
      append_term(out, big_m, var_y(k, l), first);
      for (int a = 0; a < num_ars; ++a) {
        for (int e = 0; e < num_ecs; ++e) {
          if (inc.on_path(l, a, e)) append_term(out, -1, var_z(k, a, e), first);
        }
      }
      rhs(">=", 0);
    }
  }
  for (int e = 0; e < num_ecs; ++e) {
    row("c10i_" + std::to_string(e));
    append_term(out, 1, var_t(e), first);
    for (int k = 0; k < num_flows; ++k) {
      append_term(out, -ratio.q(k, e), var_chi(k, e), first);
    }
    rhs("=", 1);
  }
  for (int k = 0; k < num_flows; ++k) {
    for (int e = 0; e < num_ecs; ++e) {
      const std::string suffix = std::to_string(k) + "_" + std::to_string(e);
      row("c10j_" + suffix);
      append_term(out, 1, var_chi(k, e), first);
      append_term(out, -1, var_t(e), first);
      rhs("<=", 0);
      row("c10k_" + suffix);
      append_term(out, 1, var_chi(k, e), first);
      append_term(out, -big_m, var_x(k, e), first);
      rhs("<=", 0);
      // chi >= M (x - 1) + t
      row("c10l_" + suffix);
      append_term(out, 1, var_chi(k, e), first);
      append_term(out, -big_m, var_x(k, e), first);
      append_term(out, -1, var_t(e), first);
      rhs(">=", -big_m);
    }
  }

  // t_e > 0; the t-definition row already forces t_e >= 1.
  out << "Bounds\n";
  for (int e = 0; e < num_ecs; ++e) out << ' ' << var_t(e) << " >= 1\n";
  for (int k = 0; k < num_flows; ++k) {
    for (int e = 0; e < num_ecs; ++e) out << ' ' << var_chi(k, e) << " >= 0\n";
  }
  out << "Binaries\n";
  for (int k = 0; k < num_flows; ++k) {
    for (int e = 0; e < num_ecs; ++e) out << ' ' << var_x(k, e) << '\n';
  }
  for (int k = 0; k < num_flows; ++k) {
    for (int l = 0; l < num_links; ++l) out << ' ' << var_y(k, l) << '\n';
  }
  for (int k = 0; k < num_flows; ++k) {
    for (int a = 0; a < num_ars; ++a) {
      for (int e = 0; e < num_ecs; ++e) out << ' ' << var_z(k, a, e) << '\n';
    }
  }
  out << "End\n";
  return out.str();
}

}  // namespace cachecnn

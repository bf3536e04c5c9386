#include "cachecnn/cost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cachecnn {
namespace {

constexpr int kFixedPointMaxIterations = 10'000'000;

std::vector<int> hosts_per_ec(const Matrix<std::uint8_t>& x) {
  std::vector<int> n(x.cols(), 0);
  for (int k = 0; k < x.rows(); ++k) {
    for (int e = 0; e < x.cols(); ++e) n[e] += x(k, e) != 0;
  }
  return n;
}

void check_shape(const Instance& instance, const Assignment& a) {
  const int k = instance.num_flows();
  if (a.x.rows() != k || a.x.cols() != instance.num_ecs() ||
      a.z.dim0() != k || a.z.dim1() != instance.num_ars() ||
      a.z.dim2() != instance.num_ecs() || a.y.rows() != k ||
      a.y.cols() != instance.num_links()) {
    throw Error("assignment shape does not match the instance");
  }
}

CostBreakdown evaluate(const Instance& instance, const Assignment& assignment,
                       const PenaltyOptions& options, bool strict) {
  check_shape(instance, assignment);
  CostBreakdown out;
  out.per_ec_utilization = utilization(instance, assignment.x);
  const std::vector<int> hosts = hosts_per_ec(assignment.x);
  for (int e = 0; e < instance.num_ecs(); ++e) {
    if (hosts[e] == 0) continue;
    double u = out.per_ec_utilization[e];
    if (ec_over_capacity(u)) {
      if (strict) {
        throw CachingCostUndefined("caching cost undefined: EC " +
                                   std::to_string(e) + " is at or above capacity");
      }
      u = options.clamp_utilization;
    }
    out.caching += hosts[e] / (1.0 - u);
  }
  const TransmissionCost t = transmission_cost(instance, assignment);
  out.transmission = t.total;
  out.hit = t.hit;
  out.miss = t.miss;
  out.total = instance.alpha() * out.caching + instance.beta() * out.transmission;

  const std::vector<double> loads = link_loads(instance, assignment.y);
  double violation = 0;
  if (options.form == PenaltyForm::kPerResource) {
    for (double u : out.per_ec_utilization) violation += std::max(0.0, u - 1.0);
    for (double l : loads) violation += std::max(0.0, l - 1.0);
  } else {
    double u_sum = 0, l_sum = 0;
    for (double u : out.per_ec_utilization) u_sum += u;
    for (double l : loads) l_sum += l;
    violation = std::max(0.0, (u_sum - 1.0) + (l_sum - 1.0));
  }
  out.penalty = options.gamma * violation;
  out.penalized_total = out.total + out.penalty;
  out.feasible = check_feasibility(instance, assignment).feasible();
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

Assignment Assignment::empty(const Instance& instance) {
  const int k = instance.num_flows();
  return Assignment{Matrix<std::uint8_t>(k, instance.num_ecs(), 0),
                    Tensor3<std::uint8_t>(k, instance.num_ars(),
                                          instance.num_ecs(), 0),
                    Matrix<std::uint8_t>(k, instance.num_links(), 0)};
}

Placement Assignment::placement() const {
  Placement out(x.rows(), kUncached);
  for (int k = 0; k < x.rows(); ++k) {
    for (int e = 0; e < x.cols(); ++e) {
      if (!x(k, e)) continue;
      if (out[k] != kUncached) {
        throw Error("assignment: flow " + std::to_string(k) + " has several hosts");
      }
      out[k] = e;
    }
  }
  return out;
}

Matrix<std::uint8_t> placement_matrix(const Instance& instance,
                                      const Placement& placement) {
  if (static_cast<int>(placement.size()) != instance.num_flows()) {
    throw Error("placement length does not match the flow count");
  }
  Matrix<std::uint8_t> x(instance.num_flows(), instance.num_ecs(), 0);
  for (int k = 0; k < instance.num_flows(); ++k) {
    const int e = placement[k];
    if (e == kUncached) continue;
    if (e < 0 || e >= instance.num_ecs()) throw Error("placement: EC out of range");
    x(k, e) = 1;
  }
  return x;
}

std::vector<double> utilization(const Instance& instance,
                                const Matrix<std::uint8_t>& x) {
  // sum_k s_k x_ke / w_e is sum_k q_ke x_ke with a single rounding, so an
  // exactly full EC reads as 1.0.
  std::vector<double> used(instance.num_ecs(), 0.0);
  for (int k = 0; k < x.rows(); ++k) {
    for (int e = 0; e < x.cols(); ++e) {
      if (x(k, e)) used[e] += instance.content_size()[k];
    }
  }
  for (int e = 0; e < instance.num_ecs(); ++e) used[e] /= instance.ec_space()[e];
  return used;
}

bool ec_over_capacity(double utilization) { return utilization >= 1.0; }

double caching_cost(const Instance& instance, const Matrix<std::uint8_t>& x) {
  const std::vector<double> u = utilization(instance, x);
  const std::vector<int> hosts = hosts_per_ec(x);
  double total = 0;
  for (int e = 0; e < instance.num_ecs(); ++e) {
    if (hosts[e] == 0) continue;
    if (ec_over_capacity(u[e])) {
      throw CachingCostUndefined("caching cost undefined: EC " +
                                 std::to_string(e) + " is at or above capacity");
    }
    total += hosts[e] / (1.0 - u[e]);
  }
  return total;
}

LinearizedCaching linearized_caching(const Instance& instance,
                                     const Matrix<std::uint8_t>& x,
                                     double big_m) {
  const UtilizationRatios r = ratios(instance);
  const int num_flows = instance.num_flows();
  const int num_ecs = instance.num_ecs();
  LinearizedCaching out{std::vector<double>(num_ecs, 1.0),
                        Matrix<double>(num_flows, num_ecs, 0.0), 0, 0};
  for (int e = 0; e < num_ecs; ++e) {
    double load = 0;
    for (int k = 0; k < num_flows; ++k) load += x(k, e) ? r.q(k, e) : 0.0;
    if (load >= 1.0) throw CachingCostUndefined("linearized caching: EC over capacity");
    // t <- 1 + sum_k q_ke chi_ke with chi_ke = t x_ke is a contraction with
    // rate `load`.
    double t = 1.0;
    for (int it = 0; it < kFixedPointMaxIterations; ++it) {
      double next = 1.0;
      for (int k = 0; k < num_flows; ++k) {
        if (x(k, e)) next += r.q(k, e) * t;
      }
      const bool done = std::abs(next - t) <= 1e-15 * next;
      t = next;
      if (done) break;
    }
    out.t[e] = t;
    double equality = t;
    for (int k = 0; k < num_flows; ++k) {
      const double chi = x(k, e) ? t : 0.0;
      out.chi(k, e) = chi;
      out.total += chi;
      equality -= r.q(k, e) * chi;
      out.residual = std::max(out.residual, chi - t);
      out.residual = std::max(out.residual, chi - big_m * x(k, e));
      out.residual = std::max(out.residual, big_m * (x(k, e) - 1.0) + t - chi);
    }
    out.residual = std::max(out.residual, std::abs(equality - 1.0));
  }
  return out;
}

Assignment derive_routing(const Instance& instance,
                          const Matrix<std::uint8_t>& x) {
  Assignment out = Assignment::empty(instance);
  out.x = x;
  const int nt = instance.datacenter_hops();
  for (int k = 0; k < instance.num_flows(); ++k) {
    for (int a = 0; a < instance.num_ars(); ++a) {
      if (instance.mobility()(k, a) <= 0) continue;
      int best = -1;
      for (int e = 0; e < instance.num_ecs(); ++e) {
        if (!x(k, e)) continue;
        if (best < 0 || instance.hops(a, e) < instance.hops(a, best)) best = e;
      }
      if (best >= 0 && instance.hops(a, best) < nt) out.z(k, a, best) = 1;
    }
  }
  out.y = derive_links(instance, out.z);
  return out;
}

Assignment derive_routing(const Instance& instance, const Placement& placement) {
  return derive_routing(instance, placement_matrix(instance, placement));
}

Matrix<std::uint8_t> derive_links(const Instance& instance,
                                  const Tensor3<std::uint8_t>& z) {
  const IncidenceTensor& inc = instance.network().incidence;
  Matrix<std::uint8_t> y(instance.num_flows(), instance.num_links(), 0);
  for (int k = 0; k < instance.num_flows(); ++k) {
    for (int a = 0; a < instance.num_ars(); ++a) {
      for (int e = 0; e < instance.num_ecs(); ++e) {
        if (!z(k, a, e)) continue;
        for (int l : inc.path_links(a, e)) y(k, l) = 1;
      }
    }
  }
  return y;
}

std::vector<double> link_loads(const Instance& instance,
                               const Matrix<std::uint8_t>& y) {
  std::vector<double> load(instance.num_links(), 0.0);
  for (int k = 0; k < y.rows(); ++k) {
    for (int l = 0; l < y.cols(); ++l) {
      if (y(k, l)) load[l] += instance.bandwidth()[k];
    }
  }
  for (int l = 0; l < instance.num_links(); ++l) load[l] /= instance.link_capacity()[l];
  return load;
}

TransmissionCost transmission_cost(const Instance& instance,
                                   const Assignment& assignment) {
  TransmissionCost out;
  const double nt = instance.datacenter_hops();
  for (int k = 0; k < instance.num_flows(); ++k) {
    double retrieved = 0;
    for (int a = 0; a < instance.num_ars(); ++a) {
      const double p = instance.mobility()(k, a);
      for (int e = 0; e < instance.num_ecs(); ++e) {
        if (!assignment.z(k, a, e)) continue;
        out.hit += p * instance.hops(a, e);
        retrieved += p;
      }
    }
    out.miss += (1.0 - retrieved) * nt;
  }
  out.total = out.hit + out.miss;
  return out;
}

CostBreakdown total_cost(const Instance& instance, const Assignment& assignment) {
  return evaluate(instance, assignment, PenaltyOptions{}, /*strict=*/true);
}

CostBreakdown penalized_cost(const Instance& instance,
                             const Assignment& assignment,
                             const PenaltyOptions& options) {
  return evaluate(instance, assignment, options, /*strict=*/false);
}

FeasibilityReport check_feasibility(const Instance& instance,
                                    const Assignment& a) {
  check_shape(instance, a);
  FeasibilityReport r;
  const int num_flows = instance.num_flows();
  const int num_ars = instance.num_ars();
  const int num_ecs = instance.num_ecs();
  const int num_links = instance.num_links();
  const IncidenceTensor& inc = instance.network().incidence;

  for (int k = 0; k < num_flows; ++k) {
    int hosts = 0;
    for (int e = 0; e < num_ecs; ++e) hosts += a.x(k, e) != 0;
    if (hosts > 1) r.single_host = false;
  }
  for (int e = 0; e < num_ecs; ++e) {
    double used = 0;
    for (int k = 0; k < num_flows; ++k) {
      if (a.x(k, e)) used += instance.content_size()[k];
    }
    // t_e = 1/(1 - U_e) must exist, so a full EC is infeasible too.
    if (used > 0 && used >= instance.ec_space()[e]) r.ec_capacity = false;
  }
  for (int k = 0; k < num_flows; ++k) {
    for (int ar = 0; ar < num_ars; ++ar) {
      int fetched = 0;
      for (int e = 0; e < num_ecs; ++e) {
        fetched += a.z(k, ar, e) != 0;
        if (a.z(k, ar, e) && !a.x(k, e)) r.retrieval_hosted = false;
      }
      if (fetched > 1) r.unique_retrieval = false;
    }
  }
  for (int l = 0; l < num_links; ++l) {
    double used = 0;
    for (int k = 0; k < num_flows; ++k) {
      if (a.y(k, l)) used += instance.bandwidth()[k];
    }
    if (used > instance.link_capacity()[l]) r.link_capacity = false;
  }
  for (int k = 0; k < num_flows; ++k) {
    for (int l = 0; l < num_links; ++l) {
      int through = 0;
      for (int ar = 0; ar < num_ars; ++ar) {
        for (int e = 0; e < num_ecs; ++e) {
          through += inc.on_path(l, ar, e) && a.z(k, ar, e);
        }
      }
      if ((through >= 1) != (a.y(k, l) != 0)) r.link_path_consistent = false;
    }
  }
  return r;
}

std::string cost_csv_header() { return "method,TC,C^C,C^H,C^M,penalty,feasible"; }

std::string cost_csv_row(const std::string& method, const CostBreakdown& cost) {
  return method + "," + fmt_double(cost.total) + "," + fmt_double(cost.caching) +
         "," + fmt_double(cost.hit) + "," + fmt_double(cost.miss) + "," +
         fmt_double(cost.penalty) + "," + (cost.feasible ? "1" : "0");
}

}  // namespace cachecnn

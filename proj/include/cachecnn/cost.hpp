#ifndef CACHECNN_COST_HPP_
#define CACHECNN_COST_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cachecnn/common.hpp"
#include "cachecnn/instance.hpp"

namespace cachecnn {

// Placement class of a flow that is not cached anywhere.
inline constexpr int kUncached = -1;

// Hosting EC per flow, or kUncached. A placement satisfies the single-host
// constraint by construction.
using Placement = std::vector<int>;

// The three binary decision families: x (flow -> EC), z (flow, AR -> EC
// retrieval) and y (flow -> link usage).
struct Assignment {
  Matrix<std::uint8_t> x;   // K x E
  Tensor3<std::uint8_t> z;  // K x A x E
  Matrix<std::uint8_t> y;   // K x L

  static Assignment empty(const Instance& instance);

  // Hosting EC per flow; throws if a flow has more than one host.
  Placement placement() const;

  bool operator==(const Assignment&) const = default;
};

// Thrown when 1/(1 - U_e) is evaluated at U_e >= 1.
class CachingCostUndefined : public Error {
 public:
  using Error::Error;
};

Matrix<std::uint8_t> placement_matrix(const Instance& instance,
                                      const Placement& placement);

// U_e = sum_k q_ke x_ke.
std::vector<double> utilization(const Instance& instance,
                                const Matrix<std::uint8_t>& x);
bool ec_over_capacity(double utilization);

// C^C = sum_e n_e / (1 - U_e), where n_e is the number of flows at e.
double caching_cost(const Instance& instance, const Matrix<std::uint8_t>& x);

// The auxiliary-variable form of the caching cost: t_e solved from
// t_e - sum_k q_ke chi_ke = 1 by fixed-point iteration, chi_ke = t_e x_ke,
// C^C = sum chi. `residual` is the largest violation of the linking
// constraints (equality row and the three big-M rows).
struct LinearizedCaching {
  std::vector<double> t;
  Matrix<double> chi;
  double total = 0;
  double residual = 0;
};
LinearizedCaching linearized_caching(const Instance& instance,
                                     const Matrix<std::uint8_t>& x,
                                     double big_m);

// Cost-minimal retrieval for a fixed x: every (k, a) with p_ka > 0 fetches
// from the nearest host of flow k when that beats a data-center miss.
// y follows exactly from z.
Assignment derive_routing(const Instance& instance,
                          const Matrix<std::uint8_t>& x);
Assignment derive_routing(const Instance& instance, const Placement& placement);

// y_kl = 1 iff some retrieval path of flow k uses link l.
Matrix<std::uint8_t> derive_links(const Instance& instance,
                                  const Tensor3<std::uint8_t>& z);

// Per-link load sum_k r_kl y_kl.
std::vector<double> link_loads(const Instance& instance,
                               const Matrix<std::uint8_t>& y);

struct TransmissionCost {
  double total = 0;
  double hit = 0;
  double miss = 0;
};
TransmissionCost transmission_cost(const Instance& instance,
                                   const Assignment& assignment);

struct CostBreakdown {
  double caching = 0;       // C^C
  double transmission = 0;  // C^T
  double hit = 0;           // C^H
  double miss = 0;          // C^M
  double total = 0;         // TC
  double penalty = 0;
  double penalized_total = 0;  // TC^N
  bool feasible = true;
  std::vector<double> per_ec_utilization;
};

// TC = alpha C^C + beta C^T. Throws CachingCostUndefined on an overfull EC.
CostBreakdown total_cost(const Instance& instance, const Assignment& assignment);

enum class PenaltyForm {
  // gamma * (sum_e max(0, U_e - 1) + sum_l max(0, load_l - 1))
  kPerResource,
  // gamma * max(0, (sum_e U_e - 1) + (sum_l load_l - 1)), aggregated over
  // all resources. Positive for many feasible placements.
  kAggregate,
};

struct PenaltyOptions {
  double gamma = 20.0;
  PenaltyForm form = PenaltyForm::kPerResource;
  // An overfull EC's caching summand is priced as if U_e were this value.
  double clamp_utilization = 0.99;
};

// TC^N. Always finite; equals TC on feasible assignments.
CostBreakdown penalized_cost(const Instance& instance,
                             const Assignment& assignment,
                             const PenaltyOptions& options = {});

struct FeasibilityReport {
  bool single_host = true;           // sum_e x_ke <= 1
  bool ec_capacity = true;           // sum_k s_k x_ke < w_e
  bool unique_retrieval = true;      // sum_e z_kae <= 1
  bool retrieval_hosted = true;      // z_kae <= x_ke
  bool link_capacity = true;         // sum_k b_k y_kl <= c_l
  bool link_path_consistent = true;  // y_kl = [sum B_lae z_kae >= 1]

  bool feasible() const {
    return single_host && ec_capacity && unique_retrieval && retrieval_hosted &&
           link_capacity && link_path_consistent;
  }
};
FeasibilityReport check_feasibility(const Instance& instance,
                                    const Assignment& assignment);

// CSV with columns method,TC,C^C,C^H,C^M,penalty,feasible.
std::string cost_csv_header();
std::string cost_csv_row(const std::string& method, const CostBreakdown& cost);

}  // namespace cachecnn

#endif  // CACHECNN_COST_HPP_

#ifndef CACHECNN_INSTANCE_HPP_
#define CACHECNN_INSTANCE_HPP_

#include <cstdint>
#include <memory>
#include <vector>

#include "cachecnn/common.hpp"
#include "cachecnn/topology.hpp"

namespace cachecnn {

// Sampling intervals for generated instances. Sizes are MB, rates Mbps.
struct InstanceRanges {
  double size_min = 10, size_max = 50;            // s_k
  double ec_space_min = 100, ec_space_max = 500;  // w_e
  double bandwidth_min = 1, bandwidth_max = 10;   // b_k
  double link_min = 50, link_max = 100;           // c_l
  double alpha_min = 0, alpha_max = 1;
  double beta_min = 0, beta_max = 1;
  // Draw s, w, b, c as whole numbers.
  bool integral = true;
  // Each flow's mobility is spread over this many distinct ARs.
  int support_min = 2, support_max = 4;
  // Total probability of the flow appearing anywhere in the region.
  double presence_min = 0.8, presence_max = 1.0;
  // Crowding: each instance picks a hotspot AR and a flow's ARs are drawn
  // with weight exp(-hotspot * hops to it). 0 draws them uniformly.
  double hotspot = 0;
  // Background utilization: every EC and link independently starts with a
  // fraction u ~ U[preload_min, preload_max] of its capacity taken, so
  // instances span different network utilization levels.
  double preload_min = 0, preload_max = 0;
};

// One caching problem over a shared network.
class Instance {
 public:
  Instance(std::shared_ptr<const Network> network, Matrix<double> mobility,
           std::vector<double> content_size, std::vector<double> bandwidth,
           std::vector<double> ec_space, std::vector<double> link_capacity,
           double alpha, double beta);

  const Network& network() const { return *network_; }
  const std::shared_ptr<const Network>& network_ptr() const { return network_; }
  const Topology& topology() const { return network_->topology; }

  int num_flows() const { return mobility_.rows(); }
  int num_ars() const { return mobility_.cols(); }
  int num_ecs() const { return static_cast<int>(ec_space_.size()); }
  int num_links() const { return static_cast<int>(link_capacity_.size()); }

  const Matrix<double>& mobility() const { return mobility_; }  // p_ka
  const std::vector<double>& content_size() const { return content_size_; }
  const std::vector<double>& bandwidth() const { return bandwidth_; }
  const std::vector<double>& ec_space() const { return ec_space_; }
  const std::vector<double>& link_capacity() const { return link_capacity_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  int hops(int ar, int ec) const { return network_->hops(ar, ec); }
  int datacenter_hops() const { return topology().datacenter_hops(); }

  // Same network and capacities, keeping only `flows` in the given order.
  Instance select_flows(const std::vector<int>& flows) const;
  // Same flows, different capacities.
  Instance with_capacities(std::vector<double> ec_space,
                           std::vector<double> link_capacity) const;

  bool operator==(const Instance& other) const;

 private:
  std::shared_ptr<const Network> network_;
  Matrix<double> mobility_;
  std::vector<double> content_size_;
  std::vector<double> bandwidth_;
  std::vector<double> ec_space_;
  std::vector<double> link_capacity_;
  double alpha_;
  double beta_;
};

Instance generate_instance(std::shared_ptr<const Network> network,
                           int num_flows, const InstanceRanges& ranges,
                           std::uint64_t seed);

// q_ke = s_k / w_e and r_kl = b_k / c_l.
struct UtilizationRatios {
  Matrix<double> q;
  Matrix<double> r;
};

UtilizationRatios ratios(const Instance& instance);

}  // namespace cachecnn

#endif  // CACHECNN_INSTANCE_HPP_

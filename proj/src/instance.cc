#include "cachecnn/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace cachecnn {
namespace {

constexpr double kMobilitySlack = 1e-9;

void require_positive(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!(x > 0) || !std::isfinite(x)) {
      throw Error(std::string("instance: ") + what + " must be positive and finite");
    }
  }
}

double draw(std::mt19937_64& rng, double lo, double hi, bool integral) {
  if (hi < lo) throw Error("generate_instance: empty range");
  if (integral) {
    const auto ilo = static_cast<long long>(std::ceil(lo));
    const auto ihi = static_cast<long long>(std::floor(hi));
    if (ilo <= ihi) {
      return static_cast<double>(
          std::uniform_int_distribution<long long>(ilo, ihi)(rng));
    }
  }
  if (hi == lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

Instance::Instance(std::shared_ptr<const Network> network,
                   Matrix<double> mobility, std::vector<double> content_size,
                   std::vector<double> bandwidth, std::vector<double> ec_space,
                   std::vector<double> link_capacity, double alpha,
                   double beta)
    : network_(std::move(network)),
      mobility_(std::move(mobility)),
      content_size_(std::move(content_size)),
      bandwidth_(std::move(bandwidth)),
      ec_space_(std::move(ec_space)),
      link_capacity_(std::move(link_capacity)),
      alpha_(alpha),
      beta_(beta) {
  if (!network_) throw Error("instance: null network");
  const Topology& t = network_->topology;
  const int k = mobility_.rows();
  if (k == 0) throw Error("instance: no flows");
  if (mobility_.cols() != t.num_access_routers()) {
    throw Error("instance: mobility width does not match the AR count");
  }
  if (static_cast<int>(content_size_.size()) != k ||
      static_cast<int>(bandwidth_.size()) != k) {
    throw Error("instance: per-flow vectors do not match the flow count");
  }
  if (num_ecs() != t.num_edge_clouds()) throw Error("instance: EC count mismatch");
  if (num_links() != t.num_links()) throw Error("instance: link count mismatch");
  for (int f = 0; f < k; ++f) {
    double total = 0;
    for (double p : mobility_.row(f)) {
      if (!(p >= 0 && p <= 1)) throw Error("instance: mobility outside [0,1]");
      total += p;
    }
    if (total > 1 + kMobilitySlack) throw Error("instance: mobility row sums above 1");
  }
  require_positive(content_size_, "content size");
  require_positive(bandwidth_, "bandwidth");
  require_positive(ec_space_, "EC space");
  require_positive(link_capacity_, "link capacity");
  if (!(alpha_ >= 0 && alpha_ <= 1) || !(beta_ >= 0 && beta_ <= 1)) {
    throw Error("instance: cost weights must lie in [0,1]");
  }
}

Instance Instance::select_flows(const std::vector<int>& flows) const {
  Matrix<double> p(static_cast<int>(flows.size()), num_ars());
  std::vector<double> s, b;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const int f = flows[i];
    if (f < 0 || f >= num_flows()) throw Error("select_flows: flow out of range");
    std::copy(mobility_.row(f).begin(), mobility_.row(f).end(),
              p.row(static_cast<int>(i)).begin());
    s.push_back(content_size_[f]);
    b.push_back(bandwidth_[f]);
  }
  return Instance(network_, std::move(p), std::move(s), std::move(b), ec_space_,
                  link_capacity_, alpha_, beta_);
}

Instance Instance::with_capacities(std::vector<double> ec_space,
                                   std::vector<double> link_capacity) const {
  return Instance(network_, mobility_, content_size_, bandwidth_,
                  std::move(ec_space), std::move(link_capacity), alpha_, beta_);
}

bool Instance::operator==(const Instance& other) const {
  return network_->topology == other.network_->topology &&
         mobility_ == other.mobility_ && content_size_ == other.content_size_ &&
         bandwidth_ == other.bandwidth_ && ec_space_ == other.ec_space_ &&
         link_capacity_ == other.link_capacity_ && alpha_ == other.alpha_ &&
         beta_ == other.beta_;
}

Instance generate_instance(std::shared_ptr<const Network> network,
                           int num_flows, const InstanceRanges& ranges,
                           std::uint64_t seed) {
  if (num_flows <= 0) throw Error("generate_instance: num_flows must be positive");
  if (!network) throw Error("generate_instance: null network");
  const Topology& t = network->topology;
  const int num_ars = t.num_access_routers();
  std::mt19937_64 rng(seed);

  const int support_lo = std::clamp(ranges.support_min, 1, num_ars);
  const int support_hi = std::clamp(ranges.support_max, support_lo, num_ars);

  // AR weights exp(-hotspot * hops to the hotspot AR); uniform when 0.
  std::vector<double> locality(num_ars, 1.0);
  if (ranges.hotspot > 0) {
    const int h = std::uniform_int_distribution<int>(0, num_ars - 1)(rng);
    const std::vector<int> dist = t.distances_from(t.access_routers()[h]);
    for (int a = 0; a < num_ars; ++a) {
      locality[a] = std::exp(-ranges.hotspot * dist[t.access_routers()[a]]);
    }
  }

  Matrix<double> p(num_flows, num_ars, 0.0);
  std::vector<int> ars(num_ars);
  std::exponential_distribution<double> gamma1(1.0);
  for (int k = 0; k < num_flows; ++k) {
    const int support =
        std::uniform_int_distribution<int>(support_lo, support_hi)(rng);
    std::iota(ars.begin(), ars.end(), 0);
    for (int i = 0; i < support; ++i) {
      int pick;
      if (ranges.hotspot > 0) {
        // Weighted draw without replacement among ars[i..].
        std::vector<double> wts;
        for (int j = i; j < num_ars; ++j) wts.push_back(locality[ars[j]]);
        pick = i + std::discrete_distribution<int>(wts.begin(), wts.end())(rng);
      } else {
        pick = std::uniform_int_distribution<int>(i, num_ars - 1)(rng);
      }
      std::swap(ars[i], ars[pick]);
    }
    // Normalized Gamma(1) draws give a flat Dirichlet over the support.
    std::vector<double> w(support);
    double total = 0;
    for (double& x : w) {
      x = gamma1(rng) + 1e-12;
      total += x;
    }
    const double presence =
        draw(rng, ranges.presence_min, ranges.presence_max, false);
    for (int i = 0; i < support; ++i) p(k, ars[i]) = presence * w[i] / total;
  }

  std::vector<double> size(num_flows), bandwidth(num_flows);
  for (int k = 0; k < num_flows; ++k) {
    size[k] = draw(rng, ranges.size_min, ranges.size_max, ranges.integral);
    bandwidth[k] =
        draw(rng, ranges.bandwidth_min, ranges.bandwidth_max, ranges.integral);
  }
  std::vector<double> space(t.num_edge_clouds());
  for (double& w : space) {
    w = draw(rng, ranges.ec_space_min, ranges.ec_space_max, ranges.integral);
  }
  std::vector<double> capacity(t.num_links());
  for (double& c : capacity) {
    c = draw(rng, ranges.link_min, ranges.link_max, ranges.integral);
  }
  const double alpha = draw(rng, ranges.alpha_min, ranges.alpha_max, false);
  const double beta = draw(rng, ranges.beta_min, ranges.beta_max, false);
  if (ranges.preload_max > 0) {
    if (!(ranges.preload_min >= 0 && ranges.preload_max < 1)) {
      throw Error("generate_instance: preload must lie in [0, 1)");
    }
    auto consume = [&](std::vector<double>& caps) {
      for (double& c : caps) {
        const double u = draw(rng, ranges.preload_min, ranges.preload_max, false);
        c *= 1.0 - u;
        if (ranges.integral) c = std::max(1.0, std::round(c));
      }
    };
    consume(space);
    consume(capacity);
  }
  return Instance(std::move(network), std::move(p), std::move(size),
                  std::move(bandwidth), std::move(space), std::move(capacity),
                  alpha, beta);
}

UtilizationRatios ratios(const Instance& instance) {
  const int k = instance.num_flows();
  UtilizationRatios out{Matrix<double>(k, instance.num_ecs()),
                        Matrix<double>(k, instance.num_links())};
  for (int f = 0; f < k; ++f) {
    for (int e = 0; e < instance.num_ecs(); ++e) {
      out.q(f, e) = instance.content_size()[f] / instance.ec_space()[e];
    }
    for (int l = 0; l < instance.num_links(); ++l) {
      out.r(f, l) = instance.bandwidth()[f] / instance.link_capacity()[l];
    }
  }
  return out;
}

}  // namespace cachecnn

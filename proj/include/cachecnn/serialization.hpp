#ifndef CACHECNN_SERIALIZATION_HPP_
#define CACHECNN_SERIALIZATION_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>

#include "cachecnn/cost.hpp"
#include "cachecnn/instance.hpp"
#include "cachecnn/topology.hpp"

namespace cachecnn {

// Line-oriented text formats. Every file starts with "<kind> <version>".
//
//   cachecnn-topology 1
//   nodes <n>
//   datacenter_hops <N^T>
//   links <L>
//   <u> <v>                  (L lines, sorted)
//   access_routers <A> <ids...>
//   edge_clouds <E> <ids...>
//
//   cachecnn-instance 1
//   <topology block>
//   flows <K>
//   alpha <a>
//   beta <b>
//   content_size <K values>
//   bandwidth <K values>
//   ec_space <E values>
//   link_capacity <L values>
//   mobility                 (K lines of A values)
//
//   cachecnn-assignment 1
//   shape <K> <A> <E> <L>
//   x <count>   then <k> <e> per line
//   z <count>   then <k> <a> <e> per line
//   y <count>   then <k> <l> per line
//
// Reals are written with 17 significant digits so reading back is exact.
inline constexpr int kTopologyFormatVersion = 1;
inline constexpr int kInstanceFormatVersion = 1;
inline constexpr int kAssignmentFormatVersion = 1;

void write_topology(std::ostream& out, const Topology& topology);
Topology read_topology(std::istream& in);

void write_instance(std::ostream& out, const Instance& instance);
Instance read_instance(std::istream& in);

void write_assignment(std::ostream& out, const Assignment& assignment);
Assignment read_assignment(std::istream& in);

void save_topology(const std::filesystem::path& path, const Topology& topology);
Topology load_topology(const std::filesystem::path& path);
void save_instance(const std::filesystem::path& path, const Instance& instance);
Instance load_instance(const std::filesystem::path& path);

// %.17g
std::string format_exact(double value);

}  // namespace cachecnn

#endif  // CACHECNN_SERIALIZATION_HPP_

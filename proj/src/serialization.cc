#include "cachecnn/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace cachecnn {
namespace {

void expect_word(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw Error("parse error: expected '" + word + "', got '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v;
  if (!(in >> v)) throw Error(std::string("parse error: bad ") + what);
  return v;
}

void expect_header(std::istream& in, const std::string& kind, int version) {
  expect_word(in, kind);
  const int v = read_value<int>(in, "version");
  if (v != version) {
    throw Error(kind + ": unsupported version " + std::to_string(v));
  }
}

std::vector<double> read_reals(std::istream& in, int n, const char* what) {
  std::vector<double> out(n);
  for (double& v : out) v = read_value<double>(in, what);
  return out;
}

void write_reals(std::ostream& out, const char* key, const std::vector<double>& v) {
  out << key;
  for (double x : v) out << ' ' << format_exact(x);
  out << '\n';
}

Topology read_topology_body(std::istream& in) {
  expect_word(in, "nodes");
  const int nodes = read_value<int>(in, "node count");
  expect_word(in, "datacenter_hops");
  const int nt = read_value<int>(in, "datacenter hops");
  expect_word(in, "links");
  const int num_links = read_value<int>(in, "link count");
  if (num_links < 0) throw Error("topology: negative link count");
  std::vector<Link> links(num_links);
  for (Link& l : links) {
    l.first = read_value<int>(in, "link endpoint");
    l.second = read_value<int>(in, "link endpoint");
  }
  auto read_ids = [&](const char* key) {
    expect_word(in, key);
    const int n = read_value<int>(in, "id count");
    if (n < 0) throw Error("topology: negative id count");
    std::vector<int> ids(n);
    for (int& id : ids) id = read_value<int>(in, "router id");
    return ids;
  };
  std::vector<int> ars = read_ids("access_routers");
  std::vector<int> ecs = read_ids("edge_clouds");
  return Topology(nodes, std::move(links), std::move(ars), std::move(ecs), nt);
}

void write_topology_body(std::ostream& out, const Topology& t) {
  out << "nodes " << t.num_nodes() << '\n';
  out << "datacenter_hops " << t.datacenter_hops() << '\n';
  out << "links " << t.num_links() << '\n';
  for (const Link& l : t.links()) out << l.first << ' ' << l.second << '\n';
  out << "access_routers " << t.num_access_routers();
  for (int id : t.access_routers()) out << ' ' << id;
  out << "\nedge_clouds " << t.num_edge_clouds();
  for (int id : t.edge_clouds()) out << ' ' << id;
  out << '\n';
}

}  // namespace

std::string format_exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_topology(std::ostream& out, const Topology& topology) {
  out << "cachecnn-topology " << kTopologyFormatVersion << '\n';
  write_topology_body(out, topology);
}

Topology read_topology(std::istream& in) {
  expect_header(in, "cachecnn-topology", kTopologyFormatVersion);
  return read_topology_body(in);
}

void write_instance(std::ostream& out, const Instance& instance) {
  out << "cachecnn-instance " << kInstanceFormatVersion << '\n';
  write_topology_body(out, instance.topology());
  out << "flows " << instance.num_flows() << '\n';
  out << "alpha " << format_exact(instance.alpha()) << '\n';
  out << "beta " << format_exact(instance.beta()) << '\n';
  write_reals(out, "content_size", instance.content_size());
  write_reals(out, "bandwidth", instance.bandwidth());
  write_reals(out, "ec_space", instance.ec_space());
  write_reals(out, "link_capacity", instance.link_capacity());
  out << "mobility\n";
  for (int k = 0; k < instance.num_flows(); ++k) {
    const auto row = instance.mobility().row(k);
    for (std::size_t a = 0; a < row.size(); ++a) {
      out << (a ? " " : "") << format_exact(row[a]);
    }
    out << '\n';
  }
}

Instance read_instance(std::istream& in) {
  expect_header(in, "cachecnn-instance", kInstanceFormatVersion);
  auto network = make_network(read_topology_body(in));
  const Topology& t = network->topology;
  expect_word(in, "flows");
  const int k = read_value<int>(in, "flow count");
  if (k <= 0) throw Error("instance: flow count must be positive");
  expect_word(in, "alpha");
  const double alpha = read_value<double>(in, "alpha");
  expect_word(in, "beta");
  const double beta = read_value<double>(in, "beta");
  expect_word(in, "content_size");
  std::vector<double> s = read_reals(in, k, "content size");
  expect_word(in, "bandwidth");
  std::vector<double> b = read_reals(in, k, "bandwidth");
  expect_word(in, "ec_space");
  std::vector<double> w = read_reals(in, t.num_edge_clouds(), "EC space");
  expect_word(in, "link_capacity");
  std::vector<double> c = read_reals(in, t.num_links(), "link capacity");
  expect_word(in, "mobility");
  Matrix<double> p(k, t.num_access_routers());
  for (double& v : p.data()) v = read_value<double>(in, "mobility");
  return Instance(std::move(network), std::move(p), std::move(s), std::move(b),
                  std::move(w), std::move(c), alpha, beta);
}

void write_assignment(std::ostream& out, const Assignment& a) {
  out << "cachecnn-assignment " << kAssignmentFormatVersion << '\n';
  out << "shape " << a.x.rows() << ' ' << a.z.dim1() << ' ' << a.x.cols() << ' '
      << a.y.cols() << '\n';
  auto count = [](const std::vector<std::uint8_t>& v) {
    int n = 0;
    for (auto b : v) n += b != 0;
    return n;
  };
  out << "x " << count(a.x.data()) << '\n';
  for (int k = 0; k < a.x.rows(); ++k) {
    for (int e = 0; e < a.x.cols(); ++e) {
      if (a.x(k, e)) out << k << ' ' << e << '\n';
    }
  }
  out << "z " << count(a.z.data()) << '\n';
  for (int k = 0; k < a.z.dim0(); ++k) {
    for (int ar = 0; ar < a.z.dim1(); ++ar) {
      for (int e = 0; e < a.z.dim2(); ++e) {
        if (a.z(k, ar, e)) out << k << ' ' << ar << ' ' << e << '\n';
      }
    }
  }
  out << "y " << count(a.y.data()) << '\n';
  for (int k = 0; k < a.y.rows(); ++k) {
    for (int l = 0; l < a.y.cols(); ++l) {
      if (a.y(k, l)) out << k << ' ' << l << '\n';
    }
  }
}

Assignment read_assignment(std::istream& in) {
  expect_header(in, "cachecnn-assignment", kAssignmentFormatVersion);
  expect_word(in, "shape");
  const int k = read_value<int>(in, "K");
  const int a = read_value<int>(in, "A");
  const int e = read_value<int>(in, "E");
  const int l = read_value<int>(in, "L");
  Assignment out{Matrix<std::uint8_t>(k, e, 0), Tensor3<std::uint8_t>(k, a, e, 0),
                 Matrix<std::uint8_t>(k, l, 0)};
  auto in_range = [](int v, int n) {
    if (v < 0 || v >= n) throw Error("assignment: index out of range");
    return v;
  };
  expect_word(in, "x");
  for (int n = read_value<int>(in, "count"); n > 0; --n) {
    const int f = in_range(read_value<int>(in, "k"), k);
    out.x(f, in_range(read_value<int>(in, "e"), e)) = 1;
  }
  expect_word(in, "z");
  for (int n = read_value<int>(in, "count"); n > 0; --n) {
    const int f = in_range(read_value<int>(in, "k"), k);
    const int ar = in_range(read_value<int>(in, "a"), a);
    out.z(f, ar, in_range(read_value<int>(in, "e"), e)) = 1;
  }
  expect_word(in, "y");
  for (int n = read_value<int>(in, "count"); n > 0; --n) {
    const int f = in_range(read_value<int>(in, "k"), k);
    out.y(f, in_range(read_value<int>(in, "l"), l)) = 1;
  }
  return out;
}

void save_topology(const std::filesystem::path& path, const Topology& topology) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_topology(out, topology);
}

Topology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return read_topology(in);
}

void save_instance(const std::filesystem::path& path, const Instance& instance) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_instance(out, instance);
}

Instance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return read_instance(in);
}

}  // namespace cachecnn

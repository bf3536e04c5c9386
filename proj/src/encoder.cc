#include "cachecnn/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "cachecnn/serialization.hpp"

namespace cachecnn {
namespace {

double scale_cell(double v, double max, bool saturate, const char* block, int row,
                  int col) {
  const double scaled = v / max;
  if (scaled >= 0 && scaled <= 1) return scaled;
  if (saturate) return std::clamp(scaled, 0.0, 1.0);
  throw Error(std::string("encode: ") + block + " cell (" + std::to_string(row) +
              ", " + std::to_string(col) + ") = " + format_exact(v) +
              " is outside [0, " + format_exact(max) + "]");
}

}  // namespace

NormalizationConfig NormalizationConfig::from_ranges(const InstanceRanges& r) {
  if (r.ec_space_min <= 0 || r.link_min <= 0) {
    throw Error("normalization needs positive capacity minima");
  }
  NormalizationConfig n;
  n.q_max = r.size_max / r.ec_space_min;
  n.r_max = r.bandwidth_max / r.link_min;
  // Preloaded capacities fall below the range minima.
  n.saturate = r.preload_max > 0;
  return n;
}

std::uint64_t NormalizationConfig::fingerprint() const {
  const std::string s = format_exact(q_max) + ' ' + format_exact(r_max) +
                        (saturate ? " saturate" : "");
  return Fnv1a64(s);
}

FeatureImage encode(const Instance& inst, const NormalizationConfig& norm) {
  const int k = inst.num_flows();
  const int na = inst.num_ars();
  const int ne = inst.num_ecs();
  const int nl = inst.num_links();
  FeatureImage f;
  f.norm = norm;
  f.blocks = {0, na, na, na + ne, na + ne, na + ne + nl};
  f.values = Matrix<double>(k, na + ne + nl);
  f.phantom.assign(k, 0);
  for (int row = 0; row < k; ++row) {
    for (int a = 0; a < na; ++a) f.values(row, a) = inst.mobility()(row, a);
    const double s = inst.content_size()[row];
    const double b = inst.bandwidth()[row];
    for (int e = 0; e < ne; ++e) {
      f.values(row, na + e) =
          scale_cell(s / inst.ec_space()[e], norm.q_max, norm.saturate, "Q", row, e);
    }
    for (int l = 0; l < nl; ++l) {
      f.values(row, na + ne + l) = scale_cell(b / inst.link_capacity()[l],
                                              norm.r_max, norm.saturate, "R", row, l);
    }
  }
  return f;
}

GrayImage to_grayscale(const Matrix<double>& values) {
  GrayImage g{values.cols(), values.rows(), {}};
  g.pixels.reserve(values.data().size());
  for (double v : values.data()) {
    const double c = std::clamp(v, 0.0, 1.0);
    g.pixels.push_back(static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - c))));
  }
  return g;
}

Matrix<double> from_grayscale(const GrayImage& g) {
  Matrix<double> m(g.height, g.width);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    m.data()[i] = 1.0 - g.pixels[i] / 255.0;
  }
  return m;
}

void write_pgm(std::ostream& out, const GrayImage& g) {
  out << "P5\n" << g.width << ' ' << g.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(g.pixels.data()),
            static_cast<std::streamsize>(g.pixels.size()));
}

GrayImage read_pgm(std::istream& in) {
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) return tok;
      } else {
        tok += c;
      }
    }
    return tok;
  };
  if (next_token() != "P5") throw Error("PGM: expected P5 magic");
  GrayImage g;
  try {
    g.width = std::stoi(next_token());
    g.height = std::stoi(next_token());
    if (std::stoi(next_token()) != 255) throw Error("PGM: maxval must be 255");
  } catch (const std::logic_error&) {
    throw Error("PGM: malformed header");
  }
  if (g.width <= 0 || g.height <= 0) throw Error("PGM: bad dimensions");
  g.pixels.resize(static_cast<std::size_t>(g.width) * g.height);
  in.read(reinterpret_cast<char*>(g.pixels.data()),
          static_cast<std::streamsize>(g.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(g.pixels.size())) {
    throw Error("PGM: truncated pixel data");
  }
  return g;
}

void save_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_pgm(out, image);
}

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return read_pgm(in);
}

void write_feature_csv(std::ostream& out, const FeatureImage& f) {
  const BlockBounds& b = f.blocks;
  out << "#blocks,P," << b.p_begin << ',' << b.p_end << ",Q," << b.q_begin << ','
      << b.q_end << ",R," << b.r_begin << ',' << b.r_end << '\n';
  out << "#norm," << format_exact(f.norm.q_max) << ',' << format_exact(f.norm.r_max)
      << '\n';
  for (int r = 0; r < f.rows(); ++r) {
    for (int c = 0; c < f.cols(); ++c) {
      out << (c ? "," : "") << format_exact(f.values(r, c));
    }
    out << '\n';
  }
}

FeatureImage read_feature_csv(std::istream& in) {
  FeatureImage f;
  std::string line;
  auto fields = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
  };
  try {
    if (!std::getline(in, line)) throw Error("feature CSV: empty");
    auto h = fields(line);
    if (h.size() != 10 || h[0] != "#blocks" || h[1] != "P" || h[4] != "Q" ||
        h[7] != "R") {
      throw Error("feature CSV: bad #blocks line");
    }
    f.blocks = {std::stoi(h[2]), std::stoi(h[3]), std::stoi(h[5]),
                std::stoi(h[6]), std::stoi(h[8]), std::stoi(h[9])};
    if (!std::getline(in, line)) throw Error("feature CSV: missing #norm line");
    auto n = fields(line);
    if (n.size() != 3 || n[0] != "#norm") throw Error("feature CSV: bad #norm line");
    f.norm.q_max = std::stod(n[1]);
    f.norm.r_max = std::stod(n[2]);
    const int cols = f.blocks.r_end;
    std::vector<double> data;
    int rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cells = fields(line);
      if (static_cast<int>(cells.size()) != cols) {
        throw Error("feature CSV: row " + std::to_string(rows) + " has " +
                    std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(cols));
      }
      for (const auto& c : cells) data.push_back(std::stod(c));
      ++rows;
    }
    f.values = Matrix<double>(rows, cols);
    f.values.data() = std::move(data);
    f.phantom.assign(rows, 0);
  } catch (const std::logic_error&) {
    throw Error("feature CSV: malformed number");
  }
  return f;
}

std::vector<FeatureImage> split_subimages(const FeatureImage& f, int rows_per_block) {
  if (rows_per_block <= 0) throw Error("split_subimages: block height must be positive");
  std::vector<FeatureImage> out;
  for (int start = 0; start < f.rows(); start += rows_per_block) {
    FeatureImage part;
    part.blocks = f.blocks;
    part.norm = f.norm;
    part.values = Matrix<double>(rows_per_block, f.cols(), 0.0);
    part.phantom.assign(rows_per_block, 1);
    for (int r = 0; r < rows_per_block && start + r < f.rows(); ++r) {
      const auto src = f.values.row(start + r);
      std::copy(src.begin(), src.end(), part.values.row(r).begin());
      part.phantom[r] = f.phantom.empty() ? 0 : f.phantom[start + r];
    }
    out.push_back(std::move(part));
  }
  return out;
}

Instance update_residual(const Instance& inst, const Assignment& committed,
                         ResidualMode mode) {
  if (committed.x.rows() != inst.num_flows() || committed.x.cols() != inst.num_ecs() ||
      committed.y.rows() != inst.num_flows() ||
      committed.y.cols() != inst.num_links()) {
    throw Error("update_residual: assignment shape does not match the instance");
  }
  std::vector<double> w = inst.ec_space();
  std::vector<double> c = inst.link_capacity();
  for (int e = 0; e < inst.num_ecs(); ++e) {
    double used = 0;
    for (int k = 0; k < inst.num_flows(); ++k) {
      if (committed.x(k, e)) used += inst.content_size()[k];
    }
    if (used > 0 && used >= w[e] && mode == ResidualMode::kStrict) {
      throw Error("update_residual: EC " + std::to_string(e) + " is overfull (" +
                  format_exact(used) + " >= " + format_exact(w[e]) + ")");
    }
    w[e] = std::max(w[e] - used, kResidualFloor);
  }
  for (int l = 0; l < inst.num_links(); ++l) {
    double used = 0;
    for (int k = 0; k < inst.num_flows(); ++k) {
      if (committed.y(k, l)) used += inst.bandwidth()[k];
    }
    if (used > c[l] && mode == ResidualMode::kStrict) {
      throw Error("update_residual: link " + std::to_string(l) + " is overloaded (" +
                  format_exact(used) + " > " + format_exact(c[l]) + ")");
    }
    c[l] = std::max(c[l] - used, kResidualFloor);
  }
  return inst.with_capacities(std::move(w), std::move(c));
}

}  // namespace cachecnn

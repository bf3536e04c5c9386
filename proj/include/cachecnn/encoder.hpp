#ifndef CACHECNN_ENCODER_HPP_
#define CACHECNN_ENCODER_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cachecnn/common.hpp"
#include "cachecnn/cost.hpp"
#include "cachecnn/instance.hpp"

namespace cachecnn {

// Q and R cells are divided by fixed maxima taken from the generation
// ranges: q_max = s_max / w_min and r_max = b_max / c_min. Every image
// built with the same config shares one scale.
struct NormalizationConfig {
  double q_max = 0.5;
  double r_max = 0.2;
  // Cells above 1 after scaling are clamped instead of rejected. Used for
  // residual instances whose capacities have been consumed.
  bool saturate = false;

  static NormalizationConfig from_ranges(const InstanceRanges& ranges);
  // Stable hash of the constants, stored in manifests.
  std::uint64_t fingerprint() const;
};

struct BlockBounds {
  int p_begin = 0, p_end = 0;
  int q_begin = 0, q_end = 0;
  int r_begin = 0, r_end = 0;
};

// |K| x (|A| + |E| + |L|) matrix [P | Q | R] with entries in [0, 1].
struct FeatureImage {
  Matrix<double> values;
  BlockBounds blocks;
  NormalizationConfig norm;
  // Rows that pad a sub-image and stand for no flow.
  std::vector<std::uint8_t> phantom;

  int rows() const { return values.rows(); }
  int cols() const { return values.cols(); }
};

// Throws naming the cell when a scaled value leaves [0, 1] and
// norm.saturate is off.
FeatureImage encode(const Instance& instance, const NormalizationConfig& norm);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  bool operator==(const GrayImage&) const = default;
};

// pixel = round(255 (1 - value)): larger values are darker.
GrayImage to_grayscale(const Matrix<double>& values);
Matrix<double> from_grayscale(const GrayImage& image);

// Binary PGM (P5, maxval 255).
void write_pgm(std::ostream& out, const GrayImage& image);
GrayImage read_pgm(std::istream& in);
void save_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage load_pgm(const std::filesystem::path& path);

// CSV: a "#blocks" line with the three column ranges, a "#norm" line, then
// one line per row.
void write_feature_csv(std::ostream& out, const FeatureImage& image);
FeatureImage read_feature_csv(std::istream& in);

// Consecutive row blocks of `rows_per_block`; the last one is padded with
// zero rows marked phantom.
std::vector<FeatureImage> split_subimages(const FeatureImage& image,
                                          int rows_per_block);

enum class ResidualMode {
  kStrict,    // throw when the committed flows exceed a capacity
  kSaturate,  // floor at kResidualFloor
};
inline constexpr double kResidualFloor = 1e-6;

// w_e minus the content committed at e and c_l minus the bandwidth
// committed on l. `committed` has the shape of `instance`; its rows for
// uncommitted flows are zero. Residuals are floored at kResidualFloor so
// the result stays a valid instance.
Instance update_residual(const Instance& instance, const Assignment& committed,
                         ResidualMode mode = ResidualMode::kStrict);

}  // namespace cachecnn

#endif  // CACHECNN_ENCODER_HPP_

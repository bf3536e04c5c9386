#ifndef CACHECNN_CNN_HPP_
#define CACHECNN_CNN_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cachecnn/common.hpp"
#include "cachecnn/cost.hpp"
#include "cachecnn/encoder.hpp"

namespace cachecnn {

// Input height x width (one channel), conv stages of 3x3 filters with
// stride 1 and same padding, each followed by batch norm and ReLU, then
// one dense layer to `classes` logits.
struct CnnArchitecture {
  int height = 0;
  int width = 0;
  int classes = 0;  // |E| + 1; the last class means "uncached"
  std::vector<int> filters = {16, 32, 64};

  bool operator==(const CnnArchitecture&) const = default;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double bn_momentum = 0.9;
  std::uint64_t seed = 1;
  bool shuffle = true;
  // Each sample also trains slot k on flow j's row by swapping rows k and
  // j. Valid because the optimum is equivariant under flow relabeling.
  bool row_swap_augmentation = false;
};

struct TrainingSample {
  FeatureImage image;
  std::vector<int> labels;  // class per flow row: EC index, or |E| if uncached
};

// Class index of each flow: the hosting EC, or num_ecs when uncached.
std::vector<int> labels_from_placement(const Placement& placement, int num_ecs);
Placement placement_from_labels(const std::vector<int>& labels, int num_ecs);

// K x (|E| + 1) predicted class probabilities; row k from model k.
using ProbabilityMatrix = Matrix<double>;

class CnnModel {
 public:
  CnnModel() = default;
  // He-uniform weights, unit BN scale, zero shifts and biases.
  CnnModel(const CnnArchitecture& architecture, int request_index,
           std::uint64_t seed);

  const CnnArchitecture& architecture() const { return arch_; }
  int request_index() const { return request_index_; }

  // Class probabilities with BN in inference mode.
  std::vector<double> forward(const FeatureImage& image) const;
  std::vector<double> forward(const Matrix<double>& image) const;
  int predict(const FeatureImage& image) const;

  // Mean cross-entropy of the batch with BN in training mode. Writes the
  // gradient into `gradient` (resized to parameter_count()) when non-null
  // and folds the batch statistics into the running ones when asked.
  double loss_and_gradient(std::span<const Matrix<double>* const> images,
                           std::span<const int> labels,
                           std::vector<double>* gradient,
                           bool update_running_stats, double momentum = 0.9);

  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  // Named [begin, end) ranges of the flat parameter vector.
  struct ParameterGroup {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;
  };
  std::vector<ParameterGroup> parameter_groups() const;

  // Per-pixel mean subtracted from every input.
  const std::vector<double>& input_mean() const { return input_mean_; }
  void set_input_mean(std::vector<double> mean);

  const std::vector<double>& running_mean() const { return running_mean_; }
  const std::vector<double>& running_var() const { return running_var_; }

  void save(const std::filesystem::path& weights) const;
  static CnnModel load(const std::filesystem::path& weights);
  std::uint64_t fingerprint() const;

  bool operator==(const CnnModel&) const = default;

 private:
  struct Layout {
    std::size_t weights, gamma, beta;  // offsets per stage
    bool operator==(const Layout&) const = default;
  };
  void build_layout();
  Eigen::MatrixXd logits(std::span<const Matrix<double>* const> images) const;

  CnnArchitecture arch_;
  int request_index_ = 0;
  std::vector<double> params_;
  std::vector<double> input_mean_;
  std::vector<double> running_mean_;  // concatenated over stages
  std::vector<double> running_var_;
  std::vector<Layout> layout_;
  std::size_t dense_w_ = 0;
  std::size_t dense_b_ = 0;
};

struct TrainResult {
  CnnModel model;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

// Trains the model for one request slot. Throws when the loss becomes NaN.
TrainResult train(std::span<const TrainingSample> samples, int request_index,
                  const CnnArchitecture& architecture, const TrainConfig& config);

// One model per flow row, trained concurrently on `threads` workers. Slot k
// is seeded from (config.seed, k) so results do not depend on `threads`.
std::vector<TrainResult> train_all(std::span<const TrainingSample> samples,
                                   const CnnArchitecture& architecture,
                                   const TrainConfig& config, int threads = 0);

ProbabilityMatrix predict_all(std::span<const CnnModel> models,
                              const FeatureImage& image);

struct GradientCheckResult {
  double max_relative_error = 0;
  struct Group {
    std::string name;
    int checked = 0;
    double max_relative_error = 0;
  };
  std::vector<Group> groups;
};

// Central differences of the training-mode loss on one image against the
// analytic gradient, over a random `fraction` of the parameters (at least
// `min_per_group` from each group). Relative error is
// |a - n| / max(|a| + |n|, 1e-8).
GradientCheckResult gradient_check(const CnnModel& model, const Matrix<double>& image,
                                   int label, std::uint64_t seed = 1,
                                   double fraction = 0.01, double step = 1e-5,
                                   int min_per_group = 8);

// Layer primitives, exposed for tests.
namespace nn {

// 3x3 same-padded patches: `input` is C x (N H W), the result is
// 9C x (N H W) with row (dy * 3 + dx) * C + c.
Eigen::MatrixXd im2col(const Eigen::MatrixXd& input, int channels, int height,
                       int width, int batch);
// Adjoint of im2col.
Eigen::MatrixXd col2im(const Eigen::MatrixXd& columns, int channels, int height,
                       int width, int batch);
// Single-channel same-padded cross-correlation with a 3x3 kernel.
Matrix<double> convolve_same(const Matrix<double>& image, const Matrix<double>& kernel);

// Per-row standardization with population variance; returns x_hat and
// writes 1 / sqrt(var + eps) per row.
Eigen::MatrixXd batch_normalize(const Eigen::MatrixXd& x, double eps,
                                Eigen::VectorXd* inv_std = nullptr);

// Softmax probabilities and cross-entropy for one logit vector; `grad`
// receives d loss / d logits.
double softmax_cross_entropy(std::span<const double> logits, int label,
                             std::vector<double>* probabilities,
                             std::vector<double>* grad);

inline constexpr double kBatchNormEpsilon = 1e-5;

}  // namespace nn
}  // namespace cachecnn

#endif  // CACHECNN_CNN_HPP_

#include "cachecnn/cnn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace cachecnn {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMap = Eigen::Map<const MatrixXd>;
using MutMap = Eigen::Map<MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;

constexpr char kWeightsMagic[8] = {'C', 'C', 'N', 'N', 'W', 0, 0, 1};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

MatrixXd input_block(std::span<const Matrix<double>* const> images,
                     const std::vector<double>& mean, int hw) {
  MatrixXd x(1, static_cast<Eigen::Index>(images.size()) * hw);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const std::vector<double>& d = images[n]->data();
    for (int i = 0; i < hw; ++i) x(0, n * hw + i) = d[i] - mean[i];
  }
  return x;
}

void check_image(const CnnArchitecture& arch, int rows, int cols) {
  if (rows != arch.height || cols != arch.width) {
    throw Error("CNN input is " + std::to_string(rows) + "x" + std::to_string(cols) +
                ", model expects " + std::to_string(arch.height) + "x" +
                std::to_string(arch.width));
  }
}

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_doubles(std::string& out, const std::vector<double>& v) {
  put(out, static_cast<std::uint64_t>(v.size()));
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
  std::vector<double> doubles() {
    const auto n = get<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw Error("weights: truncated");
    std::vector<double> v(n);
    take(v.data(), n * sizeof(double));
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void take(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw Error("weights: truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string serialize(const CnnModel& m) {
  std::string out(kWeightsMagic, sizeof(kWeightsMagic));
  const CnnArchitecture& a = m.architecture();
  put(out, static_cast<std::int32_t>(a.height));
  put(out, static_cast<std::int32_t>(a.width));
  put(out, static_cast<std::int32_t>(a.classes));
  put(out, static_cast<std::int32_t>(m.request_index()));
  put(out, static_cast<std::int32_t>(a.filters.size()));
  for (int f : a.filters) put(out, static_cast<std::int32_t>(f));
  put_doubles(out, {m.parameters().begin(), m.parameters().end()});
  put_doubles(out, m.input_mean());
  put_doubles(out, m.running_mean());
  put_doubles(out, m.running_var());
  return out;
}

}  // namespace

std::vector<int> labels_from_placement(const Placement& placement, int num_ecs) {
  std::vector<int> labels(placement.size());
  for (std::size_t k = 0; k < placement.size(); ++k) {
    labels[k] = placement[k] == kUncached ? num_ecs : placement[k];
  }
  return labels;
}

Placement placement_from_labels(const std::vector<int>& labels, int num_ecs) {
  Placement p(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] < 0 || labels[k] > num_ecs) throw Error("label out of range");
    p[k] = labels[k] == num_ecs ? kUncached : labels[k];
  }
  return p;
}

namespace nn {

MatrixXd im2col(const MatrixXd& input, int channels, int height, int width, int batch) {
  const int hw = height * width;
  MatrixXd col = MatrixXd::Zero(9 * channels, static_cast<Eigen::Index>(batch) * hw);
  for (int n = 0; n < batch; ++n) {
    for (int h = 0; h < height; ++h) {
      for (int w = 0; w < width; ++w) {
        double* dst = col.col(n * hw + h * width + w).data();
        for (int dy = 0; dy < 3; ++dy) {
          const int sh = h + dy - 1;
          if (sh < 0 || sh >= height) continue;
          for (int dx = 0; dx < 3; ++dx) {
            const int sw = w + dx - 1;
            if (sw < 0 || sw >= width) continue;
            const double* src = input.col(n * hw + sh * width + sw).data();
            std::copy(src, src + channels, dst + (dy * 3 + dx) * channels);
          }
        }
      }
    }
  }
  return col;
}

MatrixXd col2im(const MatrixXd& col, int channels, int height, int width, int batch) {
  const int hw = height * width;
  MatrixXd out = MatrixXd::Zero(channels, static_cast<Eigen::Index>(batch) * hw);
  for (int n = 0; n < batch; ++n) {
    for (int h = 0; h < height; ++h) {
      for (int w = 0; w < width; ++w) {
        const double* src = col.col(n * hw + h * width + w).data();
        for (int dy = 0; dy < 3; ++dy) {
          const int sh = h + dy - 1;
          if (sh < 0 || sh >= height) continue;
          for (int dx = 0; dx < 3; ++dx) {
            const int sw = w + dx - 1;
            if (sw < 0 || sw >= width) continue;
            double* dst = out.col(n * hw + sh * width + sw).data();
            const double* s = src + (dy * 3 + dx) * channels;
            for (int c = 0; c < channels; ++c) dst[c] += s[c];
          }
        }
      }
    }
  }
  return out;
}

Matrix<double> convolve_same(const Matrix<double>& image, const Matrix<double>& kernel) {
  if (kernel.rows() != 3 || kernel.cols() != 3) throw Error("kernel must be 3x3");
  const int h = image.rows(), w = image.cols();
  MatrixXd x(1, h * w);
  for (int i = 0; i < h * w; ++i) x(0, i) = image.data()[i];
  const MatrixXd col = im2col(x, 1, h, w, 1);
  Eigen::RowVectorXd k(9);
  for (int i = 0; i < 9; ++i) k(i) = kernel.data()[i];
  const Eigen::RowVectorXd y = k * col;
  Matrix<double> out(h, w);
  for (int i = 0; i < h * w; ++i) out.data()[i] = y(i);
  return out;
}

MatrixXd batch_normalize(const MatrixXd& x, double eps, VectorXd* inv_std) {
  const VectorXd mean = x.rowwise().mean();
  MatrixXd centered = x.colwise() - mean;
  const VectorXd var = centered.array().square().rowwise().mean();
  const VectorXd is = (var.array() + eps).rsqrt();
  if (inv_std) *inv_std = is;
  return centered.array().colwise() * is.array();
}

double softmax_cross_entropy(std::span<const double> logits, int label,
                             std::vector<double>* probabilities,
                             std::vector<double>* grad) {
  if (label < 0 || label >= static_cast<int>(logits.size())) {
    throw Error("label out of range");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (double z : logits) sum += std::exp(z - top);
  const double log_sum = std::log(sum);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - top) / sum;
  if (grad) {
    *grad = p;
    (*grad)[label] -= 1.0;
  }
  const double loss = log_sum - (logits[label] - top);
  if (probabilities) *probabilities = std::move(p);
  return loss;
}

}  // namespace nn

CnnModel::CnnModel(const CnnArchitecture& arch, int request_index, std::uint64_t seed)
    : arch_(arch), request_index_(request_index) {
  if (arch.height <= 0 || arch.width <= 0 || arch.classes < 2) {
    throw Error("CNN architecture needs a positive input shape and >= 2 classes");
  }
  if (request_index < 0 || request_index >= arch.height) {
    throw Error("request index outside the input rows");
  }
  for (int f : arch.filters) {
    if (f <= 0) throw Error("filter counts must be positive");
  }
  build_layout();
  std::mt19937_64 rng(seed);
  auto he_uniform = [&](std::size_t begin, std::size_t count, int fan_in) {
    std::uniform_real_distribution<double> u(-std::sqrt(6.0 / fan_in),
                                             std::sqrt(6.0 / fan_in));
    for (std::size_t i = 0; i < count; ++i) params_[begin + i] = u(rng);
  };
  int c_in = 1;
  for (std::size_t s = 0; s < arch_.filters.size(); ++s) {
    const int f = arch_.filters[s];
    he_uniform(layout_[s].weights, static_cast<std::size_t>(f) * 9 * c_in, 9 * c_in);
    std::fill_n(params_.begin() + layout_[s].gamma, f, 1.0);
    c_in = f;
  }
  const int d = arch_.height * arch_.width * c_in;
  he_uniform(dense_w_, static_cast<std::size_t>(arch_.classes) * d, d);
}

void CnnModel::build_layout() {
  layout_.clear();
  std::size_t off = 0;
  int c_in = 1;
  int channels = 0;
  for (int f : arch_.filters) {
    Layout l;
    l.weights = off;
    off += static_cast<std::size_t>(f) * 9 * c_in;
    l.gamma = off;
    off += f;
    l.beta = off;
    off += f;
    layout_.push_back(l);
    c_in = f;
    channels += f;
  }
  dense_w_ = off;
  off += static_cast<std::size_t>(arch_.classes) * arch_.height * arch_.width * c_in;
  dense_b_ = off;
  off += arch_.classes;
  params_.assign(off, 0.0);
  input_mean_.assign(static_cast<std::size_t>(arch_.height) * arch_.width, 0.0);
  running_mean_.assign(channels, 0.0);
  running_var_.assign(channels, 1.0);
}

std::vector<CnnModel::ParameterGroup> CnnModel::parameter_groups() const {
  std::vector<ParameterGroup> g;
  for (std::size_t s = 0; s < layout_.size(); ++s) {
    const std::string n = "stage" + std::to_string(s + 1);
    g.push_back({n + ".conv", layout_[s].weights, layout_[s].gamma});
    g.push_back({n + ".bn_scale", layout_[s].gamma, layout_[s].beta});
    g.push_back({n + ".bn_shift", layout_[s].beta,
                 layout_[s].beta + arch_.filters[s]});
  }
  g.push_back({"dense.weights", dense_w_, dense_b_});
  g.push_back({"dense.bias", dense_b_, params_.size()});
  return g;
}

void CnnModel::set_input_mean(std::vector<double> mean) {
  if (mean.size() != input_mean_.size()) throw Error("input mean has the wrong size");
  input_mean_ = std::move(mean);
}

MatrixXd CnnModel::logits(std::span<const Matrix<double>* const> images) const {
  const int hw = arch_.height * arch_.width;
  const int batch = static_cast<int>(images.size());
  for (const Matrix<double>* img : images) check_image(arch_, img->rows(), img->cols());
  MatrixXd a = input_block(images, input_mean_, hw);
  int c_in = 1;
  std::size_t stat = 0;
  for (std::size_t s = 0; s < layout_.size(); ++s) {
    const int f = arch_.filters[s];
    const ConstMap w(params_.data() + layout_[s].weights, f, 9 * c_in);
    MatrixXd z = w * nn::im2col(a, c_in, arch_.height, arch_.width, batch);
    for (int c = 0; c < f; ++c) {
      const double scale = params_[layout_[s].gamma + c] /
                           std::sqrt(running_var_[stat + c] + nn::kBatchNormEpsilon);
      const double shift = params_[layout_[s].beta + c] - running_mean_[stat + c] * scale;
      z.row(c) = (z.row(c).array() * scale + shift).cwiseMax(0.0);
    }
    a = std::move(z);
    c_in = f;
    stat += f;
  }
  const int d = hw * c_in;
  const ConstMap feat(a.data(), d, batch);
  const ConstMap wd(params_.data() + dense_w_, arch_.classes, d);
  const ConstVecMap bd(params_.data() + dense_b_, arch_.classes);
  return (wd * feat).colwise() + bd;
}

std::vector<double> CnnModel::forward(const Matrix<double>& image) const {
  const Matrix<double>* ptr = &image;
  const MatrixXd z = logits({&ptr, 1});
  std::vector<double> p;
  nn::softmax_cross_entropy({z.data(), static_cast<std::size_t>(z.rows())}, 0, &p,
                            nullptr);
  return p;
}

std::vector<double> CnnModel::forward(const FeatureImage& image) const {
  return forward(image.values);
}

int CnnModel::predict(const FeatureImage& image) const {
  const std::vector<double> p = forward(image);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double CnnModel::loss_and_gradient(std::span<const Matrix<double>* const> images,
                                   std::span<const int> labels,
                                   std::vector<double>* gradient,
                                   bool update_running_stats, double momentum) {
  if (images.empty() || images.size() != labels.size()) {
    throw Error("loss_and_gradient: need one label per image");
  }
  for (const Matrix<double>* img : images) check_image(arch_, img->rows(), img->cols());
  const int hw = arch_.height * arch_.width;
  const int batch = static_cast<int>(images.size());
  const Eigen::Index m = static_cast<Eigen::Index>(batch) * hw;

  struct Cache {
    MatrixXd col, xhat, y;
    VectorXd inv_std;
  };
  std::vector<Cache> cache(layout_.size());
  MatrixXd a = input_block(images, input_mean_, hw);
  int c_in = 1;
  std::size_t stat = 0;
  for (std::size_t s = 0; s < layout_.size(); ++s) {
    const int f = arch_.filters[s];
    Cache& c = cache[s];
    c.col = nn::im2col(a, c_in, arch_.height, arch_.width, batch);
    const MatrixXd z = ConstMap(params_.data() + layout_[s].weights, f, 9 * c_in) * c.col;
    c.xhat = nn::batch_normalize(z, nn::kBatchNormEpsilon, &c.inv_std);
    if (update_running_stats) {
      for (int ch = 0; ch < f; ++ch) {
        const double mu = z.row(ch).mean();
        const double var = (z.row(ch).array() - mu).square().mean();
        running_mean_[stat + ch] = momentum * running_mean_[stat + ch] + (1 - momentum) * mu;
        running_var_[stat + ch] = momentum * running_var_[stat + ch] + (1 - momentum) * var;
      }
    }
    const ConstVecMap gamma(params_.data() + layout_[s].gamma, f);
    const ConstVecMap beta(params_.data() + layout_[s].beta, f);
    c.y = (c.xhat.array().colwise() * gamma.array()).colwise() + beta.array();
    a = c.y.cwiseMax(0.0);
    c_in = f;
    stat += f;
  }
  const int d = hw * c_in;
  const ConstMap feat(a.data(), d, batch);
  const ConstMap wd(params_.data() + dense_w_, arch_.classes, d);
  const MatrixXd z =
      (wd * feat).colwise() + ConstVecMap(params_.data() + dense_b_, arch_.classes);

  double loss = 0;
  MatrixXd dlogits(arch_.classes, batch);
  std::vector<double> g;
  for (int n = 0; n < batch; ++n) {
    loss += nn::softmax_cross_entropy({z.col(n).data(), static_cast<std::size_t>(arch_.classes)},
                                      labels[n], nullptr, &g);
    for (int i = 0; i < arch_.classes; ++i) dlogits(i, n) = g[i] / batch;
  }
  loss /= batch;
  if (!gradient) return loss;

  gradient->assign(params_.size(), 0.0);
  double* grad = gradient->data();
  MutMap(grad + dense_w_, arch_.classes, d) = dlogits * feat.transpose();
  Eigen::Map<VectorXd>(grad + dense_b_, arch_.classes) = dlogits.rowwise().sum();
  if (layout_.empty()) return loss;

  MatrixXd da_flat = wd.transpose() * dlogits;  // d x batch
  MatrixXd da = MutMap(da_flat.data(), c_in, m);
  for (std::size_t si = layout_.size(); si-- > 0;) {
    const int f = arch_.filters[si];
    const int c_prev = si == 0 ? 1 : arch_.filters[si - 1];
    Cache& c = cache[si];
    const MatrixXd dy = (c.y.array() > 0).select(da.array(), 0.0).matrix();
    Eigen::Map<VectorXd>(grad + layout_[si].gamma, f) =
        (dy.array() * c.xhat.array()).rowwise().sum();
    Eigen::Map<VectorXd>(grad + layout_[si].beta, f) = dy.rowwise().sum();
    const ConstVecMap gamma(params_.data() + layout_[si].gamma, f);
    const MatrixXd dxhat = dy.array().colwise() * gamma.array();
    const VectorXd sum1 = dxhat.rowwise().sum();
    const VectorXd sum2 = (dxhat.array() * c.xhat.array()).rowwise().sum();
    MatrixXd dz = (static_cast<double>(m) * dxhat).colwise() - sum1;
    dz.array() -= c.xhat.array().colwise() * sum2.array();
    dz.array().colwise() *= c.inv_std.array() / static_cast<double>(m);
    MutMap(grad + layout_[si].weights, f, 9 * c_prev) = dz * c.col.transpose();
    if (si > 0) {
      const ConstMap w(params_.data() + layout_[si].weights, f, 9 * c_prev);
      da = nn::col2im(w.transpose() * dz, c_prev, arch_.height, arch_.width, batch);
    }
  }
  return loss;
}

void CnnModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::string bytes = serialize(*this);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

CnnModel CnnModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < sizeof(kWeightsMagic) ||
      std::memcmp(bytes.data(), kWeightsMagic, sizeof(kWeightsMagic)) != 0) {
    throw Error(path.string() + ": not a CNN weights file (or wrong version)");
  }
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof(kWeightsMagic); ++i) r.get<char>();
  CnnModel m;
  m.arch_.height = r.get<std::int32_t>();
  m.arch_.width = r.get<std::int32_t>();
  m.arch_.classes = r.get<std::int32_t>();
  m.request_index_ = r.get<std::int32_t>();
  const int stages = r.get<std::int32_t>();
  if (m.arch_.height <= 0 || m.arch_.width <= 0 || m.arch_.classes < 2 || stages < 0 ||
      stages > 64) {
    throw Error(path.string() + ": corrupt header");
  }
  m.arch_.filters.resize(stages);
  for (int& f : m.arch_.filters) f = r.get<std::int32_t>();
  m.build_layout();
  auto expect = [&](std::vector<double>& dst) {
    std::vector<double> v = r.doubles();
    if (v.size() != dst.size()) throw Error(path.string() + ": array size mismatch");
    dst = std::move(v);
  };
  expect(m.params_);
  expect(m.input_mean_);
  expect(m.running_mean_);
  expect(m.running_var_);
  if (!r.done()) throw Error(path.string() + ": trailing bytes");
  return m;
}

std::uint64_t CnnModel::fingerprint() const { return Fnv1a64(serialize(*this)); }

TrainResult train(std::span<const TrainingSample> samples, int request_index,
                  const CnnArchitecture& arch, const TrainConfig& cfg) {
  if (samples.empty()) throw Error("train: no samples");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0)) {
    throw Error("train: epochs, batch size and learning rate must be positive");
  }
  for (const TrainingSample& s : samples) {
    check_image(arch, s.image.rows(), s.image.cols());
    if (static_cast<int>(s.labels.size()) != arch.height) {
      throw Error("train: each sample needs one label per row");
    }
  }
  TrainResult result{CnnModel(arch, request_index, cfg.seed), {}};
  CnnModel& model = result.model;

  const int hw = arch.height * arch.width;
  std::vector<double> mean(hw, 0.0);
  for (const TrainingSample& s : samples) {
    for (int i = 0; i < hw; ++i) mean[i] += s.image.values.data()[i];
  }
  for (double& v : mean) v /= static_cast<double>(samples.size());
  model.set_input_mean(mean);

  std::vector<Matrix<double>> images;
  std::vector<int> labels;
  for (const TrainingSample& s : samples) {
    images.push_back(s.image.values);
    labels.push_back(s.labels[request_index]);
    if (!cfg.row_swap_augmentation) continue;
    for (int j = 0; j < arch.height; ++j) {
      if (j == request_index) continue;
      if (!s.image.phantom.empty() && s.image.phantom[j]) continue;
      Matrix<double> swapped = s.image.values;
      auto rk = swapped.row(request_index);
      auto rj = swapped.row(j);
      std::swap_ranges(rk.begin(), rk.end(), rj.begin());
      images.push_back(std::move(swapped));
      labels.push_back(s.labels[j]);
    }
  }
  for (int l : labels) {
    if (l < 0 || l >= arch.classes) throw Error("train: label out of range");
  }

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(splitmix64(cfg.seed));
  const std::size_t n_params = model.parameter_count();
  std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0), grad;
  std::vector<const Matrix<double>*> batch_images;
  std::vector<int> batch_labels;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_images.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_images.push_back(&images[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      const double loss = model.loss_and_gradient(batch_images, batch_labels, &grad,
                                                  true, cfg.bn_momentum);
      epoch_loss += loss * static_cast<double>(end - start);
      ++step;
      const double c1 = 1 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      std::span<double> p = model.parameters();
      for (std::size_t i = 0; i < n_params; ++i) {
        m1[i] = cfg.adam_beta1 * m1[i] + (1 - cfg.adam_beta1) * grad[i];
        m2[i] = cfg.adam_beta2 * m2[i] + (1 - cfg.adam_beta2) * grad[i] * grad[i];
        p[i] -= cfg.learning_rate * (m1[i] / c1) /
                (std::sqrt(m2[i] / c2) + cfg.adam_epsilon);
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw Error("training diverged at epoch " + std::to_string(epoch + 1) +
                  " (request slot " + std::to_string(request_index) + ")");
    }
    result.loss_trace.push_back(epoch_loss);
  }
  return result;
}

std::vector<TrainResult> train_all(std::span<const TrainingSample> samples,
                                   const CnnArchitecture& arch, const TrainConfig& cfg,
                                   int threads) {
  const int slots = arch.height;
  std::vector<TrainResult> results(slots);
  std::vector<std::exception_ptr> errors(slots);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int k = next++; k < slots; k = next++) {
      try {
        TrainConfig c = cfg;
        c.seed = splitmix64(cfg.seed ^ (0x632BE59BD9B4E019ULL * (k + 1)));
        results[k] = train(samples, k, arch, c);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, slots);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

ProbabilityMatrix predict_all(std::span<const CnnModel> models, const FeatureImage& image) {
  if (static_cast<int>(models.size()) != image.rows()) {
    throw Error("predict_all: " + std::to_string(models.size()) + " models for " +
                std::to_string(image.rows()) + " flow rows");
  }
  if (models.empty()) return {};
  ProbabilityMatrix out(image.rows(), models.front().architecture().classes);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const std::vector<double> p = models[k].forward(image);
    if (static_cast<int>(p.size()) != out.cols()) {
      throw Error("predict_all: models disagree on the class count");
    }
    std::copy(p.begin(), p.end(), out.row(static_cast<int>(k)).begin());
  }
  return out;
}

GradientCheckResult gradient_check(const CnnModel& model, const Matrix<double>& image,
                                   int label, std::uint64_t seed, double fraction,
                                   double step, int min_per_group) {
  CnnModel m = model;
  const Matrix<double>* img = &image;
  const std::span<const Matrix<double>* const> imgs(&img, 1);
  const std::span<const int> lbl(&label, 1);
  std::vector<double> analytic;
  m.loss_and_gradient(imgs, lbl, &analytic, false);

  GradientCheckResult result;
  std::mt19937_64 rng(seed);
  std::span<double> p = m.parameters();
  for (const CnnModel::ParameterGroup& g : m.parameter_groups()) {
    const std::size_t size = g.end - g.begin;
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), g.begin);
    const std::size_t want = std::min(
        size, std::max<std::size_t>(min_per_group,
                                    static_cast<std::size_t>(std::ceil(fraction * size))));
    for (std::size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, size - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    GradientCheckResult::Group gr{g.name, static_cast<int>(want), 0.0};
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = idx[i];
      const double saved = p[j];
      p[j] = saved + step;
      const double up = m.loss_and_gradient(imgs, lbl, nullptr, false);
      p[j] = saved - step;
      const double down = m.loss_and_gradient(imgs, lbl, nullptr, false);
      p[j] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic[j];
      const double err = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
      gr.max_relative_error = std::max(gr.max_relative_error, err);
    }
    result.max_relative_error = std::max(result.max_relative_error, gr.max_relative_error);
    result.groups.push_back(gr);
  }
  return result;
}

}  // namespace cachecnn

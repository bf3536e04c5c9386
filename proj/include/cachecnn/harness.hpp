#ifndef CACHECNN_HARNESS_HPP_
#define CACHECNN_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cachecnn/baselines.hpp"
#include "cachecnn/cnn.hpp"
#include "cachecnn/encoder.hpp"
#include "cachecnn/instance.hpp"
#include "cachecnn/lp_format.hpp"
#include "cachecnn/pel.hpp"
#include "cachecnn/solver.hpp"
#include "cachecnn/topology.hpp"

namespace cachecnn {

inline constexpr const char* kVersion = "0.1.0";

// Every knob of the pipeline. alpha and beta are pinned to 0.5 because the
// image does not carry them.
struct ExperimentConfig {
  TopologyConfig topology;
  InstanceRanges ranges;
  int flows = 5;
  int samples = 250;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  SolverOptions solver;
  int threads = 0;  // 0: one per hardware thread

  std::vector<int> filters = {16, 32, 64};
  TrainConfig train;
  PelOptions pel;
  RgcConfig rgc;

  // Held-out larger instances allocated block by block.
  int large_flows = 15;
  int large_instances = 20;
  std::uint64_t large_seed = 2;
  // Reference solutions of the large set keep the best incumbent when the
  // search hits this limit.
  std::int64_t large_node_limit = 5'000'000;

  ExperimentConfig();
};

// JSON text; unknown keys are rejected, missing keys keep their defaults.
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Runs fn(i) for i in [0, n) on `threads` workers; the first exception is
// rethrown after all workers stop.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct LabeledInstance {
  int index = 0;
  std::uint64_t seed = 0;
  Instance instance;
  OptimalSolution solution;
  double solve_seconds = 0;
};

struct Corpus {
  int flows = 0;
  NormalizationConfig norm;
  std::vector<LabeledInstance> train;
  std::vector<LabeledInstance> test;
  std::vector<int> excluded;  // indices whose search hit a budget
};

// Instances seeded derive_seed(seed, i) for i in [0, count), solved
// exactly. Samples without an optimality proof are dropped and listed in
// `excluded` unless `keep_bounded` is set.
std::vector<LabeledInstance> labeled_instances(std::shared_ptr<const Network> network,
                                               int flows, int count,
                                               const InstanceRanges& ranges,
                                               std::uint64_t seed,
                                               const SolverOptions& solver, int threads,
                                               std::vector<int>* excluded = nullptr,
                                               bool keep_bounded = false);

// The first round(samples * train_fraction) indices train, the rest test.
Corpus build_dataset(std::shared_ptr<const Network> network,
                     const ExperimentConfig& config);

// Layout: topology.txt, instances/, solutions/, images/, features/,
// dataset.csv, manifest.json.
void save_corpus(const std::filesystem::path& dir, const Corpus& corpus,
                 const ExperimentConfig& config);
Corpus load_corpus(const std::filesystem::path& dir);
// Columns: index,split,seed,proof,nodes,TC,C^C,C^H,C^M,labels,wall_time.
std::string dataset_csv(const Corpus& corpus);
// Hash of the seeds, splits, labels and normalization; ignores timings.
std::uint64_t corpus_fingerprint(const Corpus& corpus);

// The held-out large set: large_instances instances of large_flows flows
// on an unloaded network (preload zeroed), solved with large_node_limit and
// kept even without a proof.
std::vector<LabeledInstance> large_testset(std::shared_ptr<const Network> network,
                                           const ExperimentConfig& config);

std::vector<TrainingSample> training_samples(const std::vector<LabeledInstance>& set,
                                             const NormalizationConfig& norm);
CnnArchitecture architecture_for(const Instance& instance,
                                 const std::vector<int>& filters);

// Layout: model_<k>.bin, loss.csv, manifest.json.
void save_models(const std::filesystem::path& dir,
                 const std::vector<TrainResult>& results,
                 const ExperimentConfig& config, const NormalizationConfig& norm,
                 std::uint64_t corpus_fingerprint);
std::vector<CnnModel> load_models(const std::filesystem::path& dir);
std::string loss_csv(const std::vector<TrainResult>& results);

struct RecursivePass {
  std::vector<int> flows;  // rows of the full instance handled in this pass
  Instance residual;       // capacities seen by this pass
  Placement placement;     // chosen classes for `flows`
};

// Splits the flows into blocks of the models' input height, runs
// predict_all + enhance per block on the residual instance left by
// earlier blocks, and returns the combined routing on the full instance.
Assignment recursive_allocate(std::span<const CnnModel> models, const Instance& instance,
                              const NormalizationConfig& norm, const PelOptions& pel,
                              std::vector<RecursivePass>* passes = nullptr);

struct MethodSummary {
  std::string method;
  double mean_total_cost = 0;  // mean TC^N
  double precision = 0;
  double feasible_ratio = 0;
  double max_diff = 0;  // max over instances of TC^N - optimal TC
  int instances = 0;
  double wall_time = 0;  // seconds, summed over instances
};

struct InstanceOutcome {
  int instance = 0;
  std::string method;
  CostBreakdown cost;
  int correct = 0;  // flows matching the optimal class
  double diff = 0;
};

struct EvaluationReport {
  int flows = 0;
  int bounded_references = 0;  // reference solutions without a proof
  MilpCensus census;
  std::vector<MethodSummary> methods;
  std::vector<InstanceOutcome> details;
};

struct EvaluationOptions {
  PelOptions pel;
  RgcConfig rgc;  // seed is mixed with the instance index
  NormalizationConfig norm;
  int threads = 0;
};

EvaluationOptions evaluation_options(const ExperimentConfig& config,
                                     const NormalizationConfig& norm);

inline const std::vector<std::string> kMethods = {"optimal", "cnn+pel", "gca", "rgc"};

// Methods in kMethods order. The "optimal" row, precision and max_diff use
// each instance's stored solution and its recorded solve time.
EvaluationReport evaluate(const std::vector<LabeledInstance>& testset,
                          std::span<const CnnModel> models,
                          const EvaluationOptions& options);

// Summary columns: flows,method,mean_total_cost,precision,feasible_ratio,
// max_diff,instances,wall_time (wall_time last so it can be dropped).
std::string summary_csv(const std::vector<EvaluationReport>& reports);
std::string instances_csv(const std::vector<EvaluationReport>& reports);
// Aligned text laid out like the classic four-method comparison table.
std::string report_table(const std::vector<EvaluationReport>& reports);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

// Run manifest: command, version, config, seeds and output hashes.
void write_manifest(const std::filesystem::path& path, const std::string& command,
                    const ExperimentConfig& config,
                    const std::vector<std::filesystem::path>& outputs,
                    const std::string& extra_json = "{}");

}  // namespace cachecnn

#endif  // CACHECNN_HARNESS_HPP_

#include "cachecnn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "cachecnn/lp_format.hpp"
#include "cachecnn/serialization.hpp"

namespace cachecnn {
namespace {

using json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string sample_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%05d", index);
  return buf;
}

const char* rule_name(EdgeCloudRule r) {
  switch (r) {
    case EdgeCloudRule::kInternalNonRoot: return "internal_non_root";
    case EdgeCloudRule::kInternal: return "internal";
    case EdgeCloudRule::kLeaves: return "leaves";
    case EdgeCloudRule::kLevel: return "level";
    case EdgeCloudRule::kExplicit: return "explicit";
  }
  return "?";
}

EdgeCloudRule parse_rule(const std::string& s) {
  for (auto r : {EdgeCloudRule::kInternalNonRoot, EdgeCloudRule::kInternal,
                 EdgeCloudRule::kLeaves, EdgeCloudRule::kLevel, EdgeCloudRule::kExplicit}) {
    if (s == rule_name(r)) return r;
  }
  throw Error("config: unknown ec_rule '" + s + "'");
}

void reject_unknown(const json& obj, const std::set<std::string>& keys,
                    const std::string& where) {
  if (!obj.is_object()) throw Error("config: '" + where + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!keys.count(k)) throw Error("config: unknown key '" + where + "." + k + "'");
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void get_range(const json& obj, const char* key, double& lo, double& hi) {
  if (!obj.contains(key)) return;
  const json& r = obj.at(key);
  if (!r.is_array() || r.size() != 2) {
    throw Error(std::string("config: ranges.") + key + " must be [min, max]");
  }
  lo = r[0].get<double>();
  hi = r[1].get<double>();
}

std::uint64_t hash_text(const std::string& s) { return Fnv1a64(s); }

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  ranges.alpha_min = ranges.alpha_max = 0.5;
  ranges.beta_min = ranges.beta_max = 0.5;
  // Requests crowd around one AR per instance, so EC capacity binds.
  ranges.hotspot = 1;
  // Longer training sharpens the outputs and leaves PEL fewer candidates.
  train.epochs = 10;
  train.row_swap_augmentation = true;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["topology"] = {{"branching", c.topology.branching},
                   {"depth", c.topology.depth},
                   {"mesh_links", c.topology.mesh_links},
                   {"ec_rule", rule_name(c.topology.ec_rule)},
                   {"ec_level", c.topology.ec_level},
                   {"edge_clouds", c.topology.explicit_edge_clouds},
                   {"datacenter_hops", c.topology.datacenter_hops},
                   {"seed", c.topology.seed}};
  const InstanceRanges& r = c.ranges;
  j["ranges"] = {{"size", {r.size_min, r.size_max}},
                 {"ec_space", {r.ec_space_min, r.ec_space_max}},
                 {"bandwidth", {r.bandwidth_min, r.bandwidth_max}},
                 {"link", {r.link_min, r.link_max}},
                 {"alpha", {r.alpha_min, r.alpha_max}},
                 {"beta", {r.beta_min, r.beta_max}},
                 {"integral", r.integral},
                 {"support", {r.support_min, r.support_max}},
                 {"presence", {r.presence_min, r.presence_max}},
                 {"hotspot", r.hotspot},
                 {"preload", {r.preload_min, r.preload_max}}};
  j["flows"] = c.flows;
  j["samples"] = c.samples;
  j["train_fraction"] = c.train_fraction;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["solver"] = {{"node_limit", c.solver.node_limit},
                 {"max_reroute_pairs", c.solver.max_reroute_pairs}};
  j["cnn"] = {{"filters", c.filters},
              {"epochs", c.train.epochs},
              {"batch_size", c.train.batch_size},
              {"learning_rate", c.train.learning_rate},
              {"bn_momentum", c.train.bn_momentum},
              {"seed", c.train.seed},
              {"shuffle", c.train.shuffle},
              {"row_swap_augmentation", c.train.row_swap_augmentation}};
  j["penalty"] = {{"gamma", c.pel.penalty.gamma},
                  {"form", c.pel.penalty.form == PenaltyForm::kPerResource ? "per_resource"
                                                                           : "aggregate"},
                  {"clamp_utilization", c.pel.penalty.clamp_utilization}};
  j["pel"] = {{"delta", c.pel.delta}, {"max_iterations", c.pel.max_iterations}};
  j["rgc"] = {{"epochs", c.rgc.epochs},
              {"seed", c.rgc.seed},
              {"neighborhood",
               c.rgc.neighborhood == EcNeighborhood::kAll ? "all" : "graph_adjacent"}};
  j["large"] = {{"flows", c.large_flows},
                {"instances", c.large_instances},
                {"seed", c.large_seed},
                {"node_limit", c.large_node_limit}};
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  try {
    reject_unknown(j, {"topology", "ranges", "flows", "samples", "train_fraction", "seed",
                       "threads", "solver", "cnn", "penalty", "pel", "rgc", "large"},
                   "config");
    if (j.contains("topology")) {
      const json& t = j["topology"];
      reject_unknown(t, {"branching", "depth", "mesh_links", "ec_rule", "ec_level",
                         "edge_clouds", "datacenter_hops", "seed"},
                     "topology");
      get_if(t, "branching", c.topology.branching);
      get_if(t, "depth", c.topology.depth);
      get_if(t, "mesh_links", c.topology.mesh_links);
      if (t.contains("ec_rule")) c.topology.ec_rule = parse_rule(t["ec_rule"]);
      get_if(t, "ec_level", c.topology.ec_level);
      get_if(t, "edge_clouds", c.topology.explicit_edge_clouds);
      get_if(t, "datacenter_hops", c.topology.datacenter_hops);
      get_if(t, "seed", c.topology.seed);
    }
    if (j.contains("ranges")) {
      const json& r = j["ranges"];
      reject_unknown(r, {"size", "ec_space", "bandwidth", "link", "alpha", "beta",
                         "integral", "support", "presence", "hotspot", "preload"},
                     "ranges");
      InstanceRanges& o = c.ranges;
      get_range(r, "size", o.size_min, o.size_max);
      get_range(r, "ec_space", o.ec_space_min, o.ec_space_max);
      get_range(r, "bandwidth", o.bandwidth_min, o.bandwidth_max);
      get_range(r, "link", o.link_min, o.link_max);
      get_range(r, "alpha", o.alpha_min, o.alpha_max);
      get_range(r, "beta", o.beta_min, o.beta_max);
      get_range(r, "presence", o.presence_min, o.presence_max);
      get_range(r, "preload", o.preload_min, o.preload_max);
      get_if(r, "integral", o.integral);
      get_if(r, "hotspot", o.hotspot);
      if (r.contains("support")) {
        o.support_min = r["support"].at(0).get<int>();
        o.support_max = r["support"].at(1).get<int>();
      }
    }
    get_if(j, "flows", c.flows);
    get_if(j, "samples", c.samples);
    get_if(j, "train_fraction", c.train_fraction);
    get_if(j, "seed", c.seed);
    get_if(j, "threads", c.threads);
    if (j.contains("solver")) {
      const json& s = j["solver"];
      reject_unknown(s, {"node_limit", "max_reroute_pairs"}, "solver");
      get_if(s, "node_limit", c.solver.node_limit);
      get_if(s, "max_reroute_pairs", c.solver.max_reroute_pairs);
    }
    if (j.contains("cnn")) {
      const json& n = j["cnn"];
      reject_unknown(n, {"filters", "epochs", "batch_size", "learning_rate", "bn_momentum",
                         "seed", "shuffle", "row_swap_augmentation"},
                     "cnn");
      get_if(n, "filters", c.filters);
      get_if(n, "epochs", c.train.epochs);
      get_if(n, "batch_size", c.train.batch_size);
      get_if(n, "learning_rate", c.train.learning_rate);
      get_if(n, "bn_momentum", c.train.bn_momentum);
      get_if(n, "seed", c.train.seed);
      get_if(n, "shuffle", c.train.shuffle);
      get_if(n, "row_swap_augmentation", c.train.row_swap_augmentation);
    }
    if (j.contains("penalty")) {
      const json& p = j["penalty"];
      reject_unknown(p, {"gamma", "form", "clamp_utilization"}, "penalty");
      get_if(p, "gamma", c.pel.penalty.gamma);
      get_if(p, "clamp_utilization", c.pel.penalty.clamp_utilization);
      if (p.contains("form")) {
        const std::string f = p["form"];
        if (f == "per_resource") c.pel.penalty.form = PenaltyForm::kPerResource;
        else if (f == "aggregate") c.pel.penalty.form = PenaltyForm::kAggregate;
        else throw Error("config: unknown penalty form '" + f + "'");
      }
    }
    if (j.contains("pel")) {
      const json& p = j["pel"];
      reject_unknown(p, {"delta", "max_iterations"}, "pel");
      get_if(p, "delta", c.pel.delta);
      get_if(p, "max_iterations", c.pel.max_iterations);
    }
    if (j.contains("rgc")) {
      const json& g = j["rgc"];
      reject_unknown(g, {"epochs", "seed", "neighborhood"}, "rgc");
      get_if(g, "epochs", c.rgc.epochs);
      get_if(g, "seed", c.rgc.seed);
      if (g.contains("neighborhood")) {
        const std::string n = g["neighborhood"];
        if (n == "graph_adjacent") c.rgc.neighborhood = EcNeighborhood::kGraphAdjacent;
        else if (n == "all") c.rgc.neighborhood = EcNeighborhood::kAll;
        else throw Error("config: unknown rgc neighborhood '" + n + "'");
      }
    }
    if (j.contains("large")) {
      const json& l = j["large"];
      reject_unknown(l, {"flows", "instances", "seed", "node_limit"}, "large");
      get_if(l, "node_limit", c.large_node_limit);
      get_if(l, "flows", c.large_flows);
      get_if(l, "instances", c.large_instances);
      get_if(l, "seed", c.large_seed);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.rgc.penalty = c.pel.penalty;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_file(path));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) {
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  threads = std::max(1, std::min(threads, n));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&]() {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t x = base * 0x9E3779B97F4A7C15ULL + index + 1;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<LabeledInstance> labeled_instances(std::shared_ptr<const Network> network,
                                               int flows, int count,
                                               const InstanceRanges& ranges,
                                               std::uint64_t seed,
                                               const SolverOptions& solver, int threads,
                                               std::vector<int>* excluded,
                                               bool keep_bounded) {
  if (count < 0) throw Error("sample count must be non-negative");
  std::vector<std::unique_ptr<LabeledInstance>> slots(count);
  parallel_for(count, threads, [&](int i) {
    const std::uint64_t s = derive_seed(seed, i);
    Instance inst = generate_instance(network, flows, ranges, s);
    const auto t0 = std::chrono::steady_clock::now();
    OptimalSolution sol = solve_exact(inst, solver);
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    slots[i] = std::make_unique<LabeledInstance>(
        LabeledInstance{i, s, std::move(inst), std::move(sol), dt});
  });
  std::vector<LabeledInstance> out;
  for (auto& p : slots) {
    if (!keep_bounded && p->solution.proof != SearchProof::kExhaustive) {
      if (excluded) excluded->push_back(p->index);
      continue;
    }
    out.push_back(std::move(*p));
  }
  return out;
}

Corpus build_dataset(std::shared_ptr<const Network> network, const ExperimentConfig& cfg) {
  if (!(cfg.train_fraction > 0 && cfg.train_fraction <= 1)) {
    throw Error("train_fraction must lie in (0, 1]");
  }
  Corpus corpus;
  corpus.flows = cfg.flows;
  corpus.norm = NormalizationConfig::from_ranges(cfg.ranges);
  std::vector<LabeledInstance> all =
      labeled_instances(network, cfg.flows, cfg.samples, cfg.ranges, cfg.seed, cfg.solver,
                        cfg.threads, &corpus.excluded);
  const int train_count =
      static_cast<int>(std::lround(cfg.samples * cfg.train_fraction));
  for (LabeledInstance& li : all) {
    (li.index < train_count ? corpus.train : corpus.test).push_back(std::move(li));
  }
  return corpus;
}

std::string dataset_csv(const Corpus& corpus) {
  std::ostringstream out;
  out << "index,split,seed,proof,nodes,TC,C^C,C^H,C^M,labels,wall_time\n";
  auto rows = [&](const std::vector<LabeledInstance>& set, const char* split) {
    for (const LabeledInstance& li : set) {
      const CostBreakdown& c = li.solution.cost;
      out << li.index << ',' << split << ',' << li.seed << ','
          << (li.solution.proof == SearchProof::kExhaustive ? "exhaustive" : "bounded")
          << ',' << li.solution.nodes_explored << ',' << fmt(c.total) << ',' << fmt(c.caching)
          << ',' << fmt(c.hit) << ',' << fmt(c.miss) << ',';
      const std::vector<int> labels = labels_from_placement(
          li.solution.assignment.placement(), li.instance.num_ecs());
      for (std::size_t k = 0; k < labels.size(); ++k) out << (k ? " " : "") << labels[k];
      out << ',' << fmt(li.solve_seconds) << '\n';
    }
  };
  rows(corpus.train, "train");
  rows(corpus.test, "test");
  return out.str();
}

std::uint64_t corpus_fingerprint(const Corpus& corpus) {
  std::ostringstream out;
  out << corpus.flows << ' ' << hex(corpus.norm.fingerprint()) << '\n';
  for (const auto* set : {&corpus.train, &corpus.test}) {
    for (const LabeledInstance& li : *set) {
      out << li.index << ' ' << li.seed;
      for (int l : labels_from_placement(li.solution.assignment.placement(),
                                         li.instance.num_ecs())) {
        out << ' ' << l;
      }
      out << '\n';
    }
    out << "--\n";
  }
  return hash_text(out.str());
}

std::vector<LabeledInstance> large_testset(std::shared_ptr<const Network> network,
                                           const ExperimentConfig& cfg) {
  SolverOptions solver = cfg.solver;
  solver.node_limit = cfg.large_node_limit;
  InstanceRanges ranges = cfg.ranges;
  ranges.preload_min = ranges.preload_max = 0;
  return labeled_instances(std::move(network), cfg.large_flows, cfg.large_instances,
                           ranges, cfg.large_seed, solver, cfg.threads, nullptr, true);
}

EvaluationOptions evaluation_options(const ExperimentConfig& cfg,
                                     const NormalizationConfig& norm) {
  EvaluationOptions o;
  o.pel = cfg.pel;
  o.rgc = cfg.rgc;
  o.norm = norm;
  o.threads = cfg.threads;
  return o;
}

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus,
                 const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  for (const char* sub : {"instances", "solutions", "images", "features"}) {
    fs::create_directories(dir / sub);
  }
  const LabeledInstance* any =
      !corpus.train.empty() ? &corpus.train.front()
                            : (!corpus.test.empty() ? &corpus.test.front() : nullptr);
  std::vector<fs::path> outputs;
  if (any) {
    save_topology(dir / "topology.txt", any->instance.topology());
    outputs.push_back(dir / "topology.txt");
  }
  for (const auto* set : {&corpus.train, &corpus.test}) {
    for (const LabeledInstance& li : *set) {
      const std::string name = sample_name(li.index);
      save_instance(dir / "instances" / (name + ".txt"), li.instance);
      std::ostringstream asg;
      write_assignment(asg, li.solution.assignment);
      write_file(dir / "solutions" / (name + ".txt"), asg.str());
      const FeatureImage img = encode(li.instance, corpus.norm);
      save_pgm(dir / "images" / (name + ".pgm"), to_grayscale(img.values));
      std::ostringstream feat;
      write_feature_csv(feat, img);
      write_file(dir / "features" / (name + ".csv"), feat.str());
    }
  }
  write_file(dir / "dataset.csv", dataset_csv(corpus));
  outputs.push_back(dir / "dataset.csv");
  json extra = {{"flows", corpus.flows},
                {"train", corpus.train.size()},
                {"test", corpus.test.size()},
                {"excluded", corpus.excluded},
                {"norm", {{"q_max", corpus.norm.q_max},
                          {"r_max", corpus.norm.r_max},
                          {"saturate", corpus.norm.saturate},
                          {"fingerprint", hex(corpus.norm.fingerprint())}}}};
  if (any) {
    const Instance& i = any->instance;
    const MilpCensus c = milp_census(corpus.flows, i.num_ars(), i.num_ecs(), i.num_links());
    extra["census"] = {{"variables", c.variables}, {"constraints", c.constraints()}};
  }
  write_manifest(dir / "manifest.json", "dataset", cfg, outputs, extra.dump());
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const json manifest = json::parse(read_file(dir / "manifest.json"));
  Corpus corpus;
  corpus.flows = manifest.at("extra").at("flows").get<int>();
  corpus.norm.q_max = manifest.at("extra").at("norm").at("q_max").get<double>();
  corpus.norm.r_max = manifest.at("extra").at("norm").at("r_max").get<double>();
  corpus.norm.saturate = manifest.at("extra").at("norm").at("saturate").get<bool>();
  corpus.excluded = manifest.at("extra").at("excluded").get<std::vector<int>>();
  std::istringstream csv(read_file(dir / "dataset.csv"));
  std::string line;
  std::getline(csv, line);
  std::shared_ptr<const Network> network;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (cells.size() != 11) throw Error("dataset.csv: malformed row '" + line + "'");
    const std::string& index = cells[0];
    const std::string& split = cells[1];
    const std::string& seed = cells[2];
    const int idx = std::stoi(index);
    const std::string name = sample_name(idx);
    Instance inst = load_instance(dir / "instances" / (name + ".txt"));
    // Share one network across the corpus.
    if (!network) {
      network = inst.network_ptr();
    } else if (network->topology == inst.topology()) {
      inst = Instance(network, inst.mobility(), inst.content_size(), inst.bandwidth(),
                      inst.ec_space(), inst.link_capacity(), inst.alpha(), inst.beta());
    }
    std::istringstream asg(read_file(dir / "solutions" / (name + ".txt")));
    OptimalSolution sol;
    sol.assignment = read_assignment(asg);
    sol.cost = total_cost(inst, sol.assignment);
    sol.proof = cells[3] == "exhaustive" ? SearchProof::kExhaustive : SearchProof::kBounded;
    sol.nodes_explored = std::stoll(cells[4]);
    LabeledInstance li{idx, std::stoull(seed), std::move(inst), std::move(sol),
                       std::stod(cells[10])};
    (split == "train" ? corpus.train : corpus.test).push_back(std::move(li));
  }
  return corpus;
}

std::vector<TrainingSample> training_samples(const std::vector<LabeledInstance>& set,
                                             const NormalizationConfig& norm) {
  std::vector<TrainingSample> out;
  out.reserve(set.size());
  for (const LabeledInstance& li : set) {
    out.push_back({encode(li.instance, norm),
                   labels_from_placement(li.solution.assignment.placement(),
                                         li.instance.num_ecs())});
  }
  return out;
}

CnnArchitecture architecture_for(const Instance& inst, const std::vector<int>& filters) {
  return {inst.num_flows(), inst.num_ars() + inst.num_ecs() + inst.num_links(),
          inst.num_ecs() + 1, filters};
}

std::string loss_csv(const std::vector<TrainResult>& results) {
  std::ostringstream out;
  out << "epoch";
  for (std::size_t k = 0; k < results.size(); ++k) out << ",slot" << k;
  out << '\n';
  const std::size_t epochs = results.empty() ? 0 : results.front().loss_trace.size();
  for (std::size_t e = 0; e < epochs; ++e) {
    out << e + 1;
    for (const TrainResult& r : results) out << ',' << fmt(r.loss_trace.at(e));
    out << '\n';
  }
  return out.str();
}

void save_models(const std::filesystem::path& dir, const std::vector<TrainResult>& results,
                 const ExperimentConfig& cfg, const NormalizationConfig& norm,
                 std::uint64_t corpus_fingerprint) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> outputs;
  json models = json::array();
  for (std::size_t k = 0; k < results.size(); ++k) {
    const CnnModel& m = results[k].model;
    const auto path = dir / ("model_" + std::to_string(k) + ".bin");
    m.save(path);
    outputs.push_back(path);
    json stages = json::array();
    for (int f : m.architecture().filters) stages.push_back({{"filters", f}, {"kernel", 3}});
    models.push_back({{"file", path.filename().string()},
                      {"request_index", m.request_index()},
                      {"input", {m.architecture().height, m.architecture().width, 1}},
                      {"conv", stages},
                      {"classes", m.architecture().classes},
                      {"parameters", m.parameter_count()},
                      {"fingerprint", hex(m.fingerprint())}});
  }
  write_file(dir / "loss.csv", loss_csv(results));
  outputs.push_back(dir / "loss.csv");
  json extra = {{"models", models},
                {"format_version", 1},
                {"norm", {{"q_max", norm.q_max},
                          {"r_max", norm.r_max},
                          {"saturate", norm.saturate},
                          {"fingerprint", hex(norm.fingerprint())}}},
                {"corpus_fingerprint", hex(corpus_fingerprint)}};
  write_manifest(dir / "manifest.json", "train", cfg, outputs, extra.dump());
}

std::vector<CnnModel> load_models(const std::filesystem::path& dir) {
  const json manifest = json::parse(read_file(dir / "manifest.json"));
  std::vector<CnnModel> out;
  for (const json& m : manifest.at("extra").at("models")) {
    out.push_back(CnnModel::load(dir / m.at("file").get<std::string>()));
    if (out.back().request_index() != static_cast<int>(out.size()) - 1) {
      throw Error("models in " + dir.string() + " are not in slot order");
    }
  }
  if (out.empty()) throw Error("no models in " + dir.string());
  return out;
}

Assignment recursive_allocate(std::span<const CnnModel> models, const Instance& inst,
                              const NormalizationConfig& norm, const PelOptions& pel,
                              std::vector<RecursivePass>* passes) {
  if (models.empty()) throw Error("recursive_allocate: no models");
  const int block = models.front().architecture().height;
  const int num_ecs = inst.num_ecs();
  NormalizationConfig saturating = norm;
  saturating.saturate = true;
  Placement placement(inst.num_flows(), kUncached);
  Assignment committed = Assignment::empty(inst);
  for (int start = 0; start < inst.num_flows(); start += block) {
    const int end = std::min(inst.num_flows(), start + block);
    std::vector<int> flows;
    for (int k = start; k < end; ++k) flows.push_back(k);
    const Instance residual =
        update_residual(inst, committed, ResidualMode::kSaturate).select_flows(flows);
    // Flow rows of the block, padded to the trained height.
    const FeatureImage image = split_subimages(encode(residual, saturating), block).front();
    const ProbabilityMatrix full = predict_all(models, image);
    ProbabilityMatrix probs(static_cast<int>(flows.size()), num_ecs + 1);
    for (int r = 0; r < probs.rows(); ++r) {
      std::copy(full.row(r).begin(), full.row(r).end(), probs.row(r).begin());
    }
    const PelResult result = enhance(residual, probs, pel);
    for (std::size_t i = 0; i < flows.size(); ++i) placement[flows[i]] = result.placement[i];
    committed = derive_routing(inst, placement);
    if (passes) passes->push_back({flows, residual, result.placement});
  }
  return derive_routing(inst, placement);
}

EvaluationReport evaluate(const std::vector<LabeledInstance>& testset,
                          std::span<const CnnModel> models,
                          const EvaluationOptions& opt) {
  EvaluationReport report;
  if (testset.empty()) throw Error("evaluate: empty test set");
  const Instance& first = testset.front().instance;
  report.flows = first.num_flows();
  report.census =
      milp_census(report.flows, first.num_ars(), first.num_ecs(), first.num_links());
  const int n = static_cast<int>(testset.size());
  const int nm = static_cast<int>(kMethods.size());
  std::vector<InstanceOutcome> outcomes(static_cast<std::size_t>(n) * nm);
  std::vector<double> seconds(outcomes.size(), 0.0);
  for (const LabeledInstance& li : testset) {
    report.bounded_references += li.solution.proof != SearchProof::kExhaustive;
  }

  parallel_for(n, opt.threads, [&](int i) {
    const LabeledInstance& li = testset[i];
    const Instance& inst = li.instance;
    const Placement truth = li.solution.assignment.placement();
    const double optimal = li.solution.cost.total;
    for (int m = 0; m < nm; ++m) {
      const auto t0 = std::chrono::steady_clock::now();
      Assignment a;
      if (kMethods[m] == "optimal") {
        a = li.solution.assignment;
      } else if (kMethods[m] == "cnn+pel") {
        a = recursive_allocate(models, inst, opt.norm, opt.pel);
      } else if (kMethods[m] == "gca") {
        a = gca(inst);
      } else {
        RgcConfig rc = opt.rgc;
        rc.seed = derive_seed(opt.rgc.seed, static_cast<std::uint64_t>(li.index));
        a = rgc(inst, rc);
      }
      seconds[i * nm + m] =
          kMethods[m] == "optimal"
              ? li.solve_seconds
              : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      InstanceOutcome& o = outcomes[i * nm + m];
      o.instance = li.index;
      o.method = kMethods[m];
      o.cost = penalized_cost(inst, a, opt.pel.penalty);
      o.cost.feasible = check_feasibility(inst, a).feasible();
      const Placement p = a.placement();
      for (std::size_t k = 0; k < p.size(); ++k) o.correct += p[k] == truth[k];
      o.diff = std::max(0.0, o.cost.penalized_total - optimal);
    }
  });

  for (int m = 0; m < nm; ++m) {
    MethodSummary s;
    s.method = kMethods[m];
    s.instances = n;
    long correct = 0, feasible = 0;
    for (int i = 0; i < n; ++i) {
      const InstanceOutcome& o = outcomes[i * nm + m];
      s.mean_total_cost += o.cost.penalized_total;
      correct += o.correct;
      feasible += o.cost.feasible;
      s.max_diff = std::max(s.max_diff, o.diff);
      s.wall_time += seconds[i * nm + m];
    }
    s.mean_total_cost /= n;
    s.precision = static_cast<double>(correct) / (static_cast<double>(n) * report.flows);
    s.feasible_ratio = static_cast<double>(feasible) / n;
    report.methods.push_back(s);
  }
  for (int i = 0; i < n; ++i) {
    for (int m = 0; m < nm; ++m) report.details.push_back(outcomes[i * nm + m]);
  }
  return report;
}

std::string summary_csv(const std::vector<EvaluationReport>& reports) {
  std::ostringstream out;
  out << "flows,method,mean_total_cost,precision,feasible_ratio,max_diff,instances,"
         "wall_time\n";
  for (const EvaluationReport& r : reports) {
    for (const MethodSummary& s : r.methods) {
      out << r.flows << ',' << s.method << ',' << fmt(s.mean_total_cost) << ','
          << fmt(s.precision) << ',' << fmt(s.feasible_ratio) << ',' << fmt(s.max_diff)
          << ',' << s.instances << ',' << fmt(s.wall_time) << '\n';
    }
  }
  return out.str();
}

std::string instances_csv(const std::vector<EvaluationReport>& reports) {
  std::ostringstream out;
  out << "flows,instance,method,TC_N,TC,C^C,C^H,C^M,penalty,feasible,correct,diff\n";
  for (const EvaluationReport& r : reports) {
    for (const InstanceOutcome& o : r.details) {
      const CostBreakdown& c = o.cost;
      out << r.flows << ',' << o.instance << ',' << o.method << ','
          << fmt(c.penalized_total) << ',' << fmt(c.total) << ',' << fmt(c.caching) << ','
          << fmt(c.hit) << ',' << fmt(c.miss) << ',' << fmt(c.penalty) << ','
          << (c.feasible ? 1 : 0) << ',' << o.correct << ',' << fmt(o.diff) << '\n';
    }
  }
  return out.str();
}

std::string report_table(const std::vector<EvaluationReport>& reports) {
  std::ostringstream out;
  const int label_w = 18, col_w = 12;
  for (const EvaluationReport& r : reports) {
    const int width = label_w + col_w * static_cast<int>(r.methods.size());
    out << std::string(width, '=') << '\n';
    out << r.flows << " requests (" << r.methods.front().instances
        << " instances)  number of variables: " << r.census.variables
        << ", number of constraints: " << r.census.constraints() << '\n';
    if (r.bounded_references) {
      out << "optimal column: " << r.bounded_references
          << " reference solutions are best incumbents without a proof\n";
    }
    out << std::string(width, '-') << '\n';
    out << std::left << std::setw(label_w) << "";
    for (const MethodSummary& s : r.methods) {
      std::string name = s.method;
      std::transform(name.begin(), name.end(), name.begin(), ::toupper);
      out << std::right << std::setw(col_w) << name;
    }
    out << '\n' << std::string(width, '-') << '\n';
    auto row = [&](const char* label, auto value) {
      out << std::left << std::setw(label_w) << label;
      for (const MethodSummary& s : r.methods) out << std::right << std::setw(col_w) << value(s);
      out << '\n';
    };
    char buf[64];
    row("Computation Time", [&](const MethodSummary& s) {
      std::snprintf(buf, sizeof(buf), "%.3fs", s.wall_time / s.instances);
      return std::string(buf);
    });
    row("Mean Total Cost", [&](const MethodSummary& s) {
      std::snprintf(buf, sizeof(buf), "%.2f", s.mean_total_cost);
      return std::string(buf);
    });
    row("Precision", [&](const MethodSummary& s) {
      std::snprintf(buf, sizeof(buf), "%.1f%%", 100 * s.precision);
      return std::string(buf);
    });
    row("Feasible Ratio", [&](const MethodSummary& s) {
      std::snprintf(buf, sizeof(buf), "%.1f%%", 100 * s.feasible_ratio);
      return std::string(buf);
    });
    row("Maximum Diff", [&](const MethodSummary& s) {
      std::snprintf(buf, sizeof(buf), "%.2f", s.max_diff);
      return std::string(buf);
    });
  }
  if (!reports.empty()) {
    const int width = label_w + col_w * static_cast<int>(reports.back().methods.size());
    out << std::string(width, '=') << '\n';
  }
  return out.str();
}

void write_manifest(const std::filesystem::path& path, const std::string& command,
                    const ExperimentConfig& cfg,
                    const std::vector<std::filesystem::path>& outputs,
                    const std::string& extra_json) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seeds"] = {{"dataset", cfg.seed},
                {"topology", cfg.topology.seed},
                {"train", cfg.train.seed},
                {"rgc", cfg.rgc.seed},
                {"large", cfg.large_seed}};
  j["config"] = json::parse(config_to_json(cfg));
  json files = json::array();
  for (const auto& p : outputs) {
    files.push_back({{"file", p.filename().string()}, {"fnv1a64", hex(hash_text(read_file(p)))}});
  }
  j["outputs"] = files;
  j["extra"] = json::parse(extra_json);
  write_file(path, j.dump(2) + "\n");
}

}  // namespace cachecnn

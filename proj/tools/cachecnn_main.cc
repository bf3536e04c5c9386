// cachecnn: command-line driver for the caching pipeline.
//
//   cachecnn topo      --out DIR
//   cachecnn gen       --out FILE [--index I] [--solve]
//   cachecnn dataset   --out DIR
//   cachecnn train     --data DIR --out DIR
//   cachecnn eval      --data DIR --models DIR --out DIR [--no-large]
//   cachecnn export-lp --instance FILE --out FILE [--big-m M]
//   cachecnn render    --instance FILE --out FILE [--scale S]
//
// Every subcommand takes --config FILE and any number of --set KEY=VALUE
// overrides, where KEY is a dotted path into the config JSON and VALUE is
// parsed as JSON (bare words fall back to strings).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cachecnn/harness.hpp"
#include "cachecnn/serialization.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cachecnn;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = -1;
};

void add_common(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  app->add_option("--set", common.overrides, "override KEY=VALUE (dotted JSON path)");
  app->add_option("--threads", common.threads, "worker threads (0: all cores)");
}

ExperimentConfig resolve_config(const Common& common) {
  json j = json::parse(common.config_path.empty()
                           ? config_to_json(ExperimentConfig())
                           : read_file(common.config_path));
  for (const std::string& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error("--set expects KEY=VALUE, got '" + kv + "'");
    }
    json* node = &j;
    std::istringstream path(kv.substr(0, eq));
    for (std::string part; std::getline(path, part, '.');) node = &(*node)[part];
    const std::string value = kv.substr(eq + 1);
    try {
      *node = json::parse(value);
    } catch (const json::parse_error&) {
      *node = value;
    }
  }
  ExperimentConfig cfg = config_from_json(j.dump());
  if (common.threads >= 0) cfg.threads = common.threads;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::shared_ptr<const Network> network_for(const ExperimentConfig& cfg) {
  return make_network(build_topology(cfg.topology));
}

int run_topo(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const Topology topo = build_topology(cfg.topology);
  save_topology(out / "topology.txt", topo);
  const auto net = make_network(topo);
  std::ostringstream hops;
  hops << "ar";
  for (int e = 0; e < topo.num_edge_clouds(); ++e) hops << ",ec" << e;
  hops << '\n';
  for (int a = 0; a < topo.num_access_routers(); ++a) {
    hops << a;
    for (int e = 0; e < topo.num_edge_clouds(); ++e) hops << ',' << net->hops(a, e);
    hops << '\n';
  }
  write_file(out / "hops.csv", hops.str());
  const json extra = {{"nodes", topo.num_nodes()},
                      {"access_routers", topo.num_access_routers()},
                      {"edge_clouds", topo.num_edge_clouds()},
                      {"links", topo.num_links()}};
  write_manifest(out / "manifest.json", "topo", cfg, {out / "topology.txt", out / "hops.csv"},
                 extra.dump());
  std::printf("%d routers, %d access routers, %d edge clouds, %d links\n",
              topo.num_nodes(), topo.num_access_routers(), topo.num_edge_clouds(),
              topo.num_links());
  return 0;
}

int run_gen(const ExperimentConfig& cfg, const fs::path& out, int index, bool solve) {
  const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
  const Instance inst = generate_instance(network_for(cfg), cfg.flows, cfg.ranges, seed);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_instance(out, inst);
  std::printf("instance %d (seed %llu): %d flows, %d ARs, %d ECs, %d links\n", index,
              static_cast<unsigned long long>(seed), inst.num_flows(), inst.num_ars(),
              inst.num_ecs(), inst.num_links());
  if (solve) {
    const OptimalSolution sol = solve_exact(inst, cfg.solver);
    fs::path sol_path = out;
    sol_path.replace_extension(".solution.txt");
    std::ostringstream asg;
    write_assignment(asg, sol.assignment);
    write_file(sol_path, asg.str());
    const std::vector<int> labels =
        labels_from_placement(sol.assignment.placement(), inst.num_ecs());
    std::printf("TC %.6f (C^C %.6f, C^T %.6f), %s after %lld nodes, classes:",
                sol.cost.total, sol.cost.caching, sol.cost.hit + sol.cost.miss,
                sol.proof == SearchProof::kExhaustive ? "optimal" : "bounded",
                static_cast<long long>(sol.nodes_explored));
    for (int l : labels) std::printf(" %d", l);
    std::printf("\n");
  }
  return 0;
}

int run_dataset(const ExperimentConfig& cfg, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Corpus corpus = build_dataset(network_for(cfg), cfg);
  save_corpus(out, corpus, cfg);
  std::printf("%zu train, %zu test, %zu excluded; %.1fs\n", corpus.train.size(),
              corpus.test.size(), corpus.excluded.size(), seconds_since(t0));
  return 0;
}

int run_train(const ExperimentConfig& cfg, const fs::path& data, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Corpus corpus = load_corpus(data);
  if (corpus.train.empty()) throw Error("no training samples in " + data.string());
  const std::vector<TrainingSample> samples = training_samples(corpus.train, corpus.norm);
  const CnnArchitecture arch = architecture_for(corpus.train.front().instance, cfg.filters);
  const std::vector<TrainResult> results = train_all(samples, arch, cfg.train, cfg.threads);
  save_models(out, results, cfg, corpus.norm, corpus_fingerprint(corpus));
  for (const TrainResult& r : results) {
    std::printf("slot %d: loss %.4f -> %.4f\n", r.model.request_index(),
                r.loss_trace.front(), r.loss_trace.back());
  }
  std::printf("%zu models, %zu samples, %d epochs; %.1fs\n", results.size(), samples.size(),
              cfg.train.epochs, seconds_since(t0));
  return 0;
}

int run_eval(const ExperimentConfig& cfg, const fs::path& data, const fs::path& models_dir,
             const fs::path& out, bool large) {
  const Corpus corpus = load_corpus(data);
  const std::vector<CnnModel> models = load_models(models_dir);
  const json manifest = json::parse(read_file(models_dir / "manifest.json"));
  const std::string model_norm =
      manifest.at("extra").at("norm").at("fingerprint").get<std::string>();
  char corpus_norm[32];
  std::snprintf(corpus_norm, sizeof(corpus_norm), "%016llx",
                static_cast<unsigned long long>(corpus.norm.fingerprint()));
  if (model_norm != corpus_norm) {
    throw Error("models were trained with a different normalization than " +
                data.string());
  }
  if (corpus.test.empty()) throw Error("no test samples in " + data.string());

  const EvaluationOptions opt = evaluation_options(cfg, corpus.norm);
  std::vector<EvaluationReport> reports{evaluate(corpus.test, models, opt)};
  if (large) {
    const auto net = corpus.test.front().instance.network_ptr();
    reports.push_back(evaluate(large_testset(net, cfg), models, opt));
  }
  fs::create_directories(out);
  write_file(out / "summary.csv", summary_csv(reports));
  write_file(out / "instances.csv", instances_csv(reports));
  const std::string table = report_table(reports);
  write_file(out / "table.txt", table);
  const json extra = {{"models_fingerprint",
                       manifest.at("extra").at("corpus_fingerprint")},
                      {"large", large}};
  write_manifest(out / "manifest.json", "eval", cfg,
                 {out / "summary.csv", out / "instances.csv", out / "table.txt"},
                 extra.dump());
  std::cout << table;
  return 0;
}

int run_export_lp(const fs::path& instance_path, const fs::path& out, double big_m) {
  const Instance inst = load_instance(instance_path);
  MilpOptions opt;
  opt.big_m = big_m;
  const std::string lp = export_milp(inst, opt);
  write_file(out, lp);
  const LpModel model = parse_lp(lp);
  const MilpCensus census =
      milp_census(inst.num_flows(), inst.num_ars(), inst.num_ecs(), inst.num_links());
  std::printf("%zu variables, %zu constraints (formula: %lld, %lld)\n",
              model.variables.size(), model.rows.size(),
              static_cast<long long>(census.variables),
              static_cast<long long>(census.constraints()));
  return 0;
}

int run_render(const ExperimentConfig& cfg, const fs::path& instance_path,
               const fs::path& out, int scale) {
  const Instance inst = load_instance(instance_path);
  const FeatureImage img = encode(inst, NormalizationConfig::from_ranges(cfg.ranges));
  GrayImage gray = to_grayscale(img.values);
  if (scale > 1) {
    GrayImage big{gray.width * scale, gray.height * scale, {}};
    big.pixels.resize(static_cast<std::size_t>(big.width) * big.height);
    for (int r = 0; r < big.height; ++r) {
      for (int c = 0; c < big.width; ++c) {
        big.pixels[static_cast<std::size_t>(r) * big.width + c] =
            gray.pixels[static_cast<std::size_t>(r / scale) * gray.width + c / scale];
      }
    }
    gray = std::move(big);
  }
  save_pgm(out, gray);
  std::printf("%dx%d image (blocks P %d-%d, Q %d-%d, R %d-%d)\n", gray.width, gray.height,
              img.blocks.p_begin, img.blocks.p_end, img.blocks.q_begin, img.blocks.q_end,
              img.blocks.r_begin, img.blocks.r_end);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge caching placement: exact solver, CNN predictor and baselines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  std::string out, data, models, instance;
  int index = 0, scale = 1;
  bool solve = false, no_large = false;
  double big_m = 0;

  auto* topo = app.add_subcommand("topo", "build the topology and its hop matrix");
  add_common(topo, common);
  topo->add_option("--out", out, "output directory")->required();

  auto* gen = app.add_subcommand("gen", "generate one instance");
  add_common(gen, common);
  gen->add_option("--out", out, "instance file")->required();
  gen->add_option("--index", index, "instance index under the dataset seed");
  gen->add_flag("--solve", solve, "also solve it exactly");

  auto* dataset = app.add_subcommand("dataset", "generate and label the corpus");
  add_common(dataset, common);
  dataset->add_option("--out", out, "corpus directory")->required();

  auto* train = app.add_subcommand("train", "train one CNN per request slot");
  add_common(train, common);
  train->add_option("--data", data, "corpus directory")->required();
  train->add_option("--out", out, "model directory")->required();

  auto* eval = app.add_subcommand("eval", "compare optimal, CNN+PEL, GCA and RGC");
  add_common(eval, common);
  eval->add_option("--data", data, "corpus directory")->required();
  eval->add_option("--models", models, "model directory")->required();
  eval->add_option("--out", out, "report directory")->required();
  eval->add_flag("--no-large", no_large, "skip the held-out large instances");

  auto* lp = app.add_subcommand("export-lp", "write the MILP in CPLEX LP format");
  add_common(lp, common);
  lp->add_option("--instance", instance, "instance file")->required()->check(CLI::ExistingFile);
  lp->add_option("--out", out, "LP file")->required();
  lp->add_option("--big-m", big_m, "big-M constant (default: derived)");

  auto* render = app.add_subcommand("render", "write an instance's feature image as PGM");
  add_common(render, common);
  render->add_option("--instance", instance, "instance file")
      ->required()
      ->check(CLI::ExistingFile);
  render->add_option("--out", out, "PGM file")->required();
  render->add_option("--scale", scale, "nearest-neighbour upscaling")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve_config(common);
    if (*topo) return run_topo(cfg, out);
    if (*gen) return run_gen(cfg, out, index, solve);
    if (*dataset) return run_dataset(cfg, out);
    if (*train) return run_train(cfg, data, out);
    if (*eval) return run_eval(cfg, data, models, out, !no_large);
    if (*lp) return run_export_lp(instance, out, big_m);
    if (*render) return run_render(cfg, instance, out, scale);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cachecnn: %s\n", e.what());
    return 1;
  }
  return 0;
}

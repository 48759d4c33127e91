// Command-line front end: ingest -> similarity -> embed -> evaluate -> report,
// plus synthetic data generation and timing benchmarks.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "hinmega/ctmd.hpp"
#include "hinmega/eval.hpp"
#include "hinmega/hin.hpp"
#include "hinmega/io.hpp"
#include "hinmega/meta.hpp"
#include "hinmega/relevance.hpp"
#include "hinmega/synth.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hinmega;

struct InputPaths {
  std::string schema;
  std::string nodes;
  std::string edges;
};

void add_input_options(CLI::App* cmd, InputPaths& paths) {
  cmd->add_option("--schema", paths.schema, "schema JSON file")->required();
  cmd->add_option("--nodes", paths.nodes, "nodes TSV file")->required();
  cmd->add_option("--edges", paths.edges, "edges TSV file")->required();
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path))
    throw InputError(std::string(what) + " file does not exist: " + path);
}

hin::TypedGraph load_inputs(const InputPaths& paths) {
  require_file(paths.schema, "schema");
  require_file(paths.nodes, "nodes");
  require_file(paths.edges, "edges");
  const hin::Schema schema = hin::Schema::from_json_file(paths.schema);
  return hin::load_graph(paths.nodes, paths.edges, schema);
}

// out/manifest.json accumulates one entry per command; content carries no
// timestamps so reruns stay byte-identical.
void update_manifest(const fs::path& out_dir, const std::string& command,
                     const json& entry) {
  fs::create_directories(out_dir);
  const fs::path path = out_dir / "manifest.json";
  json manifest = json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      in >> manifest;
    } catch (const json::exception&) {
      manifest = json::object();
    }
  }
  manifest[command] = entry;
  std::ofstream out(path);
  out << manifest.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << content;
}

// --------------------------------------------------------------------------
// gen

struct GenArgs {
  synth::SynthConfig config;
  std::string out_dir;
};

int run_gen(const GenArgs& args) {
  synth::write_dataset(args.config, args.out_dir);
  json entry;
  entry["config"] = {{"communities", args.config.communities},
                     {"authors_per_community", args.config.authors_per_community},
                     {"papers_per_author", args.config.papers_per_author},
                     {"venues_per_community", args.config.venues_per_community},
                     {"topics_per_community", args.config.topics_per_community},
                     {"p_in", args.config.p_in},
                     {"p_out", args.config.p_out},
                     {"seed", args.config.seed}};
  entry["outputs"] = {"schema.json", "nodes.tsv", "edges.tsv", "labels.tsv",
                      "metagraph.json"};
  update_manifest(args.out_dir, "gen", entry);
  std::cout << "wrote synthetic dataset to " << args.out_dir << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------------
// sim

struct SimArgs {
  InputPaths inputs;
  std::string out_dir;
  std::string measure;
  std::string path_text;
  std::string metagraph_file;
  bool enumerate = false;
  bool injective = false;
  std::int64_t dense_limit = 20000;
};

int run_sim(const SimArgs& args) {
  const hin::TypedGraph graph = load_inputs(args.inputs);
  relevance::RelevanceOptions options;
  options.dense_node_limit = args.dense_limit;

  relevance::SimilarityMatrix sim;
  if (args.measure == "pathsim") {
    if (args.path_text.empty()) throw InputError("pathsim requires --path");
    const meta::MetaPath path = meta::parse_meta_path(args.path_text, graph.schema());
    sim = relevance::pathsim(graph, path, options);
  } else {
    if (args.metagraph_file.empty())
      throw InputError(args.measure + " requires --metagraph");
    require_file(args.metagraph_file, "meta-graph");
    const meta::MetaGraph mg =
        meta::MetaGraph::from_json_file(args.metagraph_file, graph.schema());
    if (args.measure == "graphsim") {
      if (args.enumerate) throw InputError("--enumerate applies to structcount only");
      sim = relevance::graphsim(graph, mg, options);
    } else if (args.measure == "structcount") {
      if (args.enumerate) {
        const relevance::CountMatrix counts =
            relevance::enumerate_count_matrix(graph, mg, args.injective);
        sim.node_type = counts.row_type;
        sim.ids = counts.row_ids;
        sim.measure = "structcount";
        sim.provenance = counts.provenance;
        sim.values.resize(counts.rows, counts.cols);
        for (std::int64_t i = 0; i < counts.rows; ++i)
          for (std::int64_t j = 0; j < counts.cols; ++j)
            sim.values(i, j) = static_cast<double>(counts.at(i, j));
      } else {
        sim = relevance::struct_count_matrix(graph, mg, options);
      }
    } else {
      throw InputError("unknown measure '" + args.measure + "'");
    }
  }

  const fs::path sim_dir = fs::path(args.out_dir) / "sim";
  fs::create_directories(sim_dir);
  const fs::path tsv = sim_dir / (args.measure + ".tsv");
  const fs::path bin = sim_dir / (args.measure + ".bin");
  relevance::write_similarity_tsv(sim, tsv);
  relevance::write_similarity_block(sim, bin);

  json entry;
  entry["config"] = {{"measure", args.measure},
                     {"path", args.path_text},
                     {"metagraph", args.metagraph_file},
                     {"enumerate", args.enumerate},
                     {"injective", args.injective},
                     {"dense_limit", args.dense_limit}};
  entry["outputs"] = {std::string("sim/") + tsv.filename().string(),
                      std::string("sim/") + bin.filename().string()};
  update_manifest(args.out_dir, "sim", entry);
  std::cout << "wrote " << tsv.string() << " and " << bin.string() << " ("
            << sim.values.rows() << "x" << sim.values.cols() << ", " << sim.measure
            << ")\n";
  return kExitOk;
}

// --------------------------------------------------------------------------
// embed

struct EmbedArgs {
  InputPaths inputs;
  std::string out_dir;
  std::string method = "mega++";
  std::string metagraph_file;
  std::string init = "normal";
  bool dedupe_paths = false;
  std::int64_t dense_limit = 20000;
  ctmd::CtmdConfig config;
};

json ctmd_config_json(const EmbedArgs& args) {
  return json{{"method", args.method},
              {"metagraph", args.metagraph_file},
              {"rank", args.config.rank},
              {"alpha", args.config.alpha},
              {"lambda", args.config.lambda0},
              {"rho", args.config.rho},
              {"lambda_max", args.config.lambda_max},
              {"max_iter", args.config.max_iter},
              {"tol_objective", args.config.tol_objective},
              {"tol_residual", args.config.tol_residual},
              {"init", args.init},
              {"dedupe_paths", args.dedupe_paths},
              {"seed", args.config.seed}};
}

int run_embed(const EmbedArgs& args_in) {
  EmbedArgs args = args_in;
  args.config.scaled_init = args.init == "scaled";
  const hin::TypedGraph graph = load_inputs(args.inputs);
  require_file(args.metagraph_file, "meta-graph");
  const meta::MetaGraph mg =
      meta::MetaGraph::from_json_file(args.metagraph_file, graph.schema());
  relevance::RelevanceOptions rel_options;
  rel_options.dense_node_limit = args.dense_limit;

  const fs::path embed_dir = fs::path(args.out_dir) / "embed";
  fs::create_directories(embed_dir);
  write_text(embed_dir / "config.json", ctmd_config_json(args).dump(2) + "\n");

  ctmd::EmbeddingResult result;
  try {
    result = args.method == "mega"
                 ? ctmd::mega(graph, mg, args.config, args.dedupe_paths, rel_options)
                 : ctmd::mega_pp(graph, mg, args.config, args.dedupe_paths, rel_options);
  } catch (const ctmd::CtmdDivergence& e) {
    // Divergence still leaves a trace on disk for diagnosis.
    ctmd::write_trace_csv(e.trace(), embed_dir / "trace.csv");
    throw;
  }

  ctmd::write_embedding_tsv(result, embed_dir / "embedding.tsv");
  ctmd::write_embedding_block(result, embed_dir / "embedding.bin");
  ctmd::write_trace_csv(result.trace, embed_dir / "trace.csv");

  json entry;
  entry["config"] = ctmd_config_json(args);
  entry["outputs"] = {"embed/embedding.tsv", "embed/embedding.bin", "embed/trace.csv",
                      "embed/config.json"};
  entry["iterations"] = result.iterations;
  entry["converged"] = result.converged;
  update_manifest(args.out_dir, "embed", entry);
  std::cout << "embedding " << result.P.rows() << "x" << result.P.cols() << " ("
            << args.method << "), " << result.iterations << " iterations, "
            << (result.converged ? "converged" : "max_iter reached") << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string embedding_file;
  std::string labels_file;
  std::string out_dir;
  std::string task = "both";
  std::string nmi_norm = "arithmetic";
  std::string kmeans_init = "random";
  std::string normalize = "none";
  int k = 0;
  int restarts = 100;
  int knn_k = 5;
  double train_frac = 0.8;
  int repeats = 10;
  std::uint64_t seed = 1;
};

eval::NmiNorm parse_nmi_norm(const std::string& name) {
  if (name == "arithmetic") return eval::NmiNorm::Arithmetic;
  if (name == "geometric") return eval::NmiNorm::Geometric;
  return eval::NmiNorm::Max;
}

int run_eval(const EvalArgs& args) {
  require_file(args.embedding_file, "embedding");
  require_file(args.labels_file, "labels");
  const ctmd::LoadedEmbedding embedding = ctmd::read_embedding_tsv(args.embedding_file);
  const auto labels = hin::load_labels(args.labels_file);

  // Evaluation sees labeled rows only.
  eval::LabeledEmbedding data;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < embedding.ids.size(); ++i) {
    const auto it = labels.find(embedding.ids[i]);
    if (it == labels.end()) continue;
    keep.push_back(static_cast<Eigen::Index>(i));
    data.ids.push_back(embedding.ids[i]);
    data.labels.push_back(it->second);
  }
  if (keep.empty()) throw InputError("no embedding row has a label");
  data.P.resize(static_cast<Eigen::Index>(keep.size()), embedding.P.cols());
  for (std::size_t i = 0; i < keep.size(); ++i)
    data.P.row(static_cast<Eigen::Index>(i)) = embedding.P.row(keep[i]);

  const fs::path eval_dir = fs::path(args.out_dir) / "eval";
  fs::create_directories(eval_dir);
  std::string report_text;
  json entry;
  entry["config"] = {{"embedding", args.embedding_file},
                     {"labels", args.labels_file},
                     {"task", args.task},
                     {"seed", args.seed}};
  json outputs = json::array();

  if (args.task == "clustering" || args.task == "both") {
    eval::ClusterEvalOptions options;
    options.k = args.k;
    options.restarts = args.restarts;
    options.plus_plus = args.kmeans_init == "plusplus";
    options.nmi_norm = parse_nmi_norm(args.nmi_norm);
    options.seed = args.seed;
    const eval::EvalReport report = eval::cluster_eval(data, options);
    report.write_csv(eval_dir / "clustering.csv");
    report_text += report.to_table() + "\n";
    outputs.push_back("eval/clustering.csv");
  }
  if (args.task == "classification" || args.task == "both") {
    eval::KnnOptions options;
    options.k = args.knn_k;
    options.train_fraction = args.train_frac;
    options.repeats = args.repeats;
    options.l2_normalize = args.normalize == "l2";
    options.seed = args.seed;
    const eval::EvalReport report = eval::knn_classify(data, options);
    report.write_csv(eval_dir / "classification.csv");
    report_text += report.to_table() + "\n";
    outputs.push_back("eval/classification.csv");
  }

  write_text(eval_dir / "report.txt", report_text);
  outputs.push_back("eval/report.txt");
  entry["outputs"] = outputs;
  update_manifest(args.out_dir, "eval", entry);
  std::cout << report_text;
  return kExitOk;
}

// --------------------------------------------------------------------------
// bench

struct BenchArgs {
  InputPaths inputs;
  std::string out_dir;
  std::string metagraph_file;
  std::string method = "mega++";
  std::vector<int> ranks = {1, 5, 10, 15};
  int iters = 30;
  double alpha = 1.0;
  double lambda = 1e-6;
  std::uint64_t seed = 1;
  std::int64_t dense_limit = 20000;
};

int run_bench(const BenchArgs& args) {
  const hin::TypedGraph graph = load_inputs(args.inputs);
  require_file(args.metagraph_file, "meta-graph");
  const meta::MetaGraph mg =
      meta::MetaGraph::from_json_file(args.metagraph_file, graph.schema());
  relevance::RelevanceOptions rel_options;
  rel_options.dense_node_limit = args.dense_limit;

  // Similarity slices are shared across ranks so the table isolates solver cost.
  const relevance::SimilarityMatrix Y = relevance::graphsim(graph, mg, rel_options);
  std::vector<relevance::SimilarityMatrix> slices;
  for (const auto& p : meta::embedded_meta_paths(mg))
    slices.push_back(relevance::pathsim(graph, p, rel_options));
  const ctmd::SimilarityTensor X = ctmd::SimilarityTensor::stack(slices);

  std::ostringstream csv;
  csv << "rank,seconds,iterations\n";
  std::cout << "rank\tseconds\titerations\n";
  for (const int rank : args.ranks) {
    ctmd::CtmdConfig config;
    config.rank = rank;
    config.alpha = args.method == "mega" ? 0.0 : args.alpha;
    config.lambda0 = args.lambda;
    config.max_iter = args.iters;
    // Fixed iteration cap: disable early convergence so times are comparable.
    config.tol_objective = 0.0;
    config.tol_residual = 0.0;
    config.seed = args.seed;
    const auto start = std::chrono::steady_clock::now();
    const ctmd::EmbeddingResult result =
        ctmd::ctmd(X, args.method == "mega" ? nullptr : &Y, config);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    csv << rank << ',' << io::format_double(seconds) << ',' << result.iterations << '\n';
    std::cout << rank << '\t' << seconds << '\t' << result.iterations << '\n';
  }

  const fs::path bench_dir = fs::path(args.out_dir) / "bench";
  fs::create_directories(bench_dir);
  write_text(bench_dir / "timings.csv", csv.str());

  json entry;
  entry["config"] = {{"method", args.method},
                     {"iters", args.iters},
                     {"alpha", args.alpha},
                     {"lambda", args.lambda},
                     {"ranks", args.ranks},
                     {"seed", args.seed}};
  entry["outputs"] = {"bench/timings.csv"};
  update_manifest(args.out_dir, "bench", entry);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hinmega: meta-path/meta-graph relevance and node embedding toolkit"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic planted-community HIN");
  gen->add_option("--out", gen_args.out_dir, "output directory")->required();
  gen->add_option("--communities", gen_args.config.communities);
  gen->add_option("--authors", gen_args.config.authors_per_community,
                  "authors per community");
  gen->add_option("--papers-mean", gen_args.config.papers_per_author,
                  "mean papers per author (>= 1)");
  gen->add_option("--venues", gen_args.config.venues_per_community);
  gen->add_option("--topics", gen_args.config.topics_per_community);
  gen->add_option("--p-in", gen_args.config.p_in);
  gen->add_option("--p-out", gen_args.config.p_out);
  gen->add_option("--seed", gen_args.config.seed);

  SimArgs sim_args;
  CLI::App* sim = app.add_subcommand("sim", "compute a relevance matrix");
  add_input_options(sim, sim_args.inputs);
  sim->add_option("--out", sim_args.out_dir)->required();
  sim->add_option("--measure", sim_args.measure, "pathsim|structcount|graphsim")
      ->required()
      ->check(CLI::IsMember({"pathsim", "structcount", "graphsim"}));
  sim->add_option("--path", sim_args.path_text, "meta-path, e.g. A-P-V-P-A");
  sim->add_option("--metagraph", sim_args.metagraph_file, "meta-graph JSON");
  sim->add_flag("--enumerate", sim_args.enumerate,
                "use the brute-force instance enumerator (structcount, small graphs)");
  sim->add_flag("--injective", sim_args.injective,
                "with --enumerate: distinct meta-nodes map to distinct nodes");
  sim->add_option("--dense-limit", sim_args.dense_limit);

  EmbedArgs embed_args;
  CLI::App* embed = app.add_subcommand("embed", "learn a node embedding");
  add_input_options(embed, embed_args.inputs);
  embed->add_option("--out", embed_args.out_dir)->required();
  embed->add_option("--metagraph", embed_args.metagraph_file)->required();
  embed->add_option("--method", embed_args.method, "mega|mega++")
      ->check(CLI::IsMember({"mega", "mega++"}));
  embed->add_option("--rank", embed_args.config.rank, "embedding dimensions");
  embed->add_option("--alpha", embed_args.config.alpha, "coupling weight (mega++)");
  embed->add_option("--lambda", embed_args.config.lambda0, "initial penalty");
  embed->add_option("--rho", embed_args.config.rho, "penalty growth");
  embed->add_option("--lambda-max", embed_args.config.lambda_max);
  embed->add_option("--max-iter", embed_args.config.max_iter);
  embed->add_option("--tol-obj", embed_args.config.tol_objective);
  embed->add_option("--tol-residual", embed_args.config.tol_residual);
  embed->add_option("--init", embed_args.init, "normal|scaled")
      ->check(CLI::IsMember({"normal", "scaled"}));
  embed->add_flag("--dedupe-paths", embed_args.dedupe_paths,
                  "collapse embedded paths with identical type sequences");
  embed->add_option("--dense-limit", embed_args.dense_limit);
  embed->add_option("--seed", embed_args.config.seed);

  EvalArgs eval_args;
  CLI::App* evalc = app.add_subcommand("eval", "cluster / classify an embedding");
  evalc->add_option("--embedding", eval_args.embedding_file, "embedding TSV")->required();
  evalc->add_option("--labels", eval_args.labels_file, "labels TSV")->required();
  evalc->add_option("--out", eval_args.out_dir)->required();
  evalc->add_option("--task", eval_args.task)
      ->check(CLI::IsMember({"clustering", "classification", "both"}));
  evalc->add_option("--k", eval_args.k, "clusters (0: number of classes)");
  evalc->add_option("--restarts", eval_args.restarts, "k-means restarts");
  evalc->add_option("--kmeans-init", eval_args.kmeans_init)
      ->check(CLI::IsMember({"random", "plusplus"}));
  evalc->add_option("--nmi-norm", eval_args.nmi_norm)
      ->check(CLI::IsMember({"arithmetic", "geometric", "max"}));
  evalc->add_option("--knn-k", eval_args.knn_k);
  evalc->add_option("--train-frac", eval_args.train_frac);
  evalc->add_option("--repeats", eval_args.repeats);
  evalc->add_option("--normalize", eval_args.normalize)
      ->check(CLI::IsMember({"none", "l2"}));
  evalc->add_option("--seed", eval_args.seed);

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "time the solver across ranks");
  add_input_options(bench, bench_args.inputs);
  bench->add_option("--out", bench_args.out_dir)->required();
  bench->add_option("--metagraph", bench_args.metagraph_file)->required();
  bench->add_option("--method", bench_args.method)
      ->check(CLI::IsMember({"mega", "mega++"}));
  bench->add_option("--ranks", bench_args.ranks)->delimiter(',');
  bench->add_option("--iters", bench_args.iters, "fixed iteration cap");
  bench->add_option("--alpha", bench_args.alpha);
  bench->add_option("--lambda", bench_args.lambda);
  bench->add_option("--seed", bench_args.seed);
  bench->add_option("--dense-limit", bench_args.dense_limit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (sim->parsed()) return run_sim(sim_args);
    if (embed->parsed()) return run_embed(embed_args);
    if (evalc->parsed()) return run_eval(eval_args);
    if (bench->parsed()) return run_bench(bench_args);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

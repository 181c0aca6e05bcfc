#include "nervemp_cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nervemp/bench.hpp"
#include "nervemp/errors.hpp"
#include "nervemp/exactmp.hpp"
#include "nervemp/instance_io.hpp"
#include "nervemp/rng.hpp"
#include "nervemp/solubility.hpp"
#include "nervemp/surrogate.hpp"

namespace nervemp::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::map<std::string, TreeStrategy> kTreeNames{
    {"bfs", TreeStrategy::bfs}, {"random", TreeStrategy::random}, {"max_overlap", TreeStrategy::max_overlap}};
const std::map<std::string, SurrogateKind> kSurrogateNames{
    {"mlp", SurrogateKind::one_hidden_layer}, {"quadratic_ls", SurrogateKind::quadratic_ls}};
const std::map<std::string, BoxCenter> kCenterNames{{"origin", BoxCenter::origin},
                                                    {"argmin", BoxCenter::message_argmin}};
const std::map<std::string, BasisSupport> kSupportNames{{"dense", BasisSupport::dense},
                                                        {"local", BasisSupport::local}};
const std::map<std::string, BAlphaConvention> kConventionNames{
    {"free_domain", BAlphaConvention::free_domain}, {"message_domain", BAlphaConvention::message_domain},
    {"jet_image", BAlphaConvention::jet_image}};

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
}

std::vector<StatsRow> load_rows(const std::string& path) {
  if (path.empty()) return table1_rows();
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  return read_stats_csv(f);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + item + "' is not an integer");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

// Options shared by the engine commands.
struct TreeOptions {
  int root = 0;
  std::string strategy = "bfs";

  void add(CLI::App* cmd) {
    cmd->add_option("--root", root, "Root subgraph index")->capture_default_str();
    cmd->add_option("--tree", strategy, "Spanning tree strategy")
        ->check(CLI::IsMember({"bfs", "random", "max_overlap"}))
        ->capture_default_str();
  }

  TreeChoice choice(std::uint64_t seed) const {
    return TreeChoice{kTreeNames.at(strategy), 0, derive_seed(seed, 0x7ee)};
  }

  SpanningTree spanning(const SubgraphCover& cover, std::uint64_t seed) const {
    return spanning_tree(build_nerve(cover), cover, choice(seed));
  }

  DirectedTree build(const SubgraphCover& cover, std::uint64_t seed) const {
    if (root < 0 || root >= cover.size()) throw ConfigError("root " + std::to_string(root) + " out of range");
    return direct_tree(spanning(cover, seed), root);
  }
};

json edge_json(const DirectedEdge& e) { return json::array({e.from, e.to}); }

struct GenArgs {
  std::string fixture, kind = "random", rows, output;
  std::optional<std::uint64_t> seed;
  int k = 25, subgraphs = 4, max_nodes = 40, task_rows = 0;
  double noise = 0.05;
  std::string support = "local";
  bool rank_deficient = false;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  std::optional<Instance> inst;
  if (!a.fixture.empty()) {
    if (a.fixture != "eg32") throw ConfigError("unknown fixture '" + a.fixture + "'");
    inst = fixture_eg32();
  } else {
    if (!a.seed) throw ConfigError("--seed is required");
    const std::uint64_t seed = *a.seed;
    if (a.kind == "random") {
      RandomInstanceSpec spec;
      spec.subgraphs = a.subgraphs;
      spec.max_nodes = a.max_nodes;
      spec.rank_deficient = a.rank_deficient;
      spec.task_rows = a.task_rows;
      inst = gen_random_quadratic(spec, seed);
    } else {
      const auto rows = load_rows(a.rows);
      const SubgraphCover cover = cover_from_stats(rows, random_topology(rows, seed), seed);
      if (a.kind == "cover-stats") {
        std::vector<QuadFunc> quads;
        for (int i = 0; i < cover.size(); ++i) quads.push_back(QuadFunc::zero(cover.subgraph(i)));
        inst = Instance{"cover-stats", cover, std::move(quads), VectorXd::Zero(cover.observable_count()),
                        std::nullopt};
      } else {
        SamplingSpec spec{a.k, a.noise, kSupportNames.at(a.support)};
        inst = gen_distributed_sampling(cover, spec, derive_seed(seed, 0x5a));
      }
    }
  }
  inst->validate();
  const std::string text = instance_to_json(*inst);
  if (a.output.empty() || a.output == "-")
    out << text;
  else
    write_text(a.output, text);
  return kOk;
}

struct ExactArgs {
  std::string instance, output;
  std::uint64_t seed = 0;
  double regularize = 0.0;
  TreeOptions tree;
};

int cmd_run_exact(const ExactArgs& a, std::ostream& out) {
  Instance inst = load_instance(a.instance);
  std::vector<QuadFunc> quads = inst.quads;
  if (a.regularize > 0.0) quads = regularize(quads, a.regularize, derive_seed(a.seed, 0x4e6));
  const DirectedTree tree = a.tree.build(inst.cover, a.seed);
  const MessagePassingRun run = run_message_passing(inst.cover, quads, inst.observations, tree);
  const LocalSolution local = local_solve(run);
  const CentralSolution central = centralized_solve(inst.cover, quads, inst.observations);

  json j;
  j["root"] = tree.root();
  j["tree"] = a.tree.strategy;
  j["regularize"] = a.regularize;
  j["value"] = local.value;
  j["centralized_value"] = central.value;
  j["relative_gap"] = relative_gap(local.value, central.value);
  j["messages_sent"] = run.messages_sent;
  j["root_vars"] = local.vars;
  j["root_minimizer"] = to_vec(local.minimizer);
  j["root_kernel_dim"] = local.kernel.cols();
  j["centralized_kernel_dim"] = central.kernel.cols();
  try {
    j["minimizer"] = to_vec(back_substitute(inst.cover, run, inst.observations, local));
  } catch (const NonUniqueArgmin& e) {
    j["minimizer"] = nullptr;
    j["minimizer_note"] = e.what();
  }
  json msgs = json::array();
  for (const auto& m : run.edges) {
    msgs.push_back({{"edge", edge_json(m.partition.edge)},
                    {"x", m.partition.x_vars},
                    {"y", m.partition.y_vars},
                    {"z", m.partition.z_vars},
                    {"block_min_eigenvalue", m.block_min_eigenvalue},
                    {"digest", coefficient_digest(m.message)}});
  }
  j["messages"] = std::move(msgs);

  out << std::setprecision(12) << "exact value " << local.value << ", centralized value " << central.value
      << ", root kernel dimension " << local.kernel.cols() << '\n';
  if (!a.output.empty()) write_text(a.output, j.dump(1) + "\n");
  return kOk;
}

struct ApproxArgs {
  std::string instance, output, samples_dir;
  std::uint64_t seed = 0;
  int m = 80, hidden = 64, epochs = 2000, restarts = 8;
  double radius = 5.0;
  std::string surrogate = "quadratic_ls", center = "origin";
  TreeOptions tree;
};

int cmd_run_approx(const ApproxArgs& a, std::ostream& out) {
  const Instance inst = load_instance(a.instance);
  const DirectedTree tree = a.tree.build(inst.cover, a.seed);
  ApproxConfig cfg;
  cfg.samples = a.m;
  cfg.kind = kSurrogateNames.at(a.surrogate);
  cfg.center = kCenterNames.at(a.center);
  cfg.radius = a.radius;
  cfg.restarts = a.restarts;
  cfg.fit.hidden = a.hidden;
  cfg.fit.epochs = a.epochs;
  cfg.seed = a.seed;
  const ApproxResult res = approx_message_passing(inst.cover, inst.quads, inst.observations, tree, cfg);
  const double exact = local_solve(run_message_passing(inst.cover, inst.quads, inst.observations, tree)).value;
  const double truth = centralized_solve(inst.cover, inst.quads, inst.observations).value;

  json j;
  j["root"] = tree.root();
  j["surrogate"] = a.surrogate;
  j["m"] = a.m;
  j["value"] = res.value;
  j["exact_value"] = exact;
  j["truth_value"] = truth;
  j["R_percent"] = error_ratio(res.value, truth);
  j["exchanges"] = res.exchanges;
  json edges = json::array();
  for (const auto& e : res.edges)
    edges.push_back({{"edge", edge_json(e.edge)},
                     {"domain_dim", e.domain_dim},
                     {"samples", e.samples},
                     {"fit_rmse", e.fit_rmse},
                     {"fit_max_residual", e.fit_max_residual},
                     {"final_loss", e.final_loss}});
  j["edges"] = std::move(edges);

  if (!a.samples_dir.empty()) {
    fs::create_directories(a.samples_dir);
    for (const auto& s : res.transmitted) {
      std::ostringstream os;
      s.write(os);
      write_text((fs::path(a.samples_dir) /
                  ("edge_" + std::to_string(s.edge.from) + "_" + std::to_string(s.edge.to) + ".txt"))
                     .string(),
                 os.str());
    }
  }
  out << std::setprecision(12) << "approximate value " << res.value << ", truth " << truth << ", R "
      << error_ratio(res.value, truth) << "%\n";
  if (!a.output.empty()) write_text(a.output, j.dump(1) + "\n");
  return kOk;
}

struct AnalyzeArgs {
  std::string instance, output, task = "instance", convention = "free_domain";
  std::uint64_t seed = 0;
  std::optional<int> leaf;
  TreeOptions tree;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const Instance inst = load_instance(a.instance);
  TaskSpec task = TaskSpec::objective_value();
  if (a.task == "instance") {
    if (!inst.task) throw ConfigError("instance has no task; pass --task objective or identity");
    task = *inst.task;
  } else if (a.task == "identity") {
    task = TaskSpec::linear(MatrixXd::Identity(inst.cover.node_count(), inst.cover.node_count()),
                            VectorXd::Zero(inst.cover.node_count()));
  }
  const DirectedTree tree = a.tree.build(inst.cover, a.seed);
  const SpanningTree undirected = a.tree.spanning(inst.cover, a.seed);
  std::vector<int> leaves;
  if (a.leaf) {
    leaves.push_back(*a.leaf);
  } else {
    for (int i = 0; i < tree.size(); ++i)
      if (tree.is_leaf(i)) leaves.push_back(i);
  }
  const bool direct = direct_solubility_test(inst.cover, inst.quads, task, tree.root(), undirected, a.seed);
  JetConfig jet;
  jet.seed = a.seed;

  json reports = json::array();
  for (int leaf : leaves) {
    const SolubilityReport r =
        insolubility_check(inst.cover, inst.quads, task, tree, leaf, jet, kConventionNames.at(a.convention));
    reports.push_back({{"leaf", r.leaf},
                       {"receiver", r.receiver},
                       {"S_i", r.leaf_observables},
                       {"d_jet", r.jet_rank},
                       {"n_free", r.free_dim},
                       {"b_alpha", r.b_alpha},
                       {"S", r.observables},
                       {"dim_M", r.codomain_dim},
                       {"lhs", r.lhs},
                       {"rhs", r.rhs},
                       {"flag", r.flag},
                       {"tree_independent", r.tree_independent},
                       {"note", r.note}});
    out << "leaf " << r.leaf << " -> " << r.receiver << ": " << r.lhs << (r.flag ? " > " : " <= ") << r.rhs
        << ", insoluble " << (r.flag ? "true" : "false") << '\n';
  }
  out << "direct solubility at root " << tree.root() << ": " << (direct ? "true" : "false") << '\n';

  json j;
  j["root"] = tree.root();
  j["task"] = a.task;
  j["convention"] = a.convention;
  j["direct_test"] = direct;
  j["leaves"] = std::move(reports);
  if (!a.output.empty()) write_text(a.output, j.dump(1) + "\n");
  return kOk;
}

struct SweepArgs {
  std::string rows, k_list, m_list, records, aggregate_path, surrogate = "quadratic_ls", center = "origin";
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> cover_seed;
  int k = 50, m = 80, repeats = 5, threads = 1;
  double noise = 0.05, radius = 5.0;
  bool timing = false;
  TreeOptions tree;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  if (a.k_list.empty() == a.m_list.empty()) throw ConfigError("give exactly one of --k-list and --m-list");
  ExperimentSpec spec;
  spec.rows = load_rows(a.rows);
  spec.cover_seed = a.cover_seed.value_or(a.seed);
  spec.sampling = {a.k, a.noise, BasisSupport::local};
  spec.root = a.tree.root;
  spec.tree = a.tree.choice(a.seed);
  spec.approx.samples = a.m;
  spec.approx.kind = kSurrogateNames.at(a.surrogate);
  spec.approx.center = kCenterNames.at(a.center);
  spec.approx.radius = a.radius;
  const SweepKind kind = a.k_list.empty() ? SweepKind::m : SweepKind::k;
  const auto points = parse_int_list(kind == SweepKind::k ? a.k_list : a.m_list);
  const auto records = run_experiment(spec, kind, points, a.repeats, a.seed, a.threads);
  const auto agg = aggregate(records, kind);

  std::ostringstream rec_csv, agg_csv;
  write_records_csv(rec_csv, records, a.timing);
  write_aggregate_csv(agg_csv, agg);
  if (!a.records.empty()) write_text(a.records, rec_csv.str());
  if (!a.aggregate_path.empty()) write_text(a.aggregate_path, agg_csv.str());
  if (a.records.empty() && a.aggregate_path.empty()) out << agg_csv.str();
  else
    for (const auto& g : agg)
      out << (kind == SweepKind::k ? "k " : "m ") << g.sweep_point << ": mean R " << std::setprecision(4)
          << g.mean_r << "% (sd " << g.std_r << ", n " << g.n << ")\n";
  return kOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  const auto* lib = dynamic_cast<const Error*>(&e);
  if (!lib) return kInternalError;
  switch (lib->category()) {
    case Error::Category::invalid_input:
      return kInvalidInput;
    case Error::Category::numerical:
      return kNumericalFailure;
    case Error::Category::internal:
      return kInternalError;
  }
  return kInternalError;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Function-valued message passing over subgraph covers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "nervemp 0.1.0");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write an instance file");
  g->add_option("--fixture", gen.fixture, "Named fixture (eg32); needs no seed")->check(CLI::IsMember({"eg32"}));
  g->add_option("--kind", gen.kind, "Generator")
      ->check(CLI::IsMember({"random", "distributed-sampling", "cover-stats"}))
      ->capture_default_str();
  g->add_option("--rows", gen.rows, "Per-subgraph statistics CSV (subgraph,X,Y,S,V); default is the built-in 12-row table");
  g->add_option("--k", gen.k, "Basis size for distributed sampling")->capture_default_str();
  g->add_option("--noise", gen.noise, "Observation noise as a fraction of the RMS signal")->capture_default_str();
  g->add_option("--support", gen.support, "Basis vector support: local (one subgraph) or dense (all nodes)")
      ->check(CLI::IsMember({"dense", "local"}))
      ->capture_default_str();
  g->add_option("--subgraphs", gen.subgraphs, "Subgraph count for random instances")->capture_default_str();
  g->add_option("--max-nodes", gen.max_nodes, "Node budget for random instances")->capture_default_str();
  g->add_flag("--rank-deficient", gen.rank_deficient, "Random local functions of about half rank");
  g->add_option("--task-rows", gen.task_rows, "Rows of a random linear task (0 = objective task)")
      ->capture_default_str();
  g->add_option("--seed", gen.seed, "Root seed (required except with --fixture)");
  g->add_option("-o,--output", gen.output, "Output path (stdout when omitted)");

  ExactArgs ex;
  auto* e = app.add_subcommand("run-exact", "Exact quadratic message passing");
  e->add_option("instance", ex.instance, "Instance file")->required()->check(CLI::ExistingFile);
  ex.tree.add(e);
  e->add_option("--regularize", ex.regularize, "Add a_v v^2 with a_v ~ U(eps/2, eps] (0 disables)")
      ->capture_default_str();
  e->add_option("--seed", ex.seed, "Root seed")->required();
  e->add_option("-o,--output", ex.output, "Results JSON path");

  ApproxArgs ap;
  auto* p = app.add_subcommand("run-approx", "Surrogate-based approximate message passing");
  p->add_option("instance", ap.instance, "Instance file")->required()->check(CLI::ExistingFile);
  ap.tree.add(p);
  p->add_option("--m", ap.m, "Samples per message")->capture_default_str();
  p->add_option("--surrogate", ap.surrogate, "Surrogate family")
      ->check(CLI::IsMember({"mlp", "quadratic_ls"}))
      ->capture_default_str();
  p->add_option("--center", ap.center, "Sampling box center: origin or the sender's message argmin")
      ->check(CLI::IsMember({"origin", "argmin"}))
      ->capture_default_str();
  p->add_option("--radius", ap.radius, "Sampling box half-width")->capture_default_str();
  p->add_option("--hidden", ap.hidden, "MLP hidden width")->capture_default_str();
  p->add_option("--epochs", ap.epochs, "MLP full-batch epochs")->capture_default_str();
  p->add_option("--restarts", ap.restarts, "Multistart count for inner minimization")->capture_default_str();
  p->add_option("--samples-dir", ap.samples_dir, "Directory for the transmitted sample sets");
  p->add_option("--seed", ap.seed, "Root seed")->required();
  p->add_option("-o,--output", ap.output, "Results JSON path");

  AnalyzeArgs an;
  auto* n = app.add_subcommand("analyze", "Solubility analysis of a task");
  n->add_option("instance", an.instance, "Instance file")->required()->check(CLI::ExistingFile);
  an.tree.add(n);
  n->add_option("--task", an.task, "Task: the instance's own, the objective value, or the identity")
      ->check(CLI::IsMember({"instance", "objective", "identity"}))
      ->capture_default_str();
  n->add_option("--leaf", an.leaf, "Analyse one leaf (default: every leaf)");
  n->add_option("--convention", an.convention, "b_alpha convention")
      ->check(CLI::IsMember({"free_domain", "message_domain", "jet_image"}))
      ->capture_default_str();
  n->add_option("--seed", an.seed, "Root seed")->required();
  n->add_option("-o,--output", an.output, "Report JSON path");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Distributed-sampling error sweep over k or m");
  s->add_option("--rows", sw.rows, "Per-subgraph statistics CSV; default is the built-in 12-row table");
  s->add_option("--k-list", sw.k_list, "Comma-separated basis sizes (m fixed by --m)");
  s->add_option("--m-list", sw.m_list, "Comma-separated sample counts (k fixed by --k)");
  s->add_option("--k", sw.k, "Basis size for an m sweep")->capture_default_str();
  s->add_option("--m", sw.m, "Samples per message for a k sweep")->capture_default_str();
  s->add_option("--repeats", sw.repeats, "Seeds per sweep point")->capture_default_str();
  s->add_option("--noise", sw.noise, "Observation noise fraction")->capture_default_str();
  s->add_option("--surrogate", sw.surrogate, "Surrogate family")
      ->check(CLI::IsMember({"mlp", "quadratic_ls"}))
      ->capture_default_str();
  s->add_option("--center", sw.center, "Sampling box center")
      ->check(CLI::IsMember({"origin", "argmin"}))
      ->capture_default_str();
  s->add_option("--radius", sw.radius, "Sampling box half-width")->capture_default_str();
  sw.tree.add(s);
  s->add_option("--threads", sw.threads, "Worker threads")->capture_default_str();
  s->add_option("--cover-seed", sw.cover_seed, "Seed for topology and cover (default: --seed)");
  s->add_flag("--timing", sw.timing, "Record wall time (otherwise wall_ms is 0 so output is reproducible)");
  s->add_option("--seed", sw.seed, "Root seed")->required();
  s->add_option("--records", sw.records, "Per-run CSV path");
  s->add_option("--aggregate", sw.aggregate_path, "Aggregate CSV path");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (e->parsed()) return cmd_run_exact(ex, out);
    if (p->parsed()) return cmd_run_approx(ap, out);
    if (n->parsed()) return cmd_analyze(an, out);
    if (s->parsed()) return cmd_sweep(sw, out);
  } catch (const std::exception& ex_) {
    const int code = exit_code_for(ex_);
    err << (code == kInternalError ? "internal error: " : "error: ") << ex_.what() << '\n';
    return code;
  }
  return kInternalError;
}

}  // namespace nervemp::cli

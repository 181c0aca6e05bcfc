#include "nervemp/instance_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nervemp/errors.hpp"
#include "nervemp/rng.hpp"

namespace nervemp {

using nlohmann::json;

namespace {

json quad_to_json(const QuadFunc& q) {
  json a = json::array();
  for (int i = 0; i < q.dim(); ++i)
    for (int j = i; j < q.dim(); ++j)
      if (q.A()(i, j) != 0.0) a.push_back(json::array({i, j, q.A()(i, j)}));
  json b = json::array();
  for (int i = 0; i < q.dim(); ++i) b.push_back(q.b()(i));
  return json{{"vars", q.vars()}, {"A", std::move(a)}, {"b", std::move(b)}, {"c", q.c()}};
}

QuadFunc quad_from_json(const json& j, int index) {
  auto where = [&](const std::string& what) {
    return "function " + std::to_string(index) + ": " + what;
  };
  const NodeSet vars = j.at("vars").get<NodeSet>();
  const auto n = static_cast<Eigen::Index>(vars.size());
  MatrixXd a = MatrixXd::Zero(n, n);
  for (const auto& t : j.at("A")) {
    if (!t.is_array() || t.size() != 3) throw InvalidInstance(where("A entries must be [i, j, value]"));
    const int r = t[0].get<int>(), c = t[1].get<int>();
    if (r < 0 || c < 0 || r >= n || c >= n || r > c)
      throw InvalidInstance(where("A triplet (" + std::to_string(r) + ", " + std::to_string(c) +
                                  ") is outside the upper triangle"));
    a(r, c) = a(c, r) = t[2].get<double>();
  }
  const std::vector<double> bv = j.at("b").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(bv.size()) != n) throw InvalidInstance(where("b has the wrong length"));
  VectorXd b = Eigen::Map<const VectorXd>(bv.data(), n);
  for (std::size_t k = 1; k < vars.size(); ++k)
    if (vars[k] <= vars[k - 1]) throw InvalidInstance(where("vars must be strictly ascending"));
  // Upper-triangle storage makes A exactly symmetric, so the constructor's
  // symmetrization leaves the stored values bit-identical.
  return QuadFunc(vars, std::move(a), std::move(b), j.at("c").get<double>());
}

}  // namespace

void Instance::validate() const {
  if (static_cast<int>(quads.size()) != cover.size()) {
    std::ostringstream os;
    os << quads.size() << " functions for " << cover.size() << " subgraphs";
    throw InvalidInstance(os.str());
  }
  for (int i = 0; i < cover.size(); ++i) {
    for (NodeId v : quads[i].vars())
      if (!set_contains(cover.subgraph(i), v)) {
        std::ostringstream os;
        os << "function " << i << " uses node " << v << " outside V_" << i;
        throw InvalidInstance(os.str());
      }
    if (!quads[i].is_psd()) {
      std::ostringstream os;
      os << "function " << i << " is not convex (min eigenvalue " << quads[i].min_eigenvalue() << ")";
      throw InvalidInstance(os.str());
    }
  }
  if (observations.size() != cover.observable_count()) {
    std::ostringstream os;
    os << "observations has length " << observations.size() << ", expected " << cover.observable_count();
    throw InvalidInstance(os.str());
  }
  if (task) task->validate(cover.node_count());
}

std::string instance_to_json(const Instance& inst) {
  json j;
  j["format"] = "nervemp-instance";
  j["version"] = 1;
  j["name"] = inst.name;
  j["nodes"] = inst.cover.node_count();
  json edges = json::array();
  for (const auto& [a, b] : inst.cover.graph().edges) edges.push_back(json::array({a, b}));
  j["edges"] = std::move(edges);
  j["subgraphs"] = inst.cover.subgraphs();
  j["observables"] = inst.cover.all_observables();
  json fns = json::array();
  for (const auto& q : inst.quads) fns.push_back(quad_to_json(q));
  j["functions"] = std::move(fns);
  j["observations"] = std::vector<double>(inst.observations.data(),
                                          inst.observations.data() + inst.observations.size());
  if (inst.task) {
    if (inst.task->is_linear()) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < inst.task->L().rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < inst.task->L().cols(); ++c) row.push_back(inst.task->L()(r, c));
        rows.push_back(std::move(row));
      }
      j["task"] = {{"kind", "linear"},
                   {"L", std::move(rows)},
                   {"d", std::vector<double>(inst.task->d().data(),
                                             inst.task->d().data() + inst.task->d().size())}};
    } else {
      j["task"] = {{"kind", "objective_value"}};
    }
  }
  return j.dump(1) + "\n";
}

Instance instance_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInstance(std::string("malformed JSON: ") + e.what());
  }
  try {
    Graph g;
    g.node_count = j.at("nodes").get<int>();
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw InvalidInstance("edges must be [a, b] pairs");
      g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    SubgraphCover cover(std::move(g), j.at("subgraphs").get<std::vector<NodeSet>>(),
                        j.at("observables").get<std::vector<NodeSet>>());
    std::vector<QuadFunc> quads;
    if (j.contains("functions")) {
      int index = 0;
      for (const auto& f : j.at("functions")) quads.push_back(quad_from_json(f, index++));
    } else {
      for (int i = 0; i < cover.size(); ++i) quads.push_back(QuadFunc::zero(cover.subgraph(i)));
    }
    VectorXd obs = VectorXd::Zero(cover.observable_count());
    if (j.contains("observations")) {
      const auto v = j.at("observations").get<std::vector<double>>();
      obs = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    std::optional<TaskSpec> task;
    if (j.contains("task")) {
      const auto& t = j.at("task");
      const std::string kind = t.at("kind").get<std::string>();
      if (kind == "linear") {
        const auto rows = t.at("L").get<std::vector<std::vector<double>>>();
        MatrixXd l(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (static_cast<Eigen::Index>(rows[r].size()) != l.cols())
            throw InvalidInstance("task row " + std::to_string(r) + " has the wrong length");
          for (std::size_t c = 0; c < rows[r].size(); ++c)
            l(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        const auto d = t.at("d").get<std::vector<double>>();
        task = TaskSpec::linear(std::move(l), Eigen::Map<const VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
      } else if (kind == "objective_value") {
        task = TaskSpec::objective_value();
      } else {
        throw InvalidInstance("unknown task kind '" + kind + "'");
      }
    }
    Instance inst{j.value("name", std::string{}), std::move(cover), std::move(quads), std::move(obs),
                  std::move(task)};
    inst.validate();
    return inst;
  } catch (const json::exception& e) {
    throw InvalidInstance(std::string("instance schema: ") + e.what());
  } catch (const DimensionMismatch& e) {
    throw InvalidInstance(e.what());
  }
}

void save_instance(const Instance& instance, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << instance_to_json(instance);
}

Instance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return instance_from_json(buf.str());
}

std::string coefficient_digest(const QuadFunc& q) {
  std::string bytes;
  auto put = [&](double v) {
    char raw[sizeof(double)];
    std::memcpy(raw, &v, sizeof v);
    bytes.append(raw, sizeof raw);
  };
  for (NodeId v : q.vars()) put(static_cast<double>(v));
  for (int i = 0; i < q.dim(); ++i)
    for (int j = i; j < q.dim(); ++j) put(q.A()(i, j));
  for (int i = 0; i < q.dim(); ++i) put(q.b()(i));
  put(q.c());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return hex;
}

}  // namespace nervemp

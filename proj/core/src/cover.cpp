#include "nervemp/cover.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>

#include "nervemp/errors.hpp"
#include "nervemp/rng.hpp"

namespace nervemp {

namespace {

template <class... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

SpanningTree kruskal(const NerveSkeleton& nerve, const std::vector<std::pair<int, int>>& order) {
  SpanningTree tree;
  tree.size = nerve.size;
  DisjointSets sets(nerve.size);
  for (const auto& e : order) {
    if (sets.unite(e.first, e.second)) tree.edges.push_back(e);
  }
  std::sort(tree.edges.begin(), tree.edges.end());
  return tree;
}

}  // namespace

NodeSet set_union(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

NodeSet set_intersection(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool set_contains(const NodeSet& s, NodeId v) { return std::binary_search(s.begin(), s.end(), v); }

void Graph::validate() const {
  if (node_count < 0) throw InvalidInstance("negative node count");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [a, b] = edges[e];
    if (a < 0 || a >= node_count || b < 0 || b >= node_count)
      throw InvalidInstance(cat("edge ", e, " (", a, ", ", b, ") has an undeclared endpoint"));
    if (a == b) throw InvalidInstance(cat("edge ", e, " is a self-loop on node ", a));
  }
}

SubgraphCover::SubgraphCover(Graph graph, std::vector<NodeSet> subgraphs,
                             std::vector<NodeSet> observables)
    : graph_(std::move(graph)),
      subgraphs_(std::move(subgraphs)),
      observables_(std::move(observables)) {
  graph_.validate();
  const int n = graph_.node_count;
  const int t = static_cast<int>(subgraphs_.size());
  if (t < 1) throw InvalidInstance("cover needs at least one subgraph");
  if (static_cast<int>(observables_.size()) != t)
    throw InvalidInstance(cat("observables lists ", observables_.size(), " sets for ", t,
                              " subgraphs"));

  auto normalize = [&](NodeSet& s, const char* what, int i) {
    std::sort(s.begin(), s.end());
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] < 0 || s[k] >= n)
        throw InvalidInstance(cat(what, " ", i, " references undeclared node ", s[k]));
      if (k > 0 && s[k] == s[k - 1])
        throw InvalidInstance(cat(what, " ", i, " lists node ", s[k], " twice"));
    }
  };
  for (int i = 0; i < t; ++i) {
    normalize(subgraphs_[i], "subgraph", i);
    normalize(observables_[i], "observables", i);
  }

  containing_.assign(n, {});
  for (int i = 0; i < t; ++i)
    for (NodeId v : subgraphs_[i]) containing_[v].push_back(i);
  for (NodeId v = 0; v < n; ++v)
    if (containing_[v].empty()) throw InvalidInstance(cat("node ", v, " is not covered by any subgraph"));

  observable_pos_.assign(n, -1);
  for (int i = 0; i < t; ++i) {
    for (NodeId v : observables_[i]) {
      if (!set_contains(subgraphs_[i], v))
        throw InvalidInstance(cat("observable node ", v, " of S_", i, " is not in V_", i));
      if (containing_[v].size() != 1)
        throw InvalidInstance(cat("observable node ", v, " of S_", i,
                                  " also belongs to subgraph ",
                                  containing_[v][0] == i ? containing_[v][1] : containing_[v][0]));
      observable_pos_[v] = static_cast<int>(observable_order_.size());
      observable_order_.push_back(v);
    }
  }
}

std::vector<std::pair<NodeId, NodeId>> SubgraphCover::subgraph_edges(int i) const {
  const NodeSet& vi = subgraph(i);
  std::vector<std::pair<NodeId, NodeId>> out;
  for (const auto& e : graph_.edges)
    if (set_contains(vi, e.first) && set_contains(vi, e.second)) out.push_back(e);
  return out;
}

NodeSet SubgraphCover::free_nodes() const {
  NodeSet out;
  for (NodeId v = 0; v < node_count(); ++v)
    if (!is_observable(v)) out.push_back(v);
  return out;
}

bool NerveSkeleton::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

bool NerveSkeleton::connected() const {
  if (size <= 1) return true;
  std::vector<char> seen(size, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int w : adjacency[u])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
  }
  return count == size;
}

NerveSkeleton build_nerve(const SubgraphCover& cover) {
  NerveSkeleton nerve;
  nerve.size = cover.size();
  nerve.adjacency.assign(nerve.size, {});
  // Pairs sharing a node are read off the per-node membership lists.
  std::vector<std::pair<int, int>> pairs;
  for (NodeId v = 0; v < cover.node_count(); ++v) {
    const auto& members = cover.containing(v);
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) pairs.emplace_back(members[a], members[b]);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  nerve.edges = std::move(pairs);
  for (const auto& [i, j] : nerve.edges) {
    nerve.adjacency[i].push_back(j);
    nerve.adjacency[j].push_back(i);
  }
  for (auto& adj : nerve.adjacency) std::sort(adj.begin(), adj.end());
  return nerve;
}

SpanningTree spanning_tree(const NerveSkeleton& nerve, const SubgraphCover& cover,
                           const TreeChoice& choice) {
  if (!nerve.connected()) throw DisconnectedNerve("the nerve skeleton has more than one component");
  SpanningTree tree;
  tree.size = nerve.size;
  switch (choice.strategy) {
    case TreeStrategy::bfs: {
      if (choice.bfs_root < 0 || choice.bfs_root >= nerve.size)
        throw ConfigError(cat("bfs root ", choice.bfs_root, " is not a nerve node"));
      std::vector<char> seen(nerve.size, 0);
      std::queue<int> queue;
      queue.push(choice.bfs_root);
      seen[choice.bfs_root] = 1;
      while (!queue.empty()) {
        int u = queue.front();
        queue.pop();
        for (int w : nerve.adjacency[u]) {
          if (seen[w]) continue;
          seen[w] = 1;
          tree.edges.emplace_back(std::min(u, w), std::max(u, w));
          queue.push(w);
        }
      }
      std::sort(tree.edges.begin(), tree.edges.end());
      break;
    }
    case TreeStrategy::random: {
      auto order = nerve.edges;
      Rng rng(choice.seed);
      rng.shuffle(order.begin(), order.end());
      tree = kruskal(nerve, order);
      break;
    }
    case TreeStrategy::max_overlap: {
      std::vector<std::pair<std::size_t, std::pair<int, int>>> weighted;
      for (const auto& e : nerve.edges)
        weighted.push_back(
            {set_intersection(cover.subgraph(e.first), cover.subgraph(e.second)).size(), e});
      std::stable_sort(weighted.begin(), weighted.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      std::vector<std::pair<int, int>> order;
      for (const auto& w : weighted) order.push_back(w.second);
      tree = kruskal(nerve, order);
      break;
    }
  }
  std::set_difference(nerve.edges.begin(), nerve.edges.end(), tree.edges.begin(),
                      tree.edges.end(), std::back_inserter(tree.complement));
  return tree;
}

DirectedTree::DirectedTree(const SpanningTree& tree, int root)
    : root_(root), complement_(tree.complement) {
  const int t = tree.size;
  if (root < 0 || root >= t) throw ConfigError(cat("root ", root, " is not a tree node"));
  if (static_cast<int>(tree.edges.size()) != t - 1)
    throw InvalidInstance(cat("spanning tree on ", t, " nodes has ", tree.edges.size(), " edges"));
  std::vector<std::vector<int>> adj(t);
  for (const auto& [i, j] : tree.edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  parent_.assign(t, -2);
  children_.assign(t, {});
  parent_[root] = -1;
  std::queue<int> queue;
  queue.push(root);
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop();
    for (int w : adj[u]) {
      if (parent_[w] != -2) continue;
      parent_[w] = u;
      children_[u].push_back(w);
      queue.push(w);
    }
  }
  for (int v = 0; v < t; ++v)
    if (parent_[v] == -2) throw InvalidInstance(cat("tree does not reach nerve node ", v));

  // Iterative DFS for post order and Euler intervals.
  tin_.assign(t, 0);
  tout_.assign(t, 0);
  int clock = 0;
  std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
  tin_[root] = clock++;
  while (!stack.empty()) {
    auto& [u, next] = stack.back();
    if (next < children_[u].size()) {
      int c = children_[u][next++];
      tin_[c] = clock++;
      stack.emplace_back(c, 0);
    } else {
      tout_[u] = clock++;
      post_order_.push_back(u);
      stack.pop_back();
    }
  }
}

std::vector<DirectedEdge> DirectedTree::edges() const {
  std::vector<DirectedEdge> out;
  for (int v : post_order_)
    if (v != root_) out.push_back({v, parent_[v]});
  return out;
}

bool DirectedTree::in_subtree(int node, int subtree_root) const {
  return tin_.at(subtree_root) <= tin_.at(node) && tout_.at(node) <= tout_.at(subtree_root);
}

std::vector<int> DirectedTree::complement_neighbors(int node) const {
  std::vector<int> out;
  for (const auto& [i, j] : complement_) {
    if (i == node) out.push_back(j);
    if (j == node) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

DirectedTree direct_tree(const SpanningTree& tree, int root) { return DirectedTree(tree, root); }

namespace {

EdgePartition partition_edge(const SubgraphCover& cover, const DirectedTree& tree, int node,
                             const NodeSet& held) {
  EdgePartition p;
  p.edge = {node, tree.parent(node)};
  p.s_vars = cover.observables(node);

  NodeSet outward = cover.subgraph(p.edge.to);
  for (int k : tree.complement_neighbors(node)) outward = set_union(outward, cover.subgraph(k));
  p.x_vars = set_intersection(cover.subgraph(node), outward);

  for (NodeId v : set_difference(held, p.x_vars)) {
    bool local = !cover.is_observable(v);
    for (int k : cover.containing(v))
      if (!tree.in_subtree(k, node)) {
        local = false;
        break;
      }
    (local ? p.y_vars : p.z_vars).push_back(v);
  }
  return p;
}

}  // namespace

NodeSet held_variables(const SubgraphCover& cover, const DirectedTree& tree, int node) {
  NodeSet held = set_difference(cover.subgraph(node), cover.observables(node));
  for (int c : tree.children(node)) {
    const NodeSet child_held = held_variables(cover, tree, c);
    const EdgePartition p = partition_edge(cover, tree, c, child_held);
    held = set_union(held, set_union(p.x_vars, p.z_vars));
  }
  return held;
}

std::vector<EdgePartition> partition_tree(const SubgraphCover& cover, const DirectedTree& tree) {
  if (tree.size() != cover.size())
    throw InvalidInstance(cat("tree has ", tree.size(), " nodes but the cover has ", cover.size(),
                              " subgraphs"));
  std::vector<NodeSet> held(cover.size());
  std::vector<EdgePartition> out;
  for (int v : tree.post_order()) {
    held[v] = set_union(held[v], set_difference(cover.subgraph(v), cover.observables(v)));
    if (v == tree.root()) continue;
    EdgePartition p = partition_edge(cover, tree, v, held[v]);
    const int parent = tree.parent(v);
    held[parent] = set_union(held[parent], set_union(p.x_vars, p.z_vars));
    out.push_back(std::move(p));
  }
  return out;
}

EdgePartition partition_variables(const SubgraphCover& cover, const DirectedTree& tree,
                                  DirectedEdge edge) {
  if (edge.from < 0 || edge.from >= tree.size() || tree.parent(edge.from) != edge.to)
    throw ConfigError(cat("edge ", edge.from, "->", edge.to, " is not an edge of the directed tree"));
  return partition_edge(cover, tree, edge.from, held_variables(cover, tree, edge.from));
}

}  // namespace nervemp

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace nervemp {

// Graph nodes are dense integers 0..n-1.
using NodeId = int;
// Sorted ascending, no duplicates.
using NodeSet = std::vector<NodeId>;

struct Graph {
  int node_count = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;

  // Throws InvalidInstance on self-loops or out-of-range endpoints.
  void validate() const;
};

// G together with subgraph node sets V_i and exclusive observable sets S_i.
class SubgraphCover {
 public:
  // Validates every cover invariant and reports the first violation with
  // indices (InvalidInstance). Node lists are sorted on the way in.
  SubgraphCover(Graph graph, std::vector<NodeSet> subgraphs,
                std::vector<NodeSet> observables);

  const Graph& graph() const { return graph_; }
  int node_count() const { return graph_.node_count; }
  int size() const { return static_cast<int>(subgraphs_.size()); }

  const NodeSet& subgraph(int i) const { return subgraphs_.at(i); }
  const NodeSet& observables(int i) const { return observables_.at(i); }
  const std::vector<NodeSet>& subgraphs() const { return subgraphs_; }
  const std::vector<NodeSet>& all_observables() const { return observables_; }

  // Induced edges of G_i.
  std::vector<std::pair<NodeId, NodeId>> subgraph_edges(int i) const;

  // Concatenation S_1, ..., S_t. Observation vectors use this order.
  const NodeSet& observable_order() const { return observable_order_; }
  int observable_count() const { return static_cast<int>(observable_order_.size()); }
  // Position of v in observable_order(), or -1.
  int observable_position(NodeId v) const { return observable_pos_.at(v); }
  bool is_observable(NodeId v) const { return observable_position(v) >= 0; }

  // Indices of the subgraphs containing v, ascending.
  const std::vector<int>& containing(NodeId v) const { return containing_.at(v); }

  // V \ S, ascending.
  NodeSet free_nodes() const;

 private:
  Graph graph_;
  std::vector<NodeSet> subgraphs_;
  std::vector<NodeSet> observables_;
  NodeSet observable_order_;
  std::vector<int> observable_pos_;
  std::vector<std::vector<int>> containing_;
};

// 1-skeleton of the nerve: one node per subgraph, an edge when two subgraphs
// share at least one graph node.
struct NerveSkeleton {
  int size = 0;
  // (i, j) with i < j, lexicographically sorted.
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adjacency;

  bool has_edge(int i, int j) const;
  bool connected() const;
};

NerveSkeleton build_nerve(const SubgraphCover& cover);

enum class TreeStrategy { bfs, random, max_overlap };

struct TreeChoice {
  TreeStrategy strategy = TreeStrategy::bfs;
  // Start node for bfs.
  int bfs_root = 0;
  // Used by the random strategy.
  std::uint64_t seed = 0;
};

struct SpanningTree {
  int size = 0;
  // Undirected tree edges and the complement T^c, both as sorted (i, j), i < j.
  std::vector<std::pair<int, int>> edges;
  std::vector<std::pair<int, int>> complement;
};

// Throws DisconnectedNerve if the skeleton is not connected.
SpanningTree spanning_tree(const NerveSkeleton& nerve, const SubgraphCover& cover,
                           const TreeChoice& choice = {});

struct DirectedEdge {
  int from = -1;
  int to = -1;
  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

// A spanning tree with every edge oriented toward the root.
class DirectedTree {
 public:
  DirectedTree() = default;
  DirectedTree(const SpanningTree& tree, int root);

  int root() const { return root_; }
  int size() const { return static_cast<int>(parent_.size()); }
  // -1 for the root.
  int parent(int node) const { return parent_.at(node); }
  const std::vector<int>& children(int node) const { return children_.at(node); }
  bool is_leaf(int node) const { return node != root_ && children_.at(node).empty(); }
  int out_degree(int node) const { return node == root_ ? 0 : 1; }

  // Children before parents; siblings in ascending index order.
  const std::vector<int>& post_order() const { return post_order_; }
  // Tree edges in post order of their tail.
  std::vector<DirectedEdge> edges() const;

  bool in_subtree(int node, int subtree_root) const;
  const std::vector<std::pair<int, int>>& complement() const { return complement_; }
  // Neighbors of `node` across complement edges, ascending.
  std::vector<int> complement_neighbors(int node) const;

 private:
  int root_ = -1;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<int> post_order_;
  std::vector<int> tin_, tout_;
  std::vector<std::pair<int, int>> complement_;
};

DirectedTree direct_tree(const SpanningTree& tree, int root);

// Variable categories of the function held at the tail of a tree edge.
struct EdgePartition {
  DirectedEdge edge;
  NodeSet s_vars;  // observables S_i, fixed before elimination
  NodeSet x_vars;  // V_i ∩ (V_j ∪ complement neighbours)
  NodeSet y_vars;  // minimized out along this edge
  NodeSet z_vars;  // retained and forwarded
};

// Variables present in the (observation-substituted) function held at
// `node`: V_node \ S_node plus everything forwarded by its children.
NodeSet held_variables(const SubgraphCover& cover, const DirectedTree& tree, int node);

EdgePartition partition_variables(const SubgraphCover& cover, const DirectedTree& tree,
                                  DirectedEdge edge);

// Partitions of every tree edge, in post order.
std::vector<EdgePartition> partition_tree(const SubgraphCover& cover,
                                          const DirectedTree& tree);

// Sorted-set helpers shared across modules.
NodeSet set_union(const NodeSet& a, const NodeSet& b);
NodeSet set_intersection(const NodeSet& a, const NodeSet& b);
NodeSet set_difference(const NodeSet& a, const NodeSet& b);
bool set_contains(const NodeSet& s, NodeId v);

}  // namespace nervemp

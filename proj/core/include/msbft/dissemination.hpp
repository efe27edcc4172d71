#pragma once

#include <utility>
#include <vector>

#include "msbft/topology.hpp"

namespace msbft {

/// Spanning tree over the innermost cliques of a hypercube, rooted at one
/// clique. Clique labels are read relative to the root (digit-wise difference
/// mod s); the parent of a clique zeroes its highest nonzero relative digit,
/// and that digit's index is the clique's layer. Every tree edge therefore
/// joins two cliques that differ in one digit, and layer-l cliques are
/// reached across clique digit l (node dimension l+1).
class DisseminationTree {
 public:
  DisseminationTree(const HypercubeTopology& topo, NodeId root_clique);

  NodeId root() const { return root_; }
  std::size_t size() const { return layer_.size(); }
  int depth() const { return depth_; }

  int layer(NodeId clique) const { return layer_[clique]; }
  NodeId parent(NodeId clique) const { return parent_[clique]; }
  // (parent, child) pairs ordered by child layer, then child id.
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
  std::vector<NodeId> layer_members(int layer) const;

 private:
  NodeId root_;
  int depth_ = 0;
  std::vector<int> layer_;
  std::vector<NodeId> parent_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
};

}  // namespace msbft

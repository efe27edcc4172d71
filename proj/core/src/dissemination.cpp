#include "msbft/dissemination.hpp"

#include <algorithm>

namespace msbft {

DisseminationTree::DisseminationTree(const HypercubeTopology& topo, NodeId root_clique)
    : root_(root_clique) {
  const auto count = topo.clique_count();
  if (root_clique >= count) throw PreconditionError("root clique out of range");
  const int s = topo.base();
  layer_.assign(count, 0);
  parent_.assign(count, root_clique);
  for (NodeId c = 0; c < count; ++c) {
    int top = 0;
    for (int j = 1; j < topo.dims(); ++j) {
      const int rel = (topo.clique_digit(c, j) - topo.clique_digit(root_clique, j) + s) % s;
      if (rel != 0) top = j;
    }
    layer_[c] = top;
    if (top != 0) {
      parent_[c] = topo.clique_with_digit(c, top, topo.clique_digit(root_clique, top));
      depth_ = std::max(depth_, top);
    }
  }
  for (int l = 1; l <= depth_; ++l) {
    for (NodeId c = 0; c < count; ++c) {
      if (layer_[c] == l) edges_.emplace_back(parent_[c], c);
    }
  }
}

std::vector<NodeId> DisseminationTree::layer_members(int layer) const {
  std::vector<NodeId> out;
  for (NodeId c = 0; c < layer_.size(); ++c) {
    if (layer_[c] == layer) out.push_back(c);
  }
  return out;
}

}  // namespace msbft

#include "msbft/scopes.hpp"

#include <algorithm>
#include <string>

namespace msbft {

namespace {

Scope clique_scope(const HypercubeTopology& topo, NodeId clique, std::uint32_t bound) {
  Scope scope{"clique:" + topo.clique_label(clique), {}, bound, false};
  for (int x = 0; x < topo.base(); ++x) scope.members.push_back(topo.member(clique, x));
  return scope;
}

Scope pair_scope(const HypercubeTopology& topo, NodeId a, NodeId b, std::uint32_t bound) {
  Scope scope{"pair:" + topo.clique_label(a) + "|" + topo.clique_label(b), {}, bound, false};
  for (int x = 0; x < topo.base(); ++x) scope.members.push_back(topo.member(a, x));
  for (int x = 0; x < topo.base(); ++x) scope.members.push_back(topo.member(b, x));
  std::sort(scope.members.begin(), scope.members.end());
  return scope;
}

}  // namespace

ScopeList scopes_for_broadcast(const HypercubeTopology& topo, const DisseminationTree& tree,
                               const ResilienceFunction& alpha) {
  const auto bound = scope_bound(alpha, static_cast<std::size_t>(topo.base()));
  ScopeList scopes;
  for (NodeId c = 0; c < topo.clique_count(); ++c) scopes.push_back(clique_scope(topo, c, bound));
  for (const auto& [parent, child] : tree.edges()) {
    scopes.push_back(pair_scope(topo, parent, child, bound));
  }
  return scopes;
}

ScopeList scopes_for_agreement(const HypercubeTopology& topo, const ResilienceFunction& alpha) {
  const auto bound = scope_bound(alpha, static_cast<std::size_t>(topo.base()));
  ScopeList scopes;
  for (NodeId c = 0; c < topo.clique_count(); ++c) scopes.push_back(clique_scope(topo, c, bound));
  for (NodeId a = 0; a < topo.clique_count(); ++a) {
    for (int j = 1; j < topo.dims(); ++j) {
      for (int v = topo.clique_digit(a, j) + 1; v < topo.base(); ++v) {
        scopes.push_back(pair_scope(topo, a, topo.clique_with_digit(a, j, v), bound));
      }
    }
  }
  return scopes;
}

ScopeList scopes_for_expander(const ExpanderStack& stack, const ResilienceFunction& alpha,
                              const std::vector<std::pair<std::size_t, std::size_t>>& sacrificed) {
  ScopeList scopes;
  for (std::size_t l = 0; l < stack.layer_count(); ++l) {
    const auto size = stack.block_size(l);
    const auto bound = scope_bound(alpha, size);
    for (std::size_t r = 0; r < stack.size() / size; ++r) {
      Scope scope{"layer" + std::to_string(l) + ":" + std::to_string(r), {}, bound, false};
      const NodeId start = stack.block_start(l, r);
      for (std::size_t i = 0; i < size; ++i) scope.members.push_back(static_cast<NodeId>(start + i));
      scope.sacrificed = std::find(sacrificed.begin(), sacrificed.end(), std::make_pair(l, r)) !=
                         sacrificed.end();
      scopes.push_back(std::move(scope));
    }
  }
  return scopes;
}

ResilienceFunction layered_resilience(const ExpanderStack& stack, std::vector<double> alpha) {
  if (alpha.empty()) return one_third();
  std::vector<std::size_t> sizes;
  for (std::size_t l = 0; l < stack.layer_count(); ++l) sizes.push_back(stack.block_size(l));
  return [sizes, alpha](std::size_t s) {
    for (std::size_t l = 0; l < sizes.size(); ++l) {
      if (sizes[l] == s) return alpha[std::min(l, alpha.size() - 1)];
    }
    return alpha.back();
  };
}

}  // namespace msbft

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "msbft/adversary.hpp"
#include "msbft/dissemination.hpp"
#include "msbft/topology.hpp"

namespace msbft {

/// Two-scale adversary of the hypercube broadcast: one scope per innermost
/// clique and one per tree edge (the 2s nodes of the two joined cliques),
/// each bounded by floor(alpha(s) * s).
ScopeList scopes_for_broadcast(const HypercubeTopology& topo, const DisseminationTree& tree,
                               const ResilienceFunction& alpha = one_third());

/// The agreement runs one broadcast per clique, whose trees together use
/// every pair of adjacent cliques; all of those pairs are bounded.
ScopeList scopes_for_agreement(const HypercubeTopology& topo,
                               const ResilienceFunction& alpha = one_third());

/// One scope per subnetwork of every expander layer, bounded by
/// floor(alpha(s_l) * s_l). `sacrificed` lists (layer, block) pairs whose
/// bound is lifted.
ScopeList scopes_for_expander(const ExpanderStack& stack, const ResilienceFunction& alpha,
                              const std::vector<std::pair<std::size_t, std::size_t>>& sacrificed = {});

/// Per-layer resilience given as a list indexed by layer (last entry repeats).
ResilienceFunction layered_resilience(const ExpanderStack& stack, std::vector<double> alpha);

}  // namespace msbft

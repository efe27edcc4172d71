#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msbft/types.hpp"

namespace msbft {

struct Message {
  NodeId from = 0;
  NodeId to = 0;
  std::uint32_t instance = 0;  // protocol instance the message belongs to
  std::uint32_t tag = 0;       // program-defined (layer index, relay route, ...)
  Value value = 0;

  bool operator==(const Message&) const = default;
};

// Two distinguished values the scripted strategies lie with.
struct Alphabet {
  Value low = 0;
  Value high = 1;
};

enum class StrategyKind { kSilent, kConstant, kEquivocate, kRandom, kCopyFlip };

/// Byzantine behaviour script. A corrupted node runs the honest program
/// internally and the script rewrites (or drops) each honest outgoing message.
///
///   silent      sends nothing
///   constant-v  sends v everywhere
///   equivocate  low to even receivers, high to odd receivers
///   random      low/high chosen by a hash of (seed, round, edge, instance)
///   copy-flip   swaps low and high in the honest message; anything else -> low
struct Strategy {
  StrategyKind kind = StrategyKind::kSilent;
  Value value = 0;

  std::string id() const;
  static Strategy parse(const std::string& id);
  bool operator==(const Strategy&) const = default;
};

/// silent, constant-low, constant-high, equivocate, random, copy-flip.
std::vector<Strategy> standard_strategy_family(const Alphabet& alphabet);

struct ScriptContext {
  int round = 0;
  std::uint64_t seed = 0;
  Alphabet alphabet;
  std::span<const NodeId> corrupt;            // the whole coalition
  std::span<const Message> previous_round;    // everything delivered last round
};

std::optional<Value> apply_strategy(const Strategy& strategy, const ScriptContext& ctx,
                                    const Message& honest);

/// A subsystem over which the adversary is bounded: |F ∩ members| <= bound.
/// A sacrificed scope has its bound lifted; its members then also stop
/// counting toward every other scope, since that subsystem is allowed to fail.
struct Scope {
  std::string name;
  std::vector<NodeId> members;
  std::uint32_t bound = 0;
  bool sacrificed = false;
};

using ScopeList = std::vector<Scope>;

using ResilienceFunction = std::function<double(std::size_t)>;

inline ResilienceFunction one_third() {
  return [](std::size_t) { return 1.0 / 3.0; };
}

/// floor(alpha(s) * s), robust to the representation error of alpha.
std::uint32_t scope_bound(const ResilienceFunction& alpha, std::size_t size);

struct AdversarySpec {
  std::vector<NodeId> corrupt;  // static for the whole execution
  ScopeList scopes;
  Strategy default_strategy{StrategyKind::kEquivocate, 0};
  std::map<NodeId, Strategy> assignment;
  Alphabet alphabet;
  std::uint64_t seed = 0;
  // When false, scope violations are tolerated (failure experiments).
  bool enforce_scopes = true;

  const Strategy& strategy_for(NodeId node) const {
    auto it = assignment.find(node);
    return it == assignment.end() ? default_strategy : it->second;
  }
  bool is_corrupt(NodeId node) const;
  void normalize();  // sort + dedupe corrupt
};

struct CorruptionVerdict {
  bool valid = true;
  std::vector<std::size_t> violated;  // indices into the scope list
};

CorruptionVerdict validate_corruption(std::span<const NodeId> corrupt, const ScopeList& scopes);

struct CorruptionSample {
  std::vector<NodeId> corrupt;
  std::uint64_t attempts = 0;
};

/// Rejection sampling: draw `target` distinct nodes out of `universe` until
/// the draw passes validate_corruption. Throws InfeasibleError when the
/// target cannot fit the scope bounds or the attempt budget runs out.
CorruptionSample sample_corruption(const ScopeList& scopes, std::size_t universe,
                                   std::size_t target, std::uint64_t seed,
                                   std::uint64_t max_attempts = 100000);

/// Exact uniform sample over all subsets of size `target` that respect a
/// nested (laminar) family of contiguous blocks: at layer l the blocks are
/// [r*sizes[l], (r+1)*sizes[l]) with at most bounds[l] members each.
/// Counting is done in long double, so the distribution is uniform up to
/// floating point rounding of the subset counts.
std::vector<NodeId> sample_nested_corruption(std::size_t universe,
                                             std::span<const std::size_t> sizes,
                                             std::span<const std::uint32_t> bounds,
                                             std::size_t target, std::uint64_t seed);

/// Number of subsets of each size 0..universe admitted by the nested bounds.
std::vector<long double> count_nested_corruptions(std::size_t universe,
                                                  std::span<const std::size_t> sizes,
                                                  std::span<const std::uint32_t> bounds);

}  // namespace msbft

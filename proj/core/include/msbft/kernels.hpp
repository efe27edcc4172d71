#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "msbft/adversary.hpp"
#include "msbft/topology.hpp"
#include "msbft/types.hpp"

namespace msbft {

// Marks "nothing received from this participant" in a kernel's receive buffer.
inline constexpr Value kNoMessage = kBottom + 1;

// Deliberate defects for negative-control tests of the verification harness.
enum class KernelFault {
  kNone,
  kDecideInput,  // every node decides its own input, skipping the protocol
};

/// Phase-king Byzantine agreement for s >= 3f+1 participants.
///
/// f+1 phases of three rounds; participant p is the king of phase p.
///   vote: send v; v := the value with >= s-f votes, else bottom.
///   lock: send v; v := the non-bottom value with > f votes (support = its
///         count), else bottom with support 0.
///   king: the king sends v; nodes with support < s-f adopt the king's value.
/// At most one value can reach s-f votes, so a correct king forces agreement,
/// and s-f correct holders of v make v stick from the first vote on. The
/// latter is the differential validity the hypercube composition relies on.
class PhaseKing {
 public:
  enum class Stage { kVote = 0, kLock = 1, kKing = 2 };

  struct NodeState {
    Value value = kBottom;
    int support = 0;
  };

  PhaseKing(int size, int fault_bound, KernelFault fault = KernelFault::kNone);

  int size() const { return size_; }
  int fault_bound() const { return fault_bound_; }
  int rounds() const { return 3 * (fault_bound_ + 1); }
  int threshold() const { return size_ - fault_bound_; }

  static Stage stage(int step) { return static_cast<Stage>(step % 3); }
  int king(int step) const { return step / 3; }
  bool sends(int step, int local) const { return stage(step) != Stage::kKing || local == king(step); }

  NodeState start(Value input) const { return {input, 0}; }
  Value outgoing(int step, const NodeState& state) const;
  // received[j] is the value from participant j or kNoMessage; the entry of
  // `local` itself is ignored and replaced by the node's own value.
  void absorb(int step, int local, NodeState& state, std::span<Value> received) const;
  Value decision(const NodeState& state, Value input) const;

 private:
  int size_;
  int fault_bound_;
  KernelFault fault_;
};

/// Largest f with s >= 3f+1.
inline int max_fault_bound(int size) { return (size - 1) / 3; }

struct KernelConfig {
  std::vector<NodeId> participants;
  int fault_bound = 0;
  int round_budget = 1 << 16;
  KernelFault fault = KernelFault::kNone;

  static KernelConfig for_participants(std::vector<NodeId> participants);
  void validate() const;
};

struct KernelOutcome {
  std::vector<std::optional<Value>> decisions;  // by participant position; nullopt if corrupt
  int rounds = 0;
  std::vector<std::uint64_t> messages;  // per participant
  std::uint64_t digest = 0;

  bool agreement() const;
  std::optional<Value> common() const;
};

/// Immediate BA: agreement, validity, fixed round count.
KernelOutcome run_immediate_ba_As(const KernelConfig& cfg, std::span<const Value> inputs,
                                  const AdversarySpec& adv);

/// Differential BA: the same machine; decides v whenever >= s - f correct
/// participants start with v.
KernelOutcome run_differential_ba_Bs(const KernelConfig& cfg, std::span<const Value> inputs,
                                     const AdversarySpec& adv);

/// One-round transfer from the sites of `source` to the same sites of
/// `target`, two innermost cliques adjacent across a clique digit. Returns
/// the value each target site received (kDefaultValue when nothing arrived).
std::vector<Value> run_initiation_Is(const HypercubeTopology& topo, NodeId source_clique,
                                     std::span<const Value> source_decisions, NodeId target_clique,
                                     const AdversarySpec& adv);

/// Strict majority of `values`; without one, the lowest of the most frequent
/// values. kBottom for an empty input.
Value majority_relay(std::span<const Value> values);

}  // namespace msbft

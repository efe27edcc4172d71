#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "msbft/adversary.hpp"
#include "msbft/dissemination.hpp"
#include "msbft/engine.hpp"
#include "msbft/kernels.hpp"
#include "msbft/topology.hpp"

namespace msbft {

struct ProtocolOptions {
  int round_budget = 1 << 20;
  bool record_trace = false;
  KernelFault kernel_fault = KernelFault::kNone;
};

/// Result of one composed-protocol execution.
///
/// npc is P_A (correct nodes the protocol vouches for), given_up is X_A
/// (correct nodes it gave up), so F, X_A and P_A partition the node set.
struct ProtocolOutcome {
  std::size_t n = 0;
  std::vector<NodeId> corrupt;
  std::vector<std::optional<Value>> decisions;  // nullopt for corrupted nodes
  std::optional<Value> target;                  // value the npc nodes must hold
  std::vector<NodeId> npc;
  std::vector<NodeId> given_up;

  bool scopes_valid = true;
  bool agreement = true;
  bool validity = true;
  bool delivery = true;

  int rounds = 0;
  Metrics metrics;
  std::uint64_t digest = 0;
  std::vector<RoundTrace> trace;

  // Secure communication only.
  std::vector<std::vector<NodeId>> layer_npc;
  std::uint64_t pairs_checked = 0;
  std::uint64_t pairs_failed = 0;
  bool upward_only = true;

  std::vector<NodeId> z_set() const;  // F ∪ X_A
  double npc_fraction() const;
  bool passed() const { return agreement && validity && delivery && upward_only; }
};

nlohmann::json outcome_to_json(const ProtocolOutcome& outcome);

/// Rounds of one phase-king kernel on s participants.
int kernel_rounds(int base);

/// Round count of multiscale_broadcast: r_A + (L-1)(1 + r_B), with r_A the
/// General's seeding round plus one kernel and r_B one kernel.
int broadcast_round_count(int base, int dims);
/// Round count of multiscale_agreement: r_K + (L-1)(1 + r_K).
int agreement_round_count(int base, int dims);

/// Byzantine broadcast from `general` over the hypercube.
///
/// Round 1 the General sends its value to its clique; the clique runs the
/// kernel on what it got. Then for each tree layer l = 1..L-1, one
/// initiation round copies every decided node's value to its counterparts
/// in the layer-l child cliques, which run the kernel in parallel.
/// Scopes are validated against scopes_for_broadcast unless adv.scopes is
/// non-empty; a violation throws PreconditionError when enforced.
ProtocolOutcome multiscale_broadcast(const HypercubeTopology& topo, NodeId general,
                                     Value general_value, const AdversarySpec& adv,
                                     const ProtocolOptions& options = {});

/// Agreement: every clique runs the kernel on its raw inputs, then acts as
/// the General of its own broadcast (rooted at that clique and skipping the
/// seeding and root kernel). All n/s broadcasts run in the same rounds, so a
/// node's messages to one neighbor in one round merge into a single
/// round-message. Each node decides the lower median of its n/s outputs.
ProtocolOutcome multiscale_agreement(const HypercubeTopology& topo, std::span<const Value> inputs,
                                     const AdversarySpec& adv, const ProtocolOptions& options = {});

/// Lower median: order statistic ceil(k/2) of k values.
Value lower_median(std::vector<Value> values);

struct SecureCommOptions {
  ProtocolOptions base;
  std::vector<NodeId> senders;  // empty: every node sends
  std::vector<Value> values;    // one per sender; empty: seed-derived low/high
  std::vector<std::pair<std::size_t, std::size_t>> sacrificed;  // (layer, block)
  std::vector<double> alpha;    // resilience per layer; empty: 1/3 everywhere
  // Layer 0 on a non-clique d_0-regular graph: kernel messages are routed
  // along BFS shortest paths, one virtual kernel round per diameter-many
  // physical rounds. Experimental; off means such stacks are rejected.
  bool allow_relayed = false;
  // Receiver whose value for the first sender is reported as its decision.
  std::optional<NodeId> receiver;
};

/// Incomplete secure communication on the expander stack.
///
/// Layer 0: each sender seeds its s_0-node block, which runs the kernel
/// with the sender as General. Layer l >= 1: one round in which every node
/// forwards its layer-(l-1) values for the senders of its own sub-block to
/// its G_l neighbors in the sibling sub-blocks; a receiver keeps, per
/// sender, majority_relay over the values from neighbors inside that
/// sender's sub-block. Layer-(l-1) values are never recomputed from
/// layer-l ones.
///
/// npc_0: correct nodes of blocks that are neither sacrificed nor hold more
/// faults than the kernel tolerates. Reach: u is sure to hold the values of
/// the npc_0 senders of layer-0 block b when b is its own block (u npc_0),
/// or b lies in a sibling sub-block at some layer where more than half of
/// u's neighbors there already reach b. npc_l(u): npc_0(u), and u reaches
/// every block of its layer-l block that has an npc_0 node. The overall
/// npc set is npc_{L-1}; delivery is checked for every npc_0 sender and
/// every receiver that reaches its block, which covers all overall-npc
/// pairs.
ProtocolOutcome secure_communicate(const ExpanderStack& stack, const AdversarySpec& adv,
                                   const SecureCommOptions& options = {});

/// Single sender/receiver form.
ProtocolOutcome secure_communicate(const ExpanderStack& stack, NodeId sender, NodeId receiver,
                                   Value value, const AdversarySpec& adv,
                                   SecureCommOptions options = {});

/// Rounds used by secure_communicate on `stack` (clique layer 0 unless
/// `relay_rounds` > 1).
int secure_comm_round_count(const ExpanderStack& stack, int relay_rounds = 1);

/// taint[l] holds, per (node, sender) slot of layer l, the set of layers
/// whose messages influenced that value (bit k = layer k). Information flows
/// upward only iff no layer-l slot carries a bit above l.
bool taint_is_upward_only(std::span<const std::vector<std::uint32_t>> taint);

struct IncompletenessReport {
  std::size_t placements = 0;
  std::size_t max_given_up = 0;  // lower bound on x_A: the family is not exhaustive
  std::map<std::size_t, std::size_t> histogram;  // |X_A| -> placements
  double mean_npc_fraction = 0.0;
};

IncompletenessReport compute_incompleteness(std::span<const ProtocolOutcome> outcomes);
nlohmann::json incompleteness_to_json(const IncompletenessReport& report);

}  // namespace msbft

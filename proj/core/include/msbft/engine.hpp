#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msbft/adversary.hpp"
#include "msbft/types.hpp"

namespace msbft {

/// A synchronous protocol interpreted by the engine.
///
/// Round k (1-based) first asks every node for the messages it sends, all
/// computed from states after round k-1, then delivers the whole round and
/// lets each node update. Corrupted nodes are asked too; their messages act
/// as templates that the node's strategy script rewrites or drops.
class Program {
 public:
  virtual ~Program() = default;

  virtual std::size_t node_count() const = 0;
  virtual int round_count() const = 0;

  // Append the honest messages of `node` for `round`.
  virtual void send(int round, NodeId node, std::vector<Message>& out) = 0;
  // `inbox` holds every message addressed to `node` this round, ordered by
  // sender id and then by send order.
  virtual void receive(int round, NodeId node, std::span<const Message> inbox) = 0;

  // Scalar digest of a node's state, recorded in traces as x_i(k).
  virtual Value state(NodeId node) const = 0;
};

struct RunOptions {
  int round_budget = 1 << 20;
  bool record_trace = false;
};

struct Metrics {
  int rounds = 0;
  std::uint64_t total_messages = 0;
  std::vector<std::uint64_t> messages;     // per node, all rounds
  std::vector<std::uint64_t> merged;       // per node, sum over rounds of distinct receivers
  std::vector<std::uint32_t> peak_merged;  // per node, max distinct receivers in one round
  std::vector<std::uint32_t> peak_round;   // per node, max messages in one round

  std::uint64_t max_messages() const;
  std::uint64_t max_merged() const;
};

struct RoundTrace {
  int round = 0;
  std::vector<Value> states;      // x_i(round) for every node
  std::vector<Message> messages;  // delivered in this round (empty for round 0)
};

struct Execution {
  Metrics metrics;
  std::vector<RoundTrace> trace;  // rounds 0..K when recorded
  std::uint64_t digest = 0;       // hash over every delivered message and final state
};

/// Runs `program` in lock-step rounds against the static adversary `adv`.
/// Scope checking is the protocol layer's job; the engine only executes.
Execution run_sync_execution(Program& program, const AdversarySpec& adv,
                             const RunOptions& options = {});

// One JSON object per round: {"round", "states", "messages": [[from,to,instance,tag,value],...]}.
void write_trace_jsonl(std::ostream& out, const Execution& exec);

nlohmann::json metrics_summary(const Metrics& metrics);

// 16 lowercase hex digits.
std::string hex_digest(std::uint64_t digest);

}  // namespace msbft

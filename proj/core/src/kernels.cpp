#include "msbft/kernels.hpp"

#include <algorithm>
#include <string>

#include "msbft/engine.hpp"

namespace msbft {

namespace {

// Most frequent value among `values` (lowest on ties) and its count.
std::pair<Value, int> plurality(std::span<Value> values) {
  std::sort(values.begin(), values.end());
  Value best = kBottom;
  int best_count = 0;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    const int count = static_cast<int>(j - i);
    if (count > best_count) {
      best = values[i];
      best_count = count;
    }
    i = j;
  }
  return {best, best_count};
}

std::span<Value> present_values(std::span<const Value> received, std::vector<Value>& buf) {
  buf.clear();
  for (Value v : received) {
    if (v != kNoMessage && v != kBottom) buf.push_back(v);
  }
  return buf;
}

class KernelProgram final : public Program {
 public:
  KernelProgram(const PhaseKing& machine, std::span<const Value> inputs)
      : machine_(machine), inputs_(inputs.begin(), inputs.end()), received_(inputs.size()) {
    for (Value v : inputs_) states_.push_back(machine_.start(v));
  }

  std::size_t node_count() const override { return states_.size(); }
  int round_count() const override { return machine_.rounds(); }

  void send(int round, NodeId node, std::vector<Message>& out) override {
    const int step = round - 1;
    if (!machine_.sends(step, static_cast<int>(node))) return;
    const Value v = machine_.outgoing(step, states_[node]);
    for (NodeId j = 0; j < states_.size(); ++j) {
      if (j != node) out.push_back({node, j, 0, 0, v});
    }
  }

  void receive(int round, NodeId node, std::span<const Message> inbox) override {
    std::fill(received_.begin(), received_.end(), kNoMessage);
    for (const auto& msg : inbox) received_[msg.from] = msg.value;
    machine_.absorb(round - 1, static_cast<int>(node), states_[node], received_);
  }

  Value state(NodeId node) const override { return states_[node].value; }

  Value decision(NodeId node) const { return machine_.decision(states_[node], inputs_[node]); }

 private:
  const PhaseKing& machine_;
  std::vector<Value> inputs_;
  std::vector<PhaseKing::NodeState> states_;
  std::vector<Value> received_;
};

AdversarySpec localize(AdversarySpec adv, std::span<const NodeId> members) {
  adv.normalize();
  AdversarySpec local;
  local.alphabet = adv.alphabet;
  local.seed = adv.seed;
  local.default_strategy = adv.default_strategy;
  for (NodeId i = 0; i < members.size(); ++i) {
    if (adv.is_corrupt(members[i])) {
      local.corrupt.push_back(i);
      local.assignment[i] = adv.strategy_for(members[i]);
    }
  }
  return local;
}

KernelOutcome run_kernel(const KernelConfig& cfg, std::span<const Value> inputs,
                         const AdversarySpec& adv) {
  cfg.validate();
  if (inputs.size() != cfg.participants.size()) {
    throw PreconditionError("kernel needs one input per participant");
  }
  auto local = localize(adv, cfg.participants);
  if (static_cast<int>(local.corrupt.size()) > cfg.fault_bound) {
    throw PreconditionError(std::to_string(local.corrupt.size()) +
                            " corrupted participants exceed the kernel bound f=" +
                            std::to_string(cfg.fault_bound));
  }
  PhaseKing machine(static_cast<int>(cfg.participants.size()), cfg.fault_bound, cfg.fault);
  KernelProgram program(machine, inputs);
  RunOptions options;
  options.round_budget = cfg.round_budget;
  auto exec = run_sync_execution(program, local, options);

  KernelOutcome out;
  out.rounds = exec.metrics.rounds;
  out.messages = exec.metrics.messages;
  out.digest = exec.digest;
  out.decisions.resize(cfg.participants.size());
  for (NodeId i = 0; i < cfg.participants.size(); ++i) {
    if (!local.is_corrupt(i)) out.decisions[i] = program.decision(i);
  }
  return out;
}

class InitiationProgram final : public Program {
 public:
  InitiationProgram(std::span<const Value> decisions)
      : sites_(decisions.size()), decisions_(decisions.begin(), decisions.end()),
        received_(decisions.size(), kDefaultValue) {}

  std::size_t node_count() const override { return 2 * sites_; }
  int round_count() const override { return 1; }

  void send(int, NodeId node, std::vector<Message>& out) override {
    if (node < sites_) out.push_back({node, static_cast<NodeId>(node + sites_), 0, 0, decisions_[node]});
  }
  void receive(int, NodeId node, std::span<const Message> inbox) override {
    if (node < sites_) return;
    for (const auto& msg : inbox) {
      if (msg.from + sites_ == node) received_[node - sites_] = or_default(msg.value);
    }
  }
  Value state(NodeId node) const override {
    return node < sites_ ? decisions_[node] : received_[node - sites_];
  }

  const std::vector<Value>& received() const { return received_; }

 private:
  std::size_t sites_;
  std::vector<Value> decisions_;
  std::vector<Value> received_;
};

}  // namespace

PhaseKing::PhaseKing(int size, int fault_bound, KernelFault fault)
    : size_(size), fault_bound_(fault_bound), fault_(fault) {
  if (fault_bound < 0 || size < 3 * fault_bound + 1) {
    throw PreconditionError("phase king needs s >= 3f+1 (s=" + std::to_string(size) +
                            ", f=" + std::to_string(fault_bound) + ")");
  }
}

Value PhaseKing::outgoing(int step, const NodeState& state) const {
  return stage(step) == Stage::kKing ? or_default(state.value) : state.value;
}

void PhaseKing::absorb(int step, int local, NodeState& state, std::span<Value> received) const {
  thread_local std::vector<Value> buf;
  switch (stage(step)) {
    case Stage::kVote: {
      received[local] = state.value;
      auto [x, count] = plurality(present_values(received, buf));
      state.value = count >= threshold() ? x : kBottom;
      state.support = 0;
      break;
    }
    case Stage::kLock: {
      received[local] = state.value;
      auto [x, count] = plurality(present_values(received, buf));
      if (count > fault_bound_) {
        state.value = x;
        state.support = count;
      } else {
        state.value = kBottom;
        state.support = 0;
      }
      break;
    }
    case Stage::kKing: {
      const int k = king(step);
      Value from_king = local == k ? state.value : received[k];
      if (from_king == kNoMessage) from_king = kBottom;
      if (state.support < threshold()) state.value = or_default(from_king);
      break;
    }
  }
}

Value PhaseKing::decision(const NodeState& state, Value input) const {
  if (fault_ == KernelFault::kDecideInput) return input;
  return or_default(state.value);
}

KernelConfig KernelConfig::for_participants(std::vector<NodeId> participants) {
  KernelConfig cfg;
  cfg.fault_bound = max_fault_bound(static_cast<int>(participants.size()));
  cfg.participants = std::move(participants);
  return cfg;
}

void KernelConfig::validate() const {
  auto sorted = participants;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw PreconditionError("kernel participants must be distinct");
  }
  if (static_cast<int>(participants.size()) < 3 * fault_bound + 1) {
    throw PreconditionError("kernel needs s >= 3f+1");
  }
}

bool KernelOutcome::agreement() const {
  std::optional<Value> seen;
  for (const auto& d : decisions) {
    if (!d) continue;
    if (seen && *seen != *d) return false;
    seen = d;
  }
  return true;
}

std::optional<Value> KernelOutcome::common() const {
  if (!agreement()) return std::nullopt;
  for (const auto& d : decisions) {
    if (d) return d;
  }
  return std::nullopt;
}

KernelOutcome run_immediate_ba_As(const KernelConfig& cfg, std::span<const Value> inputs,
                                  const AdversarySpec& adv) {
  return run_kernel(cfg, inputs, adv);
}

KernelOutcome run_differential_ba_Bs(const KernelConfig& cfg, std::span<const Value> inputs,
                                     const AdversarySpec& adv) {
  return run_kernel(cfg, inputs, adv);
}

std::vector<Value> run_initiation_Is(const HypercubeTopology& topo, NodeId source_clique,
                                     std::span<const Value> source_decisions, NodeId target_clique,
                                     const AdversarySpec& adv) {
  if (source_clique >= topo.clique_count() || target_clique >= topo.clique_count() ||
      topo.clique_differing_digit(source_clique, target_clique) == 0) {
    throw PreconditionError("initiation needs two adjacent innermost cliques");
  }
  if (source_decisions.size() != static_cast<std::size_t>(topo.base())) {
    throw PreconditionError("initiation needs one decision per source site");
  }
  std::vector<NodeId> members;
  for (int x = 0; x < topo.base(); ++x) members.push_back(topo.member(source_clique, x));
  for (int x = 0; x < topo.base(); ++x) members.push_back(topo.member(target_clique, x));
  InitiationProgram program(source_decisions);
  run_sync_execution(program, localize(adv, members));
  return program.received();
}

Value majority_relay(std::span<const Value> values) {
  if (values.empty()) return kBottom;
  std::vector<Value> buf(values.begin(), values.end());
  return plurality(buf).first;
}

}  // namespace msbft

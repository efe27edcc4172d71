#include <algorithm>
#include <string>

#include "msbft/protocols.hpp"
#include "msbft/scopes.hpp"
#include "protocol_util.hpp"

namespace msbft {

namespace {

enum class StageKind { kSeed, kInit, kKernel };

struct Stage {
  StageKind kind;
  int layer = 0;  // tree layer being served
  int step = 0;   // kernel step inside the layer
};

// Several broadcast tracks over one hypercube, sharing rounds. Track t is
// rooted at roots[t]; at tree layer l the cliques of layer l in track t run
// that track's kernel. Broadcast uses one track with a seeding round,
// agreement uses one track per clique without.
class HypercubeProgram final : public Program {
 public:
  HypercubeProgram(const HypercubeTopology& topo, const PhaseKing& machine,
                   std::vector<NodeId> roots, std::span<const Value> inputs,
                   std::optional<std::pair<NodeId, Value>> general)
      : topo_(topo), machine_(machine), roots_(std::move(roots)), general_(general),
        n_(topo.size()), s_(topo.base()) {
    const std::size_t tracks = roots_.size();
    const std::size_t cliques = topo_.clique_count();
    trees_.reserve(tracks);
    for (auto r : roots_) trees_.emplace_back(topo_, r);
    active_.assign(static_cast<std::size_t>(topo_.dims()), std::vector<std::vector<std::uint32_t>>(cliques));
    for (std::uint32_t t = 0; t < tracks; ++t) {
      for (NodeId c = 0; c < cliques; ++c) active_[trees_[t].layer(c)][c].push_back(t);
    }
    states_.assign(tracks * n_, {});
    inputs_.assign(tracks * n_, kDefaultValue);
    decisions_.assign(tracks * n_, kBottom);
    for (std::uint32_t t = 0; t < tracks; ++t) {
      for (int x = 0; x < s_; ++x) {
        const NodeId u = topo_.member(roots_[t], x);
        const Value v = general_ ? (u == general_->first ? general_->second : kDefaultValue) : inputs[u];
        inputs_[t * n_ + u] = v;
        states_[t * n_ + u] = machine_.start(v);
      }
    }
    if (general_) stages_.push_back({StageKind::kSeed, 0, 0});
    for (int l = 0; l < topo_.dims(); ++l) {
      if (l > 0) stages_.push_back({StageKind::kInit, l, 0});
      for (int k = 0; k < machine_.rounds(); ++k) stages_.push_back({StageKind::kKernel, l, k});
    }
    received_.resize(static_cast<std::size_t>(s_));
  }

  std::size_t node_count() const override { return n_; }
  int round_count() const override { return static_cast<int>(stages_.size()); }

  void send(int round, NodeId u, std::vector<Message>& out) override {
    const Stage& st = stages_[round - 1];
    const NodeId c = topo_.clique_of(u);
    const int site = topo_.site_of(u);
    switch (st.kind) {
      case StageKind::kSeed:
        if (u == general_->first) {
          for (int x = 0; x < s_; ++x) {
            if (x != site) out.push_back({u, topo_.member(c, x), 0, 0, general_->second});
          }
        }
        break;
      case StageKind::kInit: {
        const int dim = st.layer + 1;
        for (std::uint32_t t = 0; t < roots_.size(); ++t) {
          if (trees_[t].layer(c) >= st.layer) continue;
          const Value v = decisions_[t * n_ + u];
          const int own = topo_.digit(u, dim);
          for (int d = 0; d < s_; ++d) {
            if (d != own) out.push_back({u, topo_.with_digit(u, dim, d), t, tag(st), v});
          }
        }
        break;
      }
      case StageKind::kKernel:
        if (!machine_.sends(st.step, site)) break;
        for (auto t : active_[st.layer][c]) {
          const Value v = machine_.outgoing(st.step, states_[t * n_ + u]);
          for (int x = 0; x < s_; ++x) {
            if (x != site) out.push_back({u, topo_.member(c, x), t, tag(st), v});
          }
        }
        break;
    }
  }

  void receive(int round, NodeId u, std::span<const Message> inbox) override {
    const Stage& st = stages_[round - 1];
    const NodeId c = topo_.clique_of(u);
    const int site = topo_.site_of(u);
    switch (st.kind) {
      case StageKind::kSeed: {
        if (u == general_->first) break;
        Value v = kDefaultValue;
        for (const auto& msg : inbox) {
          if (msg.from == general_->first) v = or_default(msg.value);
        }
        inputs_[u] = v;
        states_[u] = machine_.start(v);
        break;
      }
      case StageKind::kInit: {
        const int dim = st.layer + 1;
        for (auto t : active_[st.layer][c]) {
          const NodeId parent_site =
              topo_.with_digit(u, dim, topo_.digit(topo_.member(roots_[t], 0), dim));
          Value v = kDefaultValue;
          for (const auto& msg : inbox) {
            if (msg.instance == t && msg.from == parent_site && msg.tag == tag(st)) {
              v = or_default(msg.value);
            }
          }
          inputs_[t * n_ + u] = v;
          states_[t * n_ + u] = machine_.start(v);
        }
        break;
      }
      case StageKind::kKernel: {
        const auto& tracks = active_[st.layer][c];
        if (tracks.empty()) break;
        // Inbox is sorted by sender; walk it once per track.
        for (auto t : tracks) {
          std::fill(received_.begin(), received_.end(), kNoMessage);
          for (const auto& msg : inbox) {
            if (msg.instance == t && msg.tag == tag(st) && topo_.clique_of(msg.from) == c) {
              received_[topo_.site_of(msg.from)] = msg.value;
            }
          }
          auto& state = states_[t * n_ + u];
          machine_.absorb(st.step, site, state, received_);
          if (st.step + 1 == machine_.rounds()) {
            decisions_[t * n_ + u] = machine_.decision(state, inputs_[t * n_ + u]);
          }
        }
        break;
      }
    }
  }

  Value state(NodeId u) const override {
    const std::size_t t = general_ ? 0 : topo_.clique_of(u);
    const Value d = decisions_[t * n_ + u];
    return d != kBottom ? d : states_[t * n_ + u].value;
  }

  Value decision(std::size_t track, NodeId u) const { return decisions_[track * n_ + u]; }
  std::size_t tracks() const { return roots_.size(); }

 private:
  static std::uint32_t tag(const Stage& st) { return static_cast<std::uint32_t>(st.layer); }

  const HypercubeTopology& topo_;
  const PhaseKing& machine_;
  std::vector<NodeId> roots_;
  std::optional<std::pair<NodeId, Value>> general_;
  std::size_t n_;
  int s_;
  std::vector<DisseminationTree> trees_;
  // active_[l][c]: tracks in which clique c sits at tree layer l.
  std::vector<std::vector<std::vector<std::uint32_t>>> active_;
  std::vector<PhaseKing::NodeState> states_;
  std::vector<Value> inputs_;
  std::vector<Value> decisions_;
  std::vector<Stage> stages_;
  std::vector<Value> received_;
};

PhaseKing kernel_for(int base, const ProtocolOptions& options) {
  return PhaseKing(base, max_fault_bound(base), options.kernel_fault);
}

}  // namespace

int kernel_rounds(int base) { return 3 * (max_fault_bound(base) + 1); }

int broadcast_round_count(int base, int dims) {
  const int r = kernel_rounds(base);
  return 1 + r + (dims - 1) * (1 + r);
}

int agreement_round_count(int base, int dims) {
  const int r = kernel_rounds(base);
  return r + (dims - 1) * (1 + r);
}

Value lower_median(std::vector<Value> values) {
  if (values.empty()) return kBottom;
  const std::size_t k = (values.size() + 1) / 2 - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

ProtocolOutcome multiscale_broadcast(const HypercubeTopology& topo, NodeId general,
                                     Value general_value, const AdversarySpec& adv,
                                     const ProtocolOptions& options) {
  if (general >= topo.size()) throw PreconditionError("General out of range");
  const NodeId root = topo.clique_of(general);
  DisseminationTree tree(topo, root);
  AdversarySpec spec = adv;
  spec.normalize();
  const bool valid = detail::check_scopes(
      spec, spec.scopes.empty() ? scopes_for_broadcast(topo, tree) : spec.scopes);

  const PhaseKing machine = kernel_for(topo.base(), options);
  HypercubeProgram program(topo, machine, {root}, {}, std::make_pair(general, general_value));
  auto exec = run_sync_execution(program, spec, {options.round_budget, options.record_trace});

  ProtocolOutcome out = detail::start_outcome(topo.size(), spec, std::move(exec));
  out.scopes_valid = valid;
  for (NodeId u = 0; u < topo.size(); ++u) {
    if (!spec.is_corrupt(u)) out.decisions[u] = program.decision(0, u);
  }
  const bool general_correct = !spec.is_corrupt(general);
  out.target = general_correct ? std::optional<Value>(general_value) : detail::plurality(out.decisions);
  detail::finish_outcome(out);
  out.validity = !general_correct || out.given_up.empty();
  return out;
}

ProtocolOutcome multiscale_agreement(const HypercubeTopology& topo, std::span<const Value> inputs,
                                     const AdversarySpec& adv, const ProtocolOptions& options) {
  if (inputs.size() != topo.size()) throw PreconditionError("agreement needs one input per node");
  AdversarySpec spec = adv;
  spec.normalize();
  const bool valid =
      detail::check_scopes(spec, spec.scopes.empty() ? scopes_for_agreement(topo) : spec.scopes);

  std::vector<NodeId> roots(topo.clique_count());
  for (NodeId c = 0; c < roots.size(); ++c) roots[c] = c;
  const PhaseKing machine = kernel_for(topo.base(), options);
  HypercubeProgram program(topo, machine, std::move(roots), inputs, std::nullopt);
  auto exec = run_sync_execution(program, spec, {options.round_budget, options.record_trace});

  ProtocolOutcome out = detail::start_outcome(topo.size(), spec, std::move(exec));
  out.scopes_valid = valid;
  std::vector<Value> outputs(program.tracks());
  for (NodeId u = 0; u < topo.size(); ++u) {
    if (spec.is_corrupt(u)) continue;
    for (std::size_t t = 0; t < outputs.size(); ++t) outputs[t] = program.decision(t, u);
    out.decisions[u] = lower_median(outputs);
  }
  std::optional<Value> unanimous;
  bool mixed = false;
  for (NodeId u = 0; u < topo.size(); ++u) {
    if (spec.is_corrupt(u)) continue;
    if (unanimous && *unanimous != inputs[u]) mixed = true;
    unanimous = inputs[u];
  }
  out.target = (unanimous && !mixed) ? unanimous : detail::plurality(out.decisions);
  detail::finish_outcome(out);
  out.validity = mixed || !unanimous || out.given_up.empty();
  return out;
}

}  // namespace msbft

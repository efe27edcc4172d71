#include <algorithm>
#include <queue>
#include <string>

#include "msbft/protocols.hpp"
#include "msbft/rng.hpp"
#include "msbft/scopes.hpp"
#include "protocol_util.hpp"

namespace msbft {

namespace {

// Shortest-path routing inside each layer-0 block. hop(block, dst, w) is
// the next local node on the path from local node w to dst; BFS visits
// neighbors in id order, so routes are deterministic.
class BlockRoutes {
 public:
  BlockRoutes(const ExpanderStack& stack, bool clique) : s_(stack.block_size(0)) {
    if (clique) return;
    const std::size_t blocks = stack.size() / s_;
    next_.assign(blocks * s_ * s_, 0);
    std::vector<int> dist(s_);
    for (std::size_t r = 0; r < blocks; ++r) {
      const NodeId start = stack.block_start(0, r);
      for (std::size_t dst = 0; dst < s_; ++dst) {
        std::fill(dist.begin(), dist.end(), -1);
        std::queue<std::size_t> q;
        dist[dst] = 0;
        q.push(dst);
        auto* next = &next_[(r * s_ + dst) * s_];
        next[dst] = static_cast<std::uint32_t>(dst);
        while (!q.empty()) {
          const auto w = q.front();
          q.pop();
          for (auto x : stack.neighbors(0, static_cast<NodeId>(start + w))) {
            const std::size_t lx = x - start;
            if (dist[lx] >= 0) continue;
            dist[lx] = dist[w] + 1;
            next[lx] = static_cast<std::uint32_t>(w);
            diameter_ = std::max(diameter_, dist[lx]);
            q.push(lx);
          }
        }
        if (std::find(dist.begin(), dist.end(), -1) != dist.end()) {
          throw PreconditionError("layer-0 block " + std::to_string(r) + " is disconnected");
        }
      }
    }
  }

  bool direct() const { return next_.empty(); }
  int diameter() const { return diameter_; }
  std::uint32_t hop(std::size_t block, std::size_t dst, std::size_t w) const {
    return direct() ? static_cast<std::uint32_t>(dst) : next_[(block * s_ + dst) * s_ + w];
  }

 private:
  std::size_t s_;
  int diameter_ = 1;
  std::vector<std::uint32_t> next_;
};

std::uint32_t route_tag(std::size_t src, std::size_t dst) {
  return static_cast<std::uint32_t>((src << 16) | dst);
}

class SecureCommProgram final : public Program {
 public:
  SecureCommProgram(const ExpanderStack& stack, const PhaseKing& machine, const BlockRoutes& routes,
                    std::vector<char> is_sender, std::vector<Value> value, NodeId designated)
      : stack_(stack), machine_(machine), routes_(routes), is_sender_(std::move(is_sender)),
        value_(std::move(value)), designated_(designated), n_(stack.size()),
        s0_(stack.block_size(0)), layers_(stack.layer_count()) {
    virtual_rounds_ = 1 + machine_.rounds();
    hop_rounds_ = routes_.diameter();
    input0_.assign(n_ * s0_, kDefaultValue);
    ks0_.assign(n_ * s0_, {});
    recv0_.assign(n_ * s0_ * s0_, kNoMessage);
    inflight_.resize(n_);
    x_.resize(layers_);
    taint_.resize(layers_);
    for (std::size_t l = 0; l < layers_; ++l) {
      x_[l].assign(n_ * stack.block_size(l), kBottom);
      taint_[l].assign(n_ * stack.block_size(l), 0);
    }
  }

  std::size_t node_count() const override { return n_; }
  int round_count() const override {
    return hop_rounds_ * virtual_rounds_ + static_cast<int>(layers_) - 1;
  }

  void send(int round, NodeId u, std::vector<Message>& out) override {
    if (round <= hop_rounds_ * virtual_rounds_) {
      send_layer0(round, u, out);
    } else {
      send_relay(round - hop_rounds_ * virtual_rounds_, u, out);
    }
  }

  void receive(int round, NodeId v, std::span<const Message> inbox) override {
    if (round <= hop_rounds_ * virtual_rounds_) {
      receive_layer0(round, v, inbox);
    } else {
      receive_relay(round - hop_rounds_ * virtual_rounds_, v, inbox);
    }
    completed_ = round;
  }

  Value state(NodeId v) const override {
    const int done = completed_ - hop_rounds_ * virtual_rounds_;
    const std::size_t l = done < 0 ? 0 : static_cast<std::size_t>(done);
    if (stack_.block_of(v, l) != stack_.block_of(designated_, l)) return kBottom;
    const std::size_t slot = slot_of(l, v, designated_);
    return done < 0 ? ks0_[slot].value : x_[l][slot];
  }

  const std::vector<std::vector<Value>>& layer_values() const { return x_; }
  const std::vector<std::vector<std::uint32_t>>& taint() const { return taint_; }
  std::size_t slot_of(std::size_t l, NodeId v, NodeId sender) const {
    const std::size_t s = stack_.block_size(l);
    return v * s + (sender - stack_.block_start(l, stack_.block_of(v, l)));
  }

 private:
  struct Item {
    NodeId instance;
    std::uint32_t src;
    std::uint32_t dst;
    Value value;
  };

  void emit(NodeId u, const Item& item, std::vector<Message>& out) const {
    const std::size_t block = u / s0_;
    const NodeId start = static_cast<NodeId>(block * s0_);
    const auto next = routes_.hop(block, item.dst, u - start);
    out.push_back({u, start + next, item.instance, route_tag(item.src, item.dst), item.value});
  }

  void send_layer0(int round, NodeId u, std::vector<Message>& out) {
    const int vr = (round - 1) / hop_rounds_;
    const int sub = (round - 1) % hop_rounds_;
    if (sub > 0) {
      for (const auto& item : inflight_[u]) emit(u, item, out);
      inflight_[u].clear();
      return;
    }
    const NodeId start = static_cast<NodeId>(u / s0_ * s0_);
    const auto local = static_cast<std::uint32_t>(u - start);
    if (vr == 0) {
      if (!is_sender_[u]) return;
      for (std::uint32_t b = 0; b < s0_; ++b) {
        if (b != local) emit(u, {u, local, b, value_[u]}, out);
      }
      return;
    }
    const int step = vr - 1;
    if (!machine_.sends(step, static_cast<int>(local))) return;
    for (std::uint32_t a = 0; a < s0_; ++a) {
      const NodeId sender = start + a;
      if (!is_sender_[sender]) continue;
      const Value v = machine_.outgoing(step, ks0_[u * s0_ + a]);
      for (std::uint32_t b = 0; b < s0_; ++b) {
        if (b != local) emit(u, {sender, local, b, v}, out);
      }
    }
  }

  void receive_layer0(int round, NodeId v, std::span<const Message> inbox) {
    const int vr = (round - 1) / hop_rounds_;
    const int sub = (round - 1) % hop_rounds_;
    const NodeId start = static_cast<NodeId>(v / s0_ * s0_);
    const auto local = v - start;
    Value* recv = &recv0_[v * s0_ * s0_];
    for (const auto& msg : inbox) {
      const std::uint32_t src = msg.tag >> 16;
      const std::uint32_t dst = msg.tag & 0xffff;
      if (msg.instance < start || msg.instance >= start + s0_ || src >= s0_ || dst >= s0_) continue;
      if (dst == local) {
        recv[(msg.instance - start) * s0_ + src] = msg.value;
      } else {
        inflight_[v].push_back({msg.instance, src, dst, msg.value});
      }
    }
    if (sub + 1 < hop_rounds_) return;
    inflight_[v].clear();
    for (std::uint32_t a = 0; a < s0_; ++a) {
      const NodeId sender = start + a;
      if (!is_sender_[sender]) continue;
      const std::size_t slot = v * s0_ + a;
      std::span<Value> row(recv + a * s0_, s0_);
      if (vr == 0) {
        input0_[slot] = sender == v ? value_[sender] : or_default(row[a]);
        ks0_[slot] = machine_.start(input0_[slot]);
      } else {
        const int step = vr - 1;
        machine_.absorb(step, static_cast<int>(local), ks0_[slot], row);
        if (step + 1 == machine_.rounds()) {
          x_[0][slot] = machine_.decision(ks0_[slot], input0_[slot]);
          taint_[0][slot] = 1u;
        }
      }
      std::fill(row.begin(), row.end(), kNoMessage);
    }
  }

  void send_relay(int l, NodeId u, std::vector<Message>& out) {
    const std::size_t sub_size = stack_.block_size(l - 1);
    const NodeId sub_start = static_cast<NodeId>(u / sub_size * sub_size);
    const auto& prev = x_[l - 1];
    for (auto w : stack_.neighbors(l, u)) {
      if (w / sub_size == u / sub_size) continue;
      for (std::size_t a = 0; a < sub_size; ++a) {
        const NodeId sender = sub_start + static_cast<NodeId>(a);
        if (is_sender_[sender]) {
          out.push_back({u, w, sender, static_cast<std::uint32_t>(l), prev[u * sub_size + a]});
        }
      }
    }
  }

  void receive_relay(int l, NodeId v, std::span<const Message> inbox) {
    const std::size_t size = stack_.block_size(l);
    const std::size_t sub_size = stack_.block_size(l - 1);
    const NodeId start = static_cast<NodeId>(v / size * size);
    const NodeId sub_start = static_cast<NodeId>(v / sub_size * sub_size);
    const std::size_t cap = static_cast<std::size_t>(stack_.layer(l).degree);
    relay_buf_.resize(size * cap);
    relay_count_.assign(size, 0);
    relay_taint_.assign(size, 1u << l);
    const auto& prev_taint = taint_[l - 1];
    for (const auto& msg : inbox) {
      const NodeId sender = msg.instance;
      const NodeId w = msg.from;
      if (msg.tag != static_cast<std::uint32_t>(l) || sender < start || sender >= start + size) continue;
      if (w / sub_size != sender / sub_size || w / sub_size == v / sub_size) continue;
      const std::size_t idx = sender - start;
      if (relay_count_[idx] >= cap) continue;
      relay_buf_[idx * cap + relay_count_[idx]++] = msg.value;
      relay_taint_[idx] |= (1u << msg.tag) | prev_taint[w * sub_size + (sender - w / sub_size * sub_size)];
    }
    auto& cur = x_[l];
    auto& cur_taint = taint_[l];
    for (std::size_t idx = 0; idx < size; ++idx) {
      const NodeId sender = start + static_cast<NodeId>(idx);
      if (!is_sender_[sender]) continue;
      const std::size_t slot = v * size + idx;
      if (sender / sub_size == v / sub_size) {
        const std::size_t prev_slot = v * sub_size + (sender - sub_start);
        cur[slot] = x_[l - 1][prev_slot];
        cur_taint[slot] = prev_taint[prev_slot];
      } else {
        cur[slot] = majority_relay({relay_buf_.data() + idx * cap, relay_count_[idx]});
        cur_taint[slot] = relay_taint_[idx];
      }
    }
  }

  const ExpanderStack& stack_;
  const PhaseKing& machine_;
  const BlockRoutes& routes_;
  std::vector<char> is_sender_;
  std::vector<Value> value_;
  NodeId designated_;
  std::size_t n_;
  std::size_t s0_;
  std::size_t layers_;
  int virtual_rounds_ = 0;
  int hop_rounds_ = 1;
  int completed_ = 0;

  std::vector<Value> input0_;
  std::vector<PhaseKing::NodeState> ks0_;
  std::vector<Value> recv0_;  // [node][sender][source site]
  std::vector<std::vector<Item>> inflight_;
  // x_[l][v * s_l + k]: value v holds at layer l for the k-th node of its layer-l block.
  std::vector<std::vector<Value>> x_;
  std::vector<std::vector<std::uint32_t>> taint_;

  std::vector<Value> relay_buf_;
  std::vector<std::size_t> relay_count_;
  std::vector<std::uint32_t> relay_taint_;
};

// Per-layer npc flags (see secure_communicate).
struct Reach {
  std::size_t blocks = 0;  // layer-0 blocks
  // ok[u * blocks + b]: u holds the right value of every npc_0 sender of
  // layer-0 block b, for the blocks inside u's top-layer block.
  std::vector<char> ok;
  std::vector<std::vector<char>> npc;  // per layer
};

// Sufficient conditions for correct values, propagated layer by layer.
// ok_0(u, b): u is npc_0 and b is its own block. For b in a sibling
// sub-block B' of layer l, ok_l(u, b) holds when more than half of u's G_l
// neighbors in B' have ok_{l-1}(w, b); the relay majority then cannot be
// outvoted. npc_l(u): npc_0(u) and ok_l(u, b) for every block b of u's
// layer-l block that holds at least one npc_0 node.
Reach structural_reach(const ExpanderStack& stack, const BlockRoutes& routes, const std::vector<char>& faulty,
                       const std::vector<char>& sacrificed0, int kernel_f) {
  const std::size_t n = stack.size();
  const std::size_t s0 = stack.block_size(0);
  Reach reach;
  reach.blocks = n / s0;
  const std::size_t blocks = reach.blocks;
  reach.npc.assign(stack.layer_count(), std::vector<char>(n, 0));
  auto& npc0 = reach.npc[0];
  // E: faulty nodes plus correct nodes with a route to or from another
  // correct node through a faulty relay; the kernel sees them as faulty.
  std::vector<char> effective(faulty);
  for (std::size_t r = 0; r < blocks; ++r) {
    const NodeId start = stack.block_start(0, r);
    if (!routes.direct()) {
      auto dirty = [&](std::size_t from, std::size_t to) {
        for (std::size_t w = routes.hop(r, to, from); w != to; w = routes.hop(r, to, w)) {
          if (faulty[start + w]) return true;
        }
        return false;
      };
      for (std::size_t a = 0; a < s0; ++a) {
        if (faulty[start + a]) continue;
        for (std::size_t b = 0; b < s0 && !effective[start + a]; ++b) {
          if (b == a || faulty[start + b]) continue;
          if (dirty(a, b) || dirty(b, a)) effective[start + a] = 1;
        }
      }
    }
    int bad = 0;
    for (std::size_t a = 0; a < s0; ++a) bad += effective[start + a];
    const bool good = !sacrificed0[r] && bad <= kernel_f;
    for (std::size_t a = 0; a < s0; ++a) npc0[start + a] = good && !effective[start + a];
  }
  std::vector<char> healthy(blocks, 0);
  reach.ok.assign(n * blocks, 0);
  for (NodeId u = 0; u < n; ++u) {
    if (!npc0[u]) continue;
    healthy[u / s0] = 1;
    reach.ok[u * blocks + u / s0] = 1;
  }

  std::vector<char> next;
  std::vector<int> good;
  std::vector<int> seen;
  for (std::size_t l = 1; l < stack.layer_count(); ++l) {
    const std::size_t sub = stack.block_size(l - 1);
    const std::size_t per_sub = sub / s0;
    const std::size_t fan = stack.block_size(l) / sub;
    next = reach.ok;
    good.assign(fan * per_sub, 0);
    seen.assign(fan, 0);
    for (NodeId u = 0; u < n; ++u) {
      if (faulty[u]) continue;
      std::fill(good.begin(), good.end(), 0);
      std::fill(seen.begin(), seen.end(), 0);
      const std::size_t first = u / stack.block_size(l) * fan;
      for (auto w : stack.neighbors(l, u)) {
        const std::size_t k = w / sub - first;
        if (first + k == u / sub) continue;
        ++seen[k];
        const std::size_t b0 = (first + k) * per_sub;
        for (std::size_t b = 0; b < per_sub; ++b) good[k * per_sub + b] += reach.ok[w * blocks + b0 + b];
      }
      for (std::size_t k = 0; k < fan; ++k) {
        if (first + k == u / sub) continue;
        const std::size_t b0 = (first + k) * per_sub;
        for (std::size_t b = 0; b < per_sub; ++b) {
          next[u * blocks + b0 + b] = 2 * good[k * per_sub + b] > seen[k];
        }
      }
    }
    reach.ok.swap(next);
    const std::size_t span = stack.block_size(l) / s0;
    for (NodeId u = 0; u < n; ++u) {
      if (!npc0[u]) continue;
      const std::size_t b0 = u / stack.block_size(l) * span;
      bool all = true;
      for (std::size_t b = b0; b < b0 + span && all; ++b) all = !healthy[b] || reach.ok[u * blocks + b];
      reach.npc[l][u] = all;
    }
  }
  return reach;
}

}  // namespace

int secure_comm_round_count(const ExpanderStack& stack, int relay_rounds) {
  const int r = kernel_rounds(static_cast<int>(stack.block_size(0)));
  return relay_rounds * (1 + r) + static_cast<int>(stack.layer_count()) - 1;
}

bool taint_is_upward_only(std::span<const std::vector<std::uint32_t>> taint) {
  for (std::size_t l = 0; l < taint.size(); ++l) {
    const std::uint32_t above = l + 1 >= 32 ? 0u : ~((2u << l) - 1u);
    for (auto t : taint[l]) {
      if (t & above) return false;
    }
  }
  return true;
}

ProtocolOutcome secure_communicate(const ExpanderStack& stack, const AdversarySpec& adv,
                                   const SecureCommOptions& options) {
  const std::size_t n = stack.size();
  if (stack.layer_count() > 31) throw PreconditionError("at most 31 expander layers");
  const bool clique = stack.layer_is_clique(0);
  if (!clique && !options.allow_relayed) {
    throw PreconditionError("layer 0 is not a clique; enable the relayed mode to run it");
  }
  AdversarySpec spec = adv;
  spec.normalize();
  const bool valid = detail::check_scopes(
      spec, spec.scopes.empty()
                ? scopes_for_expander(stack, layered_resilience(stack, options.alpha), options.sacrificed)
                : spec.scopes);

  std::vector<NodeId> senders = options.senders;
  if (senders.empty()) {
    senders.resize(n);
    for (NodeId u = 0; u < n; ++u) senders[u] = u;
  }
  if (!options.values.empty() && options.values.size() != senders.size()) {
    throw PreconditionError("secure_communicate needs one value per sender");
  }
  std::vector<char> is_sender(n, 0);
  std::vector<Value> value(n, kDefaultValue);
  for (std::size_t k = 0; k < senders.size(); ++k) {
    const NodeId i = senders[k];
    if (i >= n) throw PreconditionError("sender out of range");
    is_sender[i] = 1;
    value[i] = !options.values.empty()
                   ? options.values[k]
                   : ((derive_seed(spec.seed, i, 0x5ec0) & 1) ? spec.alphabet.high : spec.alphabet.low);
  }

  const int s0 = static_cast<int>(stack.block_size(0));
  const PhaseKing machine(s0, max_fault_bound(s0), options.base.kernel_fault);
  const BlockRoutes routes(stack, clique);
  SecureCommProgram program(stack, machine, routes, is_sender, value, senders.front());
  auto exec = run_sync_execution(program, spec, {options.base.round_budget, options.base.record_trace});

  ProtocolOutcome out = detail::start_outcome(n, spec, std::move(exec));
  out.scopes_valid = valid;

  std::vector<char> faulty(n, 0);
  for (auto u : spec.corrupt) faulty[u] = 1;
  std::vector<char> sacrificed0(n / stack.block_size(0), 0);
  for (const auto& [l, r] : options.sacrificed) {
    if (l == 0 && r < sacrificed0.size()) sacrificed0[r] = 1;
  }
  const auto reach = structural_reach(stack, routes, faulty, sacrificed0, machine.fault_bound());
  const auto& npc = reach.npc;
  out.layer_npc.resize(npc.size());
  for (std::size_t l = 0; l < npc.size(); ++l) {
    for (NodeId u = 0; u < n; ++u) {
      if (npc[l][u]) out.layer_npc[l].push_back(u);
    }
  }
  const auto& top = npc.back();
  const std::size_t last = stack.layer_count() - 1;
  const std::size_t s0_size = stack.block_size(0);
  const auto& final_values = program.layer_values()[last];
  for (NodeId u = 0; u < n; ++u) {
    if (faulty[u]) continue;
    (top[u] ? out.npc : out.given_up).push_back(u);
  }
  // Every pair covered by the reach analysis; this includes all pairs of
  // overall-npc nodes.
  for (NodeId i = 0; i < n; ++i) {
    if (!is_sender[i] || !npc[0][i]) continue;
    for (NodeId j = 0; j < n; ++j) {
      if (!reach.ok[j * reach.blocks + i / s0_size]) continue;
      ++out.pairs_checked;
      if (final_values[program.slot_of(last, j, i)] != value[i]) ++out.pairs_failed;
    }
  }
  const NodeId designated = senders.front();
  out.target = value[designated];
  for (NodeId j = 0; j < n; ++j) {
    if (!faulty[j]) out.decisions[j] = final_values[program.slot_of(last, j, designated)];
  }
  if (options.receiver && *options.receiver >= n) throw PreconditionError("receiver out of range");
  out.delivery = out.pairs_failed == 0;
  out.validity = out.delivery;
  out.agreement = true;
  out.upward_only = taint_is_upward_only(program.taint());
  return out;
}

ProtocolOutcome secure_communicate(const ExpanderStack& stack, NodeId sender, NodeId receiver,
                                   Value value, const AdversarySpec& adv, SecureCommOptions options) {
  options.senders = {sender};
  options.values = {value};
  options.receiver = receiver;
  return secure_communicate(stack, adv, options);
}

}  // namespace msbft

#include <algorithm>
#include <set>
#include <sstream>

#include <doctest.h>

#include "msbft/dissemination.hpp"
#include "msbft/engine.hpp"
#include "msbft/rng.hpp"
#include "msbft/scopes.hpp"

using namespace msbft;

namespace {

// Every node sends its state to every other node; the new state is the sum
// of the values received plus one.
class Gossip : public Program {
 public:
  Gossip(std::size_t n, int rounds) : state_(n, 1), rounds_(rounds) {}
  std::size_t node_count() const override { return state_.size(); }
  int round_count() const override { return rounds_; }
  void send(int, NodeId node, std::vector<Message>& out) override {
    for (NodeId v = 0; v < state_.size(); ++v) {
      if (v != node) out.push_back({node, v, 0, 0, state_[node]});
    }
  }
  void receive(int, NodeId node, std::span<const Message> inbox) override {
    Value sum = 1;
    NodeId last = 0;
    for (const auto& m : inbox) {
      CHECK(m.to == node);
      CHECK(m.from >= last);
      last = m.from;
      sum += m.value % 1000;
    }
    state_[node] = sum;
  }
  Value state(NodeId node) const override { return state_[node]; }

 private:
  std::vector<Value> state_;
  int rounds_;
};

}  // namespace

TEST_CASE("engine counts rounds and messages") {
  Gossip g(5, 3);
  const auto exec = run_sync_execution(g, {}, {1 << 20, true});
  CHECK(exec.metrics.rounds == 3);
  CHECK(exec.metrics.total_messages == 5u * 4u * 3u);
  CHECK(exec.trace.size() == 4);
  CHECK(exec.trace[0].messages.empty());
  for (NodeId u = 0; u < 5; ++u) {
    CHECK(exec.metrics.messages[u] == 12);
    CHECK(exec.metrics.peak_merged[u] == 4);
    CHECK(exec.metrics.merged[u] == 12);
  }
  CHECK(exec.trace[1].states[0] == 5);
}

TEST_CASE("engine replay is deterministic") {
  AdversarySpec adv;
  adv.corrupt = {1, 3};
  adv.default_strategy = {StrategyKind::kRandom, 0};
  adv.seed = 17;
  Gossip a(6, 4);
  Gossip b(6, 4);
  const auto x = run_sync_execution(a, adv, {1 << 20, true});
  const auto y = run_sync_execution(b, adv, {1 << 20, true});
  CHECK(x.digest == y.digest);
  std::ostringstream sx, sy;
  write_trace_jsonl(sx, x);
  write_trace_jsonl(sy, y);
  CHECK(sx.str() == sy.str());
  adv.seed = 18;
  Gossip c(6, 4);
  CHECK(run_sync_execution(c, adv).digest != x.digest);
  CHECK(hex_digest(0x1f).size() == 16);
}

TEST_CASE("silent faults send nothing and correct messages do not depend on the script") {
  AdversarySpec silent;
  silent.corrupt = {2};
  silent.default_strategy = {StrategyKind::kSilent, 0};
  AdversarySpec loud = silent;
  loud.default_strategy = {StrategyKind::kConstant, 77};
  Gossip a(4, 2);
  Gossip b(4, 2);
  const auto x = run_sync_execution(a, silent, {1 << 20, true});
  const auto y = run_sync_execution(b, loud, {1 << 20, true});
  CHECK(x.metrics.messages[2] == 0);
  CHECK(y.metrics.messages[2] == 6);
  auto from_correct = [](const RoundTrace& t) {
    std::vector<Message> out;
    for (const auto& m : t.messages) {
      if (m.from != 2) out.push_back(m);
    }
    return out;
  };
  CHECK(from_correct(x.trace[1]) == from_correct(y.trace[1]));
  for (const auto& m : y.trace[2].messages) {
    if (m.from == 2) CHECK(m.value == 77);
  }
}

TEST_CASE("round budget") {
  Gossip g(3, 10);
  CHECK_THROWS_AS(run_sync_execution(g, {}, {5, false}), BudgetExceeded);
}

TEST_CASE("strategy scripts") {
  const Alphabet a{0, 1};
  ScriptContext ctx;
  ctx.alphabet = a;
  const Message m{3, 4, 0, 0, 0};
  CHECK_FALSE(apply_strategy({StrategyKind::kSilent, 0}, ctx, m).has_value());
  CHECK(apply_strategy({StrategyKind::kConstant, 9}, ctx, m) == Value{9});
  CHECK(apply_strategy({StrategyKind::kEquivocate, 0}, ctx, m) == Value{0});
  CHECK(apply_strategy({StrategyKind::kEquivocate, 0}, ctx, Message{3, 5, 0, 0, 0}) == Value{1});
  CHECK(apply_strategy({StrategyKind::kCopyFlip, 0}, ctx, m) == Value{1});
  CHECK(apply_strategy({StrategyKind::kCopyFlip, 0}, ctx, Message{3, 4, 0, 0, 1}) == Value{0});
  const auto r = apply_strategy({StrategyKind::kRandom, 0}, ctx, m);
  CHECK((r == Value{0} || r == Value{1}));
  CHECK(apply_strategy({StrategyKind::kRandom, 0}, ctx, m) == r);

  const auto family = standard_strategy_family(a);
  CHECK(family.size() == 6);
  std::set<std::string> ids;
  for (const auto& s : family) {
    ids.insert(s.id());
    CHECK(Strategy::parse(s.id()) == s);
  }
  CHECK(ids.size() == 6);
  CHECK_THROWS(Strategy::parse("teleport"));
}

TEST_CASE("broadcast scope counts") {
  for (auto [L, cliques, pairs] : std::vector<std::tuple<int, int, int>>{{1, 1, 0}, {2, 7, 6}, {3, 49, 48}}) {
    const auto h = build_hypercube(7, L);
    const DisseminationTree tree(h, 0);
    const auto scopes = scopes_for_broadcast(h, tree);
    int c = 0;
    int p = 0;
    for (const auto& s : scopes) {
      CHECK(s.bound == 2);
      (s.members.size() == 7 ? c : p) += 1;
    }
    CHECK(c == cliques);
    CHECK(p == pairs);
  }
}

TEST_CASE("corruption validation") {
  const auto h = build_hypercube(7, 2);
  const auto scopes = scopes_for_broadcast(h, DisseminationTree(h, 0));
  CHECK(validate_corruption({}, scopes).valid);
  const std::vector<NodeId> three{h.parse_label("00"), h.parse_label("01"), h.parse_label("02")};
  const auto v = validate_corruption(three, scopes);
  CHECK_FALSE(v.valid);
  REQUIRE_FALSE(v.violated.empty());
  CHECK(scopes[v.violated.front()].name == "clique:0");
  const std::vector<NodeId> pair{h.parse_label("01"), h.parse_label("12")};
  CHECK(validate_corruption(pair, scopes).valid);
  const std::vector<NodeId> pair3{h.parse_label("01"), h.parse_label("12"), h.parse_label("13")};
  CHECK_FALSE(validate_corruption(pair3, scopes).valid);
}

TEST_CASE("validation is monotone under subsets") {
  const auto h = build_hypercube(7, 2);
  const auto scopes = scopes_for_agreement(h);
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    const auto f = sample_corruption(scopes, h.size(), 6, derive_seed(5, k)).corrupt;
    REQUIRE(validate_corruption(f, scopes).valid);
    for (unsigned mask = 0; mask < 64; mask += 5) {
      std::vector<NodeId> sub;
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (mask >> i & 1) sub.push_back(f[i]);
      }
      CHECK(validate_corruption(sub, scopes).valid);
    }
  }
}

TEST_CASE("sampled corruption") {
  const auto h = build_hypercube(7, 2);
  const auto scopes = scopes_for_broadcast(h, DisseminationTree(h, 0));
  CHECK(sample_corruption(scopes, 49, 0, 1).corrupt.empty());
  const auto f = sample_corruption(scopes, 49, 6, 1).corrupt;
  CHECK(f.size() == 6);
  CHECK(validate_corruption(f, scopes).valid);
  CHECK(sample_corruption(scopes, 49, 6, 1).corrupt == f);
  CHECK_THROWS_AS(sample_corruption(scopes, 49, 15, 1), InfeasibleError);
}

TEST_CASE("sacrificed scopes lift the bound and leave the others") {
  ScopeList scopes{{"a", {0, 1, 2, 3}, 1, true}, {"b", {2, 3, 4, 5}, 1, false}};
  const std::vector<NodeId> f{0, 1, 2, 3, 4};
  CHECK(validate_corruption(f, scopes).valid);
  scopes[0].sacrificed = false;
  CHECK_FALSE(validate_corruption(f, scopes).valid);
  scopes[0].sacrificed = true;
  const std::vector<NodeId> g{0, 4, 5};
  CHECK_FALSE(validate_corruption(g, scopes).valid);
}

TEST_CASE("nested sampler and counts match brute force") {
  const std::vector<std::size_t> sizes{4, 8};
  const std::vector<std::uint32_t> bounds{1, 2};
  std::vector<long double> brute(9, 0);
  for (unsigned mask = 0; mask < 256; ++mask) {
    bool ok = __builtin_popcount(mask) <= 2;
    ok = ok && __builtin_popcount(mask & 0xf) <= 1 && __builtin_popcount(mask & 0xf0) <= 1;
    if (ok) brute[__builtin_popcount(mask)] += 1;
  }
  const auto counts = count_nested_corruptions(8, sizes, bounds);
  for (std::size_t k = 0; k < brute.size(); ++k) CHECK(counts[k] == brute[k]);
  std::map<std::vector<NodeId>, int> seen;
  for (int k = 0; k < 1600; ++k) {
    const auto f = sample_nested_corruption(8, sizes, bounds, 2, derive_seed(3, k));
    REQUIRE(f.size() == 2);
    CHECK(f[0] < 4);
    CHECK(f[1] >= 4);
    ++seen[f];
  }
  CHECK(seen.size() == 16);
  for (const auto& [f, c] : seen) CHECK(c > 50);  // 100 expected for each of 16
  CHECK_THROWS_AS(sample_nested_corruption(8, sizes, bounds, 3, 1), InfeasibleError);
}

TEST_CASE("dissemination tree") {
  const auto h = build_hypercube(7, 3);
  for (NodeId root : {NodeId{0}, NodeId{17}}) {
    const DisseminationTree tree(h, root);
    CHECK(tree.size() == 49);
    CHECK(tree.depth() == 2);
    CHECK(tree.edges().size() == 48);
    CHECK(tree.layer(root) == 0);
    int previous = 0;
    for (const auto& [parent, child] : tree.edges()) {
      CHECK(tree.parent(child) == parent);
      CHECK(h.clique_differing_digit(parent, child) == tree.layer(child));
      CHECK(tree.layer(parent) < tree.layer(child));
      CHECK(tree.layer(child) >= previous);
      previous = tree.layer(child);
    }
    CHECK(tree.layer_members(1).size() == 6);
    CHECK(tree.layer_members(2).size() == 42);
  }
}

#include <doctest.h>

#include "msbft/kernels.hpp"

using namespace msbft;

namespace {

std::vector<NodeId> seven() { return {0, 1, 2, 3, 4, 5, 6}; }

template <class Visit>
void for_each_pair(Visit visit) {
  for (NodeId a = 0; a < 7; ++a) {
    for (NodeId b = a + 1; b < 7; ++b) visit(a, b);
  }
}

AdversarySpec spec(std::vector<NodeId> corrupt, Strategy s, std::uint64_t seed = 1) {
  AdversarySpec adv;
  adv.corrupt = std::move(corrupt);
  adv.default_strategy = s;
  adv.seed = seed;
  return adv;
}

}  // namespace

TEST_CASE("fault bound and round count") {
  CHECK(max_fault_bound(7) == 2);
  CHECK(max_fault_bound(16) == 5);
  CHECK(max_fault_bound(4) == 1);
  const auto cfg = KernelConfig::for_participants(seven());
  std::vector<Value> ones(7, 1);
  const auto out = run_immediate_ba_As(cfg, ones, {});
  CHECK(out.rounds == 9);
  for (const auto& d : out.decisions) CHECK(d == Value{1});
}

TEST_CASE("A_s with two equivocating faults keeps a unanimous 0") {
  const auto cfg = KernelConfig::for_participants(seven());
  std::vector<Value> zeros(7, 0);
  for_each_pair([&](NodeId a, NodeId b) {
    const auto out = run_immediate_ba_As(cfg, zeros, spec({a, b}, {StrategyKind::kEquivocate, 0}));
    CHECK(out.agreement());
    CHECK(out.common() == Value{0});
    CHECK_FALSE(out.decisions[a].has_value());
  });
}

TEST_CASE("A_s: five correct ones against constant-0 decide 1") {
  const auto cfg = KernelConfig::for_participants(seven());
  for_each_pair([&](NodeId a, NodeId b) {
    std::vector<Value> in(7, 1);
    in[a] = in[b] = 0;
    const auto out = run_immediate_ba_As(cfg, in, spec({a, b}, {StrategyKind::kConstant, 0}));
    CHECK(out.common() == Value{1});
  });
}

TEST_CASE("B_s: five correct holders of 1 with one wrong start and one fault") {
  const auto cfg = KernelConfig::for_participants(seven());
  for (NodeId bad = 0; bad < 7; ++bad) {
    for (NodeId wrong = 0; wrong < 7; ++wrong) {
      if (wrong == bad) continue;
      for (const auto& s : standard_strategy_family({})) {
        std::vector<Value> in(7, 1);
        in[wrong] = 0;
        const auto out = run_differential_ba_Bs(cfg, in, spec({bad}, s));
        CHECK(out.common() == Value{1});
      }
    }
  }
  std::vector<Value> ones(7, 1);
  CHECK(run_differential_ba_Bs(cfg, ones, {}).common() == Value{1});
}

TEST_CASE("B_s differential validity holds whenever f + e <= 2") {
  const auto cfg = KernelConfig::for_participants(seven());
  for (unsigned fault_mask = 0; fault_mask < 128; ++fault_mask) {
    const int f = __builtin_popcount(fault_mask);
    if (f > 2) continue;
    std::vector<NodeId> corrupt;
    for (NodeId i = 0; i < 7; ++i) {
      if (fault_mask >> i & 1) corrupt.push_back(i);
    }
    for (unsigned wrong_mask = 0; wrong_mask < 128; ++wrong_mask) {
      if (wrong_mask & fault_mask || f + __builtin_popcount(wrong_mask) > 2) continue;
      for (Value v : {Value{0}, Value{1}}) {
        std::vector<Value> in(7);
        for (NodeId i = 0; i < 7; ++i) in[i] = (wrong_mask >> i & 1) ? 1 - v : v;
        for (const auto& s : standard_strategy_family({})) {
          const auto out = run_differential_ba_Bs(cfg, in, spec(corrupt, s, fault_mask * 131 + wrong_mask));
          CHECK(out.common() == v);
        }
      }
    }
  }
}

TEST_CASE("B_s common decisions with four correct ones are recorded") {
  // For every pair of faulty participants (inputs 0), the lowest correct
  // participant starts with 0 and the other four with 1. Columns follow
  // standard_strategy_family; recorded from the exhaustive run.
  const std::vector<std::string> frozen{"001011", "001111", "001011", "001101", "001001", "001111", "001011",
                                        "001011", "001011", "001001", "001001", "001011", "001111", "001011",
                                        "001111", "001011", "001011", "001011", "001011", "001111", "001011"};
  const auto cfg = KernelConfig::for_participants(seven());
  std::size_t k = 0;
  for_each_pair([&](NodeId a, NodeId b) {
    std::vector<Value> in(7, 1);
    in[a] = in[b] = 0;
    NodeId first = 0;
    while (first == a || first == b) ++first;
    in[first] = 0;
    std::string row;
    for (const auto& s : standard_strategy_family({})) {
      const auto out = run_differential_ba_Bs(cfg, in, spec({a, b}, s, 11));
      REQUIRE(out.agreement());
      row += std::to_string(*out.common());
    }
    CHECK(row == frozen[k++]);
  });
}

TEST_CASE("kernel rounds are input independent and messages bounded by s-1 per round") {
  const auto cfg = KernelConfig::for_participants(seven());
  for (unsigned bits = 0; bits < 128; bits += 9) {
    std::vector<Value> in(7);
    for (int i = 0; i < 7; ++i) in[i] = bits >> i & 1;
    const auto out = run_immediate_ba_As(cfg, in, spec({2}, {StrategyKind::kRandom, 0}, bits));
    CHECK(out.rounds == 9);
    for (auto m : out.messages) CHECK(m <= 6u * 9u);
  }
}

TEST_CASE("kernel preconditions") {
  auto cfg = KernelConfig::for_participants(seven());
  std::vector<Value> in(7, 1);
  CHECK_THROWS_AS(run_immediate_ba_As(cfg, in, spec({0, 1, 2}, {StrategyKind::kSilent, 0})), PreconditionError);
  CHECK_THROWS_AS(run_immediate_ba_As(cfg, std::vector<Value>(6, 1), {}), PreconditionError);
  cfg.participants = {0, 1, 1, 2, 3, 4, 5};
  CHECK_THROWS_AS(run_immediate_ba_As(cfg, in, {}), PreconditionError);
  CHECK_THROWS_AS(PhaseKing(6, 2), PreconditionError);
}

TEST_CASE("decide-input fault breaks agreement") {
  auto cfg = KernelConfig::for_participants(seven());
  cfg.fault = KernelFault::kDecideInput;
  std::vector<Value> in{0, 1, 0, 1, 0, 1, 0};
  CHECK_FALSE(run_immediate_ba_As(cfg, in, {}).agreement());
}

TEST_CASE("initiation transfers site by site") {
  const auto h = build_hypercube(7, 2);
  const NodeId source = 0;
  const NodeId target = 1;
  std::vector<Value> decisions(7, 1);
  auto got = run_initiation_Is(h, source, decisions, target, {});
  CHECK(got == std::vector<Value>(7, 1));
  const auto bad = spec({h.member(source, 3)}, {StrategyKind::kConstant, 0});
  got = run_initiation_Is(h, source, decisions, target, bad);
  for (int site = 0; site < 7; ++site) {
    if (site != 3) CHECK(got[site] == 1);
  }
  CHECK(got[3] == 0);
  // A faulty target is not constrained; the other targets still get 1.
  got = run_initiation_Is(h, source, decisions, target, spec({h.member(target, 5)}, {StrategyKind::kSilent, 0}));
  for (int site = 0; site < 7; ++site) {
    if (site != 5) CHECK(got[site] == 1);
  }
}

TEST_CASE("majority relay") {
  CHECK(majority_relay(std::vector<Value>{1, 1, 1, 0, 0}) == 1);
  CHECK(majority_relay(std::vector<Value>{1, 0}) == 0);
  CHECK(majority_relay(std::vector<Value>{0, 1}) == 0);
  CHECK(majority_relay(std::vector<Value>{4, 4, 4}) == 4);
  CHECK(majority_relay(std::vector<Value>{}) == kBottom);
  // Tie-break by enumeration over two-element multisets: the lower value wins.
  for (Value a = -2; a <= 2; ++a) {
    for (Value b = -2; b <= 2; ++b) CHECK(majority_relay(std::vector<Value>{a, b}) == std::min(a, b));
  }
}

#include <algorithm>

#include <doctest.h>

#include "msbft/dissemination.hpp"
#include "msbft/protocols.hpp"
#include "msbft/rng.hpp"
#include "msbft/scopes.hpp"

using namespace msbft;

namespace {

AdversarySpec spec(std::vector<NodeId> corrupt, Strategy s, std::uint64_t seed = 1) {
  AdversarySpec adv;
  adv.corrupt = std::move(corrupt);
  adv.default_strategy = s;
  adv.seed = seed;
  return adv;
}

ExpanderStack small_stack(std::uint64_t seed = 5) {
  ExpanderStackParams p;
  p.n = 64;
  p.base_size = 16;
  p.theta = {0.5, 0.5};
  p.degree = {15, 24, 24};
  p.seed = seed;
  return build_expander_stack(p);
}

}  // namespace

TEST_CASE("round count formulas") {
  CHECK(kernel_rounds(7) == 9);
  CHECK(kernel_rounds(16) == 18);
  CHECK(broadcast_round_count(7, 1) == 10);
  CHECK(broadcast_round_count(7, 2) == 20);
  CHECK(broadcast_round_count(7, 3) == 30);
  CHECK(agreement_round_count(7, 1) == 9);
  CHECK(agreement_round_count(7, 2) == 19);
  CHECK(secure_comm_round_count(small_stack()) == 19 + 2);
}

TEST_CASE("broadcast on one clique is the kernel alone") {
  const auto h = build_hypercube(7, 1);
  const auto out = multiscale_broadcast(h, 3, 1, {});
  CHECK(out.rounds == broadcast_round_count(7, 1));
  CHECK(out.agreement);
  CHECK(out.validity);
  for (const auto& d : out.decisions) CHECK(d == Value{1});
}

TEST_CASE("fault-free broadcast on s=7, L=2") {
  const auto h = build_hypercube(7, 2);
  const auto out = multiscale_broadcast(h, 0, 9, {});
  CHECK(out.rounds == 1 + kernel_rounds(7) + 1 + kernel_rounds(7));
  for (const auto& d : out.decisions) CHECK(d == Value{9});
  CHECK(out.given_up.empty());
  CHECK(out.npc.size() == 49);
}

TEST_CASE("two faults inside the General's clique, every placement") {
  const auto h = build_hypercube(7, 2);
  for (int a = 0; a < 7; ++a) {
    for (int b = a + 1; b < 7; ++b) {
      const auto out = multiscale_broadcast(h, 0, 1, spec({h.member(0, a), h.member(0, b)}, {StrategyKind::kEquivocate, 0}));
      CHECK(out.agreement);
      CHECK(out.given_up.empty());
      if (a != 0) CHECK(out.target == Value{1});
      CHECK(out.validity);
    }
  }
}

TEST_CASE("every valid two-node placement on s=7, L=2 passes for every script") {
  const auto h = build_hypercube(7, 2);
  const auto scopes = scopes_for_broadcast(h, DisseminationTree(h, 0));
  int runs = 0;
  for (NodeId a = 0; a < 49; ++a) {
    for (NodeId b = a + 1; b < 49; ++b) {
      const std::vector<NodeId> f{a, b};
      if (!validate_corruption(f, scopes).valid) continue;
      for (const auto& s : standard_strategy_family({})) {
        const auto out = multiscale_broadcast(h, 0, 1, spec(f, s, a * 49 + b));
        ++runs;
        CHECK(out.agreement);
        CHECK(out.validity);
        CHECK(out.given_up.empty());
      }
    }
  }
  CHECK(runs == 1176 * 6);
}

TEST_CASE("broadcast replay and scope enforcement") {
  const auto h = build_hypercube(7, 2);
  ProtocolOptions opt;
  opt.record_trace = true;
  const auto adv = spec({3, 11}, {StrategyKind::kRandom, 0}, 99);
  const auto x = multiscale_broadcast(h, 0, 1, adv, opt);
  const auto y = multiscale_broadcast(h, 0, 1, adv, opt);
  CHECK(x.digest == y.digest);
  REQUIRE(x.trace.size() == y.trace.size());
  for (std::size_t k = 0; k < x.trace.size(); ++k) {
    CHECK(x.trace[k].states == y.trace[k].states);
    CHECK(x.trace[k].messages == y.trace[k].messages);
  }
  auto bad = spec({0, 1, 2}, {StrategyKind::kSilent, 0});
  CHECK_THROWS_AS(multiscale_broadcast(h, 0, 1, bad), PreconditionError);
  bad.enforce_scopes = false;
  const auto out = multiscale_broadcast(h, 0, 1, bad);
  CHECK_FALSE(out.scopes_valid);
}

TEST_CASE("broadcast rounds grow linearly in L") {
  std::vector<int> rounds;
  for (int L : {1, 2, 3}) rounds.push_back(multiscale_broadcast(build_hypercube(7, L), 0, 1, {}).rounds);
  CHECK(rounds[1] - rounds[0] == rounds[2] - rounds[1]);
  for (int L : {1, 2, 3}) CHECK(rounds[L - 1] == broadcast_round_count(7, L));
}

TEST_CASE("agreement on unanimous inputs keeps the value") {
  const auto h = build_hypercube(7, 2);
  const auto scopes = scopes_for_agreement(h);
  std::vector<Value> inputs(49, 3);
  for (int k = 0; k < 30; ++k) {
    const auto f = sample_corruption(scopes, 49, k % 7, derive_seed(21, k)).corrupt;
    const auto fam = standard_strategy_family({0, 1});
    const auto out = multiscale_agreement(h, inputs, spec(f, fam[k % fam.size()], k));
    CHECK(out.agreement);
    CHECK(out.validity);
    CHECK(out.target == Value{3});
  }
}

TEST_CASE("agreement on clique indices decides the median") {
  const auto h = build_hypercube(7, 2);
  std::vector<Value> inputs(49);
  for (NodeId u = 0; u < 49; ++u) inputs[u] = h.clique_of(u);
  const auto out = multiscale_agreement(h, inputs, {});
  CHECK(out.rounds == agreement_round_count(7, 2));
  for (const auto& d : out.decisions) CHECK(d == Value{3});
}

TEST_CASE("agreement with mixed inputs and one equivocating pair") {
  const auto h = build_hypercube(7, 2);
  std::vector<Value> inputs(49);
  for (NodeId u = 0; u < 49; ++u) inputs[u] = derive_seed(5, u) & 1;
  const auto out = multiscale_agreement(
      h, inputs, spec({h.parse_label("00"), h.parse_label("11")}, {StrategyKind::kEquivocate, 0}, 3));
  CHECK(out.agreement);
  CHECK(out.target == Value{1});  // recorded from the engine run
}

TEST_CASE("merged round messages stay within c*L") {
  const int c = (7 - 1) * (kernel_rounds(7) + 1);
  for (int L : {1, 2}) {
    const auto h = build_hypercube(7, L);
    std::vector<Value> inputs(h.size(), 1);
    const auto out = multiscale_agreement(h, inputs, {});
    CHECK(out.metrics.max_merged() <= static_cast<std::uint64_t>(c * L));
  }
}

TEST_CASE("lower median is symmetric") {
  CHECK(lower_median({0, 1, 2, 3, 4, 5, 6}) == 3);
  CHECK(lower_median({1, 2}) == 1);
  CHECK(lower_median({5}) == 5);
  std::vector<Value> v{9, 2, 7, 4, 4, 1};
  const Value m = lower_median(v);
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    rng.shuffle(std::span<Value>(v));
    CHECK(lower_median(v) == m);
  }
}

TEST_CASE("secure communication without faults") {
  const auto st = small_stack();
  const auto out = secure_communicate(st, {});
  CHECK(out.rounds == secure_comm_round_count(st));
  CHECK(out.delivery);
  CHECK(out.upward_only);
  CHECK(out.given_up.empty());
  for (const auto& layer : out.layer_npc) CHECK(layer.size() == 64);
  CHECK(out.pairs_checked == 64u * 64u);
  const auto one = secure_communicate(st, 3, 60, 7, {});
  CHECK(one.decisions[60] == Value{7});
}

TEST_CASE("secure communication under nested placements") {
  const auto st = small_stack();
  const std::vector<std::size_t> sizes{16, 32, 64};
  const std::vector<std::uint32_t> bounds{5, 10, 21};
  const std::vector<double> frozen{0.859375, 0.875, 0.875};  // recorded from the engine runs
  const auto fam = standard_strategy_family({});
  for (int k = 0; k < 3; ++k) {
    const auto f = sample_nested_corruption(64, sizes, bounds, 8, derive_seed(77, k));
    const auto out = secure_communicate(st, spec(f, fam[k], k));
    CHECK(out.delivery);
    CHECK(out.upward_only);
    CHECK(out.pairs_failed == 0);
    CHECK(out.npc_fraction() == doctest::Approx(frozen[k]));
  }
}

TEST_CASE("a sacrificed layer-0 block elsewhere leaves delivery intact") {
  const auto st = small_stack();
  // Eight faults in block 3, far more than the kernel tolerates.
  std::vector<NodeId> f;
  for (NodeId u = 48; u < 56; ++u) f.push_back(u);
  SecureCommOptions opt;
  opt.sacrificed = {{0, 3}};
  const auto out = secure_communicate(st, 2, 20, 1, spec(f, {StrategyKind::kEquivocate, 0}), opt);
  CHECK(out.delivery);
  CHECK(out.decisions[20] == Value{1});
  CHECK(out.pairs_checked > 0);
  for (NodeId u = 0; u < 48; ++u) CHECK(std::binary_search(out.layer_npc[0].begin(), out.layer_npc[0].end(), u));
  // Without the sacrifice the placement breaks the layer-0 bound.
  CHECK_THROWS_AS(secure_communicate(st, spec(f, {StrategyKind::kEquivocate, 0})), PreconditionError);
}

TEST_CASE("taint check rejects downward flow") {
  std::vector<std::vector<std::uint32_t>> taint{{0b001, 0b001}, {0b011, 0b010}, {0b111, 0b100}};
  CHECK(taint_is_upward_only(taint));
  taint[0][1] = 0b010;  // a layer-0 value touched by layer 1
  CHECK_FALSE(taint_is_upward_only(taint));
  taint[0][1] = 0b001;
  taint[1][0] = 0b110;
  CHECK_FALSE(taint_is_upward_only(taint));
}

TEST_CASE("relayed layer 0") {
  ExpanderStackParams p;
  p.n = 64;
  p.base_size = 16;
  p.theta = {0.5, 0.5};
  p.degree = {8, 24, 24};
  p.seed = 6;
  const auto st = build_expander_stack(p);
  CHECK_THROWS_AS(secure_communicate(st, {}), PreconditionError);
  SecureCommOptions opt;
  opt.allow_relayed = true;
  const auto out = secure_communicate(st, spec({5, 40}, {StrategyKind::kConstant, 0}), opt);
  CHECK(out.delivery);
  CHECK(out.upward_only);
  CHECK(out.rounds > secure_comm_round_count(st));
}

TEST_CASE("incompleteness estimate") {
  const auto h = build_hypercube(7, 2);
  std::vector<ProtocolOutcome> outs;
  for (int k = 0; k < 5; ++k) outs.push_back(multiscale_broadcast(h, 0, 1, spec({NodeId(k), NodeId(20 + k)}, {StrategyKind::kRandom, 0}, k)));
  auto report = compute_incompleteness(outs);
  CHECK(report.max_given_up == 0);
  CHECK(report.placements == 5);
  CHECK(incompleteness_to_json(report)["x_A_lower_bound"] == 0);

  const auto st = small_stack();
  outs.clear();
  const std::vector<std::size_t> sizes{16, 32, 64};
  const std::vector<std::uint32_t> bounds{5, 10, 21};
  for (int k = 0; k < 3; ++k) {
    outs.push_back(secure_communicate(st, spec(sample_nested_corruption(64, sizes, bounds, 8, derive_seed(77, k)),
                                               standard_strategy_family({})[k], k)));
  }
  report = compute_incompleteness(outs);
  CHECK(report.max_given_up == 1);
  CHECK(report.histogram.at(0) == 2);
  CHECK(report.histogram.at(1) == 1);
  CHECK(outcome_to_json(outs[0]).contains("digest"));
}

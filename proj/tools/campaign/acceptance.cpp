#include <chrono>
#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "campaign.hpp"
#include "msbft/protocols.hpp"
#include "msbft/reliability.hpp"
#include "msbft/topology.hpp"

namespace msbft::campaign {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

CriterionResult criterion(int id, std::string title) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  return r;
}

std::string sci(const Real& x) { return to_string(x, 4); }

json with_fault(json doc, bool inject) {
  if (inject) doc["kernel_fault"] = "decide-input";
  return doc;
}

struct Campaign {
  ExperimentConfig config;
  CampaignResult result;
};

// Runs every campaign of a criterion, keeping the results for the
// determinism rerun.
std::vector<Campaign> run_all(int id, const AcceptanceOptions& options) {
  std::vector<Campaign> out;
  for (auto& c : acceptance_campaigns(id, options.inject_kernel_bug)) {
    auto result = run_experiment(c, options.workers);
    if (options.out_dir) write_outputs(*options.out_dir / c.name, c, result);
    out.push_back({std::move(c), std::move(result)});
  }
  return out;
}

std::size_t total_failures(const std::vector<Campaign>& cs) {
  std::size_t f = 0;
  for (const auto& c : cs) f += c.result.failures;
  return f;
}

std::size_t total_rows(const std::vector<Campaign>& cs) {
  std::size_t r = 0;
  for (const auto& c : cs) r += c.result.rows;
  return r;
}

CriterionResult criterion1() {
  auto r = criterion(1, "reliability headline (s=16, p=1e-4, n=1e6)");
  const auto start = Clock::now();
  const auto b = broadcast_reliability(16, 1000000, to_real(1e-4));
  r.seconds = seconds_since(start);
  const bool headline = b.nu_exact <= to_real(1e-9);
  const bool beats = b.nu_exact <= b.nu_closed_form;
  r.passed = headline && beats && r.seconds < 1.0;
  r.measured = fmt::format("exact nu={} closed-form nu={} ({:.3f} s)", sci(b.nu_exact), sci(b.nu_closed_form),
                           r.seconds);
  r.required = "R >= 1-1e-9 (nu <= 1e-9), exact nu <= closed-form nu, < 1 s";
  return r;
}

CriterionResult criterion2() {
  auto r = criterion(2, "small-tail bounds P(2,7) < 40p^2, P(2,14) < 160p^2");
  const auto start = Clock::now();
  bool ok = true;
  Real worst7 = 0;
  Real worst14 = 0;
  for (double pd : {1e-6, 1e-5, 1e-4}) {
    const Real p = to_real(pd);
    const Real r7 = p_exact(2, 7, p) / (40 * p * p);
    const Real r14 = p_exact(2, 14, p) / (160 * p * p);
    ok = ok && r7 < 1 && r14 < 1;
    worst7 = std::max(worst7, r7);
    worst14 = std::max(worst14, r14);
  }
  r.seconds = seconds_since(start);
  r.passed = ok && r.seconds < 1.0;
  r.measured = fmt::format("max P(2,7)/(40p^2)={} max P(2,14)/(160p^2)={} ({:.3f} s)", sci(worst7), sci(worst14),
                           r.seconds);
  r.required = "both ratios < 1 for p in {1e-6,1e-5,1e-4}, < 1 s";
  return r;
}

CriterionResult criterion3() {
  auto r = criterion(3, "ratio-bound regime (beta=2)");
  const auto start = Clock::now();
  const Real beta = 2;
  int regime_misses = 0;
  for (int s = 1; s < 5000; ++s) {
    if (!(to_real(1e-4) <= Real(1) / (beta * s + 1))) ++regime_misses;
  }
  int cells = 0;
  int skipped = 0;  // t > s: no tail and no t-th term
  int violations = 0;
  Real worst = 0;
  for (int t = 1; t <= 8; ++t) {
    for (int s : {7, 14, 16, 32, 64, 128}) {
      for (double pd : {1e-6, 1e-5, 1e-4}) {
        if (t > s) {
          ++skipped;
          continue;
        }
        const auto tb = tail_bound(t, s, to_real(pd), beta);
        ++cells;
        if (!tb.bound_regime || !(tb.exact < tb.bound)) ++violations;
        worst = std::max(worst, Real(tb.exact / tb.bound));
      }
    }
  }
  r.seconds = seconds_since(start);
  r.passed = regime_misses == 0 && violations == 0 && r.seconds < 5.0;
  r.measured = fmt::format("regime fails for {} of 4999 sizes; {}/{} grid cells exact < bound ({} cells with t > s "
                           "skipped), max exact/bound={} ({:.3f} s)",
                           regime_misses, cells - violations, cells, skipped, sci(worst), r.seconds);
  r.required = "precondition holds for all s < 5000 at p=1e-4; exact < bound on every cell; < 5 s";
  return r;
}

CriterionResult criterion4(const std::vector<Campaign>& cs, double seconds) {
  auto r = criterion(4, "kernel exhaustive safety (s=7, |F|<=2)");
  const auto& totals = cs.front().result.totals;
  const std::size_t placements = totals["coverage"]["placements"].get<std::size_t>();
  const std::size_t rows = total_rows(cs);
  const std::size_t expected = 29u * 128u * standard_strategy_family({}).size() * 2u;
  r.seconds = seconds;
  r.passed = total_failures(cs) == 0 && placements == 29 && rows == expected && seconds < 120.0;
  r.measured = fmt::format("{} executions ({} placements x 128 inputs x {} scripts x A,B), {} failed ({:.1f} s)", rows,
                           placements, standard_strategy_family({}).size(), total_failures(cs), seconds);
  r.required = fmt::format("all {} executions pass agreement and (differential) validity, < 120 s", expected);
  return r;
}

CriterionResult criterion5(const std::vector<Campaign>& cs, double seconds) {
  auto r = criterion(5, "broadcast end-to-end (L=2 exhaustive, L=3 sampled)");
  bool rounds_ok = true;
  std::string rounds;
  std::size_t max_given_up = 0;
  for (const auto& c : cs) {
    const auto& t = c.result.totals;
    const int expected = t["expected_rounds"].get<int>();
    rounds_ok = rounds_ok && t["min_rounds"].get<int>() == expected && t["max_rounds"].get<int>() == expected;
    max_given_up = std::max(max_given_up, t["max_given_up"].get<std::size_t>());
    rounds += fmt::format(" {}:{}/{}", c.config.name, t["max_rounds"].get<int>(), expected);
  }
  // Linear in L: r(L) = r_A + (L-1)(1 + r_B), so consecutive differences are constant.
  const int d1 = broadcast_round_count(7, 2) - broadcast_round_count(7, 1);
  const int d2 = broadcast_round_count(7, 3) - broadcast_round_count(7, 2);
  const auto& cov = cs.front().result.totals["coverage"];
  r.seconds = seconds;
  r.passed = total_failures(cs) == 0 && rounds_ok && max_given_up == 0 && d1 == d2 && seconds < 600.0;
  r.measured = fmt::format("{} executions, {} failed, max |X_A|={}, rounds measured/formula{}, step per L {}/{}; "
                           "exhaustive prefix {} placements (complete={}) ({:.1f} s)",
                           total_rows(cs), total_failures(cs), max_given_up, rounds, d1, d2,
                           cov["placements"].get<std::size_t>(), cov["complete"].get<bool>(), seconds);
  r.required = "agreement, validity, |X_A|=0 in every execution; rounds = r_A + (L-1)(1+r_B) exactly; < 600 s";
  return r;
}

CriterionResult criterion6(const std::vector<Campaign>& cs, double seconds) {
  auto r = criterion(6, "agreement end-to-end (s=7, L in {1,2})");
  bool merged_ok = true;
  std::string merged;
  int c_value = -1;
  for (const auto& c : cs) {
    const auto& t = c.result.totals;
    const int cc = t["merged_constant"].get<int>();
    if (c_value < 0) c_value = cc;
    merged_ok = merged_ok && cc == c_value &&
                t["max_merged_per_node"].get<std::uint64_t>() <= static_cast<std::uint64_t>(cc * c.config.dims);
    merged += fmt::format(" L={}:{}<={}", c.config.dims, t["max_merged_per_node"].get<std::uint64_t>(),
                          cc * c.config.dims);
  }
  r.seconds = seconds;
  r.passed = total_failures(cs) == 0 && merged_ok && seconds < 600.0;
  r.measured = fmt::format("{} executions, {} failed, merged round-messages per node{} (c={}) ({:.1f} s)",
                           total_rows(cs), total_failures(cs), merged, c_value, seconds);
  r.required = "agreement always, validity on unanimous inputs, merged <= c*L with one c for L=1,2; < 600 s";
  return r;
}

CriterionResult criterion7(const std::vector<Campaign>& cs, double seconds) {
  auto r = criterion(7, "secure communication (n=1024, s_0=16, theta=1/2)");
  const Campaign* main = nullptr;
  const Campaign* sacrificed = nullptr;
  std::vector<const Campaign*> scaling;
  for (const auto& c : cs) {
    if (c.config.sacrifice.blocks > 0) {
      sacrificed = &c;
    } else if (c.config.n == 1024) {
      main = &c;
    } else {
      scaling.push_back(&c);
    }
  }
  bool rounds_ok = true;
  std::string rounds;
  int previous = -1;
  for (const auto* c : scaling) {
    const auto& t = c->result.totals;
    const int measured = t["max_rounds"].get<int>();
    rounds_ok = rounds_ok && measured == t["expected_rounds"].get<int>() && t["min_rounds"].get<int>() == measured;
    if (previous >= 0) rounds_ok = rounds_ok && measured - previous == 1;
    previous = measured;
    rounds += fmt::format(" n={}:{}", c->config.n, measured);
  }
  const auto& mt = main->result.totals;
  const int main_rounds = mt["max_rounds"].get<int>();
  if (previous >= 0) rounds_ok = rounds_ok && main_rounds - previous == 1;
  rounds_ok = rounds_ok && main_rounds == mt["expected_rounds"].get<int>() && mt["min_rounds"].get<int>() == main_rounds;
  rounds += fmt::format(" n=1024:{}", main_rounds);
  const double per_log = main_rounds / std::log2(1024.0);
  // c: one kernel run per hop of the layer-0 block plus one round per layer.
  const double c_bound = kernel_rounds(16) + 1 + 1;
  rounds_ok = rounds_ok && per_log <= c_bound;

  const auto sizes = expander_layer_sizes(1024, 16, std::vector<double>(6, 0.5));
  const std::vector<std::uint64_t> sz(sizes.begin(), sizes.end());
  const Real p = to_real(1e-4);
  const auto strict = securecomm_reliability(1024, sz, p);
  const auto t1 = securecomm_reliability(1024, sz, p, {1});
  const auto t2 = securecomm_reliability(1024, sz, p, {2});
  const bool tolerant_ok = t1.nu_tolerant <= strict.nu_strict && t2.nu_tolerant <= t1.nu_tolerant;

  r.seconds = seconds;
  // A run whose npc set is empty would check no pairs at all.
  const double sacrificed_npc = sacrificed ? sacrificed->result.totals["min_npc_fraction"].get<double>() : 0.0;
  r.passed = total_failures(cs) == 0 && rounds_ok && tolerant_ok && sacrificed_npc > 0.0 && seconds < 900.0;
  r.measured = fmt::format(
      "{} placements, {} failed, min npc fraction {:.3f}; sacrificed-block runs {} failed, min npc fraction {:.3f}; "
      "rounds{} "
      "({:.2f} per log2 n, c={}); nu strict={} t_0=1:{} t_0=2:{} ({:.1f} s)",
      main->result.rows, main->result.failures, mt["min_npc_fraction"].get<double>(),
      sacrificed ? sacrificed->result.failures : 0, sacrificed_npc, rounds, per_log, c_bound, sci(strict.nu_strict),
      sci(t1.nu_tolerant), sci(t2.nu_tolerant), seconds);
  r.required = "every overall-npc pair delivered (non-empty npc set with a sacrificed block), upward-only taint, rounds = D(1+r_K)+L-1 growing by 1 per "
               "doubling of n and <= c log2 n; tolerant nu <= strict nu; < 900 s";
  return r;
}

}  // namespace

std::vector<ExperimentConfig> acceptance_campaigns(int criterion, bool inject) {
  std::vector<json> docs;
  switch (criterion) {
    case 4:
      docs.push_back({{"kind", "kernel-exhaustive"}, {"name", "c4-kernel-s7"}, {"s", 7}, {"max_faults", 2}});
      break;
    case 5:
      docs.push_back({{"kind", "broadcast"},
                      {"name", "c5-broadcast-L2-exhaustive"},
                      {"seed", 501},
                      {"topology", {{"kind", "hypercube"}, {"s", 7}, {"L", 2}}},
                      {"placements",
                       {{"mode", "exhaustive"}, {"max_faults", 6}, {"ceiling", 1000000}, {"on_ceiling", "truncate"}}}});
      docs.push_back({{"kind", "broadcast"},
                      {"name", "c5-broadcast-L2-sampled"},
                      {"seed", 502},
                      {"topology", {{"kind", "hypercube"}, {"s", 7}, {"L", 2}}},
                      {"placements", {{"mode", "sampled"}, {"count", 3000}, {"seed", 5021}, {"min_faults", 4},
                                      {"max_faults", 6}}}});
      docs.push_back({{"kind", "broadcast"},
                      {"name", "c5-broadcast-L3-sampled"},
                      {"seed", 503},
                      {"topology", {{"kind", "hypercube"}, {"s", 7}, {"L", 3}}},
                      {"placements", {{"mode", "sampled"}, {"count", 1000}, {"seed", 5031}, {"min_faults", 1},
                                      {"max_faults", 12}}}});
      break;
    case 6:
      for (int L : {1, 2}) {
        docs.push_back({{"kind", "agreement"},
                        {"name", fmt::format("c6-agreement-L{}", L)},
                        {"seed", 600 + L},
                        {"inputs", "both"},
                        {"topology", {{"kind", "hypercube"}, {"s", 7}, {"L", L}}},
                        {"placements", {{"mode", "sampled"}, {"count", 500}, {"seed", 6010 + L}, {"min_faults", 0},
                                        {"max_faults", L == 1 ? 2 : 6}}}});
      }
      break;
    case 7: {
      const json degrees = {15, 24, 24, 24, 24, 24, 24};
      for (std::size_t n : {256, 512}) {
        const std::size_t layers = static_cast<std::size_t>(std::log2(n / 16)) + 1;
        docs.push_back({{"kind", "securecomm"},
                        {"name", fmt::format("c7-securecomm-n{}", n)},
                        {"seed", 700 + n},
                        {"assignment", "round-robin"},
                        {"topology",
                         {{"kind", "expander"},
                          {"n", n},
                          {"s_0", 16},
                          {"theta", std::vector<double>(layers - 1, 0.5)},
                          {"d", json(std::vector<int>(degrees.begin(), degrees.begin() + layers))}}},
                        {"placements", {{"mode", "nested"}, {"count", 6}, {"seed", 7100 + n}, {"target", n / 8}}}});
      }
      json main = {{"kind", "securecomm"},
                   {"name", "c7-securecomm-n1024"},
                   {"seed", 701},
                   {"assignment", "round-robin"},
                   {"topology",
                    {{"kind", "expander"},
                     {"n", 1024},
                     {"s_0", 16},
                     {"theta", std::vector<double>(6, 0.5)},
                     {"d", degrees}}},
                   {"placements", {{"mode", "nested"}, {"count", 200}, {"seed", 7011}, {"target", 128}}}};
      docs.push_back(main);
      main["name"] = "c7-securecomm-n1024-sacrificed";
      main["seed"] = 702;
      main["placements"] = {{"mode", "nested"}, {"count", 24}, {"seed", 7021}, {"target", 128}};
      main["sacrifice"] = {{"blocks", 1}, {"extra_faults", 8}};
      docs.push_back(main);
      break;
    }
    default:
      break;
  }
  std::vector<ExperimentConfig> out;
  for (const auto& d : docs) out.push_back(parse_config(with_fault(d, inject)));
  return out;
}

std::string format_result(const CriterionResult& r) {
  return fmt::format("[{}] criterion {}: {} | measured: {} | required: {}", r.passed ? "PASS" : "FAIL", r.id, r.title,
                     r.measured, r.required);
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  const auto wanted = [&](int id) {
    return options.only.empty() || std::find(options.only.begin(), options.only.end(), id) != options.only.end();
  };
  std::vector<CriterionResult> results;
  const auto report = [&](CriterionResult r) {
    if (options.on_result) options.on_result(r);
    results.push_back(std::move(r));
  };
  const auto guarded = [](int id, const std::string& title, const std::function<CriterionResult()>& body) {
    try {
      return body();
    } catch (const std::exception& e) {
      return CriterionResult{id, title, false, std::string("error: ") + e.what(), "criterion runs to completion"};
    }
  };

  if (wanted(1)) report(guarded(1, "reliability headline", criterion1));
  if (wanted(2)) report(guarded(2, "small-tail bounds", criterion2));
  if (wanted(3)) report(guarded(3, "ratio-bound regime", criterion3));

  std::map<int, std::vector<Campaign>> kept;
  const std::vector<std::pair<int, CriterionResult (*)(const std::vector<Campaign>&, double)>> simulated{
      {4, criterion4}, {5, criterion5}, {6, criterion6}, {7, criterion7}};
  for (const auto& [id, evaluate] : simulated) {
    if (!wanted(id) && !wanted(8)) continue;
    auto r = guarded(id, "campaign " + std::to_string(id), [&, id = id, evaluate = evaluate] {
      const auto start = Clock::now();
      auto cs = run_all(id, options);
      auto result = evaluate(cs, seconds_since(start));
      kept[id] = std::move(cs);
      return result;
    });
    if (wanted(id)) report(std::move(r));
  }

  if (wanted(8)) {
    report(guarded(8, "determinism", [&] {
      auto r = criterion(8, "determinism of criteria 4-7 CSV bodies");
      const auto start = Clock::now();
      std::size_t compared = 0;
      std::vector<std::string> mismatched;
      for (int id : {4, 5, 6, 7}) {
        if (!kept.count(id)) {
          mismatched.push_back(fmt::format("criterion {} missing", id));
          continue;
        }
        for (const auto& c : kept[id]) {
          const auto again = run_experiment(c.config, options.rerun_workers);
          ++compared;
          if (again.header != c.result.header || again.body != c.result.body) mismatched.push_back(c.config.name);
        }
      }
      r.seconds = seconds_since(start);
      r.passed = mismatched.empty() && compared > 0;
      r.measured = fmt::format("{} campaigns rerun with {} workers (first run {}), {} differ{} ({:.1f} s)", compared,
                               options.rerun_workers, options.workers, mismatched.size(),
                               mismatched.empty() ? "" : ": " + fmt::format("{}", fmt::join(mismatched, ", ")),
                               r.seconds);
      r.required = "byte-identical CSV bodies for identical seeds across worker counts";
      return r;
    }));
  }
  return results;
}

}  // namespace msbft::campaign

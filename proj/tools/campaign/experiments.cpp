#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include <fmt/format.h>

#include "campaign.hpp"
#include "msbft/protocols.hpp"
#include "msbft/reliability.hpp"
#include "msbft/rng.hpp"
#include "msbft/scopes.hpp"
#include "msbft/topology.hpp"

namespace msbft::campaign {

namespace {

constexpr const char* kRunHeader =
    "experiment,placement,strategy,faults,detail,scopes_valid,agreement,validity,delivery,rounds,"
    "max_messages,max_merged,given_up,npc_fraction,digest,passed";

// One execution's numbers, kept next to its CSV line for the totals.
struct RowStats {
  bool passed = true;
  int rounds = 0;
  std::uint64_t max_messages = 0;
  std::uint64_t max_merged = 0;
  std::size_t given_up = 0;
  double npc_fraction = 1.0;
  std::size_t faults = 0;
};

struct Row {
  std::string line;
  RowStats stats;
};

const char* flag(bool b) { return b ? "1" : "0"; }

std::string join_ids(std::span<const NodeId> ids, const HypercubeTopology* topo = nullptr) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += topo ? topo->label(ids[i]) : std::to_string(ids[i]);
  }
  return out;
}

Row protocol_row(const std::string& experiment, std::size_t placement, const Strategy& strategy,
                 const std::string& faults, const std::string& detail, const ProtocolOutcome& o,
                 bool passed) {
  Row row;
  row.stats = {passed,       o.rounds,         o.metrics.max_messages(), o.metrics.max_merged(),
               o.given_up.size(), o.npc_fraction(), o.corrupt.size()};
  row.line = fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6f},{},{}", experiment, placement,
                         strategy.id(), faults, detail, flag(o.scopes_valid), flag(o.agreement),
                         flag(o.validity), flag(o.delivery), o.rounds, row.stats.max_messages,
                         row.stats.max_merged, o.given_up.size(), o.npc_fraction(),
                         hex_digest(o.digest), flag(passed));
  return row;
}

// Subsets of [0, universe) by ascending size, then lexicographically.
// `visit` returns false to stop.
template <class Visit>
void for_each_subset(std::size_t universe, std::size_t min_size, std::size_t max_size, Visit visit) {
  for (std::size_t k = min_size; k <= std::min(max_size, universe); ++k) {
    std::vector<NodeId> comb(k);
    for (std::size_t i = 0; i < k; ++i) comb[i] = static_cast<NodeId>(i);
    while (true) {
      if (!visit(comb)) return;
      std::size_t i = k;
      while (i > 0 && comb[i - 1] == universe - k + i - 1) --i;
      if (i == 0) break;
      ++comb[i - 1];
      for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
  }
}

struct PlacementSet {
  std::vector<std::vector<NodeId>> sets;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> sacrificed;  // per set
  bool complete = true;  // exhaustive mode: every valid placement included
  std::map<std::size_t, std::size_t> per_size;
};

std::size_t runs_per_placement(const ExperimentConfig& c) {
  const std::size_t inputs = c.kind == ExperimentKind::kAgreement && c.inputs == InputMode::kBoth ? 2 : 1;
  return (c.assignment == Assignment::kEveryStrategy ? c.strategies.size() : 1) * inputs;
}

PlacementSet make_placements(const ExperimentConfig& c, std::size_t universe, const ScopeList& scopes,
                             const std::vector<std::size_t>& layer_sizes = {},
                             const std::vector<std::uint32_t>& layer_bounds = {}) {
  PlacementSet out;
  const auto& p = c.placements;
  switch (p.mode) {
    case PlacementMode::kNone:
      out.sets.push_back({});
      break;
    case PlacementMode::kList:
      for (auto set : p.sets) {
        std::sort(set.begin(), set.end());
        out.sets.push_back(std::move(set));
      }
      break;
    case PlacementMode::kExhaustive: {
      const std::size_t per = std::max<std::size_t>(1, runs_per_placement(c));
      for_each_subset(universe, p.min_faults, p.max_faults, [&](const std::vector<NodeId>& f) {
        if (!validate_corruption(f, scopes).valid) return true;
        if ((out.sets.size() + 1) * per > p.ceiling) {
          if (!p.truncate_at_ceiling) {
            throw ConfigError("exhaustive placements exceed the ceiling of " + std::to_string(p.ceiling) +
                              " executions");
          }
          out.complete = false;
          return false;
        }
        out.sets.push_back(f);
        return true;
      });
      break;
    }
    case PlacementMode::kSampled:
      for (std::size_t k = 0; k < p.count; ++k) {
        const std::size_t span = p.max_faults - p.min_faults + 1;
        const std::size_t target = p.min_faults + k % span;
        out.sets.push_back(sample_corruption(scopes, universe, target, derive_seed(p.seed, k)).corrupt);
      }
      break;
    case PlacementMode::kNested: {
      for (std::size_t k = 0; k < p.count; ++k) {
        auto f = sample_nested_corruption(universe, layer_sizes, layer_bounds, p.target, derive_seed(p.seed, k));
        std::vector<std::pair<std::size_t, std::size_t>> lifted;
        if (c.sacrifice.blocks > 0) {
          const std::size_t s0 = layer_sizes.front();
          const std::size_t blocks = universe / s0;
          Rng rng(derive_seed(p.seed, k, 0x5ac));
          std::vector<std::size_t> order(blocks);
          for (std::size_t b = 0; b < blocks; ++b) order[b] = b;
          rng.shuffle(std::span<std::size_t>(order));
          order.resize(std::min(c.sacrifice.blocks, blocks));
          std::sort(order.begin(), order.end());
          for (auto b : order) {
            std::erase_if(f, [&](NodeId u) { return u / s0 == b; });
            std::vector<NodeId> members(s0);
            for (std::size_t i = 0; i < s0; ++i) members[i] = static_cast<NodeId>(b * s0 + i);
            rng.shuffle(std::span<NodeId>(members));
            f.insert(f.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(std::min(c.sacrifice.extra_faults, s0)));
            lifted.emplace_back(0, b);
          }
          std::sort(f.begin(), f.end());
        }
        out.sets.push_back(std::move(f));
        out.sacrificed.push_back(std::move(lifted));
      }
      break;
    }
  }
  for (const auto& f : out.sets) ++out.per_size[f.size()];
  return out;
}

struct Task {
  std::uint32_t placement;
  std::uint32_t strategy;
  std::uint32_t variant;  // input pattern, kernel choice, ...
};

std::vector<Task> make_tasks(const ExperimentConfig& c, std::size_t placements, std::size_t variants) {
  std::vector<Task> tasks;
  for (std::uint32_t p = 0; p < placements; ++p) {
    for (std::uint32_t v = 0; v < variants; ++v) {
      if (c.assignment == Assignment::kRoundRobin) {
        tasks.push_back({p, static_cast<std::uint32_t>(p % c.strategies.size()), v});
      } else {
        for (std::uint32_t s = 0; s < c.strategies.size(); ++s) tasks.push_back({p, s, v});
      }
    }
  }
  return tasks;
}

AdversarySpec adversary_for(const ExperimentConfig& c, const std::vector<NodeId>& corrupt, const Task& t) {
  AdversarySpec adv;
  adv.corrupt = corrupt;
  adv.default_strategy = c.strategies[t.strategy];
  adv.alphabet = c.alphabet;
  adv.seed = derive_seed(c.seed, t.placement, t.strategy, t.variant);
  return adv;
}

// Runs rows in chunks so a million-row campaign never holds every line at once.
void collect(std::size_t count, unsigned workers, const std::function<Row(std::size_t)>& make,
             CampaignResult& result, std::vector<RowStats>& stats) {
  constexpr std::size_t kChunk = 1 << 15;
  std::vector<Row> rows;
  for (std::size_t base = 0; base < count; base += kChunk) {
    const std::size_t len = std::min(kChunk, count - base);
    rows.assign(len, {});
    parallel_for(len, workers, [&](std::size_t i) { rows[i] = make(base + i); });
    for (auto& r : rows) {
      result.body += r.line;
      result.body += '\n';
      if (!r.stats.passed) ++result.failures;
      stats.push_back(r.stats);
    }
  }
  result.rows += count;
}

nlohmann::json summarize(const std::vector<RowStats>& stats) {
  nlohmann::json t;
  if (stats.empty()) return t;
  int min_rounds = std::numeric_limits<int>::max();
  int max_rounds = 0;
  std::uint64_t max_messages = 0;
  std::uint64_t max_merged = 0;
  std::size_t max_given_up = 0;
  double min_npc = 1.0;
  double sum_npc = 0.0;
  std::size_t max_faults = 0;
  for (const auto& s : stats) {
    min_rounds = std::min(min_rounds, s.rounds);
    max_rounds = std::max(max_rounds, s.rounds);
    max_messages = std::max(max_messages, s.max_messages);
    max_merged = std::max(max_merged, s.max_merged);
    max_given_up = std::max(max_given_up, s.given_up);
    min_npc = std::min(min_npc, s.npc_fraction);
    sum_npc += s.npc_fraction;
    max_faults = std::max(max_faults, s.faults);
  }
  t["min_rounds"] = min_rounds;
  t["max_rounds"] = max_rounds;
  t["max_messages_per_node"] = max_messages;
  t["max_merged_per_node"] = max_merged;
  t["max_given_up"] = max_given_up;
  t["min_npc_fraction"] = min_npc;
  t["mean_npc_fraction"] = sum_npc / static_cast<double>(stats.size());
  t["max_faults"] = max_faults;
  return t;
}

nlohmann::json coverage_json(const PlacementSet& ps) {
  nlohmann::json sizes = nlohmann::json::object();
  for (const auto& [k, v] : ps.per_size) sizes[std::to_string(k)] = v;
  return {{"placements", ps.sets.size()}, {"complete", ps.complete}, {"per_size", sizes}};
}

CampaignResult run_kernel_exhaustive(const ExperimentConfig& c, unsigned workers) {
  const int s = c.s;
  const int f = max_fault_bound(s);
  if (c.placements.max_faults > static_cast<std::size_t>(f)) {
    throw ConfigError("kernel placements above f=" + std::to_string(f) + " violate the kernel precondition");
  }
  PlacementSet ps;
  for_each_subset(static_cast<std::size_t>(s), 0, c.placements.max_faults, [&](const std::vector<NodeId>& set) {
    ps.sets.push_back(set);
    return true;
  });
  for (const auto& set : ps.sets) ++ps.per_size[set.size()];
  const std::size_t patterns = std::size_t{1} << s;
  const std::size_t variants = patterns * c.kernels.size();
  const auto tasks = make_tasks(c, ps.sets.size(), variants);
  if (tasks.size() > c.placements.ceiling) {
    throw ConfigError("kernel campaign exceeds the ceiling of " + std::to_string(c.placements.ceiling) +
                      " executions");
  }
  std::vector<NodeId> participants(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) participants[i] = static_cast<NodeId>(i);
  KernelConfig kc = KernelConfig::for_participants(participants);
  kc.fault = c.kernel_fault;

  CampaignResult result;
  result.header = kRunHeader;
  std::vector<RowStats> stats;
  collect(tasks.size(), workers, [&](std::size_t i) {
    const Task& t = tasks[i];
    const auto& corrupt = ps.sets[t.placement];
    const bool differential = c.kernels[t.variant / patterns] == "B";
    const std::size_t bits = t.variant % patterns;
    std::vector<Value> inputs(static_cast<std::size_t>(s));
    std::string pattern;
    for (int j = 0; j < s; ++j) {
      inputs[j] = (bits >> j) & 1 ? c.alphabet.high : c.alphabet.low;
      pattern += (bits >> j) & 1 ? '1' : '0';
    }
    const auto adv = adversary_for(c, corrupt, t);
    const auto out = differential ? run_differential_ba_Bs(kc, inputs, adv) : run_immediate_ba_As(kc, inputs, adv);

    std::map<Value, int> correct_inputs;
    for (int j = 0; j < s; ++j) {
      if (!std::binary_search(corrupt.begin(), corrupt.end(), static_cast<NodeId>(j))) ++correct_inputs[inputs[j]];
    }
    const bool agreement = out.agreement();
    bool validity = true;
    for (const auto& [v, count] : correct_inputs) {
      const bool triggers = differential ? count >= s - f
                                         : count == s - static_cast<int>(corrupt.size());
      if (triggers) validity = validity && out.common() == v;
    }
    std::size_t given_up = 0;
    if (const auto common = out.common(); !common) {
      std::map<Value, std::size_t> d;
      for (const auto& x : out.decisions) {
        if (x) ++d[*x];
      }
      std::size_t best = 0;
      std::size_t total = 0;
      for (const auto& [v, k] : d) {
        best = std::max(best, k);
        total += k;
      }
      given_up = total - best;
    }
    std::uint64_t max_messages = 0;
    for (auto m : out.messages) max_messages = std::max(max_messages, m);
    const bool passed = agreement && validity;
    Row row;
    row.stats = {passed, out.rounds, max_messages, max_messages, given_up, 1.0, corrupt.size()};
    row.line = fmt::format("{},{},{},{},{} inputs={},1,{},{},1,{},{},{},{},{:.6f},{},{}", c.name, t.placement,
                           c.strategies[t.strategy].id(), join_ids(corrupt), differential ? "B" : "A", pattern,
                           flag(agreement), flag(validity), out.rounds, max_messages, max_messages, given_up,
                           1.0, hex_digest(out.digest), flag(passed));
    return row;
  }, result, stats);
  result.totals = summarize(stats);
  result.totals["coverage"] = coverage_json(ps);
  result.totals["kernel_rounds"] = 3 * (f + 1);
  return result;
}

CampaignResult run_hypercube(const ExperimentConfig& c, unsigned workers) {
  const auto topo = build_hypercube(c.s, c.dims);
  const bool broadcast = c.kind == ExperimentKind::kBroadcast;
  if (broadcast && c.general >= topo.size()) throw ConfigError("general out of range");
  const DisseminationTree tree(topo, topo.clique_of(broadcast ? c.general : 0));
  const ScopeList scopes = broadcast ? scopes_for_broadcast(topo, tree) : scopes_for_agreement(topo);
  const auto ps = make_placements(c, topo.size(), scopes);
  const std::size_t variants = !broadcast && c.inputs == InputMode::kBoth ? 2 : 1;
  const auto tasks = make_tasks(c, ps.sets.size(), variants);
  ProtocolOptions options;
  options.kernel_fault = c.kernel_fault;

  CampaignResult result;
  result.header = kRunHeader;
  std::vector<RowStats> stats;
  collect(tasks.size(), workers, [&](std::size_t i) {
    const Task& t = tasks[i];
    const auto& corrupt = ps.sets[t.placement];
    auto adv = adversary_for(c, corrupt, t);
    adv.scopes = scopes;
    if (broadcast) {
      const auto o = multiscale_broadcast(topo, c.general, c.general_value, adv, options);
      const bool passed = o.agreement && o.validity && o.given_up.empty();
      return protocol_row(c.name, t.placement, c.strategies[t.strategy], join_ids(corrupt, &topo),
                          "general=" + topo.label(c.general), o, passed);
    }
    InputMode mode = c.inputs;
    if (mode == InputMode::kBoth) mode = t.variant == 0 ? InputMode::kUnanimous : InputMode::kMixed;
    std::vector<Value> inputs(topo.size(), c.input_value);
    std::string detail = "unanimous";
    if (mode == InputMode::kMixed) {
      detail = "mixed";
      for (NodeId u = 0; u < topo.size(); ++u) {
        inputs[u] = derive_seed(c.seed, t.placement, u, 0x1a) & 1 ? c.alphabet.high : c.alphabet.low;
      }
    } else if (mode == InputMode::kCliqueIndex) {
      detail = "clique-index";
      for (NodeId u = 0; u < topo.size(); ++u) inputs[u] = topo.clique_of(u);
    }
    const auto o = multiscale_agreement(topo, inputs, adv, options);
    return protocol_row(c.name, t.placement, c.strategies[t.strategy], join_ids(corrupt, &topo), detail, o,
                        o.agreement && o.validity);
  }, result, stats);
  result.totals = summarize(stats);
  result.totals["coverage"] = coverage_json(ps);
  result.totals["expected_rounds"] =
      broadcast ? broadcast_round_count(c.s, c.dims) : agreement_round_count(c.s, c.dims);
  result.totals["merged_constant"] = (c.s - 1) * (kernel_rounds(c.s) + 1);
  return result;
}

ExpanderStack stack_for(const ExperimentConfig& c) {
  ExpanderStackParams p;
  p.n = c.n;
  p.base_size = c.s0;
  p.theta = c.theta;
  p.degree = c.degree;
  p.seed = c.seed;
  return build_expander_stack(p);
}

CampaignResult run_securecomm(const ExperimentConfig& c, unsigned workers) {
  const auto stack = stack_for(c);
  std::vector<std::size_t> sizes;
  std::vector<std::uint32_t> bounds;
  const auto alpha = layered_resilience(stack, c.alpha);
  for (std::size_t l = 0; l < stack.layer_count(); ++l) {
    sizes.push_back(stack.block_size(l));
    bounds.push_back(scope_bound(alpha, stack.block_size(l)));
  }
  ScopeList base_scopes = scopes_for_expander(stack, alpha);
  const auto ps = make_placements(c, stack.size(), base_scopes, sizes, bounds);
  const auto tasks = make_tasks(c, ps.sets.size(), 1);

  CampaignResult result;
  result.header = kRunHeader;
  std::vector<RowStats> stats;
  collect(tasks.size(), workers, [&](std::size_t i) {
    const Task& t = tasks[i];
    const auto& corrupt = ps.sets[t.placement];
    SecureCommOptions options;
    options.base.kernel_fault = c.kernel_fault;
    options.alpha = c.alpha;
    options.allow_relayed = c.relayed;
    if (t.placement < ps.sacrificed.size()) options.sacrificed = ps.sacrificed[t.placement];
    const auto adv = adversary_for(c, corrupt, t);
    const auto o = secure_communicate(stack, adv, options);
    std::string detail = "npc_layers=";
    for (std::size_t l = 0; l < o.layer_npc.size(); ++l) {
      detail += (l ? "/" : "") + std::to_string(o.layer_npc[l].size());
    }
    for (const auto& [l, b] : options.sacrificed) detail += fmt::format(" sacrificed={}:{}", l, b);
    detail += fmt::format(" pairs={}/{}", o.pairs_checked - o.pairs_failed, o.pairs_checked);
    return protocol_row(c.name, t.placement, c.strategies[t.strategy], join_ids(corrupt), detail, o,
                        o.delivery && o.upward_only);
  }, result, stats);
  result.totals = summarize(stats);
  result.totals["coverage"] = coverage_json(ps);
  result.totals["expected_rounds"] = secure_comm_round_count(stack);
  result.totals["layers"] = stack.layer_count();
  nlohmann::json regen = nlohmann::json::array();
  for (const auto& r : stack.regenerations()) regen.push_back({r.layer, r.block, r.attempts});
  result.totals["regenerations"] = regen;
  return result;
}

std::string num(const Real& x) { return to_string(x, 10); }

CampaignResult run_reliability_sweep(const ExperimentConfig& c) {
  CampaignResult result;
  std::vector<std::string> lines;
  if (c.model == "broadcast") {
    result.header = "s,n,p,exact_nu,closed_form_nu,approx_nu,exact_le_closed_form,meets_target,passed";
    for (int s : c.sweep_s) {
      for (auto n : c.sweep_n) {
        for (double p : c.sweep_p) {
          const auto r = broadcast_reliability(s, n, to_real(p));
          const bool le = r.nu_exact <= r.nu_closed_form;
          const bool meets = !c.nu_target || r.nu_exact <= to_real(*c.nu_target);
          const bool passed = le && meets;
          result.failures += passed ? 0 : 1;
          lines.push_back(fmt::format("{},{},{},{},{},{},{},{},{}", s, n, p, num(r.nu_exact), num(r.nu_closed_form),
                                      num(r.nu_approx), flag(le), flag(meets), flag(passed)));
        }
      }
    }
  } else if (c.model == "tail") {
    result.header = "t,s,p,beta,exact,bound,approx,regime,exact_lt_bound,passed";
    for (int t : c.sweep_t) {
      for (int s : c.sweep_s) {
        if (t > s) continue;
        for (double p : c.sweep_p) {
          const auto r = tail_bound(t, s, to_real(p), to_real(c.beta));
          const bool lt = r.exact < r.bound;
          const bool passed = !r.bound_regime || lt;
          result.failures += passed ? 0 : 1;
          lines.push_back(fmt::format("{},{},{},{},{},{},{},{},{},{}", t, s, p, c.beta, num(r.exact), num(r.bound),
                                      num(r.approx), flag(r.bound_regime), flag(lt), flag(passed)));
        }
      }
    }
  } else {
    result.header = "n,s_0,p,tolerated,strict_nu,tolerant_nu,layer0_bound_nu,layer0_regime,tolerant_le_strict,passed";
    const auto sizes = expander_layer_sizes(c.n, c.s0, c.theta);
    const std::vector<std::uint64_t> sz(sizes.begin(), sizes.end());
    std::vector<std::vector<int>> tolerances{{}};
    if (!c.tolerated.empty()) tolerances.push_back(c.tolerated);
    for (double p : c.sweep_p) {
      for (const auto& tol : tolerances) {
        const auto r = securecomm_reliability(c.n, sz, to_real(p), tol, c.alpha);
        const bool le = r.nu_tolerant <= r.nu_strict;
        result.failures += le ? 0 : 1;
        std::string tol_text;
        for (std::size_t l = 0; l < tol.size(); ++l) tol_text += (l ? "/" : "") + std::to_string(tol[l]);
        lines.push_back(fmt::format("{},{},{},{},{},{},{},{},{},{}", c.n, c.s0, p, tol_text.empty() ? "0" : tol_text,
                                    num(r.nu_strict), num(r.nu_tolerant), num(r.layers.front().nu_bound),
                                    flag(r.layers.front().bound_regime), flag(le), flag(le)));
      }
    }
  }
  for (const auto& l : lines) result.body += l + '\n';
  result.rows = lines.size();
  result.totals = nlohmann::json::object();
  return result;
}

}  // namespace

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task) {
  workers = std::max(1u, workers);
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::min<std::size_t>(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          task(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

CampaignResult run_experiment(const ExperimentConfig& config, unsigned workers) {
  CampaignResult result;
  switch (config.kind) {
    case ExperimentKind::kKernelExhaustive:
      result = run_kernel_exhaustive(config, workers);
      break;
    case ExperimentKind::kBroadcast:
    case ExperimentKind::kAgreement:
      result = run_hypercube(config, workers);
      break;
    case ExperimentKind::kSecureComm:
      result = run_securecomm(config, workers);
      break;
    case ExperimentKind::kReliabilitySweep:
      result = run_reliability_sweep(config);
      break;
  }
  result.totals["rows"] = result.rows;
  result.totals["failures"] = result.failures;
  return result;
}

nlohmann::json export_topology(const ExperimentConfig& config) {
  if (config.n > 0) return topology_to_json(stack_for(config));
  return topology_to_json(build_hypercube(config.s, config.dims));
}

}  // namespace msbft::campaign

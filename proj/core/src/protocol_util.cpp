#include "protocol_util.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace msbft::detail {

bool check_scopes(const AdversarySpec& adv, const ScopeList& scopes) {
  const auto verdict = validate_corruption(adv.corrupt, scopes);
  if (!verdict.valid && adv.enforce_scopes) {
    std::string names;
    for (std::size_t i = 0; i < verdict.violated.size() && i < 4; ++i) {
      names += (i ? ", " : "") + scopes[verdict.violated[i]].name;
    }
    throw PreconditionError("corruption set violates scope bounds: " + names);
  }
  return verdict.valid;
}

ProtocolOutcome start_outcome(std::size_t n, const AdversarySpec& adv, Execution exec) {
  ProtocolOutcome out;
  out.n = n;
  out.corrupt = adv.corrupt;
  out.decisions.assign(n, std::nullopt);
  out.rounds = exec.metrics.rounds;
  out.metrics = std::move(exec.metrics);
  out.digest = exec.digest;
  out.trace = std::move(exec.trace);
  return out;
}

std::optional<Value> plurality(const std::vector<std::optional<Value>>& decisions) {
  std::map<Value, std::size_t> counts;
  for (const auto& d : decisions) {
    if (d) ++counts[*d];
  }
  std::optional<Value> best;
  std::size_t best_count = 0;
  for (const auto& [v, c] : counts) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

void finish_outcome(ProtocolOutcome& out) {
  std::optional<Value> first;
  out.agreement = true;
  out.npc.clear();
  out.given_up.clear();
  for (NodeId u = 0; u < out.n; ++u) {
    const auto& d = out.decisions[u];
    if (!d) continue;
    if (first && *first != *d) out.agreement = false;
    if (!first) first = d;
    if (out.target && *d == *out.target) {
      out.npc.push_back(u);
    } else {
      out.given_up.push_back(u);
    }
  }
}

}  // namespace msbft::detail

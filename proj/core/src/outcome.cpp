#include <algorithm>
#include <iterator>

#include "msbft/protocols.hpp"

namespace msbft {

std::vector<NodeId> ProtocolOutcome::z_set() const {
  std::vector<NodeId> out;
  std::set_union(corrupt.begin(), corrupt.end(), given_up.begin(), given_up.end(),
                 std::back_inserter(out));
  return out;
}

double ProtocolOutcome::npc_fraction() const {
  return n == 0 ? 0.0 : static_cast<double>(npc.size()) / static_cast<double>(n);
}

nlohmann::json outcome_to_json(const ProtocolOutcome& outcome) {
  nlohmann::json decisions = nlohmann::json::object();
  for (NodeId u = 0; u < outcome.n; ++u) {
    if (outcome.decisions[u]) decisions[std::to_string(u)] = *outcome.decisions[u];
  }
  nlohmann::json doc{
      {"n", outcome.n},
      {"corrupt", outcome.corrupt},
      {"decisions", decisions},
      {"npc", outcome.npc},
      {"given_up", outcome.given_up},
      {"verdicts",
       {{"scopes_valid", outcome.scopes_valid},
        {"agreement", outcome.agreement},
        {"validity", outcome.validity},
        {"delivery", outcome.delivery},
        {"upward_only", outcome.upward_only}}},
      {"metrics", metrics_summary(outcome.metrics)},
      {"digest", hex_digest(outcome.digest)},
  };
  if (outcome.target) doc["target"] = *outcome.target;
  if (!outcome.layer_npc.empty()) {
    doc["layer_npc"] = outcome.layer_npc;
    doc["pairs_checked"] = outcome.pairs_checked;
    doc["pairs_failed"] = outcome.pairs_failed;
  }
  return doc;
}

IncompletenessReport compute_incompleteness(std::span<const ProtocolOutcome> outcomes) {
  IncompletenessReport report;
  report.placements = outcomes.size();
  double npc_sum = 0.0;
  for (const auto& o : outcomes) {
    report.max_given_up = std::max(report.max_given_up, o.given_up.size());
    ++report.histogram[o.given_up.size()];
    npc_sum += o.npc_fraction();
  }
  if (!outcomes.empty()) report.mean_npc_fraction = npc_sum / static_cast<double>(outcomes.size());
  return report;
}

nlohmann::json incompleteness_to_json(const IncompletenessReport& report) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, v] : report.histogram) hist[std::to_string(k)] = v;
  return {{"placements", report.placements},
          {"x_A_lower_bound", report.max_given_up},
          {"given_up_histogram", hist},
          {"mean_npc_fraction", report.mean_npc_fraction}};
}

}  // namespace msbft

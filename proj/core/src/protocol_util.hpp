#pragma once

#include <optional>
#include <vector>

#include "msbft/protocols.hpp"

namespace msbft::detail {

// Validates adv.corrupt against `scopes`; throws PreconditionError on a
// violation unless the adversary tolerates it. Returns the verdict.
bool check_scopes(const AdversarySpec& adv, const ScopeList& scopes);

// Copies F, metrics and digest; decisions start empty.
ProtocolOutcome start_outcome(std::size_t n, const AdversarySpec& adv, Execution exec);

// Most frequent decided value, lowest on ties.
std::optional<Value> plurality(const std::vector<std::optional<Value>>& decisions);

// Fills agreement, npc and given_up from decisions and target.
void finish_outcome(ProtocolOutcome& out);

}  // namespace msbft::detail

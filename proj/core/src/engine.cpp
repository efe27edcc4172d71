#include "msbft/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "msbft/rng.hpp"

namespace msbft {

std::uint64_t Metrics::max_messages() const {
  return messages.empty() ? 0 : *std::max_element(messages.begin(), messages.end());
}

std::uint64_t Metrics::max_merged() const {
  return merged.empty() ? 0 : *std::max_element(merged.begin(), merged.end());
}

namespace {

std::uint64_t absorb(std::uint64_t h, const Message& m) {
  h = mix64(h ^ ((static_cast<std::uint64_t>(m.from) << 32) | m.to));
  h = mix64(h ^ ((static_cast<std::uint64_t>(m.instance) << 32) | m.tag));
  return mix64(h ^ static_cast<std::uint64_t>(m.value));
}

std::vector<Value> snapshot(const Program& program) {
  std::vector<Value> out(program.node_count());
  for (NodeId u = 0; u < out.size(); ++u) out[u] = program.state(u);
  return out;
}

}  // namespace

Execution run_sync_execution(Program& program, const AdversarySpec& adv,
                             const RunOptions& options) {
  const std::size_t n = program.node_count();
  const int rounds = program.round_count();
  if (rounds > options.round_budget) {
    throw BudgetExceeded("program needs " + std::to_string(rounds) + " rounds, budget is " +
                         std::to_string(options.round_budget));
  }

  std::vector<char> faulty(n, 0);
  std::vector<NodeId> coalition;
  for (auto u : adv.corrupt) {
    if (u >= n) throw PreconditionError("corrupted node " + std::to_string(u) + " out of range");
    faulty[u] = 1;
    coalition.push_back(u);
  }
  std::sort(coalition.begin(), coalition.end());

  Execution exec;
  auto& m = exec.metrics;
  m.rounds = rounds;
  m.messages.assign(n, 0);
  m.merged.assign(n, 0);
  m.peak_merged.assign(n, 0);
  m.peak_round.assign(n, 0);
  if (options.record_trace) exec.trace.push_back({0, snapshot(program), {}});

  std::vector<Message> outbox;
  std::vector<Message> scratch;
  std::vector<Message> inbox;
  std::vector<Message> previous;
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::uint64_t> stamp(n, 0);
  std::uint64_t token = 0;
  std::uint64_t digest = mix64(n ^ (static_cast<std::uint64_t>(rounds) << 32));

  for (int round = 1; round <= rounds; ++round) {
    outbox.clear();
    ScriptContext ctx{round, adv.seed, adv.alphabet, coalition, previous};
    for (NodeId u = 0; u < n; ++u) {
      scratch.clear();
      program.send(round, u, scratch);
      if (faulty[u]) {
        const auto& strategy = adv.strategy_for(u);
        std::size_t kept = 0;
        for (auto& msg : scratch) {
          if (auto v = apply_strategy(strategy, ctx, msg)) {
            msg.value = *v;
            scratch[kept++] = msg;
          }
        }
        scratch.resize(kept);
      }
      ++token;
      std::uint32_t distinct = 0;
      for (const auto& msg : scratch) {
        if (stamp[msg.to] != token) {
          stamp[msg.to] = token;
          ++distinct;
        }
      }
      m.messages[u] += scratch.size();
      m.merged[u] += distinct;
      m.peak_merged[u] = std::max(m.peak_merged[u], distinct);
      m.peak_round[u] = std::max(m.peak_round[u], static_cast<std::uint32_t>(scratch.size()));
      outbox.insert(outbox.end(), scratch.begin(), scratch.end());
    }
    m.total_messages += outbox.size();

    // Stable counting sort by receiver keeps sender order inside each inbox.
    std::fill(offsets.begin(), offsets.end(), 0);
    for (const auto& msg : outbox) ++offsets[msg.to + 1];
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    inbox.resize(outbox.size());
    {
      std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
      for (const auto& msg : outbox) inbox[cursor[msg.to]++] = msg;
    }
    digest = mix64(digest ^ static_cast<std::uint64_t>(round));
    for (const auto& msg : inbox) digest = absorb(digest, msg);

    for (NodeId u = 0; u < n; ++u) {
      program.receive(round, u,
                      std::span<const Message>(inbox.data() + offsets[u], offsets[u + 1] - offsets[u]));
    }
    if (options.record_trace) exec.trace.push_back({round, snapshot(program), inbox});
    previous.swap(inbox);
  }
  for (NodeId u = 0; u < n; ++u) digest = mix64(digest ^ static_cast<std::uint64_t>(program.state(u)));
  exec.digest = digest;
  return exec;
}

void write_trace_jsonl(std::ostream& out, const Execution& exec) {
  for (const auto& rt : exec.trace) {
    nlohmann::json row;
    row["round"] = rt.round;
    row["states"] = rt.states;
    auto& msgs = row["messages"] = nlohmann::json::array();
    for (const auto& msg : rt.messages) {
      msgs.push_back({msg.from, msg.to, msg.instance, msg.tag, msg.value});
    }
    out << row.dump() << '\n';
  }
}

nlohmann::json metrics_summary(const Metrics& metrics) {
  std::uint32_t peak_merged = 0;
  std::uint32_t peak_round = 0;
  for (auto v : metrics.peak_merged) peak_merged = std::max(peak_merged, v);
  for (auto v : metrics.peak_round) peak_round = std::max(peak_round, v);
  return {{"rounds", metrics.rounds},
          {"total_messages", metrics.total_messages},
          {"max_messages_per_node", metrics.max_messages()},
          {"max_merged_per_node", metrics.max_merged()},
          {"peak_merged_per_round", peak_merged},
          {"peak_messages_per_round", peak_round}};
}

std::string hex_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace msbft

#include "msbft/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msbft/rng.hpp"

namespace msbft {

std::string Strategy::id() const {
  switch (kind) {
    case StrategyKind::kSilent:
      return "silent";
    case StrategyKind::kConstant:
      return "constant-" + std::to_string(value);
    case StrategyKind::kEquivocate:
      return "equivocate";
    case StrategyKind::kRandom:
      return "random";
    case StrategyKind::kCopyFlip:
      return "copy-flip";
  }
  return "?";
}

Strategy Strategy::parse(const std::string& id) {
  if (id == "silent") return {StrategyKind::kSilent, 0};
  if (id == "equivocate") return {StrategyKind::kEquivocate, 0};
  if (id == "random") return {StrategyKind::kRandom, 0};
  if (id == "copy-flip") return {StrategyKind::kCopyFlip, 0};
  if (id.rfind("constant-", 0) == 0) {
    try {
      std::size_t used = 0;
      const auto text = id.substr(9);
      const Value v = std::stoll(text, &used);
      if (used == text.size()) return {StrategyKind::kConstant, v};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown strategy '" + id + "'");
}

std::vector<Strategy> standard_strategy_family(const Alphabet& alphabet) {
  return {{StrategyKind::kSilent, 0},          {StrategyKind::kConstant, alphabet.low},
          {StrategyKind::kConstant, alphabet.high}, {StrategyKind::kEquivocate, 0},
          {StrategyKind::kRandom, 0},          {StrategyKind::kCopyFlip, 0}};
}

std::optional<Value> apply_strategy(const Strategy& strategy, const ScriptContext& ctx,
                                    const Message& honest) {
  const auto& a = ctx.alphabet;
  switch (strategy.kind) {
    case StrategyKind::kSilent:
      return std::nullopt;
    case StrategyKind::kConstant:
      return strategy.value;
    case StrategyKind::kEquivocate:
      return honest.to % 2 == 0 ? a.low : a.high;
    case StrategyKind::kRandom: {
      const auto edge = (static_cast<std::uint64_t>(honest.from) << 32) | honest.to;
      const auto h = derive_seed(ctx.seed, static_cast<std::uint64_t>(ctx.round), edge,
                                 (static_cast<std::uint64_t>(honest.instance) << 32) | honest.tag);
      return (h & 1) ? a.high : a.low;
    }
    case StrategyKind::kCopyFlip:
      if (honest.value == a.low) return a.high;
      return a.low;
  }
  return std::nullopt;
}

std::uint32_t scope_bound(const ResilienceFunction& alpha, std::size_t size) {
  const double raw = alpha(size) * static_cast<double>(size);
  return static_cast<std::uint32_t>(std::floor(raw + 1e-9));
}

bool AdversarySpec::is_corrupt(NodeId node) const {
  return std::binary_search(corrupt.begin(), corrupt.end(), node);
}

void AdversarySpec::normalize() {
  std::sort(corrupt.begin(), corrupt.end());
  corrupt.erase(std::unique(corrupt.begin(), corrupt.end()), corrupt.end());
}

CorruptionVerdict validate_corruption(std::span<const NodeId> corrupt, const ScopeList& scopes) {
  CorruptionVerdict verdict;
  if (scopes.empty()) return verdict;
  NodeId top = 0;
  for (auto u : corrupt) top = std::max(top, u);
  for (const auto& s : scopes) {
    for (auto u : s.members) top = std::max(top, u);
  }
  std::vector<char> in_f(static_cast<std::size_t>(top) + 1, 0);
  for (auto u : corrupt) in_f[u] = 1;
  std::vector<char> excused(in_f.size(), 0);
  for (const auto& s : scopes) {
    if (s.sacrificed) {
      for (auto u : s.members) excused[u] = 1;
    }
  }
  for (std::size_t i = 0; i < scopes.size(); ++i) {
    const auto& s = scopes[i];
    if (s.sacrificed) continue;
    std::uint32_t count = 0;
    for (auto u : s.members) count += (in_f[u] && !excused[u]) ? 1 : 0;
    if (count > s.bound) {
      verdict.valid = false;
      verdict.violated.push_back(i);
    }
  }
  return verdict;
}

CorruptionSample sample_corruption(const ScopeList& scopes, std::size_t universe,
                                   std::size_t target, std::uint64_t seed,
                                   std::uint64_t max_attempts) {
  if (target > universe) {
    throw InfeasibleError("target " + std::to_string(target) + " exceeds " +
                          std::to_string(universe) + " nodes");
  }
  if (target == 0) return {{}, 1};
  // Pigeonhole: when every node lies in some bounded scope, each corrupted
  // node is charged to at least one bound.
  std::vector<char> covered(universe, 0);
  std::uint64_t bound_sum = 0;
  for (const auto& s : scopes) {
    if (s.sacrificed) continue;
    bound_sum += s.bound;
    for (auto u : s.members) {
      if (u < universe) covered[u] = 1;
    }
  }
  const bool full_cover = !scopes.empty() && std::all_of(covered.begin(), covered.end(),
                                                         [](char c) { return c != 0; });
  if (full_cover && target > bound_sum) {
    throw InfeasibleError("target " + std::to_string(target) + " exceeds the sum of scope bounds " +
                          std::to_string(bound_sum));
  }
  Rng rng(seed);
  std::vector<NodeId> pool(universe);
  for (std::uint64_t attempt = 1; attempt <= max_attempts; ++attempt) {
    std::iota(pool.begin(), pool.end(), NodeId{0});
    for (std::size_t i = 0; i < target; ++i) {
      std::swap(pool[i], pool[i + rng.below(universe - i)]);
    }
    std::vector<NodeId> draw(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(target));
    std::sort(draw.begin(), draw.end());
    if (validate_corruption(draw, scopes).valid) return {std::move(draw), attempt};
  }
  throw InfeasibleError("no valid corruption of size " + std::to_string(target) + " after " +
                        std::to_string(max_attempts) + " attempts");
}

namespace {

using Counts = std::vector<long double>;

Counts convolve(const Counts& a, const Counts& b, std::size_t cap) {
  Counts out(std::min(a.size() + b.size() - 1, cap + 1), 0.0L);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0L) continue;
    for (std::size_t j = 0; j < b.size() && i + j < out.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

// levels[l] describes blocks of layer l; one extra top level joins the top
// blocks into the universe with no bound of its own.
struct NestedModel {
  std::vector<std::size_t> block;      // block size per level
  std::vector<std::size_t> fanout;     // children per block (level >= 1)
  std::vector<Counts> counts;          // admissible subsets per size, one block
  std::vector<std::vector<Counts>> powers;  // powers[l][j] = counts[l-1]^{*j}
};

NestedModel build_model(std::size_t universe, std::span<const std::size_t> sizes,
                        std::span<const std::uint32_t> bounds, std::size_t cap) {
  if (sizes.empty() || sizes.size() != bounds.size()) {
    throw PreconditionError("nested sampler needs one bound per layer size");
  }
  NestedModel m;
  m.block.assign(sizes.begin(), sizes.end());
  if (universe % m.block.back() != 0) throw SizingError("universe not divisible by top block");
  m.block.push_back(universe);
  m.fanout.assign(m.block.size(), 1);
  for (std::size_t l = 1; l < m.block.size(); ++l) {
    if (m.block[l] % m.block[l - 1] != 0) throw SizingError("nested block sizes must divide");
    m.fanout[l] = m.block[l] / m.block[l - 1];
  }
  m.counts.resize(m.block.size());
  m.powers.resize(m.block.size());
  const std::size_t leaf_cap = std::min<std::size_t>({bounds[0], m.block[0], cap});
  m.counts[0].assign(leaf_cap + 1, 0.0L);
  long double binom = 1.0L;
  for (std::size_t k = 0; k <= leaf_cap; ++k) {
    m.counts[0][k] = binom;
    binom = binom * static_cast<long double>(m.block[0] - k) / static_cast<long double>(k + 1);
  }
  for (std::size_t l = 1; l < m.block.size(); ++l) {
    const std::size_t level_cap =
        l < bounds.size() ? std::min<std::size_t>(bounds[l], cap) : cap;
    auto& pw = m.powers[l];
    pw.push_back(Counts{1.0L});
    for (std::size_t j = 1; j <= m.fanout[l]; ++j) {
      pw.push_back(convolve(pw.back(), m.counts[l - 1], cap));
    }
    m.counts[l] = pw.back();
    if (m.counts[l].size() > level_cap + 1) m.counts[l].resize(level_cap + 1);
  }
  return m;
}

void sample_block(const NestedModel& m, std::size_t level, std::size_t start, std::size_t k,
                  Rng& rng, std::vector<NodeId>& out) {
  if (k == 0) return;
  if (level == 0) {
    std::vector<NodeId> pool(m.block[0]);
    std::iota(pool.begin(), pool.end(), static_cast<NodeId>(start));
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    return;
  }
  const auto& child = m.counts[level - 1];
  const auto& pw = m.powers[level];
  std::size_t remaining = k;
  for (std::size_t c = 0; c < m.fanout[level]; ++c) {
    const auto& rest = pw[m.fanout[level] - c - 1];
    const auto& all = pw[m.fanout[level] - c];
    const long double total = remaining < all.size() ? all[remaining] : 0.0L;
    long double u = static_cast<long double>(rng.unit()) * total;
    std::size_t pick = 0;
    bool chosen = false;
    std::size_t last_feasible = 0;
    for (std::size_t j = 0; j < child.size() && j <= remaining; ++j) {
      if (remaining - j >= rest.size()) continue;
      const long double w = child[j] * rest[remaining - j];
      if (w <= 0.0L) continue;
      last_feasible = j;
      if (u < w) {
        pick = j;
        chosen = true;
        break;
      }
      u -= w;
    }
    if (!chosen) pick = last_feasible;
    sample_block(m, level - 1, start + c * m.block[level - 1], pick, rng, out);
    remaining -= pick;
  }
}

}  // namespace

std::vector<long double> count_nested_corruptions(std::size_t universe,
                                                  std::span<const std::size_t> sizes,
                                                  std::span<const std::uint32_t> bounds) {
  auto m = build_model(universe, sizes, bounds, universe);
  auto out = m.counts.back();
  out.resize(universe + 1, 0.0L);
  return out;
}

std::vector<NodeId> sample_nested_corruption(std::size_t universe,
                                             std::span<const std::size_t> sizes,
                                             std::span<const std::uint32_t> bounds,
                                             std::size_t target, std::uint64_t seed) {
  auto m = build_model(universe, sizes, bounds, target);
  const auto& top = m.counts.back();
  if (target >= top.size() || top[target] <= 0.0L) {
    throw InfeasibleError("no nested corruption of size " + std::to_string(target) +
                          " satisfies the per-layer bounds");
  }
  Rng rng(seed);
  std::vector<NodeId> out;
  out.reserve(target);
  sample_block(m, m.block.size() - 1, 0, target, rng, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace msbft

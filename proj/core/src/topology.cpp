#include "msbft/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "msbft/rng.hpp"

namespace msbft {

namespace {

constexpr char kDigits[] = "0123456789abcdefghijklmnopqrstuvwxyz";

int digit_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'z') return c - 'a' + 10;
  if (c >= 'A' && c <= 'Z') return c - 'A' + 10;
  return -1;
}

bool connected(const std::vector<std::vector<std::uint32_t>>& adj) {
  if (adj.empty()) return true;
  std::vector<char> seen(adj.size(), 0);
  std::vector<std::uint32_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (auto w : adj[u]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  return reached == adj.size();
}

// One draw of the pairing model. Returns false when the remaining points
// admit no loop-free, multi-edge-free pairing.
bool draw_pairing(std::size_t nodes, int degree, Rng& rng,
                  std::vector<std::vector<std::uint32_t>>& adj) {
  adj.assign(nodes, {});
  if (degree == 0) return true;
  std::vector<char> has_edge(nodes * nodes, 0);
  std::vector<std::uint32_t> points;
  points.reserve(nodes * degree);
  for (std::uint32_t v = 0; v < nodes; ++v) {
    for (int k = 0; k < degree; ++k) points.push_back(v);
  }
  auto take = [&](std::size_t i, std::size_t j) {
    auto u = points[i];
    auto v = points[j];
    adj[u].push_back(v);
    adj[v].push_back(u);
    has_edge[u * nodes + v] = has_edge[v * nodes + u] = 1;
    if (i < j) std::swap(i, j);
    points[i] = points.back();
    points.pop_back();
    points[j] = points.back();
    points.pop_back();
  };
  while (!points.empty()) {
    bool paired = false;
    for (int tries = 0; tries < 64 && !paired; ++tries) {
      auto i = rng.below(points.size());
      auto j = rng.below(points.size());
      auto u = points[i];
      auto v = points[j];
      if (i != j && u != v && !has_edge[u * nodes + v]) {
        take(i, j);
        paired = true;
      }
    }
    if (paired) continue;
    std::vector<std::pair<std::size_t, std::size_t>> suitable;
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = i + 1; j < points.size(); ++j) {
        if (points[i] != points[j] && !has_edge[points[i] * nodes + points[j]]) {
          suitable.emplace_back(i, j);
        }
      }
    }
    if (suitable.empty()) return false;
    auto [i, j] = suitable[rng.below(suitable.size())];
    take(i, j);
  }
  return true;
}

}  // namespace

HypercubeTopology::HypercubeTopology(int base, int dims) : base_(base), dims_(dims), size_(1) {
  if (base < 4) {
    throw SizingError("hypercube base must be >= 4 (kernels need s >= 3f+1 with f >= 1), got " +
                      std::to_string(base));
  }
  if (dims < 1) throw SizingError("hypercube needs at least one dimension");
  power_.push_back(1);
  for (int k = 0; k < dims; ++k) {
    if (size_ > kMaxNodes / static_cast<std::size_t>(base)) {
      throw SizingError("hypercube " + std::to_string(base) + "^" + std::to_string(dims) +
                        " exceeds the node budget of " + std::to_string(kMaxNodes));
    }
    size_ *= static_cast<std::size_t>(base);
    power_.push_back(size_);
  }
}

void HypercubeTopology::check_node(NodeId node) const {
  if (node >= size_) throw PreconditionError("node id " + std::to_string(node) + " out of range");
}

void HypercubeTopology::check_dimension(int k) const {
  if (k < 1 || k > dims_) {
    throw PreconditionError("dimension index " + std::to_string(k) + " outside 1.." +
                            std::to_string(dims_));
  }
}

int HypercubeTopology::digit(NodeId node, int k) const {
  return static_cast<int>((node / power_[k - 1]) % base_);
}

NodeId HypercubeTopology::with_digit(NodeId node, int k, int value) const {
  const auto current = static_cast<std::int64_t>(digit(node, k));
  return static_cast<NodeId>(static_cast<std::int64_t>(node) +
                             (value - current) * static_cast<std::int64_t>(power_[k - 1]));
}

int HypercubeTopology::differing_dimension(NodeId a, NodeId b) const {
  int found = 0;
  for (int k = 1; k <= dims_; ++k) {
    if (digit(a, k) != digit(b, k)) {
      if (found != 0) return 0;
      found = k;
    }
  }
  return found;
}

bool HypercubeTopology::adjacent(NodeId a, NodeId b) const {
  return a < size_ && b < size_ && differing_dimension(a, b) != 0;
}

int HypercubeTopology::clique_differing_digit(NodeId a, NodeId b) const {
  const int k = differing_dimension(member(a, 0), member(b, 0));
  return k == 0 ? 0 : k - 1;
}

std::vector<NodeId> HypercubeTopology::dimension_neighbors(NodeId node, int k, bool closed) const {
  check_node(node);
  check_dimension(k);
  std::vector<NodeId> out;
  out.reserve(base_);
  const int own = digit(node, k);
  for (int v = 0; v < base_; ++v) {
    if (v != own) out.push_back(with_digit(node, k, v));
  }
  if (closed) out.push_back(node);
  return out;
}

std::vector<NodeId> HypercubeTopology::neighbors(NodeId node) const {
  std::vector<NodeId> out;
  out.reserve(degree());
  for (int k = 1; k <= dims_; ++k) {
    auto part = dimension_neighbors(node, k);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::string HypercubeTopology::label(NodeId node) const {
  check_node(node);
  if (base_ > 36) return std::to_string(node);
  std::string out(static_cast<std::size_t>(dims_), '0');
  for (int k = 1; k <= dims_; ++k) out[dims_ - k] = kDigits[digit(node, k)];
  return out;
}

std::string HypercubeTopology::clique_label(NodeId clique) const {
  return label(member(clique, 0)).substr(0, static_cast<std::size_t>(dims_ - 1));
}

NodeId HypercubeTopology::parse_label(std::string_view text) const {
  if (base_ > 36) throw PreconditionError("string labels need base <= 36");
  if (text.empty() || text.size() > static_cast<std::size_t>(dims_)) {
    throw PreconditionError("invalid label '" + std::string(text) + "'");
  }
  std::size_t id = 0;
  for (char c : text) {
    const int d = digit_value(c);
    if (d < 0 || d >= base_) throw PreconditionError("invalid label '" + std::string(text) + "'");
    id = id * base_ + d;
  }
  return static_cast<NodeId>(id);
}

HypercubeTopology build_hypercube(int base, int dims) { return HypercubeTopology(base, dims); }

ExpanderStack::ExpanderStack(ExpanderStackParams params, std::vector<ExpanderLayer> layers,
                             std::vector<RegenerationRecord> regenerations)
    : params_(std::move(params)),
      layers_(std::move(layers)),
      regenerations_(std::move(regenerations)) {}

std::vector<std::size_t> expander_layer_sizes(std::size_t n, std::size_t base_size,
                                              std::span<const double> theta) {
  if (base_size < 2) throw SizingError("expander base size must be >= 2");
  if (n == 0 || n % base_size != 0) {
    throw SizingError("n=" + std::to_string(n) + " is not divisible by s_0=" +
                      std::to_string(base_size));
  }
  std::vector<std::size_t> sizes{base_size};
  for (double t : theta) {
    if (!(t > 0.0 && t < 1.0)) throw SizingError("contraction factor must lie in (0,1)");
    const double factor = 1.0 / t;
    const double rounded = std::round(factor);
    if (std::abs(factor - rounded) > 1e-9 || rounded < 2.0) {
      throw SizingError("1/theta must be an integer >= 2, got " + std::to_string(factor));
    }
    const std::size_t next = sizes.back() * static_cast<std::size_t>(rounded);
    if (next > n || n % next != 0) {
      throw SizingError("layer size " + std::to_string(next) + " does not divide n=" +
                        std::to_string(n));
    }
    sizes.push_back(next);
  }
  if (sizes.back() != n) {
    throw SizingError("top layer size " + std::to_string(sizes.back()) + " differs from n=" +
                      std::to_string(n));
  }
  return sizes;
}

std::vector<std::vector<std::uint32_t>> random_regular_graph(std::size_t nodes, int degree,
                                                             std::uint64_t seed, int max_attempts,
                                                             int* attempts) {
  if (degree < 0 || static_cast<std::size_t>(degree) >= nodes) {
    throw SizingError("degree " + std::to_string(degree) + " infeasible on " +
                      std::to_string(nodes) + " nodes");
  }
  if ((static_cast<std::size_t>(degree) * nodes) % 2 != 0) {
    throw SizingError("d*s must be even for a d-regular graph (d=" + std::to_string(degree) +
                      ", s=" + std::to_string(nodes) + ")");
  }
  const int complete = static_cast<int>(nodes) - 1;
  const bool use_complement = degree > complete / 2;
  const int drawn_degree = use_complement ? complete - degree : degree;
  Rng rng(seed);
  std::vector<std::vector<std::uint32_t>> adj;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (!draw_pairing(nodes, drawn_degree, rng, adj)) continue;
    if (use_complement) {
      std::vector<std::vector<std::uint32_t>> comp(nodes);
      std::vector<char> mark(nodes, 0);
      for (std::uint32_t u = 0; u < nodes; ++u) {
        for (auto w : adj[u]) mark[w] = 1;
        for (std::uint32_t w = 0; w < nodes; ++w) {
          if (w != u && !mark[w]) comp[u].push_back(w);
        }
        for (auto w : adj[u]) mark[w] = 0;
      }
      adj = std::move(comp);
    }
    for (auto& row : adj) std::sort(row.begin(), row.end());
    if (connected(adj)) {
      if (attempts) *attempts = attempt;
      return adj;
    }
  }
  throw InfeasibleError("no connected " + std::to_string(degree) + "-regular graph on " +
                        std::to_string(nodes) + " nodes after " + std::to_string(max_attempts) +
                        " attempts");
}

ExpanderStack build_expander_stack(const ExpanderStackParams& params) {
  const auto sizes = expander_layer_sizes(params.n, params.base_size, params.theta);
  if (params.degree.size() != sizes.size()) {
    throw SizingError("expected " + std::to_string(sizes.size()) + " layer degrees, got " +
                      std::to_string(params.degree.size()));
  }
  std::vector<ExpanderLayer> layers;
  std::vector<RegenerationRecord> regenerations;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    ExpanderLayer layer;
    layer.block_size = sizes[l];
    layer.degree = params.degree[l];
    const auto d = static_cast<std::size_t>(layer.degree);
    layer.offsets.resize(params.n + 1);
    layer.adjacency.resize(params.n * d);
    for (std::size_t u = 0; u <= params.n; ++u) layer.offsets[u] = static_cast<std::uint32_t>(u * d);
    for (std::size_t block = 0; block < params.n / sizes[l]; ++block) {
      int attempts = 1;
      auto graph = random_regular_graph(sizes[l], layer.degree, derive_seed(params.seed, l, block),
                                        params.max_attempts, &attempts);
      if (attempts > 1) regenerations.push_back({l, block, attempts});
      const std::size_t start = block * sizes[l];
      for (std::size_t local = 0; local < sizes[l]; ++local) {
        auto* out = layer.adjacency.data() + (start + local) * d;
        for (std::size_t k = 0; k < d; ++k) out[k] = static_cast<NodeId>(start + graph[local][k]);
      }
    }
    layers.push_back(std::move(layer));
  }
  return ExpanderStack(params, std::move(layers), std::move(regenerations));
}

double second_eigenvalue(const std::vector<std::vector<std::uint32_t>>& adjacency) {
  const auto n = static_cast<Eigen::Index>(adjacency.size());
  if (n < 2) return 0.0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index u = 0; u < n; ++u) {
    for (auto w : adjacency[u]) a(u, w) = 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(n - 2);
}

std::vector<ExpansionReport> expansion_check(const ExpanderStack& stack, std::size_t layer,
                                             double threshold) {
  const auto& lay = stack.layer(layer);
  std::vector<ExpansionReport> out;
  for (std::size_t block = 0; block < lay.block_count(stack.size()); ++block) {
    const NodeId start = stack.block_start(layer, block);
    std::vector<std::vector<std::uint32_t>> local(lay.block_size);
    for (std::size_t i = 0; i < lay.block_size; ++i) {
      for (auto w : lay.neighbors(static_cast<NodeId>(start + i))) local[i].push_back(w - start);
    }
    ExpansionReport rep;
    rep.block = block;
    rep.ratio = lay.degree == 0 ? 0.0 : second_eigenvalue(local) / lay.degree;
    rep.flagged = rep.ratio > threshold;
    out.push_back(rep);
  }
  return out;
}

nlohmann::json topology_to_json(const HypercubeTopology& topo) {
  return {{"kind", "hypercube"}, {"s", topo.base()}, {"L", topo.dims()}, {"n", topo.size()}};
}

nlohmann::json topology_to_json(const ExpanderStack& stack) {
  const auto& p = stack.params();
  return {{"kind", "expander"}, {"n", p.n},         {"s_0", p.base_size},
          {"theta", p.theta},   {"d", p.degree},    {"seed", p.seed}};
}

Topology topology_from_json(const nlohmann::json& doc) {
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "hypercube") {
    HypercubeTopology topo(doc.at("s").get<int>(), doc.at("L").get<int>());
    if (doc.contains("n") && doc.at("n").get<std::size_t>() != topo.size()) {
      throw ConfigError("hypercube n does not equal s^L");
    }
    return topo;
  }
  if (kind == "expander") {
    ExpanderStackParams p;
    p.n = doc.at("n").get<std::size_t>();
    p.base_size = doc.at("s_0").get<std::size_t>();
    p.theta = doc.value("theta", std::vector<double>{});
    p.degree = doc.at("d").get<std::vector<int>>();
    p.seed = doc.value("seed", std::uint64_t{0});
    return build_expander_stack(p);
  }
  throw ConfigError("unknown topology kind '" + kind + "'");
}

}  // namespace msbft

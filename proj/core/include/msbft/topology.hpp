#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "msbft/types.hpp"

namespace msbft {

/// s-base hypercube with L dimensions.
///
/// Node ids are the base-s integers spelled by the labels. Digit k (1-based)
/// is counted from the right: dimension 1 is the rightmost digit and selects
/// the site inside an innermost clique, dimension L is the leftmost digit.
/// Two nodes are adjacent iff their labels differ in exactly one digit, so the
/// edge set is never materialised.
class HypercubeTopology {
 public:
  static constexpr std::size_t kMaxNodes = std::size_t{1} << 24;

  HypercubeTopology(int base, int dims);

  int base() const { return base_; }
  int dims() const { return dims_; }
  std::size_t size() const { return size_; }
  std::size_t degree() const { return static_cast<std::size_t>(base_ - 1) * dims_; }

  int digit(NodeId node, int k) const;
  NodeId with_digit(NodeId node, int k, int value) const;
  bool adjacent(NodeId a, NodeId b) const;
  // Index of the single differing digit of two adjacent nodes, 0 otherwise.
  int differing_dimension(NodeId a, NodeId b) const;

  std::vector<NodeId> dimension_neighbors(NodeId node, int k, bool closed = false) const;
  std::vector<NodeId> neighbors(NodeId node) const;

  // Innermost cliques are numbered by the leftmost L-1 digits, i.e. node / s.
  std::size_t clique_count() const { return size_ / base_; }
  NodeId clique_of(NodeId node) const { return node / base_; }
  int site_of(NodeId node) const { return static_cast<int>(node % base_); }
  NodeId member(NodeId clique, int site) const { return clique * base_ + site; }

  // Clique digit j (1-based, 1..L-1) is node digit j+1.
  int clique_digit(NodeId clique, int j) const { return digit(member(clique, 0), j + 1); }
  NodeId clique_with_digit(NodeId clique, int j, int value) const {
    return clique_of(with_digit(member(clique, 0), j + 1, value));
  }
  // Adjacent cliques differ in exactly one clique digit; returns that digit or 0.
  int clique_differing_digit(NodeId a, NodeId b) const;

  std::string label(NodeId node) const;
  std::string clique_label(NodeId clique) const;
  NodeId parse_label(std::string_view text) const;

 private:
  void check_node(NodeId node) const;
  void check_dimension(int k) const;

  int base_;
  int dims_;
  std::size_t size_;
  std::vector<std::size_t> power_;  // power_[k] = s^k
};

HypercubeTopology build_hypercube(int base, int dims);

/// One logical layer of the multi-layer expander. Blocks are contiguous id
/// ranges [r*block_size, (r+1)*block_size), which makes the partitions of
/// consecutive layers nested by construction.
struct ExpanderLayer {
  std::size_t block_size = 0;
  int degree = 0;
  std::vector<std::uint32_t> offsets;  // CSR over all n nodes
  std::vector<NodeId> adjacency;

  std::size_t block_count(std::size_t n) const { return n / block_size; }
  std::span<const NodeId> neighbors(NodeId u) const {
    return {adjacency.data() + offsets[u], adjacency.data() + offsets[u + 1]};
  }
};

struct RegenerationRecord {
  std::size_t layer = 0;
  std::size_t block = 0;
  int attempts = 0;  // graphs drawn before a connected one was accepted
};

struct ExpanderStackParams {
  std::size_t n = 0;
  std::size_t base_size = 0;
  std::vector<double> theta;  // contraction factor per layer 1..L-1
  std::vector<int> degree;    // degree per layer 0..L-1
  std::uint64_t seed = 0;
  int max_attempts = 200;
};

class ExpanderStack {
 public:
  ExpanderStack(ExpanderStackParams params, std::vector<ExpanderLayer> layers,
                std::vector<RegenerationRecord> regenerations);

  std::size_t size() const { return params_.n; }
  std::size_t layer_count() const { return layers_.size(); }
  const ExpanderLayer& layer(std::size_t l) const { return layers_.at(l); }
  std::size_t block_size(std::size_t l) const { return layers_.at(l).block_size; }
  std::size_t block_of(NodeId u, std::size_t l) const { return u / layers_[l].block_size; }
  NodeId block_start(std::size_t l, std::size_t block) const {
    return static_cast<NodeId>(block * layers_[l].block_size);
  }
  std::span<const NodeId> neighbors(std::size_t l, NodeId u) const {
    return layers_[l].neighbors(u);
  }
  bool layer_is_clique(std::size_t l) const {
    return layers_[l].degree + 1 == static_cast<int>(layers_[l].block_size);
  }

  const ExpanderStackParams& params() const { return params_; }
  const std::vector<RegenerationRecord>& regenerations() const { return regenerations_; }

 private:
  ExpanderStackParams params_;
  std::vector<ExpanderLayer> layers_;
  std::vector<RegenerationRecord> regenerations_;
};

ExpanderStack build_expander_stack(const ExpanderStackParams& params);

/// Layer sizes s_0..s_{L-1} implied by n, s_0 and theta; throws SizingError
/// when a size is not an integer multiple of the previous one or does not
/// divide n, or when the last size is not n.
std::vector<std::size_t> expander_layer_sizes(std::size_t n, std::size_t base_size,
                                              std::span<const double> theta);

/// Random connected d-regular simple graph on `nodes` vertices, as a sorted
/// adjacency list. Pairing model with rejection of loops and multi-edges; the
/// complement is drawn instead when d > (nodes-1)/2. `attempts` receives the
/// number of graphs drawn until one was connected.
std::vector<std::vector<std::uint32_t>> random_regular_graph(std::size_t nodes, int degree,
                                                             std::uint64_t seed, int max_attempts,
                                                             int* attempts = nullptr);

struct ExpansionReport {
  std::size_t block = 0;
  double ratio = 0.0;  // second largest adjacency eigenvalue / degree
  bool flagged = false;
};

/// lambda_2 / d for every block of layer l; blocks above `threshold` are flagged.
std::vector<ExpansionReport> expansion_check(const ExpanderStack& stack, std::size_t layer,
                                             double threshold = 0.9);

/// Second largest eigenvalue of a symmetric 0/1 adjacency matrix given as
/// adjacency lists over local indices.
double second_eigenvalue(const std::vector<std::vector<std::uint32_t>>& adjacency);

// JSON documents carry only generation parameters; adjacency is re-derived.
nlohmann::json topology_to_json(const HypercubeTopology& topo);
nlohmann::json topology_to_json(const ExpanderStack& stack);

using Topology = std::variant<HypercubeTopology, ExpanderStack>;
Topology topology_from_json(const nlohmann::json& doc);

}  // namespace msbft

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "msbft/adversary.hpp"
#include "msbft/kernels.hpp"

namespace msbft::campaign {

enum class ExperimentKind { kKernelExhaustive, kBroadcast, kAgreement, kSecureComm, kReliabilitySweep };

ExperimentKind parse_kind(const std::string& text);
std::string kind_name(ExperimentKind kind);

enum class PlacementMode { kNone, kExhaustive, kSampled, kNested, kList };

struct PlacementConfig {
  PlacementMode mode = PlacementMode::kNone;
  std::size_t count = 0;              // sampled / nested
  std::uint64_t seed = 0;
  std::size_t min_faults = 0;         // exhaustive and sampled sizes
  std::size_t max_faults = 0;
  std::size_t target = 0;             // nested: |F|
  std::uint64_t ceiling = 1000000;    // exhaustive: executions
  bool truncate_at_ceiling = false;   // else exceeding the ceiling is an error
  std::vector<std::vector<NodeId>> sets;  // list mode
};

enum class Assignment { kEveryStrategy, kRoundRobin };

struct SacrificeConfig {
  std::size_t blocks = 0;       // layer-0 blocks whose bound is lifted
  std::size_t extra_faults = 0; // faults placed in each of them
};

enum class InputMode { kUnanimous, kMixed, kBoth, kCliqueIndex };

struct ExperimentConfig {
  std::string name;
  ExperimentKind kind = ExperimentKind::kBroadcast;
  nlohmann::json source;  // the parsed document, echoed into the manifest

  // Hypercube
  int s = 7;
  int dims = 1;
  NodeId general = 0;
  Value general_value = 1;
  InputMode inputs = InputMode::kUnanimous;
  Value input_value = 1;

  // Expander stack
  std::size_t n = 0;
  std::size_t s0 = 0;
  std::vector<double> theta;
  std::vector<int> degree;
  std::vector<double> alpha;
  bool relayed = false;
  SacrificeConfig sacrifice;

  // Kernel exhaustive
  std::vector<std::string> kernels{"A", "B"};

  PlacementConfig placements;
  std::vector<Strategy> strategies;
  Assignment assignment = Assignment::kEveryStrategy;
  Alphabet alphabet;
  std::uint64_t seed = 0;
  KernelFault kernel_fault = KernelFault::kNone;

  // Reliability sweep
  std::string model = "broadcast";  // broadcast | tail | securecomm
  std::vector<int> sweep_s;
  std::vector<std::uint64_t> sweep_n;
  std::vector<double> sweep_p;
  std::vector<int> sweep_t;
  double beta = 2.0;
  std::vector<int> tolerated;
  std::optional<double> nu_target;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct CampaignResult {
  std::string header;
  std::string body;  // CSV rows, one per execution, in placement order
  std::size_t rows = 0;
  std::size_t failures = 0;  // rows with a failed contractual verdict
  nlohmann::json totals;
  bool passed() const { return failures == 0; }
};

/// Runs the campaign with `workers` threads. Rows are produced per index and
/// joined in index order, so the CSV body does not depend on `workers`.
CampaignResult run_experiment(const ExperimentConfig& config, unsigned workers = 1);

/// results.csv and manifest.json under `dir`; the manifest carries the only
/// timestamp.
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                   const CampaignResult& result);

/// Runs `task(i)` for i in [0, count) on `workers` threads; results[i] is
/// written by exactly one task.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task);

/// JSON topology document for topo-export.
nlohmann::json export_topology(const ExperimentConfig& config);

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string measured;
  std::string required;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  unsigned workers = 1;
  unsigned rerun_workers = 2;  // worker count of the determinism rerun
  bool inject_kernel_bug = false;
  std::vector<int> only;       // empty: every criterion
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const CriterionResult&)> on_result;  // called as each criterion finishes
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);
std::string format_result(const CriterionResult& r);

/// Built-in campaign configurations used by the acceptance suite.
std::vector<ExperimentConfig> acceptance_campaigns(int criterion, bool inject_kernel_bug);

}  // namespace msbft::campaign

#include <fstream>

#include "campaign.hpp"
#include "msbft/topology.hpp"

namespace msbft::campaign {

namespace {

template <class T>
T get_or(const nlohmann::json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

PlacementConfig parse_placements(const nlohmann::json& doc) {
  PlacementConfig p;
  const auto mode = get_or<std::string>(doc, "mode", "none");
  if (mode == "none") {
    p.mode = PlacementMode::kNone;
  } else if (mode == "exhaustive") {
    p.mode = PlacementMode::kExhaustive;
  } else if (mode == "sampled") {
    p.mode = PlacementMode::kSampled;
  } else if (mode == "nested") {
    p.mode = PlacementMode::kNested;
  } else if (mode == "list") {
    p.mode = PlacementMode::kList;
  } else {
    throw ConfigError("unknown placement mode '" + mode + "'");
  }
  p.count = get_or<std::size_t>(doc, "count", 0);
  p.seed = get_or<std::uint64_t>(doc, "seed", 0);
  p.min_faults = get_or<std::size_t>(doc, "min_faults", 0);
  p.max_faults = get_or<std::size_t>(doc, "max_faults", 0);
  p.target = get_or<std::size_t>(doc, "target", 0);
  p.ceiling = get_or<std::uint64_t>(doc, "ceiling", 1000000);
  const auto on_ceiling = get_or<std::string>(doc, "on_ceiling", "error");
  if (on_ceiling != "error" && on_ceiling != "truncate") {
    throw ConfigError("on_ceiling must be 'error' or 'truncate'");
  }
  p.truncate_at_ceiling = on_ceiling == "truncate";
  p.sets = get_or<std::vector<std::vector<NodeId>>>(doc, "sets", {});
  if (p.min_faults > p.max_faults && p.mode != PlacementMode::kNested && p.mode != PlacementMode::kList) {
    throw ConfigError("placements: min_faults exceeds max_faults");
  }
  return p;
}

InputMode parse_inputs(const std::string& text) {
  if (text == "unanimous") return InputMode::kUnanimous;
  if (text == "mixed") return InputMode::kMixed;
  if (text == "both") return InputMode::kBoth;
  if (text == "clique-index") return InputMode::kCliqueIndex;
  throw ConfigError("unknown input mode '" + text + "'");
}

}  // namespace

ExperimentKind parse_kind(const std::string& text) {
  if (text == "kernel-exhaustive") return ExperimentKind::kKernelExhaustive;
  if (text == "broadcast") return ExperimentKind::kBroadcast;
  if (text == "agreement") return ExperimentKind::kAgreement;
  if (text == "securecomm") return ExperimentKind::kSecureComm;
  if (text == "reliability-sweep") return ExperimentKind::kReliabilitySweep;
  throw ConfigError("unknown experiment kind '" + text + "'");
}

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kKernelExhaustive:
      return "kernel-exhaustive";
    case ExperimentKind::kBroadcast:
      return "broadcast";
    case ExperimentKind::kAgreement:
      return "agreement";
    case ExperimentKind::kSecureComm:
      return "securecomm";
    case ExperimentKind::kReliabilitySweep:
      return "reliability-sweep";
  }
  return "?";
}

ExperimentConfig parse_config(const nlohmann::json& doc) {
  try {
    ExperimentConfig c;
    c.source = doc;
    c.kind = parse_kind(doc.at("kind").get<std::string>());
    c.name = get_or<std::string>(doc, "name", kind_name(c.kind));
    if (!doc.contains("seed") && c.kind != ExperimentKind::kReliabilitySweep &&
        c.kind != ExperimentKind::kKernelExhaustive) {
      throw ConfigError("every campaign needs an explicit seed");
    }
    c.seed = get_or<std::uint64_t>(doc, "seed", 0);

    if (doc.contains("alphabet")) {
      const auto a = doc.at("alphabet").get<std::vector<Value>>();
      if (a.size() != 2 || a[0] == a[1]) throw ConfigError("alphabet needs two distinct values");
      c.alphabet = {a[0], a[1]};
    }
    if (doc.contains("strategies")) {
      for (const auto& id : doc.at("strategies").get<std::vector<std::string>>()) {
        c.strategies.push_back(Strategy::parse(id));
      }
    } else {
      c.strategies = standard_strategy_family(c.alphabet);
    }
    const auto assignment = get_or<std::string>(doc, "assignment", "every");
    if (assignment == "every") {
      c.assignment = Assignment::kEveryStrategy;
    } else if (assignment == "round-robin") {
      c.assignment = Assignment::kRoundRobin;
    } else {
      throw ConfigError("assignment must be 'every' or 'round-robin'");
    }
    const auto fault = get_or<std::string>(doc, "kernel_fault", "none");
    if (fault == "none") {
      c.kernel_fault = KernelFault::kNone;
    } else if (fault == "decide-input") {
      c.kernel_fault = KernelFault::kDecideInput;
    } else {
      throw ConfigError("unknown kernel_fault '" + fault + "'");
    }
    if (doc.contains("placements")) c.placements = parse_placements(doc.at("placements"));

    if (doc.contains("topology")) {
      const auto& t = doc.at("topology");
      const auto kind = t.at("kind").get<std::string>();
      if (kind == "hypercube") {
        c.s = t.at("s").get<int>();
        c.dims = t.at("L").get<int>();
      } else if (kind == "expander") {
        c.n = t.at("n").get<std::size_t>();
        c.s0 = t.at("s_0").get<std::size_t>();
        c.theta = get_or<std::vector<double>>(t, "theta", {});
        c.degree = t.at("d").get<std::vector<int>>();
      } else {
        throw ConfigError("unknown topology kind '" + kind + "'");
      }
    }
    c.general = get_or<NodeId>(doc, "general", 0);
    c.general_value = get_or<Value>(doc, "general_value", c.alphabet.high);
    c.inputs = parse_inputs(get_or<std::string>(doc, "inputs", "unanimous"));
    c.input_value = get_or<Value>(doc, "input_value", c.alphabet.high);
    c.alpha = get_or<std::vector<double>>(doc, "alpha", {});
    c.relayed = get_or<bool>(doc, "relayed", false);
    if (doc.contains("sacrifice")) {
      const auto& sc = doc.at("sacrifice");
      c.sacrifice.blocks = get_or<std::size_t>(sc, "blocks", 0);
      c.sacrifice.extra_faults = get_or<std::size_t>(sc, "extra_faults", 0);
    }
    c.kernels = get_or<std::vector<std::string>>(doc, "kernels", {"A", "B"});
    for (const auto& k : c.kernels) {
      if (k != "A" && k != "B") throw ConfigError("kernels must be 'A' or 'B'");
    }
    if (c.kind == ExperimentKind::kKernelExhaustive) {
      c.s = get_or<int>(doc, "s", 7);
      c.placements.mode = PlacementMode::kExhaustive;
      c.placements.max_faults = get_or<std::size_t>(doc, "max_faults", static_cast<std::size_t>(max_fault_bound(c.s)));
      c.placements.ceiling = get_or<std::uint64_t>(doc, "ceiling", 1000000);
    }

    if (c.kind == ExperimentKind::kReliabilitySweep) {
      c.model = get_or<std::string>(doc, "model", "broadcast");
      c.sweep_s = get_or<std::vector<int>>(doc, "s", {});
      c.sweep_n = get_or<std::vector<std::uint64_t>>(doc, "n", {});
      c.sweep_p = get_or<std::vector<double>>(doc, "p", {});
      c.sweep_t = get_or<std::vector<int>>(doc, "t", {});
      c.beta = get_or<double>(doc, "beta", 2.0);
      c.tolerated = get_or<std::vector<int>>(doc, "tolerated", {});
      if (doc.contains("nu_target")) c.nu_target = doc.at("nu_target").get<double>();
    }
    if (c.kind == ExperimentKind::kReliabilitySweep) {
      if (c.model != "broadcast" && c.model != "tail" && c.model != "securecomm") {
        throw ConfigError("unknown reliability model '" + c.model + "'");
      }
      if (c.sweep_p.empty()) throw ConfigError("reliability-sweep needs p");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

}  // namespace msbft::campaign

#include <chrono>
#include <ctime>
#include <fstream>

#include "campaign.hpp"
#include "msbft/types.hpp"

#ifndef MSBFT_VERSION
#define MSBFT_VERSION "unknown"
#endif

namespace msbft::campaign {

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                   const CampaignResult& result) {
  std::filesystem::create_directories(dir);
  write_file(dir / "results.csv", result.header + '\n' + result.body);
  nlohmann::json manifest;
  manifest["name"] = config.name;
  manifest["kind"] = kind_name(config.kind);
  manifest["version"] = MSBFT_VERSION;
  manifest["generated_at"] = utc_timestamp();
  manifest["config"] = config.source;
  manifest["seed"] = config.seed;
  manifest["rows"] = result.rows;
  manifest["failures"] = result.failures;
  manifest["passed"] = result.passed();
  manifest["totals"] = result.totals;
  write_file(dir / "manifest.json", manifest.dump(2) + '\n');
}

}  // namespace msbft::campaign

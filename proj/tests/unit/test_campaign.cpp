#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "campaign/campaign.hpp"

using namespace msbft;
using namespace msbft::campaign;
using nlohmann::json;

namespace {

json broadcast_doc() {
  return {{"kind", "broadcast"},
          {"name", "t"},
          {"seed", 4},
          {"topology", {{"kind", "hypercube"}, {"s", 7}, {"L", 2}}},
          {"placements", {{"mode", "sampled"}, {"count", 40}, {"seed", 2}, {"min_faults", 0}, {"max_faults", 6}}}};
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_config(json{{"kind", "broadcast"}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"kind", "bogus"}, {"seed", 1}}), ConfigError);
  auto doc = broadcast_doc();
  doc["placements"]["mode"] = "psychic";
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
  doc = broadcast_doc();
  doc["strategies"] = {"equivocate", "constant-5"};
  const auto c = parse_config(doc);
  CHECK(c.strategies.size() == 2);
  CHECK(c.placements.count == 40);
  CHECK(parse_config(json{{"kind", "kernel-exhaustive"}}).s == 7);
}

TEST_CASE("empty placement list gives zero rows and success") {
  auto doc = broadcast_doc();
  doc["placements"] = {{"mode", "list"}, {"sets", json::array()}};
  const auto r = run_experiment(parse_config(doc));
  CHECK(r.rows == 0);
  CHECK(r.body.empty());
  CHECK(r.passed());
}

TEST_CASE("worker count does not change the CSV body") {
  const auto c = parse_config(broadcast_doc());
  const auto a = run_experiment(c, 1);
  const auto b = run_experiment(c, 3);
  CHECK(a.rows == 40 * 6);
  CHECK(a.passed());
  CHECK(a.header == b.header);
  CHECK(a.body == b.body);
}

TEST_CASE("exhaustive ceiling") {
  auto doc = broadcast_doc();
  doc["placements"] = {{"mode", "exhaustive"}, {"max_faults", 3}, {"ceiling", 600}};
  CHECK_THROWS_AS(run_experiment(parse_config(doc)), ConfigError);
  doc["placements"]["on_ceiling"] = "truncate";
  const auto r = run_experiment(parse_config(doc));
  CHECK(r.rows == 600);
  CHECK_FALSE(r.totals["coverage"]["complete"].get<bool>());
  doc["placements"] = {{"mode", "exhaustive"}, {"max_faults", 1}};
  const auto full = run_experiment(parse_config(doc));
  CHECK(full.rows == 50 * 6);
  CHECK(full.totals["coverage"]["complete"].get<bool>());
}

TEST_CASE("injected kernel bug makes the kernel campaign fail") {
  json doc{{"kind", "kernel-exhaustive"}, {"max_faults", 1}, {"kernels", {"A"}}, {"strategies", {"silent"}}};
  CHECK(run_experiment(parse_config(doc)).passed());
  doc["kernel_fault"] = "decide-input";
  CHECK_FALSE(run_experiment(parse_config(doc)).passed());
}

TEST_CASE("reliability sweep rows") {
  const json doc{{"kind", "reliability-sweep"}, {"model", "broadcast"}, {"s", {16}}, {"n", {1000000}},
                 {"p", {1e-4}}, {"nu_target", 1e-9}};
  const auto r = run_experiment(parse_config(doc));
  CHECK(r.rows == 1);
  CHECK(r.passed());
  CHECK(r.body.rfind("16,1000000,0.0001,", 0) == 0);
}

TEST_CASE("outputs are written with the timestamp only in the manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "msbft_campaign_test";
  std::filesystem::remove_all(dir);
  const auto c = parse_config(broadcast_doc());
  const auto r = run_experiment(c);
  write_outputs(dir, c, r);
  std::ifstream csv(dir / "results.csv");
  std::string first;
  std::getline(csv, first);
  CHECK(first == r.header);
  std::ifstream man(dir / "manifest.json");
  const auto m = json::parse(man);
  CHECK(m["rows"] == r.rows);
  CHECK(m.contains("generated_at"));
  CHECK(m["config"] == c.source);
  std::filesystem::remove_all(dir);
}

TEST_CASE("acceptance campaigns are well formed") {
  for (int id : {4, 5, 6, 7}) CHECK_FALSE(acceptance_campaigns(id, false).empty());
  for (const auto& c : acceptance_campaigns(4, true)) CHECK(c.kernel_fault == KernelFault::kDecideInput);
}

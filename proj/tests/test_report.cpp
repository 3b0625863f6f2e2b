#include <doctest.h>

#include "lace/errors.hpp"
#include "lace/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lace;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("hashing and canonical dumps") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  const ModelSpec a = make_excited(1, 0.5), b = make_excited(1, 0.2);
  CHECK(config_hash(a) == config_hash(make_excited(1, 0.5)));
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
  const nlohmann::json j = {{"b", 1}, {"a", {1.5, 2}}};
  CHECK(dump_report(j) == "{\n  \"a\": [\n    1.5,\n    2\n  ],\n  \"b\": 1\n}\n");
}

TEST_CASE("atomic writes leave no temporary behind") {
  const auto dir = std::filesystem::temp_directory_path() / "lace_report_test";
  std::filesystem::remove_all(dir);
  write_atomic(dir / "x.json", "first");
  write_atomic(dir / "x.json", "second");
  CHECK(slurp(dir / "x.json") == "second");
  CHECK_FALSE(std::filesystem::exists(dir / "x.json.tmp"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("k-set parsing") {
  const auto ks = parse_k_set("0.5,0;0,0.5;1,1", 2);
  REQUIRE(ks.size() == 3);
  CHECK(ks[2][1] == 1.0);
  CHECK_THROWS_AS(parse_k_set("0.5", 2), ConfigError);
  CHECK_THROWS_AS(parse_k_set("a,b", 2), ConfigError);
  CHECK(default_k_set(2).size() == 4);
  CHECK(default_k_set(1).size() == 3);
}

TEST_CASE("reports carry role tags and pass their checks") {
  RunContext ctx;
  const ModelSpec m = make_excited(1, 0.5);
  for (const auto& r : {pi_report(m, 4, true, 6, ctx), verify_report(m, 6, 11, ctx), speed_report(m, 7, 6, ctx),
                        variance_report(m, 7, 6, ctx), induction_json(m, 6, 0.25, ctx), suite_report(m, ctx)}) {
    CAPTURE(r["report"].get<std::string>());
    CHECK(r["schema_version"] == kReportSchemaVersion);
    CHECK(r["config_hash"] == config_hash(m));
    CHECK_FALSE(r["tags"].empty());
    CHECK(r["pass"] == true);
    CHECK_FALSE(report_csv(r).empty());
  }
  const auto pi = pi_report(m, 3, false, 6, ctx);
  const double hand = 0.5 * (1 - 0.25) / 4;
  double plus = 0, minus = 0;
  for (const auto& e : pi["pi"]["3"]["entries"]) {
    if (e[0][0] == 1) plus = e[1];
    if (e[0][0] == -1) minus = e[1];
  }
  CHECK(std::abs(plus + hand) <= 1e-12);
  CHECK(std::abs(minus - hand) <= 1e-12);
  CHECK(report_csv(pi).find("3,1,-0.09375") != std::string::npos);
}

TEST_CASE("reports are identical across worker counts") {
  const ModelSpec m = make_excited(2, 0.2);
  const auto a = dump_report(suite_report(m, RunContext{1, 1e8}));
  const auto b = dump_report(suite_report(m, RunContext{3, 1e8}));
  CHECK(a == b);
  McConfig c;
  c.n = 100;
  c.samples = 2000;
  c.seed = 4;
  const auto x = dump_report(mc_report(m, c, 6, 8, RunContext{1, 1e8}));
  const auto y = dump_report(mc_report(m, c, 6, 8, RunContext{4, 1e8}));
  CHECK(x == y);
}

TEST_CASE("environment Monte Carlo reports are labelled diagnostic") {
  McConfig c;
  c.n = 50;
  c.samples = 500;
  const auto r = mc_report(make_two_point_environment(0.1), c, 4, 5, RunContext{});
  bool labelled = false;
  for (const auto& note : r["notes"]) labelled = labelled || note.get<std::string>().find("diagnostic only") != std::string::npos;
  CHECK(labelled);
}

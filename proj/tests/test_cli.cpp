#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

// Runs the CLI with stderr merged into the captured output.
Result run(const std::string& args) {
  const std::string cmd = std::string(LACE_BIN) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int raw = pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string cfg(const std::string& name) { return std::string(LACE_CONFIG_DIR) + "/" + name + ".yaml"; }

fs::path scratch(const std::string& sub) {
  const fs::path p = fs::path(LACE_SCRATCH_DIR) / sub;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage") {
  const auto r = run("");
  CHECK(r.status == 2);
  CHECK(r.out.find("Usage") != std::string::npos);
  CHECK(run("--help").status == 0);
  CHECK(run("frobnicate").status == 2);
  CHECK(run("verify --model " + cfg("erw1d") + " --bogus").status == 2);
  CHECK(run("verify").status == 2);
}

TEST_CASE("verify prints a passing residual report") {
  const auto dir = scratch("verify");
  const auto r = run("verify --model " + cfg("erw1d") + " --n 8 --out " + dir.string());
  CHECK(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["recurrence"]["max_x"].get<double>() <= 1e-10);
  CHECK(j["recurrence"]["max_k"].get<double>() <= 1e-10);
  CHECK(j["pass"] == true);
  CHECK(fs::exists(dir / "verify.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  for (const char* key : {"config_hash", "versions", "seed", "wall_time_seconds", "report_hash"})
    CHECK(manifest.contains(key));
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("pi output contains the lag-3 closed form") {
  const auto dir = scratch("pi");
  CHECK(run("pi --model " + cfg("erw1d") + " --m-max 3 --format csv --out " + dir.string()).status == 0);
  const std::string csv = slurp(dir / "pi.csv");
  CHECK(csv.find("3,-1,0.09375") != std::string::npos);
  CHECK(csv.find("3,1,-0.09375") != std::string::npos);
  CHECK(run("pi --model " + cfg("erw1d") + " --m-max 4 --direct --out " + dir.string()).status == 0);
}

TEST_CASE("config and resource errors") {
  const auto dir = scratch("errors");
  std::ofstream(dir / "bad.yaml") << "name: x\nvariant: excited\ndim: 1\nbeta: 3\n";
  auto r = run("all --model " + (dir / "bad.yaml").string() + " --out " + dir.string());
  CHECK(r.status == 2);
  CHECK(r.out.find("bad.yaml:4:") != std::string::npos);
  std::ofstream(dir / "broken.yaml") << "name: x\nvariant: [excited\n";
  r = run("all --model " + (dir / "broken.yaml").string());
  CHECK(r.status == 2);
  CHECK(r.out.find("broken.yaml:") != std::string::npos);
  r = run("enumerate --model " + cfg("erw2d") + " --n 14 --out " + dir.string());
  CHECK(r.status == 3);
  CHECK(r.out.find("budget") != std::string::npos);
  r = run("pi --model " + cfg("erw1d") + " --m-max 8 --direct --out " + dir.string());
  CHECK(r.status == 3);
  CHECK(r.out.find("n-cap") != std::string::npos);
}

TEST_CASE("failed checks exit with status 1") {
  // Short walks sit far from the truncated speed.
  const auto dir = scratch("mc");
  const auto r = run("mc --model " + cfg("erw1d") + " --n 200 --samples 2000 --out " + dir.string());
  CHECK(r.status == 1);
  CHECK(fs::exists(dir / "mc_running_mean.csv"));
  CHECK(fs::exists(dir / "mc_qq.csv"));
}

TEST_CASE("every subcommand runs and reruns are byte-identical") {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  const std::vector<std::string> cmds = {
      "enumerate --n 6", "pi --m-max 5", "verify --n 6", "speed", "variance", "induction --n 6",
      "mc --n 100 --samples 1000 --seed 3 --k '0.5;1'", "all"};
  for (const auto& c : cmds) {
    const std::string name = c.substr(0, c.find(' '));
    CAPTURE(c);
    CHECK(run(c + " --model " + cfg("oerrw1d") + " --format csv --threads 1 --quiet --out " + a.string()).status <= 1);
    CHECK(run(c + " --model " + cfg("oerrw1d") + " --format csv --threads 3 --quiet --out " + b.string()).status <= 1);
    CHECK(slurp(a / (name + ".json")) == slurp(b / (name + ".json")));
    CHECK(slurp(a / (name + ".csv")) == slurp(b / (name + ".csv")));
  }
}

TEST_CASE("the suite passes on every shipped config") {
  for (const char* name : {"erw1d", "erw1d_b02", "erw2d", "oerrw1d", "rwpre2d", "srw2d"}) {
    const auto dir = scratch(std::string("all_") + name);
    CAPTURE(name);
    CHECK(run(std::string("all --model ") + cfg(name) + " --out " + dir.string()).status == 0);
  }
}

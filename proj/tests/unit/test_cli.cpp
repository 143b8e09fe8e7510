#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "invlab/experiments.hpp"

using namespace invlab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "invlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "invlab_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kSmall = "d_grid = 10, 30\nseeds = 2\nn1 = 30\nn2 = 10\nkappa = 1\nmethods = erm, mean\nmax_iters = 100\n";

}  // namespace

TEST_CASE("sweep writes records and honors overrides") {
  const fs::path cfg = scratch("small.cfg"), out = scratch("small.csv");
  write_file(cfg, kSmall);
  fs::remove(out);
  const Run r = cli({"sweep", cfg.string(), "--out", out.string(), "--seeds", "1", "--theta2", "-0.5"});
  CHECK(r.code == 0);
  const auto recs = parse_records_csv(read_file(out));
  CHECK(recs.size() == 4);

  const fs::path js = scratch("small.json");
  CHECK(cli({"sweep", "--config", cfg.string(), "--out", js.string(), "--methods", "erm"}).code == 0);
  CHECK(parse_records_json(read_file(js)).size() == 4);
}

TEST_CASE("config errors exit with 1") {
  const fs::path cfg = scratch("bad.cfg");
  write_file(cfg, "seeds = 2\nfoo = 3\n");
  const Run r = cli({"sweep", cfg.string(), "--out", scratch("bad.csv").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find(":2:") != std::string::npos);
  CHECK(cli({"sweep", "--seeds", "0"}).code == 1);
  CHECK(cli({"sweep", "--methods", "svm"}).code == 1);
  CHECK(cli({"sweep", "--seeds"}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("partial failures exit with 2 and keep the other rows") {
  const fs::path out = scratch("partial.csv");
  const Run r = cli({"sweep", "--d-grid", "2", "--seeds", "2", "--n1", "30", "--n2", "10", "--sigma", "5",
                     "--methods", "erm,max_margin", "--out", out.string()});
  CHECK(r.code == 2);
  const auto recs = parse_records_csv(read_file(out));
  REQUIRE(recs.size() == 4);
  CHECK(recs[0].error.empty());
  CHECK(!recs[2].error.empty());
}

TEST_CASE("preset prints the parameter preset") {
  const Run r = cli({"preset", "--n1", "100", "--n2", "100", "--gamma", "0.01", "--epsilon", "0.05"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  const PresetParams p = theorem_preset(100, 100, 0.01, 0.05, load_calibration(default_constants_path()).preset);
  CHECK(j.at("r_c").get<double>() == p.r_c);
  CHECK(j.at("r_s").get<double>() == p.r_s);
  CHECK(j.at("d").get<long>() == p.d);
  CHECK(j.at("sigma").get<double>() == p.sigma);
  CHECK(cli({"preset", "--n1", "10", "--n2", "100"}).code == 1);
}

TEST_CASE("verify runs the bound-chain study") {
  const fs::path out = scratch("chain.json");
  const Run r = cli({"verify", "--instances", "5", "--max-n", "12", "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(read_file(out)).size() >= 5);
}

TEST_CASE("installed binary reports exit codes") {
  const std::string bin = INVLAB_CLI_PATH;
  const fs::path cfg = scratch("bin.cfg"), out = scratch("bin.csv");
  write_file(cfg, kSmall);
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status(bin + " sweep " + cfg.string() + " --out " + out.string()) == 0);
  const std::string first = read_file(out);
  CHECK(status(bin + " sweep " + cfg.string() + " --out " + out.string()) == 0);
  CHECK(read_file(out) == first);
  write_file(cfg, "d_grid = ten\n");
  CHECK(status(bin + " sweep " + cfg.string()) == 1);
}

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "mmsi/report.hpp"
#include "mmsi/simulator.hpp"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("mmsi_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

struct Outcome {
  int code;
  std::string out;
};

// Runs the command line tool with stdout and stderr captured together.
Outcome cli(const std::string& args) {
  const std::string cmd = std::string(MMSI_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

const std::string kConfigs = std::string(MMSI_SOURCE_DIR) + "/configs/";
const std::string kData = std::string(MMSI_SOURCE_DIR) + "/tests/data/";

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(cli("--help").code == 0);
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("tables --which a9").code == 1);
}

TEST_CASE("simulate writes one row per scenario and reruns byte for byte") {
  Scratch tmp;
  const Outcome a = cli("simulate " + kConfigs + "a3_grid.json --reps 20 --threads 2 --out " + (tmp / "a.csv"));
  REQUIRE(a.code == 0);
  const Outcome b = cli("simulate " + kConfigs + "a3_grid.json --reps 20 --threads 1 --out " + (tmp / "b.csv"));
  REQUIRE(b.code == 0);
  const std::string csv = slurp(tmp / "a.csv");
  CHECK(csv == slurp(tmp / "b.csv"));
  std::istringstream in(csv);
  const auto rows = mmsi::sim::read_csv(in);
  CHECK(rows.size() == 20);
  CHECK(rows[0].rates.size() == 7);

  const auto manifest = nlohmann::json::parse(slurp(tmp / "a.csv.manifest.json"));
  CHECK(manifest["subcommand"] == "simulate");
  CHECK(manifest["seed"] == 20190322);
  CHECK(manifest["outputs"].size() == 2);
  CHECK(manifest["outputs"][0] == tmp / "a.csv");
  CHECK(manifest.contains("version"));
  CHECK(manifest.contains("wall_seconds"));

  // The manifest alone reproduces the run.
  REQUIRE(cli("simulate " + (tmp / "a.csv.manifest.json") + " --out " + (tmp / "c.csv")).code == 0);
  CHECK(slurp(tmp / "c.csv") == csv);
}

TEST_CASE("simulate rejects bad requests") {
  Scratch tmp;
  CHECK(cli("simulate " + kConfigs + "a3_grid.json --reps 0 --out " + (tmp / "x.csv")).code == 1);
  CHECK(cli("simulate " + (tmp / "absent.json")).code == 1);
  const Outcome inc = cli("simulate " + kConfigs + "overlap.json --reps 5 --methods cellmeans --out " + (tmp / "x.csv"));
  CHECK(inc.code == 1);
  CHECK(inc.out.find("cellmeans") != std::string::npos);
  spit(tmp / "bad.json", R"({"N": [20], "prop_targ": 1.5})");
  CHECK(cli("simulate " + (tmp / "bad.json") + " --out " + (tmp / "x.csv")).code == 1);
  // Methods that do not apply to a design are skipped when not asked for.
  REQUIRE(cli("simulate " + kConfigs + "overlap.json --reps 3 --out " + (tmp / "o.csv")).code == 0);
  CHECK(slurp(tmp / "o.csv").find(",NA,") != std::string::npos);
}

TEST_CASE("analyze the bundled count table") {
  Scratch tmp;
  const std::string table = std::string(MMSI_DATA_DIR) + "/averroes_counts.csv";
  const Outcome r = cli("analyze " + table + " --out " + (tmp / "cs") + " --svg " + (tmp / "cs.svg"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Hemorrhag") != std::string::npos);
  const auto reports = mmsi::reports_from_json(slurp(tmp / "cs.json"));
  REQUIRE(reports.size() == 3);
  CHECK(reports[2].method == "mmm");
  CHECK(reports[2].hypotheses.size() == 9);
  CHECK(slurp(tmp / "cs.svg").find("<svg") == 0);
  CHECK(slurp(tmp / "cs.txt") == slurp(tmp / "cs.txt"));
  const auto manifest = nlohmann::json::parse(slurp(tmp / "cs.manifest.json"));
  CHECK(manifest["outputs"].size() == 4);
}

TEST_CASE("analyze subject data with per-model degrees of freedom") {
  Scratch tmp;
  const Outcome r = cli("analyze " + kData + "subjects.csv --models " + kData +
                        "models.json --df-mode dfind --reference placebo --out " + (tmp / "g"));
  REQUIRE(r.code == 0);
  const auto reports = mmsi::reports_from_json(slurp(tmp / "g.json"));
  const auto& h = reports[2].hypotheses;
  REQUIRE(h.size() == 3);
  // 40 subjects, 24 of them targeted: df = subset size - 2.
  CHECK(h[0].df == 38);
  CHECK(h[1].df == 22);
  CHECK(h[2].df == 14);
  CHECK(reports[2].df_mode == mmsi::DfMode::DfInd);
  CHECK(h[1].estimate > 0.0);
}

TEST_CASE("analyze reports schema and numerical failures with distinct exit codes") {
  Scratch tmp;
  const Outcome missing = cli("analyze " + kData + "subjects.csv --models " + kData + "models_missing.json --out " +
                              (tmp / "m"));
  CHECK(missing.code == 1);
  CHECK(missing.out.find("weight") != std::string::npos);

  spit(tmp / "flat.csv", "id,treatment,y\n1,a,1\n2,a,1\n3,b,1\n4,b,1\n");
  spit(tmp / "flat.json", R"([{"endpoint": "y"}])");
  CHECK(cli("analyze " + (tmp / "flat.csv") + " --models " + (tmp / "flat.json") + " --out " + (tmp / "f")).code == 2);

  spit(tmp / "badrow.csv", "id,treatment,y\n1,a,1\n2,a,oops\n3,b,1\n4,b,2\n");
  const Outcome bad = cli("analyze " + (tmp / "badrow.csv") + " --models " + (tmp / "flat.json") + " --out " + (tmp / "b"));
  CHECK(bad.code == 1);
  CHECK(bad.out.find("'y'") != std::string::npos);
}

TEST_CASE("tables flags low precision runs") {
  const Outcome r = cli("tables --which a3 --reps 30 --n 20 --prop 0.5 --threads 1");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("low precision") != std::string::npos);
  CHECK(r.out.find("mmm.dfind") != std::string::npos);
}

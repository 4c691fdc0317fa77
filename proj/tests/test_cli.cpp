#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

// Path to the freshly built command-line binary, injected by the build.
const char* cli_path() { return BOICR_CLI_PATH; }

int run(const std::string& args, const std::string& stdout_file = "") {
  std::string command = std::string("\"") + cli_path() + "\" " + args;
  if (!stdout_file.empty()) command += " > " + stdout_file;
  command += " 2>/dev/null";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  std::ostringstream out;
  out << file.rdbuf();
  return out.str();
}

size_t count_lines(const std::string& text) {
  size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("/tmp") / ("boicr_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen-data produces byte-identical datasets for the same seed") {
    TempDir dir("gen");
    const std::string a = dir.str() + "/a";
    const std::string b = dir.str() + "/b";
    CHECK(run("gen-data --train 4 --test 2 --seed 9 --out " + a) == 0);
    CHECK(run("gen-data --train 4 --test 2 --seed 9 --out " + b) == 0);

    CHECK(read_file(a + "/train.jsonl") == read_file(b + "/train.jsonl"));
    CHECK(read_file(a + "/test.jsonl") == read_file(b + "/test.jsonl"));
    CHECK(fs::exists(a + "/scene_spec.json"));
    CHECK(fs::exists(a + "/manifest.json"));
    const std::string manifest = read_file(a + "/manifest.json");
    CHECK(manifest.find("\"command\": \"gen-data\"") != std::string::npos);
    CHECK(manifest.find("run_fingerprint") != std::string::npos);

    const std::string c = dir.str() + "/c";
    CHECK(run("gen-data --train 4 --test 2 --seed 10 --out " + c) == 0);
    CHECK(read_file(a + "/train.jsonl") != read_file(c + "/train.jsonl"));
  }

  TEST_CASE("the output directory environment override wins over --out") {
    TempDir dir("envout");
    const std::string flagged = dir.str() + "/flagged";
    const std::string forced = dir.str() + "/forced";
    const std::string command = std::string("BOICR_OUT_DIR=") + forced + " \"" + cli_path() +
                                "\" gen-data --train 2 --test 1 --out " + flagged +
                                " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(fs::exists(forced + "/train.jsonl"));
    CHECK(!fs::exists(flagged + "/train.jsonl"));
  }

  TEST_CASE("required flags are enforced") {
    CHECK(run("gen-data --train 4 --test 2") != 0);  // --out missing
    CHECK(run("train --out /tmp/boicr_cli_nowhere") != 0);  // --data missing
    CHECK(run("definitely-not-a-command") != 0);
    CHECK(run("--version") == 0);
  }

  TEST_CASE("generate, train, evaluate: the full pipeline holds together") {
    TempDir dir("pipeline");
    const std::string data = dir.str() + "/data";
    const std::string fit = dir.str() + "/fit";
    const std::string report = dir.str() + "/report";

    REQUIRE(run("gen-data --train 6 --test 3 --seed 5 --out " + data) == 0);
    REQUIRE(run("train --data " + data + "/train.jsonl --out " + fit +
                " --steps 30 --batch 2 --k 2 --trunk-dim 16 --seed 3") == 0);

    const std::string log = read_file(fit + "/loss_log.csv");
    CHECK(count_lines(log) == 31);  // header + one row per step
    CHECK(log.rfind("step,lambda,lambda_ign,lr,L_class,L_agent_1,L_agent_2,L_distill,L_total\n",
                    0) == 0);
    CHECK(fs::exists(fit + "/checkpoint.txt"));
    CHECK(fs::exists(fit + "/manifest.json"));

    REQUIRE(run("eval --data " + data + "/test.jsonl --checkpoint " + fit +
                "/checkpoint.txt --out " + report) == 0);
    const std::string csv = read_file(report + "/report.csv");
    CHECK(csv.rfind("class,gt_count,tp,fp,ap,corloc\n", 0) == 0);
    CHECK(csv.find("mean,") != std::string::npos);
    CHECK(fs::exists(report + "/detections.jsonl"));

    // The alternate scoring mode and AP variant also run end to end.
    const std::string report2 = dir.str() + "/report2";
    CHECK(run("eval --data " + data + "/test.jsonl --checkpoint " + fit +
              "/checkpoint.txt --out " + report2 + " --heads agents --ap area") == 0);
    CHECK(run("eval --data " + data + "/test.jsonl --checkpoint " + fit +
              "/checkpoint.txt --out " + report2 + " --ap nonsense") != 0);
  }

  TEST_CASE("a zero-step training run still writes a loadable checkpoint") {
    TempDir dir("zerostep");
    const std::string data = dir.str() + "/data";
    const std::string fit = dir.str() + "/fit";
    REQUIRE(run("gen-data --train 2 --test 1 --out " + data) == 0);
    CHECK(run("train --data " + data + "/train.jsonl --out " + fit +
              " --steps 0 --trunk-dim 8") == 0);
    const std::string log = read_file(fit + "/loss_log.csv");
    CHECK(count_lines(log) == 1);  // header only
    const std::string checkpoint = read_file(fit + "/checkpoint.txt");
    CHECK(checkpoint.rfind("boicr-checkpoint v1\n", 0) == 0);
  }

  TEST_CASE("evaluating a ground-truth-free dataset is a quiet no-op") {
    TempDir dir("nogt");
    const std::string data = dir.str() + "/data";
    const std::string fit = dir.str() + "/fit";
    REQUIRE(run("gen-data --train 2 --test 1 --out " + data) == 0);
    REQUIRE(run("train --data " + data + "/train.jsonl --out " + fit +
                " --steps 1 --trunk-dim 8") == 0);

    std::ofstream empty(dir.path / "empty.jsonl");
    empty << "{\"format\":\"boicr-dataset\",\"version\":1,\"num_classes\":5,"
             "\"feature_dim\":32}\n";
    empty.close();
    const std::string report = dir.str() + "/report";
    CHECK(run("eval --data " + dir.str() + "/empty.jsonl --checkpoint " + fit +
              "/checkpoint.txt --out " + report) == 0);
    const std::string csv = read_file(report + "/report.csv");
    CHECK(csv.find("mean,,,,0.000000,0.000000") != std::string::npos);
  }

  TEST_CASE("missing input files fail with a nonzero exit") {
    TempDir dir("missing");
    CHECK(run("train --data /tmp/boicr_cli_missing/no.jsonl --out " + dir.str()) != 0);
    CHECK(run("eval --data /tmp/boicr_cli_missing/no.jsonl --checkpoint nope --out " +
              dir.str()) != 0);
  }

  TEST_CASE("the dumped schedule matches the closed form") {
    TempDir dir("sched");
    const std::string out = dir.str() + "/schedule.csv";
    REQUIRE(run("schedule-dump --steps 60000 --stride 900", out) == 0);
    std::ifstream file(out);
    std::string header;
    std::getline(file, header);
    CHECK(header == "step,lambda,lambda_ign");

    std::vector<int> steps;
    std::vector<double> lambdas, ignores;
    std::string line;
    while (std::getline(file, line)) {
      std::istringstream row(line);
      std::string cell;
      std::getline(row, cell, ',');
      steps.push_back(std::stoi(cell));
      std::getline(row, cell, ',');
      lambdas.push_back(std::stod(cell));
      std::getline(row, cell, ',');
      ignores.push_back(std::stod(cell));
    }
    REQUIRE(steps.size() > 3);
    CHECK(steps.front() == 0);
    CHECK(lambdas.front() == 0.0);
    CHECK(ignores.front() == doctest::Approx(0.51).epsilon(1e-9));
    CHECK(steps.back() == 60000);  // endpoint forced in even when the stride skips it
    CHECK(lambdas.back() == doctest::Approx(0.5).epsilon(1e-9));

    CHECK(steps[1] == 900);
    CHECK(lambdas[1] ==
          doctest::Approx(0.5 * std::log(10.0) / std::log(601.0)).epsilon(1e-9));

    for (size_t i = 1; i < lambdas.size(); ++i) CHECK(lambdas[i] > lambdas[i - 1]);
    for (size_t i = 0; i < lambdas.size(); ++i)
      if (ignores[i] > 0.0)
        CHECK(lambdas[i] + ignores[i] == doctest::Approx(0.51).epsilon(1e-9));
  }
}

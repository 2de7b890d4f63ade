// test_experiment.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gciva/cli.hpp"
#include "gciva/experiment.hpp"
#include "gciva/wav.hpp"
#include "support.hpp"

using namespace gciva;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gciva_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gc-iva");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config: round trip through the file syntax") {
  ExperimentConfig c;
  c.algorithm = Algorithm::kGcGrad;
  c.iterations = 42;
  c.doa = {30.5, 150.0};
  c.constrained_channels = {0, 1};
  c.sigma2 = 12.25;
  c.snr = {5.0, std::numeric_limits<double>::infinity()};
  c.doa_pairs = {{10.0, 170.0}};
  c.seeds = {3, 4, 5};
  c.t60 = {0.0, 0.25};
  c.algorithms = {Algorithm::kGcAux};
  c.reference_mic = 1;
  c.stft.window = WindowKind::kHann;
  const KeyValues kv = c.to_key_values();
  const ExperimentConfig back = ExperimentConfig::from_key_values(parse_key_values(format_key_values(kv)));
  CHECK(back.to_key_values() == kv);
  CHECK(back.constrained_channels == c.constrained_channels);
  CHECK(back.doa == c.doa);
  CHECK(back.reference_mic == 1);
  CHECK(back.resolved_iterations() == 42);
  CHECK(ExperimentConfig{}.resolved_iterations() == 100);
  CHECK(default_iterations(Algorithm::kGcGrad) == 350);
}

TEST_CASE("config: parsing and errors name the key") {
  const auto kv = parse_key_values("# comment\n algorithm = aux  # trailing\n\nsnr = 10, 20\n");
  CHECK(kv.at("algorithm") == "aux");
  CHECK(kv.at("snr") == "10, 20");
  auto message = [](const KeyValues& bad) {
    try {
      ExperimentConfig::from_key_values(bad);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({{"sigma_two", "1"}}).find("sigma_two") != std::string::npos);
  CHECK(message({{"sigma2", "abc"}}).find("sigma2") != std::string::npos);
  CHECK(message({{"sigma2", "-1"}}).find("sigma2") != std::string::npos);
  CHECK(message({{"doa_pairs", "45-135"}}).find("doa_pairs") != std::string::npos);
  CHECK(message({{"algorithm", "ica"}}).find("ica") != std::string::npos);
  CHECK_THROWS_AS(parse_key_values("no equals sign here\n"), ConfigError);
  CHECK_THROWS_AS(read_config_file("/nonexistent/gciva.cfg"), IoError);
}

TEST_CASE("cli: separate with zero iterations reproduces the input") {
  const fs::path dir = fresh_dir("identity");
  for (auto format : {SampleFormat::kPcm16, SampleFormat::kFloat32}) {
    Signal x = 0.2 * test::random_signal(2, 20000, 3);
    x = x.cwiseMax(-0.99).cwiseMin(0.99);
    const fs::path in = dir / "in.wav";
    write_wav(in.string(), x, 16000, format);
    const fs::path out = dir / "out";
    CHECK(run_cli({"separate", "--algorithm", "aux", "--iterations", "0", "--input", in.string(),
                   "--out", out.string()}) == kExitOk);
    CHECK(slurp(out / "separated.wav") == slurp(in));
    CHECK(fs::exists(out / "report.json"));
    CHECK(slurp(out / "cost_trace.csv").rfind("iteration,J_IVA,J_prior,J_total,normalized_J_IVA\n", 0) == 0);
  }
}

TEST_CASE("cli: simulate then separate with references") {
  const fs::path dir = fresh_dir("pipeline");
  CHECK(run_cli({"simulate", "--doa", "45,135", "--snr", "30", "--duration", "2", "--seed", "4",
                 "--out", (dir / "scene").string()}) == kExitOk);
  for (const char* f : {"mixture.wav", "image_1.wav", "image_2.wav", "metadata.json"})
    CHECK(fs::exists(dir / "scene" / f));
  const WavData mix = read_wav((dir / "scene" / "mixture.wav").string());
  CHECK(mix.samples.rows() == 2);
  CHECK(mix.samples.cols() == 32000);

  CHECK(run_cli({"separate", "--algorithm", "gc-aux", "--doa", "135", "--iterations", "30",
                 "--input", (dir / "scene" / "mixture.wav").string(), "--references",
                 (dir / "scene" / "image_1.wav").string() + "," +
                     (dir / "scene" / "image_2.wav").string(),
                 "--out", (dir / "sep").string()}) == kExitOk);
  const std::string report = slurp(dir / "sep" / "report.json");
  CHECK(report.find("\"ordering_success\": true") != std::string::npos);
  const std::string trace = slurp(dir / "sep" / "cost_trace.csv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 32);
}

TEST_CASE("cli: benchmark rows and determinism") {
  const fs::path dir = fresh_dir("bench");
  const std::vector<std::string> common = {"--snr", "10,20,30", "--doa-pairs", "45/135",
                                           "--seeds", "1", "--duration", "1.5", "--iterations",
                                           "3", "--algorithms", "aux,gc-aux,gc-grad",
                                           "--filter-len", "64"};
  for (const char* run : {"a", "b"}) {
    auto args = common;
    args.insert(args.begin(), "benchmark");
    args.push_back("--out");
    args.push_back((dir / run).string());
    REQUIRE(run_cli(args) == kExitOk);
  }
  const std::string csv = slurp(dir / "a" / "benchmark.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line.rfind("room,snr_db,algorithm,", 0) == 0);
  std::map<std::string, int> rows;
  while (std::getline(lines, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() == 10);
    ++rows[cols[2]];
    CHECK(cols[0] == "anechoic");
  }
  CHECK(rows.size() == 3);
  for (const auto& [alg, n] : rows) CHECK(n == 3);
  CHECK(slurp(dir / "b" / "benchmark.csv") == csv);
  CHECK(slurp(dir / "b" / "benchmark_runs.csv") == slurp(dir / "a" / "benchmark_runs.csv"));
}

TEST_CASE("cli: exit codes") {
  const fs::path dir = fresh_dir("codes");
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "algorithm = aux\nsigma_two = 3\n";
  }
  CHECK(run_cli({"separate", "--config", (dir / "bad.cfg").string()}) == kExitConfig);
  CHECK(run_cli({"separate", "--algorithm", "nope", "--input", "x.wav"}) == kExitConfig);
  CHECK(run_cli({"frobnicate"}) == kExitConfig);
  CHECK(run_cli({"separate", "--input", (dir / "missing.wav").string(), "--out",
                 (dir / "o").string()}) == kExitIo);
  CHECK(run_cli({"separate", "--config", (dir / "missing.cfg").string()}) == kExitIo);

  // A silent mixture makes the first unconstrained update singular.
  write_wav((dir / "silent.wav").string(), Signal::Zero(2, 8000), 16000);
  CHECK(run_cli({"separate", "--algorithm", "aux", "--iterations", "1", "--input",
                 (dir / "silent.wav").string(), "--out", (dir / "o").string()}) == kExitNumerical);
}

// cli.cpp

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

#include "gciva/cli.hpp"

#include <iostream>
#include <vector>

#include <CLI11.hpp>

namespace gciva {

int run_experiment(const std::string& command, const ExperimentConfig& config) {
  if (command == "simulate") return run_simulate(config);
  if (command == "separate") return run_separate(config);
  if (command == "benchmark") return run_benchmark(config);
  throw ConfigError("unknown command '" + command + "'");
}

namespace {

struct Flag {
  const char* name;
  const char* key;  // config key the flag overrides
  const char* help;
  std::string value;
};

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Geometrically constrained independent vector analysis"};
  app.require_subcommand(1);

  // Later entries win; the shared --doa flag is resolved per command below.
  std::vector<Flag> flags = {
      {"--algorithm", "algorithm", "aux, gc-aux or gc-grad", {}},
      {"--iterations", "iterations", "number of iterations L", {}},
      {"--sigma2", "sigma2", "prior variance", {}},
      {"--lambda-e", "lambda_e", "Tikhonov weight of the prior", {}},
      {"--doa", "doa", "DOA list in degrees (source DOAs for simulate)", {}},
      {"--constrained-channels", "constrained_channels", "1-based channel list", {}},
      {"--snr", "snr", "SNR list in dB", {}},
      {"--seed", "seed", "random seed", {}},
      {"--out", "out", "output directory", {}},
      {"--input", "input", "mixture WAV (separate)", {}},
      {"--references", "references", "per-source image WAVs (separate)", {}},
      {"--reference-mic", "reference_mic", "projection-back mic, 1-based; 0 = own mic", {}},
      {"--sources", "sources", "dry source WAVs (simulate)", {}},
      {"--seeds", "seeds", "seed list (benchmark)", {}},
      {"--doa-pairs", "doa_pairs", "DOA pairs like 45/135 (benchmark)", {}},
      {"--t60", "t60", "room-analog T60 list in seconds, 0 = anechoic", {}},
      {"--duration", "duration", "scene length in seconds", {}},
      {"--algorithms", "algorithms", "algorithm list (benchmark)", {}},
      {"--filter-len", "filter_len", "distortion filter length of the metrics", {}},
  };
  std::string config_path;
  std::string command;

  for (const char* name : {"simulate", "separate", "benchmark"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value config file");
    for (auto& f : flags) sub->add_option(f.name, f.value, f.help);
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    KeyValues kv;
    if (!config_path.empty()) kv = read_config_file(config_path);
    CLI::App* sub = app.get_subcommand(command);
    for (const auto& f : flags) {
      if (sub->count(f.name) == 0) continue;
      std::string key = f.key;
      if (key == "doa" && command == "simulate") key = "source_doas";
      kv[key] = f.value;
    }
    const ExperimentConfig config = ExperimentConfig::from_key_values(kv);
    return run_experiment(command, config);
  } catch (const ConfigError& e) {
    std::cerr << "gc-iva: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "gc-iva: invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "gc-iva: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "gc-iva: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "gc-iva: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace gciva

// gciva/experiment.hpp

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

// Experiment orchestration shared by the CLI and the acceptance suite.

#ifndef GCIVA_EXPERIMENT_HPP_
#define GCIVA_EXPERIMENT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gciva/eval.hpp"
#include "gciva/iva.hpp"
#include "gciva/scene.hpp"
#include "gciva/stft.hpp"

namespace gciva {

enum class Algorithm { kAux, kGcAux, kGcGrad };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

/// Default iteration count: 100 for the MM variants, 350 for the gradient one.
Index default_iterations(Algorithm a);

using KeyValues = std::map<std::string, std::string>;

/// Fully resolved experiment settings. Channel indices are zero-based here
/// and one-based in files and on the command line.
struct ExperimentConfig {
  Algorithm algorithm = Algorithm::kGcAux;
  Index iterations = -1;  // -1 selects default_iterations(algorithm)
  StftConfig stft;

  // Prior / constraint.
  std::vector<double> doa;  // one per constrained channel
  std::vector<Index> constrained_channels{0};
  double sigma2 = 40.0;
  double lambda_e = 1e-3;
  double stepsize = 0.05;
  double constraint_weight = 0.5;

  // Array and scene.
  double mic_spacing = 0.21;
  double speed_of_sound = 343.0;
  std::vector<std::string> sources;  // WAV paths; empty means synthetic
  std::vector<double> source_doas{45.0, 135.0};
  double duration = 5.0;
  std::uint64_t seed = 1;

  // Benchmark sweep.
  std::vector<double> snr{10.0, 20.0, 30.0};
  std::vector<std::pair<double, double>> doa_pairs{{45.0, 135.0}, {45.0, 90.0}, {20.0, 160.0}};
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> t60{0.0};
  std::vector<Algorithm> algorithms{Algorithm::kAux, Algorithm::kGcGrad, Algorithm::kGcAux};

  // Separation I/O.
  std::string input;
  std::vector<std::string> references;  // per-source image WAVs
  Index reference_mic = -1;             // -1: each output onto its own mic
  Index filter_len = 512;
  std::string out = "out";

  Index resolved_iterations() const {
    return iterations >= 0 ? iterations : default_iterations(algorithm);
  }

  ArrayGeometry geometry() const { return ArrayGeometry::pair(mic_spacing, speed_of_sound); }

  /// Every key with its value in config-file syntax.
  KeyValues to_key_values() const;

  /// Starts from the defaults and applies `kv`. Unknown keys and malformed
  /// values raise ConfigError naming the key.
  static ExperimentConfig from_key_values(const KeyValues& kv);
};

/// Parses `key = value` lines; '#' starts a comment.
KeyValues parse_key_values(const std::string& text);
KeyValues read_config_file(const std::string& path);
std::string format_key_values(const KeyValues& kv);

/// Settings for one algorithm run on one spectrogram.
struct SeparationSettings {
  Algorithm algorithm = Algorithm::kGcAux;
  Index iterations = 100;
  std::vector<Index> constrained_channels;
  /// Null direction per constrained channel for gc-aux, target direction
  /// for gc-grad. Ignored by aux.
  std::vector<double> doa;
  double sigma2 = 40.0;
  double lambda_e = 1e-3;
  double stepsize = 0.05;
  double constraint_weight = 0.5;
};

SeparationSettings separation_settings(const ExperimentConfig& config);

IvaResult<double> run_algorithm(const Spectrogram<double>& mix, const SeparationSettings& settings,
                                const ArrayGeometry& geometry,
                                const IterationObserver<double>& observer = {});

/// Back-projects the demixed spectra onto `ref_mic` (-1: own mic) and returns
/// the time signals trimmed to the mixture length.
std::vector<Eigen::VectorXd> resynthesize(const IvaResult<double>& result, Index ref_mic);

/// Speech-like sources and free-field (t60 = 0) or room-analog rendering of
/// one two-source scene.
struct SceneRequest {
  std::vector<double> doas{45.0, 135.0};
  double snr_db = 20.0;
  double t60 = 0.0;
  double duration = 5.0;
  std::uint64_t seed = 1;
};

struct RenderedScene {
  SceneSpec spec;
  Mixture mixture;
};

RenderedScene render_scene(const SceneRequest& request, const ArrayGeometry& geometry,
                           const StftConfig& stft);

/// Images of every source at one microphone.
std::vector<Eigen::VectorXd> images_at(const Mixture& mixture, Index mic);

/// Outcome of one algorithm on one scene for one intended channel ordering.
struct RunRecord {
  Algorithm algorithm = Algorithm::kAux;
  Index target = -1;  // source intended for channel 1, or -1
  std::vector<Index> intended;
  PermutationMatch match;
  bool ordering_success = false;  // match.assignment == intended
  std::vector<double> sir_db;     // per channel, under match.assignment
  std::vector<double> sdr_db;
  std::vector<double> sir_in_db;  // unprocessed mic-1 SIR of the matched source
  CostTrace<double> trace;
};

/// Runs `algorithm` on a rendered two-source scene the way the benchmark
/// does: aux once (scored against both orderings), the constrained variants
/// once per target source with the prior on channel 1.
std::vector<RunRecord> evaluate_scene(const RenderedScene& scene, Algorithm algorithm,
                                      const ExperimentConfig& config,
                                      const ReferenceProjector& projector,
                                      const std::vector<double>& input_sir_db);

/// CSV with columns iteration,J_IVA,J_prior,J_total,normalized_J_IVA.
std::string cost_trace_csv(const CostTrace<double>& trace);

int run_simulate(const ExperimentConfig& config);
int run_separate(const ExperimentConfig& config);
int run_benchmark(const ExperimentConfig& config);

}  // namespace gciva

#endif  // GCIVA_EXPERIMENT_HPP_

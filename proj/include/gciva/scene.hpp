// gciva/scene.hpp

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

#ifndef GCIVA_SCENE_HPP_
#define GCIVA_SCENE_HPP_

#include <cstdint>
#include <limits>
#include <vector>

#include "gciva/core.hpp"
#include "gciva/stft.hpp"

namespace gciva {

/// Microphone positions in meters. mics.front() is the reference microphone.
struct ArrayGeometry {
  std::vector<Eigen::Vector3d> mics;
  double speed_of_sound = 343.0;

  /// Two microphones on the x axis, the second one `spacing` meters from the
  /// reference.
  static ArrayGeometry pair(double spacing, double speed_of_sound = 343.0);

  /// Uniform linear array along x.
  static ArrayGeometry linear(Index count, double spacing, double speed_of_sound = 343.0);

  Index size() const { return static_cast<Index>(mics.size()); }

  /// ||r_m - r_1||.
  double distance_to_reference(Index m) const;

  void validate() const;
};

/// cos of an angle in degrees, exact at multiples of 90.
double cos_degrees(double degrees);

/// Free-field relative transfer function of a far-field source at `doa_deg`
/// (measured from the array axis), referenced to microphone 1:
///   [h]_m = exp(j 2 pi nu_f / c ||r_m - r_1|| cos(doa)).
CVector<double> steering_vector(Index f, double doa_deg, const ArrayGeometry& geometry,
                                const StftConfig& config);

/// Delays x by `delay` samples (may be negative or fractional) using a 63-tap
/// Blackman-windowed sinc. Samples outside the input are treated as zero and
/// the output keeps the input length.
Eigen::VectorXd fractional_delay(const Eigen::VectorXd& x, double delay);

/// Linear convolution truncated to the length of x.
Eigen::VectorXd convolve_truncated(const Eigen::VectorXd& x, const Eigen::VectorXd& taps);

struct SceneSpec {
  std::vector<Eigen::VectorXd> sources;
  std::vector<double> doas_deg;
  /// +infinity disables the noise branch.
  double snr_db = std::numeric_limits<double>::infinity();
  /// Optional FIR responses indexed [source][mic]. Empty means free field.
  std::vector<std::vector<Eigen::VectorXd>> room_responses;
  std::uint64_t seed = 0;
};

struct Mixture {
  Signal mixture;              // mics x samples
  std::vector<Signal> images;  // images[k]: source k as seen by every mic
  Signal noise;                // mics x samples, zero when snr is infinite
};

/// Renders a determined mixture: sum_k image_k + white Gaussian noise scaled
/// so that the mean noiseless channel power over the noise power equals
/// snr_db.
Mixture simulate_mixture(const SceneSpec& spec, const ArrayGeometry& geometry,
                         const StftConfig& config);

/// Power in dB of the noiseless part over the noise, averaged over channels.
double measured_snr_db(const Mixture& mixture);

/// Deterministic speech-like test signal: formant-filtered voiced/unvoiced
/// excitation under a syllabic on/off envelope, normalized to the given RMS.
Eigen::VectorXd synthetic_source(Index samples, double sample_rate, std::uint64_t seed,
                                 double rms = 0.1);

/// Room-analog responses [source][mic]: the free-field fractional-delay
/// direct path plus an exponentially decaying noise tail with the requested
/// T60. t60 = 0 yields the pure direct path.
std::vector<std::vector<Eigen::VectorXd>> synthetic_room_responses(
    const std::vector<double>& doas_deg, const ArrayGeometry& geometry, double sample_rate,
    double t60, std::uint64_t seed);

}  // namespace gciva

#endif  // GCIVA_SCENE_HPP_

// gciva/wav.hpp

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

#ifndef GCIVA_WAV_HPP_
#define GCIVA_WAV_HPP_

#include <string>

#include "gciva/core.hpp"

namespace gciva {

enum class SampleFormat { kPcm16, kFloat32 };

/// Audio samples in [-1, 1] (channels x samples) plus the file's format.
struct WavData {
  Signal samples;
  double sample_rate = 16000.0;
  SampleFormat format = SampleFormat::kPcm16;
};

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float samples.
/// Throws IoError on missing files and unsupported or truncated content.
WavData read_wav(const std::string& path);

/// PCM16 output is clipped to [-1, 1) and rounded to the nearest step.
void write_wav(const std::string& path, const Signal& samples, double sample_rate,
               SampleFormat format = SampleFormat::kPcm16);

}  // namespace gciva

#endif  // GCIVA_WAV_HPP_

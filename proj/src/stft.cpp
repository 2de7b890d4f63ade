// stft.cpp

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

#include "gciva/stft.hpp"

namespace gciva {

std::string to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::kHamming:
      return "hamming";
    case WindowKind::kHann:
      return "hann";
  }
  return "hamming";
}

WindowKind window_kind_from_string(const std::string& name) {
  if (name == "hamming") return WindowKind::kHamming;
  if (name == "hann") return WindowKind::kHann;
  throw InvalidInput("unknown window kind '" + name + "' (expected hamming or hann)");
}

}  // namespace gciva

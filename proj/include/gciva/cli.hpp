// gciva/cli.hpp

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

#ifndef GCIVA_CLI_HPP_
#define GCIVA_CLI_HPP_

#include <string>

#include "gciva/experiment.hpp"

namespace gciva {

enum ExitCode { kExitOk = 0, kExitConfig = 1, kExitIo = 2, kExitNumerical = 3 };

/// Dispatches "simulate", "separate" or "benchmark". Errors propagate.
int run_experiment(const std::string& command, const ExperimentConfig& config);

/// Entry point of the gc-iva tool. Maps errors onto ExitCode values and
/// reports them on stderr.
int cli_main(int argc, char** argv);

}  // namespace gciva

#endif  // GCIVA_CLI_HPP_

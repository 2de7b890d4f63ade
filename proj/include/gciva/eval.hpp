// gciva/eval.hpp

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

#ifndef GCIVA_EVAL_HPP_
#define GCIVA_EVAL_HPP_

#include <memory>
#include <vector>

#include "gciva/core.hpp"

namespace gciva {

inline constexpr double kMetricCapDb = 100.0;

/// Energies of the target / interference / artifact split of one estimate
/// with respect to one chosen target source.
struct TargetSplit {
  double target = 0;
  double interference = 0;
  double artifact = 0;
  double projection = 0;  // ||P_all e||^2
  double sir_db = 0;
  double sdr_db = 0;
};

struct Decomposition {
  std::vector<TargetSplit> per_source;
  Index best = 0;  // source with the highest SIR
};

/// Least-squares decomposition of estimates against a fixed set of reference
/// signals, each allowed a causal distortion filter of `filter_len` taps.
///
/// The Gram matrix of all delayed references is factorized once so many
/// estimates can be scored against the same references.
class ReferenceProjector {
 public:
  ReferenceProjector(std::vector<Eigen::VectorXd> references, Index filter_len = 512);
  ~ReferenceProjector();
  ReferenceProjector(ReferenceProjector&&) noexcept;
  ReferenceProjector& operator=(ReferenceProjector&&) noexcept;

  Index sources() const;
  Index length() const;
  Index filter_len() const;

  Decomposition decompose(const Eigen::VectorXd& estimate) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SirSdr {
  double sir_db = 0;
  double sdr_db = 0;
  Index best_source = 0;
};

/// BSS-eval style SIR/SDR of `estimate` against its best-matching reference.
SirSdr decompose_sir_sdr(const Eigen::VectorXd& estimate,
                         const std::vector<Eigen::VectorXd>& references, Index filter_len = 512);

struct PermutationMatch {
  std::vector<Index> assignment;  // assignment[channel] = source
  bool success = false;           // assignment is the identity
  Eigen::MatrixXd sir_db;         // sir_db(channel, source)
  Eigen::MatrixXd sdr_db;
};

/// Permutation maximizing the summed SIR of score(channel, assignment[channel]).
/// Exhaustive for up to 8 channels, greedy beyond.
std::vector<Index> best_assignment(const Eigen::MatrixXd& score);

PermutationMatch match_permutation(const std::vector<Eigen::VectorXd>& estimates,
                                   const std::vector<Eigen::VectorXd>& references,
                                   Index filter_len = 512);

PermutationMatch match_permutation(const std::vector<Eigen::VectorXd>& estimates,
                                   const ReferenceProjector& projector);

}  // namespace gciva

#endif  // GCIVA_EVAL_HPP_

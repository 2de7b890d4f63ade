// eval.cpp

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

#include "gciva/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/FFT>

namespace gciva {

namespace {

using Spectrum = std::vector<std::complex<double>>;

double ratio_db(double num, double den) {
  if (!(den > 0.0)) return num > 0.0 ? kMetricCapDb : -kMetricCapDb;
  if (!(num > 0.0)) return -kMetricCapDb;
  return std::clamp(10.0 * std::log10(num / den), -kMetricCapDb, kMetricCapDb);
}

}  // namespace

struct ReferenceProjector::Impl {
  std::vector<Eigen::VectorXd> refs;
  Index len = 0;
  Index taps = 0;
  Index nfft = 0;
  std::vector<Spectrum> spectra;
  Eigen::LDLT<Eigen::MatrixXd> full;
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> blocks;
  mutable Eigen::FFT<double> fft;

  Spectrum forward(const Eigen::VectorXd& x) const {
    std::vector<double> buf(static_cast<std::size_t>(nfft), 0.0);
    std::copy(x.data(), x.data() + x.size(), buf.begin());
    Spectrum out;
    fft.fwd(out, buf);
    return out;
  }

  std::vector<double> inverse(const Spectrum& x) const {
    std::vector<double> out;
    fft.inv(out, x);
    return out;
  }

  /// R(tau) = sum_u a(u) b(u + tau), stored circularly.
  std::vector<double> correlate(const Spectrum& a, const Spectrum& b) const {
    Spectrum p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) p[i] = std::conj(a[i]) * b[i];
    return inverse(p);
  }

  double at_lag(const std::vector<double>& r, Index tau) const {
    return r[static_cast<std::size_t>((tau % nfft + nfft) % nfft)];
  }

  /// sum_k (c_k * s_k) over the selected sources, length len + taps - 1.
  Eigen::VectorXd synthesize(const Eigen::VectorXd& coeffs, Index first, Index count) const {
    Spectrum acc(static_cast<std::size_t>(nfft), {0.0, 0.0});
    for (Index k = first; k < first + count; ++k) {
      const Spectrum ck = forward(coeffs.segment((k - first) * taps, taps));
      const Spectrum& sk = spectra[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += ck[i] * sk[i];
    }
    const std::vector<double> y = inverse(acc);
    Eigen::VectorXd out(len + taps - 1);
    for (Index t = 0; t < out.size(); ++t) out(t) = y[static_cast<std::size_t>(t)];
    return out;
  }
};

ReferenceProjector::ReferenceProjector(std::vector<Eigen::VectorXd> references, Index filter_len)
    : impl_(std::make_unique<Impl>()) {
  Impl& m = *impl_;
  if (references.empty()) throw InvalidInput("eval: no reference signals");
  if (filter_len < 1) throw InvalidInput("eval: filter_len must be >= 1");
  m.len = references.front().size();
  for (const auto& r : references) {
    if (r.size() != m.len) throw InvalidInput("eval: references have mismatched lengths");
    if (!r.allFinite()) throw InvalidInput("eval: non-finite reference samples");
  }
  if (m.len < 10 * filter_len)
    throw InvalidInput("eval: signals must be at least 10 * filter_len samples long");
  m.refs = std::move(references);
  m.taps = filter_len;
  m.nfft = 1;
  while (m.nfft < m.len + m.taps) m.nfft <<= 1;

  const auto k_count = static_cast<Index>(m.refs.size());
  for (const auto& r : m.refs) m.spectra.push_back(m.forward(r));

  const Index dim = k_count * m.taps;
  Eigen::MatrixXd gram(dim, dim);
  for (Index a = 0; a < k_count; ++a) {
    for (Index b = a; b < k_count; ++b) {
      const auto r = m.correlate(m.spectra[static_cast<std::size_t>(a)],
                                 m.spectra[static_cast<std::size_t>(b)]);
      for (Index d = 0; d < m.taps; ++d)
        for (Index e = 0; e < m.taps; ++e) {
          const double v = m.at_lag(r, d - e);
          gram(a * m.taps + d, b * m.taps + e) = v;
          gram(b * m.taps + e, a * m.taps + d) = v;
        }
    }
  }
  const double load = 1e-10 * gram.trace() / static_cast<double>(dim);
  if (!(load > 0.0)) throw DegenerateReference("eval: reference signals are all zero");
  gram.diagonal().array() += load;

  auto factor = [&](const Eigen::MatrixXd& g) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    const Eigen::VectorXd d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-9 * d.maxCoeff()))
      throw DegenerateReference("eval: reference signals are linearly dependent");
    return ldlt;
  };
  m.full = factor(gram);
  for (Index k = 0; k < k_count; ++k)
    m.blocks.push_back(factor(gram.block(k * m.taps, k * m.taps, m.taps, m.taps)));
}

ReferenceProjector::~ReferenceProjector() = default;
ReferenceProjector::ReferenceProjector(ReferenceProjector&&) noexcept = default;
ReferenceProjector& ReferenceProjector::operator=(ReferenceProjector&&) noexcept = default;

Index ReferenceProjector::sources() const { return static_cast<Index>(impl_->refs.size()); }
Index ReferenceProjector::length() const { return impl_->len; }
Index ReferenceProjector::filter_len() const { return impl_->taps; }

Decomposition ReferenceProjector::decompose(const Eigen::VectorXd& estimate) const {
  const Impl& m = *impl_;
  if (estimate.size() != m.len)
    throw InvalidInput("eval: estimate length " + std::to_string(estimate.size()) +
                       " differs from reference length " + std::to_string(m.len));
  if (!estimate.allFinite()) throw InvalidInput("eval: non-finite estimate samples");

  const Index k_count = sources();
  const Spectrum e_spec = m.forward(estimate);
  Eigen::VectorXd rhs(k_count * m.taps);
  for (Index k = 0; k < k_count; ++k) {
    const auto c = m.correlate(m.spectra[static_cast<std::size_t>(k)], e_spec);
    for (Index d = 0; d < m.taps; ++d) rhs(k * m.taps + d) = m.at_lag(c, d);
  }

  Eigen::VectorXd padded = Eigen::VectorXd::Zero(m.len + m.taps - 1);
  padded.head(m.len) = estimate;
  const Eigen::VectorXd all = m.synthesize(m.full.solve(rhs), 0, k_count);
  const double artifact = (padded - all).squaredNorm();

  Decomposition out;
  for (Index j = 0; j < k_count; ++j) {
    const Eigen::VectorXd coeffs = m.blocks[static_cast<std::size_t>(j)].solve(rhs.segment(j * m.taps, m.taps));
    const Eigen::VectorXd target = m.synthesize(coeffs, j, 1);
    TargetSplit s;
    s.target = target.squaredNorm();
    s.interference = (all - target).squaredNorm();
    s.artifact = artifact;
    s.projection = all.squaredNorm();
    s.sir_db = ratio_db(s.target, s.interference);
    s.sdr_db = ratio_db(s.target, (padded - target).squaredNorm());
    out.per_source.push_back(s);
  }
  out.best = 0;
  for (Index j = 1; j < k_count; ++j)
    if (out.per_source[static_cast<std::size_t>(j)].sir_db >
        out.per_source[static_cast<std::size_t>(out.best)].sir_db)
      out.best = j;
  return out;
}

SirSdr decompose_sir_sdr(const Eigen::VectorXd& estimate,
                         const std::vector<Eigen::VectorXd>& references, Index filter_len) {
  const ReferenceProjector projector(references, filter_len);
  const Decomposition d = projector.decompose(estimate);
  const auto& best = d.per_source[static_cast<std::size_t>(d.best)];
  return {best.sir_db, best.sdr_db, d.best};
}

std::vector<Index> best_assignment(const Eigen::MatrixXd& score) {
  const Index n = score.rows();
  if (score.cols() != n) throw InvalidInput("best_assignment: score matrix must be square");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  if (n <= 8) {
    std::vector<Index> best = perm;
    double best_score = -std::numeric_limits<double>::infinity();
    do {
      double s = 0;
      for (Index c = 0; c < n; ++c) s += score(c, perm[static_cast<std::size_t>(c)]);
      if (s > best_score) {
        best_score = s;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  // Greedy: repeatedly take the largest remaining entry.
  std::vector<bool> row_used(static_cast<std::size_t>(n)), col_used(static_cast<std::size_t>(n));
  for (Index step = 0; step < n; ++step) {
    Index br = -1, bc = -1;
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < n; ++c)
        if (!row_used[static_cast<std::size_t>(r)] && !col_used[static_cast<std::size_t>(c)] &&
            (br < 0 || score(r, c) > score(br, bc))) {
          br = r;
          bc = c;
        }
    perm[static_cast<std::size_t>(br)] = bc;
    row_used[static_cast<std::size_t>(br)] = col_used[static_cast<std::size_t>(bc)] = true;
  }
  return perm;
}

PermutationMatch match_permutation(const std::vector<Eigen::VectorXd>& estimates,
                                   const ReferenceProjector& projector) {
  const auto n = static_cast<Index>(estimates.size());
  if (n != projector.sources())
    throw InvalidInput("match_permutation: " + std::to_string(n) + " estimates for " +
                       std::to_string(projector.sources()) + " references");
  PermutationMatch out;
  out.sir_db.resize(n, n);
  out.sdr_db.resize(n, n);
  for (Index c = 0; c < n; ++c) {
    const Decomposition d = projector.decompose(estimates[static_cast<std::size_t>(c)]);
    for (Index s = 0; s < n; ++s) {
      out.sir_db(c, s) = d.per_source[static_cast<std::size_t>(s)].sir_db;
      out.sdr_db(c, s) = d.per_source[static_cast<std::size_t>(s)].sdr_db;
    }
  }
  out.assignment = best_assignment(out.sir_db);
  out.success = true;
  for (Index c = 0; c < n; ++c)
    if (out.assignment[static_cast<std::size_t>(c)] != c) out.success = false;
  return out;
}

PermutationMatch match_permutation(const std::vector<Eigen::VectorXd>& estimates,
                                   const std::vector<Eigen::VectorXd>& references,
                                   Index filter_len) {
  return match_permutation(estimates, ReferenceProjector(references, filter_len));
}

}  // namespace gciva

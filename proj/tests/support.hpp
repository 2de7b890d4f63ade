// support.hpp

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

// Random fixtures shared by the unit tests.

#ifndef GCIVA_TESTS_SUPPORT_HPP_
#define GCIVA_TESTS_SUPPORT_HPP_

#include <complex>
#include <cstdint>
#include <random>

#include "gciva/iva.hpp"
#include "gciva/stft.hpp"

namespace gciva::test {

inline Signal random_signal(Index channels, Index samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Signal s(channels, samples);
  for (Index i = 0; i < s.size(); ++i) s.data()[i] = n(rng);
  return s;
}

inline CMatrix<double> random_cmatrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = {n(rng), n(rng)};
  return m;
}

inline CMatrix<double> random_hpd(Index k, std::mt19937_64& rng) {
  const CMatrix<double> a = random_cmatrix(k, k, rng);
  CMatrix<double> v = a * a.adjoint();
  v.diagonal().array() += 0.5;
  return v;
}

inline CVector<double> random_unit_modulus(Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-kPi, kPi);
  CVector<double> h(k);
  h(0) = 1.0;
  for (Index i = 1; i < k; ++i) h(i) = std::polar(1.0, u(rng));
  return h;
}

/// Spectrogram with random complex entries, not derived from a signal. The
/// config only fixes the bin count (a zero window length encodes F = 1).
inline Spectrogram<double> random_spectrogram(Index bins, Index frames, Index channels,
                                              std::uint64_t seed) {
  StftConfig cfg;
  cfg.window_length = 2 * (bins - 1);
  cfg.hop = std::max<Index>(1, cfg.window_length / 2);
  std::mt19937_64 rng(seed);
  Spectrogram<double> s(cfg, channels, frames, 1);
  for (Index f = 0; f < s.bins(); ++f) s.bin(f) = random_cmatrix(channels, frames, rng);
  return s;
}

inline double brute_energy(const Spectrogram<double>& s, const DemixingStack<double>& w, Index k,
                           Index n) {
  double acc = 0;
  for (Index f = 0; f < s.bins(); ++f) {
    std::complex<double> y = 0;
    for (Index j = 0; j < s.channels(); ++j) y += w[f](k, j) * s(f, n, j);
    acc += std::norm(y);
  }
  return std::sqrt(acc);
}

/// Independent auxIVA: explicit loops for the energies and covariances, an
/// explicit matrix inverse for the row update.
inline std::vector<DemixingStack<double>> reference_auxiva(const Spectrogram<double>& s, Index iterations) {
  const Index bins = s.bins(), k_count = s.channels(), frames = s.frames();
  auto w = DemixingStack<double>::identity(bins, k_count);
  std::vector<DemixingStack<double>> traj{w};
  for (Index l = 0; l < iterations; ++l) {
    for (Index k = 0; k < k_count; ++k) {
      std::vector<double> r(static_cast<std::size_t>(frames));
      double mean = 0;
      for (Index n = 0; n < frames; ++n) {
        r[static_cast<std::size_t>(n)] = brute_energy(s, w, k, n);
        mean += r[static_cast<std::size_t>(n)] / static_cast<double>(frames);
      }
      for (Index f = 0; f < bins; ++f) {
        CMatrix<double> v = CMatrix<double>::Zero(k_count, k_count);
        for (Index n = 0; n < frames; ++n) {
          const double weight = 1.0 / std::max(r[static_cast<std::size_t>(n)], 1e-8 * mean);
          for (Index i = 0; i < k_count; ++i)
            for (Index j = 0; j < k_count; ++j)
              v(i, j) += weight * s(f, n, i) * std::conj(s(f, n, j)) / static_cast<double>(frames);
        }
        const CVector<double> raw = (w[f] * v).inverse().col(k);
        const double quad = std::real(raw.dot(v * raw));
        w.set_filter(f, k, raw / std::sqrt(quad));
      }
    }
    traj.push_back(w);
  }
  return traj;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace gciva::test

#endif  // GCIVA_TESTS_SUPPORT_HPP_

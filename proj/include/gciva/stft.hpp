// gciva/stft.hpp

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

#ifndef GCIVA_STFT_HPP_
#define GCIVA_STFT_HPP_

#include <cmath>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "gciva/core.hpp"

namespace gciva {

enum class WindowKind { kHamming, kHann };

std::string to_string(WindowKind kind);
WindowKind window_kind_from_string(const std::string& name);

struct StftConfig {
  Index window_length = 2048;
  Index hop = 1024;
  double sample_rate = 16000.0;
  WindowKind window = WindowKind::kHamming;

  /// Number of one-sided frequency bins, window_length / 2 + 1.
  Index bins() const { return window_length / 2 + 1; }

  /// Center frequency in Hz of bin f (zero-based).
  double bin_frequency(Index f) const {
    return static_cast<double>(f) * sample_rate / static_cast<double>(window_length);
  }

  void validate() const {
    if (window_length < 2 || window_length % 2 != 0)
      throw InvalidInput("stft: window_length must be a positive even number, got " +
                         std::to_string(window_length));
    if (hop < 1 || hop > window_length)
      throw InvalidInput("stft: hop must lie in [1, window_length], got " + std::to_string(hop));
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
      throw InvalidInput("stft: sample_rate must be positive");
  }
};

/// Periodic analysis window of the configured kind.
template <typename Scalar = double>
RVector<Scalar> make_window(const StftConfig& config) {
  const Index n = config.window_length;
  RVector<Scalar> w(n);
  for (Index i = 0; i < n; ++i) {
    const double c = std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    w(i) = static_cast<Scalar>(config.window == WindowKind::kHamming ? 0.54 - 0.46 * c
                                                                     : 0.5 - 0.5 * c);
  }
  return w;
}

/// One-sided STFT of a multichannel signal.
///
/// Bin f holds a K x N matrix whose column n is the microphone vector x_{f,n}.
/// This is the layout every per-frequency demixing operation works on.
template <typename Scalar = double>
class Spectrogram {
 public:
  Spectrogram() = default;

  Spectrogram(const StftConfig& config, Index channels, Index frames, Index samples = 0)
      : config_(config),
        samples_(samples > 0 ? samples : (frames - 1) * config.hop + config.window_length),
        bins_(static_cast<std::size_t>(config.bins()), CMatrix<Scalar>::Zero(channels, frames)) {}

  Index bins() const { return static_cast<Index>(bins_.size()); }
  Index channels() const { return bins_.empty() ? 0 : bins_.front().rows(); }
  Index frames() const { return bins_.empty() ? 0 : bins_.front().cols(); }

  /// Length of the time signal this spectrogram was computed from.
  Index samples() const { return samples_; }

  const StftConfig& config() const { return config_; }

  CMatrix<Scalar>& bin(Index f) { return bins_[static_cast<std::size_t>(f)]; }
  const CMatrix<Scalar>& bin(Index f) const { return bins_[static_cast<std::size_t>(f)]; }

  Complex<Scalar>& operator()(Index f, Index n, Index k) { return bin(f)(k, n); }
  const Complex<Scalar>& operator()(Index f, Index n, Index k) const { return bin(f)(k, n); }

  /// Broadband frame vector of channel k at frame n, stacked over all bins.
  CVector<Scalar> broadband(Index k, Index n) const {
    CVector<Scalar> v(bins());
    for (Index f = 0; f < bins(); ++f) v(f) = bin(f)(k, n);
    return v;
  }

  bool all_finite() const {
    for (const auto& b : bins_)
      if (!b.allFinite()) return false;
    return true;
  }

 private:
  StftConfig config_;
  Index samples_ = 0;
  std::vector<CMatrix<Scalar>> bins_;
};

/// Number of frames analyze() produces for a signal of the given length.
inline Index frame_count(Index samples, const StftConfig& config) {
  if (samples <= config.window_length) return 1;
  const Index rest = samples - config.window_length;
  return (rest + config.hop - 1) / config.hop + 1;
}

template <typename Scalar = double>
Spectrogram<Scalar> analyze(const Signal& signal, const StftConfig& config) {
  config.validate();
  if (signal.rows() == 0 || signal.cols() == 0)
    throw InvalidInput("stft::analyze: empty signal");
  if (!signal.allFinite()) throw InvalidInput("stft::analyze: non-finite samples");
  if (signal.cols() < config.window_length)
    throw InvalidInput("stft::analyze: signal has " + std::to_string(signal.cols()) +
                       " samples, fewer than the window length " +
                       std::to_string(config.window_length));

  const Index channels = signal.rows();
  const Index samples = signal.cols();
  const Index frames = frame_count(samples, config);
  const Index len = config.window_length;
  const Index bins = config.bins();
  const RVector<double> window = make_window<double>(config);

  Spectrogram<Scalar> out(config, channels, frames, samples);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(len));
  std::vector<std::complex<double>> spectrum;

  for (Index k = 0; k < channels; ++k) {
    for (Index n = 0; n < frames; ++n) {
      const Index start = n * config.hop;
      for (Index i = 0; i < len; ++i) {
        const Index t = start + i;
        frame[static_cast<std::size_t>(i)] = t < samples ? window(i) * signal(k, t) : 0.0;
      }
      fft.fwd(spectrum, frame);
      for (Index f = 0; f < bins; ++f) {
        const auto& c = spectrum[static_cast<std::size_t>(f)];
        out.bin(f)(k, n) = Complex<Scalar>(static_cast<Scalar>(c.real()),
                                           static_cast<Scalar>(c.imag()));
      }
    }
  }
  return out;
}

/// Weighted overlap-add inverse of analyze(). The synthesis window is the
/// analysis window divided by the overlap-added squared analysis window,
/// which makes analyze -> synthesize exact wherever that sum is nonzero.
template <typename Scalar>
Signal synthesize(const Spectrogram<Scalar>& spec) {
  const StftConfig& config = spec.config();
  config.validate();
  if (spec.bins() != config.bins())
    throw InvalidInput("stft::synthesize: spectrogram has " + std::to_string(spec.bins()) +
                       " bins, config implies " + std::to_string(config.bins()));
  const Index channels = spec.channels();
  const Index frames = spec.frames();
  if (channels == 0 || frames == 0) throw InvalidInput("stft::synthesize: empty spectrogram");
  const Index full = (frames - 1) * config.hop + config.window_length;
  if (spec.samples() > full || spec.samples() < 1)
    throw InvalidInput("stft::synthesize: sample count inconsistent with frame count");

  const Index len = config.window_length;
  const RVector<double> window = make_window<double>(config);

  Eigen::VectorXd norm = Eigen::VectorXd::Zero(full);
  for (Index n = 0; n < frames; ++n)
    norm.segment(n * config.hop, len) += window.cwiseAbs2();

  Signal out = Signal::Zero(channels, full);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(config.bins()));
  std::vector<double> frame;

  for (Index k = 0; k < channels; ++k) {
    for (Index n = 0; n < frames; ++n) {
      for (Index f = 0; f < config.bins(); ++f) {
        const auto& c = spec.bin(f)(k, n);
        spectrum[static_cast<std::size_t>(f)] =
            std::complex<double>(static_cast<double>(c.real()), static_cast<double>(c.imag()));
      }
      fft.inv(frame, spectrum, len);
      const Index start = n * config.hop;
      for (Index i = 0; i < len; ++i)
        out(k, start + i) += window(i) * frame[static_cast<std::size_t>(i)];
    }
  }
  for (Index t = 0; t < full; ++t) {
    // The periodic Hann window is zero at the first sample only.
    const double d = norm(t);
    if (d > 1e-12)
      out.col(t) /= d;
    else
      out.col(t).setZero();
  }
  return out.leftCols(spec.samples());
}

}  // namespace gciva

#endif  // GCIVA_STFT_HPP_

// scene.cpp

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

#include "gciva/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <unsupported/Eigen/FFT>

namespace gciva {

ArrayGeometry ArrayGeometry::pair(double spacing, double speed_of_sound) {
  return linear(2, spacing, speed_of_sound);
}

ArrayGeometry ArrayGeometry::linear(Index count, double spacing, double speed_of_sound) {
  ArrayGeometry g;
  g.speed_of_sound = speed_of_sound;
  for (Index m = 0; m < count; ++m)
    g.mics.emplace_back(spacing * static_cast<double>(m), 0.0, 0.0);
  return g;
}

double ArrayGeometry::distance_to_reference(Index m) const {
  return (mics[static_cast<std::size_t>(m)] - mics.front()).norm();
}

void ArrayGeometry::validate() const {
  if (mics.size() < 2) throw InvalidInput("geometry: at least two microphones are required");
  for (const auto& p : mics)
    if (!p.allFinite()) throw InvalidInput("geometry: non-finite microphone position");
  if (!(speed_of_sound > 0.0) || !std::isfinite(speed_of_sound))
    throw InvalidInput("geometry: speed_of_sound must be positive");
}

double cos_degrees(double degrees) {
  const double r = std::fmod(std::fabs(degrees), 360.0);
  if (r == 90.0 || r == 270.0) return 0.0;
  if (r == 0.0) return 1.0;
  if (r == 180.0) return -1.0;
  return std::cos(degrees * kPi / 180.0);
}

CVector<double> steering_vector(Index f, double doa_deg, const ArrayGeometry& geometry,
                                const StftConfig& config) {
  geometry.validate();
  if (f < 0 || f >= config.bins())
    throw InvalidInput("steering_vector: bin " + std::to_string(f) + " outside [0, " +
                       std::to_string(config.bins()) + ")");
  const double nu = config.bin_frequency(f);
  const double c = cos_degrees(doa_deg);
  CVector<double> h(geometry.size());
  h(0) = 1.0;
  for (Index m = 1; m < geometry.size(); ++m) {
    const double phase =
        2.0 * kPi * nu / geometry.speed_of_sound * geometry.distance_to_reference(m) * c;
    h(m) = phase == 0.0 ? std::complex<double>(1.0, 0.0) : std::polar(1.0, phase);
  }
  return h;
}

namespace {

constexpr int kHalfTaps = 31;  // 63-tap interpolator

double windowed_sinc(double u) {
  const double span = kHalfTaps + 1.0;
  if (std::fabs(u) >= span) return 0.0;
  const double w = 0.42 + 0.5 * std::cos(kPi * u / span) + 0.08 * std::cos(2.0 * kPi * u / span);
  const double s = u == 0.0 ? 1.0 : std::sin(kPi * u) / (kPi * u);
  return w * s;
}

Eigen::VectorXd fft_convolve(const Eigen::VectorXd& x, const Eigen::VectorXd& taps,
                             Index out_len) {
  Index n = 1;
  while (n < x.size() + taps.size() - 1) n <<= 1;
  Eigen::FFT<double> fft;
  std::vector<double> a(static_cast<std::size_t>(n), 0.0), b(static_cast<std::size_t>(n), 0.0);
  std::copy(x.data(), x.data() + x.size(), a.begin());
  std::copy(taps.data(), taps.data() + taps.size(), b.begin());
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, a);
  fft.fwd(fb, b);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> y;
  fft.inv(y, fa);
  Eigen::VectorXd out(out_len);
  for (Index t = 0; t < out_len; ++t) out(t) = y[static_cast<std::size_t>(t)];
  return out;
}

}  // namespace

Eigen::VectorXd fractional_delay(const Eigen::VectorXd& x, double delay) {
  const Index len = x.size();
  const double whole = std::round(delay);
  const double frac = delay - whole;
  const auto shift = static_cast<Index>(whole);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(len);
  if (std::fabs(frac) < 1e-12) {
    for (Index t = 0; t < len; ++t) {
      const Index s = t - shift;
      if (s >= 0 && s < len) y(t) = x(s);
    }
    return y;
  }
  double taps[2 * kHalfTaps + 1];
  for (int j = -kHalfTaps; j <= kHalfTaps; ++j) taps[j + kHalfTaps] = windowed_sinc(j - frac);
  for (Index t = 0; t < len; ++t) {
    double acc = 0.0;
    for (int j = -kHalfTaps; j <= kHalfTaps; ++j) {
      const Index s = t - shift - j;
      if (s >= 0 && s < len) acc += taps[j + kHalfTaps] * x(s);
    }
    y(t) = acc;
  }
  return y;
}

Eigen::VectorXd convolve_truncated(const Eigen::VectorXd& x, const Eigen::VectorXd& taps) {
  if (taps.size() == 0) return Eigen::VectorXd::Zero(x.size());
  if (taps.size() > 64) return fft_convolve(x, taps, x.size());
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    const Index top = std::min<Index>(taps.size() - 1, t);
    for (Index j = 0; j <= top; ++j) acc += taps(j) * x(t - j);
    y(t) = acc;
  }
  return y;
}

Mixture simulate_mixture(const SceneSpec& spec, const ArrayGeometry& geometry,
                         const StftConfig& config) {
  geometry.validate();
  const Index mics = geometry.size();
  const auto sources = static_cast<Index>(spec.sources.size());
  if (sources != mics)
    throw InvalidInput("simulate_mixture: " + std::to_string(sources) + " sources for " +
                       std::to_string(mics) + " microphones (determined scenes only)");
  if (spec.doas_deg.size() != spec.sources.size())
    throw InvalidInput("simulate_mixture: one DOA per source is required");
  const Index len = spec.sources.front().size();
  if (len == 0) throw InvalidInput("simulate_mixture: empty source signal");
  for (std::size_t k = 0; k < spec.sources.size(); ++k) {
    if (spec.sources[k].size() != len)
      throw InvalidInput("simulate_mixture: source signals have mismatched lengths");
    if (!spec.sources[k].allFinite())
      throw InvalidInput("simulate_mixture: non-finite source samples");
    const double doa = spec.doas_deg[k];
    if (!(doa >= 0.0 && doa <= 180.0))
      throw InvalidInput("simulate_mixture: DOA must lie in [0, 180] degrees");
  }
  const bool noisy = !(std::isinf(spec.snr_db) && spec.snr_db > 0);
  if (noisy && !std::isfinite(spec.snr_db))
    throw InvalidInput("simulate_mixture: snr_db must be finite or +infinity");
  const bool fir = !spec.room_responses.empty();
  if (fir) {
    if (static_cast<Index>(spec.room_responses.size()) != sources)
      throw InvalidInput("simulate_mixture: room responses must be given per source");
    for (const auto& per_mic : spec.room_responses)
      if (static_cast<Index>(per_mic.size()) != mics)
        throw InvalidInput("simulate_mixture: room responses must be given per microphone");
  }

  Mixture out;
  out.mixture = Signal::Zero(mics, len);
  for (Index k = 0; k < sources; ++k) {
    Signal image(mics, len);
    const auto& s = spec.sources[static_cast<std::size_t>(k)];
    const double c = cos_degrees(spec.doas_deg[static_cast<std::size_t>(k)]);
    for (Index m = 0; m < mics; ++m) {
      if (fir) {
        image.row(m) = convolve_truncated(s, spec.room_responses[static_cast<std::size_t>(k)]
                                                                [static_cast<std::size_t>(m)])
                           .transpose();
      } else {
        // Positive steering phase means the wavefront reaches mic m early.
        const double advance = geometry.distance_to_reference(m) * c / geometry.speed_of_sound *
                               config.sample_rate;
        image.row(m) = fractional_delay(s, -advance).transpose();
      }
    }
    out.mixture += image;
    out.images.push_back(std::move(image));
  }

  out.noise = Signal::Zero(mics, len);
  if (noisy) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index m = 0; m < mics; ++m)
      for (Index t = 0; t < len; ++t) out.noise(m, t) = gauss(rng);
    const double signal_power = out.mixture.squaredNorm() / static_cast<double>(mics * len);
    const double raw_power = out.noise.squaredNorm() / static_cast<double>(mics * len);
    const double target = signal_power / std::pow(10.0, spec.snr_db / 10.0);
    if (raw_power > 0.0) out.noise *= std::sqrt(target / raw_power);
    out.mixture += out.noise;
  }
  return out;
}

double measured_snr_db(const Mixture& mixture) {
  const double noise = mixture.noise.squaredNorm();
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10((mixture.mixture - mixture.noise).squaredNorm() / noise);
}

namespace {

/// Two-pole resonator with unit peak gain, coefficients retuned per segment.
struct Resonator {
  double b0 = 1, a1 = 0, a2 = 0, y1 = 0, y2 = 0;

  void tune(double freq, double bandwidth, double fs) {
    const double r = std::exp(-kPi * bandwidth / fs);
    a1 = -2.0 * r * std::cos(2.0 * kPi * freq / fs);
    a2 = r * r;
    b0 = 1.0 - r;
  }

  double operator()(double x) {
    const double y = b0 * x - a1 * y1 - a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

Eigen::VectorXd synthetic_source(Index samples, double sample_rate, std::uint64_t seed,
                                 double rms) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::VectorXd out(samples);
  Resonator f1, f2, f3;
  double env = 0.0, tilt = 0.0, phase = 0.0;
  const double env_pole = std::exp(-1.0 / (0.012 * sample_rate));
  const double tilt_pole = 0.6 + 0.3 * uni(rng);

  Index t = 0;
  while (t < samples) {
    const auto seg = static_cast<Index>((0.08 + 0.3 * uni(rng)) * sample_rate);
    const bool active = uni(rng) < 0.7;
    const bool voiced = uni(rng) < 0.65;
    const double gain = active ? std::exp(0.6 * gauss(rng)) : 0.01;
    const double f0 = 90.0 + 160.0 * uni(rng);
    f1.tune(300.0 + 600.0 * uni(rng), 80.0 + 120.0 * uni(rng), sample_rate);
    f2.tune(900.0 + 1600.0 * uni(rng), 100.0 + 150.0 * uni(rng), sample_rate);
    f3.tune(2500.0 + 1500.0 * uni(rng), 150.0 + 200.0 * uni(rng), sample_rate);
    const Index end = std::min(samples, t + seg);
    for (; t < end; ++t) {
      double excitation = 0.05 * gauss(rng);
      if (voiced) {
        phase += f0 * (1.0 + 0.01 * gauss(rng)) / sample_rate;
        if (phase >= 1.0) {
          phase -= 1.0;
          excitation += 1.0;
        }
      } else {
        excitation += 0.4 * gauss(rng);
      }
      env = env_pole * env + (1.0 - env_pole) * gain;
      const double shaped = 3.0 * f1(excitation) + 2.0 * f2(excitation) + f3(excitation) +
                            0.02 * excitation;
      tilt = tilt_pole * tilt + (1.0 - tilt_pole) * shaped;
      out(t) = env * tilt;
    }
  }
  out.array() -= out.mean();
  const double current = std::sqrt(out.squaredNorm() / static_cast<double>(samples));
  if (current > 0.0) out *= rms / current;
  return out;
}

std::vector<std::vector<Eigen::VectorXd>> synthetic_room_responses(
    const std::vector<double>& doas_deg, const ArrayGeometry& geometry, double sample_rate,
    double t60, std::uint64_t seed) {
  geometry.validate();
  if (!(t60 >= 0.0) || !std::isfinite(t60))
    throw InvalidInput("synthetic_room_responses: t60 must be nonnegative");
  // Common latency keeps every direct path causal.
  constexpr Index kLatency = 48;
  const auto tail = static_cast<Index>(std::ceil(t60 * sample_rate));
  const Index len = 2 * kLatency + 1 + tail;
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<Eigen::VectorXd>> out;
  for (double doa : doas_deg) {
    std::vector<Eigen::VectorXd> per_mic;
    const double c = cos_degrees(doa);
    for (Index m = 0; m < geometry.size(); ++m) {
      Eigen::VectorXd impulse = Eigen::VectorXd::Zero(len);
      impulse(0) = 1.0;
      const double advance =
          geometry.distance_to_reference(m) * c / geometry.speed_of_sound * sample_rate;
      Eigen::VectorXd h = fractional_delay(impulse, static_cast<double>(kLatency) - advance);
      if (tail > 0) {
        // 60 dB energy decay over t60; the tail starts 2.5 ms after the direct
        // path and carries 0.9 * sqrt(t60) of energy (DRR ~7 dB at 50 ms,
        // ~2.4 dB at 400 ms).
        const double decay = 6.9078 / (t60 * sample_rate);
        const auto onset = kLatency + static_cast<Index>(0.0025 * sample_rate);
        const double level = std::sqrt(2.0 * decay * 0.9 * std::sqrt(t60));
        for (Index i = onset; i < len; ++i)
          h(i) += level * gauss(rng) * std::exp(-decay * static_cast<double>(i - onset));
      }
      per_mic.push_back(std::move(h));
    }
    out.push_back(std::move(per_mic));
  }
  return out;
}

}  // namespace gciva

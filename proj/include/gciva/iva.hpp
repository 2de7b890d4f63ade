// gciva/iva.hpp

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

// Independent vector analysis with an optional directional prior on the
// demixing rows.
//
// Notation: bin f holds the K x N microphone matrix X_f, the demixing matrix
// W_f has rows (w_f^k)^H, and the demixed spectra are Y_f = W_f X_f. Every
// function here is a template on the real scalar type; the spectrogram and
// the demixing stack must share it.
//
// The objective minimized by the majorize-minimize driver is
//
//   J(W) = J_IVA(W) + J_prior(W)
//   J_IVA   = 2 sum_k E{G(r_n^k)} - 2 sum_f log|det W_f|
//   J_prior = sum_f sum_{k in I} (w_f^k)^H (lambda_E I + h h^H) w_f^k / sigma_f^2
//
// with r_n^k the broadband norm of output k at frame n. With the surrogate
// statistic V_f^k = E{G'(r)/r x x^H}, the row updates below minimize
//
//   sum_f [ (w_f^k)^H (V_f^k + D_f^k) w_f^k - 2 log|det W_f| ]
//
// exactly, which majorizes J (2 G(r) <= G'(r0)/r0 r^2 + const for the
// super-Gaussian models used here), so J never increases.

#ifndef GCIVA_IVA_HPP_
#define GCIVA_IVA_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gciva/core.hpp"
#include "gciva/scene.hpp"
#include "gciva/stft.hpp"

namespace gciva {

/// Per-bin K x K demixing matrices.
template <typename Scalar>
class DemixingStack {
 public:
  DemixingStack() = default;
  explicit DemixingStack(std::vector<CMatrix<Scalar>> matrices) : m_(std::move(matrices)) {}

  static DemixingStack identity(Index bins, Index channels) {
    return DemixingStack(std::vector<CMatrix<Scalar>>(static_cast<std::size_t>(bins),
                                                      CMatrix<Scalar>::Identity(channels, channels)));
  }

  Index bins() const { return static_cast<Index>(m_.size()); }
  Index channels() const { return m_.empty() ? 0 : m_.front().rows(); }

  CMatrix<Scalar>& operator[](Index f) { return m_[static_cast<std::size_t>(f)]; }
  const CMatrix<Scalar>& operator[](Index f) const { return m_[static_cast<std::size_t>(f)]; }

  /// Demixing vector w_f^k (row k of W_f is its conjugate transpose).
  CVector<Scalar> filter(Index f, Index k) const { return (*this)[f].row(k).adjoint(); }
  void set_filter(Index f, Index k, const CVector<Scalar>& w) { (*this)[f].row(k) = w.adjoint(); }

  bool all_finite() const {
    return std::all_of(m_.begin(), m_.end(), [](const auto& m) { return m.allFinite(); });
  }

 private:
  std::vector<CMatrix<Scalar>> m_;
};

/// Frobenius distance between two stacks, all bins taken together.
template <typename Scalar>
Scalar frobenius_distance(const DemixingStack<Scalar>& a, const DemixingStack<Scalar>& b) {
  Scalar acc = 0;
  for (Index f = 0; f < a.bins(); ++f) acc += (a[f] - b[f]).squaredNorm();
  return std::sqrt(acc);
}

enum class SourceKind {
  kLaplacian,  // spherical Laplacian, G(r) = r
};

template <typename Scalar>
struct SourceModel {
  SourceKind kind = SourceKind::kLaplacian;
  /// Weight floor relative to the mean of r over frames.
  Scalar epsilon = Scalar(1e-8);

  Scalar contrast(Scalar r) const { return r; }

  /// Absolute floor for the weight denominator given the frame energies.
  Scalar floor(const RVector<Scalar>& energies) const {
    const Scalar mean = energies.size() ? energies.mean() : Scalar(0);
    return std::max(epsilon * mean, std::numeric_limits<Scalar>::min());
  }

  /// G'(r) / r, floored.
  Scalar weight(Scalar r, Scalar floor_value) const { return Scalar(1) / std::max(r, floor_value); }
};

/// Directional prior: channels in `constrained_channels` get the quadratic
/// penalty (w^H (lambda_E I + h h^H) w) / sigma_f^2 with h the free-field RTF
/// toward doa_deg of that channel. The gradient baseline reuses the same
/// structure with h pointing at its target.
template <typename Scalar>
struct PriorConfig {
  std::vector<Index> constrained_channels;
  std::vector<double> doa_deg;
  std::vector<Scalar> sigma2;  // one per bin
  Scalar lambda_e = Scalar(1e-3);
  /// steering[i][f] is the RTF for constrained_channels[i] at bin f.
  std::vector<std::vector<CVector<Scalar>>> steering;

  /// Position of k in constrained_channels, or -1.
  Index slot(Index k) const {
    auto it = std::find(constrained_channels.begin(), constrained_channels.end(), k);
    return it == constrained_channels.end() ? -1
                                            : static_cast<Index>(it - constrained_channels.begin());
  }

  bool empty() const { return constrained_channels.empty(); }

  static PriorConfig uninformative() { return PriorConfig{}; }

  void validate(Index bins, Index channels) const {
    if (empty()) return;
    if (doa_deg.size() != constrained_channels.size() ||
        steering.size() != constrained_channels.size())
      throw InvalidInput("prior: one DOA and one steering field per constrained channel");
    if (static_cast<Index>(sigma2.size()) != bins)
      throw InvalidInput("prior: sigma2 must have one entry per bin");
    for (Scalar s : sigma2)
      if (!(s > 0) || !std::isfinite(s)) throw InvalidInput("prior: sigma2 must be positive");
    if (!(lambda_e >= 0) || !std::isfinite(lambda_e))
      throw InvalidInput("prior: lambda_e must be nonnegative");
    for (std::size_t i = 0; i < constrained_channels.size(); ++i) {
      const Index k = constrained_channels[i];
      if (k < 0 || k >= channels)
        throw InvalidInput("prior: constrained channel " + std::to_string(k) + " out of range");
      if (static_cast<Index>(steering[i].size()) != bins)
        throw InvalidInput("prior: steering field has the wrong number of bins");
      for (const auto& h : steering[i])
        if (h.size() != channels) throw InvalidInput("prior: steering vector length mismatch");
    }
  }
};

/// Builds a prior whose steering fields come from the free-field model.
template <typename Scalar = double>
PriorConfig<Scalar> make_prior(const std::vector<Index>& channels, const std::vector<double>& doas,
                               Scalar sigma2, Scalar lambda_e, const ArrayGeometry& geometry,
                               const StftConfig& config) {
  if (channels.size() != doas.size())
    throw InvalidInput("make_prior: one DOA per constrained channel is required");
  PriorConfig<Scalar> prior;
  prior.constrained_channels = channels;
  prior.doa_deg = doas;
  prior.sigma2.assign(static_cast<std::size_t>(config.bins()), sigma2);
  prior.lambda_e = lambda_e;
  for (double doa : doas) {
    std::vector<CVector<Scalar>> field;
    field.reserve(static_cast<std::size_t>(config.bins()));
    for (Index f = 0; f < config.bins(); ++f)
      field.push_back(steering_vector(f, doa, geometry, config).template cast<Complex<Scalar>>());
    prior.steering.push_back(std::move(field));
  }
  prior.validate(config.bins(), geometry.size());
  return prior;
}

namespace detail {

template <typename Scalar>
void check_shapes(const Spectrogram<Scalar>& spec, const DemixingStack<Scalar>& w) {
  if (spec.bins() != w.bins() || spec.channels() != w.channels())
    throw InvalidInput("iva: demixing stack is " + std::to_string(w.bins()) + " x " +
                       std::to_string(w.channels()) + ", spectrogram is " +
                       std::to_string(spec.bins()) + " x " + std::to_string(spec.channels()));
}

template <typename Scalar>
void check_channel(Index k, Index channels) {
  if (k < 0 || k >= channels)
    throw InvalidInput("iva: channel " + std::to_string(k) + " out of range [0, " +
                       std::to_string(channels) + ")");
}

/// w = (W M)^{-1} e_k scaled to w^H M w = 1. Retries once with diagonal
/// loading 1e-10 trace(M) / K.
template <typename Scalar>
CVector<Scalar> solve_row(const CMatrix<Scalar>& w, const CMatrix<Scalar>& m, Index k) {
  const Index channels = w.rows();
  check_channel<Scalar>(k, channels);
  if (m.rows() != channels || m.cols() != channels || w.cols() != channels)
    throw InvalidInput("iva: update matrices must be K x K");
  const CVector<Scalar> e = CVector<Scalar>::Unit(channels, k);
  const Scalar tol = std::numeric_limits<Scalar>::epsilon() * Scalar(1e3);

  auto attempt = [&](const CMatrix<Scalar>& mm, CVector<Scalar>& out) {
    const CMatrix<Scalar> system = w * mm;
    if (!system.allFinite()) return false;
    Eigen::PartialPivLU<CMatrix<Scalar>> lu(system);
    if (!(lu.rcond() > tol)) return false;
    const CVector<Scalar> raw = lu.solve(e);
    const Scalar quad = std::real(raw.dot(mm * raw));
    if (!(quad > 0) || !std::isfinite(quad)) return false;
    out = raw / std::sqrt(quad);
    return out.allFinite();
  };

  CVector<Scalar> out;
  if (attempt(m, out)) return out;
  const Scalar load = Scalar(1e-10) * std::real(m.trace()) / static_cast<Scalar>(channels);
  CMatrix<Scalar> loaded = m;
  loaded.diagonal().array() += load;
  if (attempt(loaded, out)) return out;
  throw SingularUpdate("iva: singular demixing update for channel " + std::to_string(k));
}

}  // namespace detail

/// r_n = sqrt(sum_f |(w_f^k)^H x_{f,n}|^2) for every frame n.
template <typename Scalar>
RVector<Scalar> demixed_energies(const Spectrogram<Scalar>& spec, const DemixingStack<Scalar>& w,
                                 Index k) {
  detail::check_shapes(spec, w);
  detail::check_channel<Scalar>(k, spec.channels());
  RVector<Scalar> acc = RVector<Scalar>::Zero(spec.frames());
  for (Index f = 0; f < spec.bins(); ++f)
    acc += (w[f].row(k) * spec.bin(f)).cwiseAbs2().transpose();
  return acc.cwiseSqrt();
}

/// Per-frame weights G'(r_n)/r_n of the surrogate.
template <typename Scalar>
RVector<Scalar> contribution_weights(const RVector<Scalar>& energies, const SourceModel<Scalar>& model) {
  const Scalar fl = model.floor(energies);
  return energies.unaryExpr([&](Scalar r) { return model.weight(r, fl); });
}

/// V_f = E{ G'(r)/r x x^H } at bin f, from precomputed weights.
template <typename Scalar>
CMatrix<Scalar> weighted_covariance_from_weights(const Spectrogram<Scalar>& spec,
                                                 const RVector<Scalar>& weights, Index f) {
  const CMatrix<Scalar>& x = spec.bin(f);
  CMatrix<Scalar> v = x * weights.template cast<Complex<Scalar>>().asDiagonal() * x.adjoint();
  v /= static_cast<Scalar>(spec.frames());
  // Enforce exact Hermitian symmetry.
  CMatrix<Scalar> h = Scalar(0.5) * (v + v.adjoint());
  return h;
}

template <typename Scalar>
CMatrix<Scalar> weighted_covariance(const Spectrogram<Scalar>& spec, const RVector<Scalar>& energies,
                                    const SourceModel<Scalar>& model, Index f) {
  if (energies.size() != spec.frames())
    throw InvalidInput("weighted_covariance: one energy per frame is required");
  if (f < 0 || f >= spec.bins()) throw InvalidInput("weighted_covariance: bin out of range");
  return weighted_covariance_from_weights(spec, contribution_weights(energies, model), f);
}

/// D = (lambda_E I + h h^H) / sigma2.
template <typename Scalar>
CMatrix<Scalar> prior_matrix(const CVector<Scalar>& h, Scalar sigma2, Scalar lambda_e) {
  if (!(sigma2 > 0)) throw InvalidInput("prior_matrix: sigma2 must be positive");
  if (!(lambda_e >= 0)) throw InvalidInput("prior_matrix: lambda_e must be nonnegative");
  CMatrix<Scalar> d = h * h.adjoint();
  d.diagonal().array() += lambda_e;
  return d / sigma2;
}

/// New demixing vector for row k of `wf`: (W_f V)^{-1} e_k normalized to
/// w^H V w = 1.
template <typename Scalar>
CVector<Scalar> update_unconstrained(const CMatrix<Scalar>& wf, const CMatrix<Scalar>& v, Index k) {
  return detail::solve_row(wf, v, k);
}

template <typename Scalar>
CVector<Scalar> update_unconstrained(const DemixingStack<Scalar>& w, const CMatrix<Scalar>& v,
                                     Index f, Index k) {
  return update_unconstrained(w[f], v, k);
}

/// As update_unconstrained with V replaced by V + D.
template <typename Scalar>
CVector<Scalar> update_constrained(const CMatrix<Scalar>& wf, const CMatrix<Scalar>& v,
                                   const CMatrix<Scalar>& d, Index k) {
  return detail::solve_row(wf, CMatrix<Scalar>(v + d), k);
}

template <typename Scalar>
CVector<Scalar> update_constrained(const DemixingStack<Scalar>& w, const CMatrix<Scalar>& v,
                                   const CMatrix<Scalar>& d, Index f, Index k) {
  return update_constrained(w[f], v, d, k);
}

// ---------------------------------------------------------------------------
// Gradient baseline.

/// |(w)^H h - 1|^2 for row k of W_f.
template <typename Scalar>
Scalar constraint_penalty(const CMatrix<Scalar>& wf, const CVector<Scalar>& h, Index k) {
  const Complex<Scalar> resp = (wf.row(k) * h).value();
  return std::norm(resp - Scalar(1));
}

/// Conjugate Wirtinger derivative d/dw* of |w^H h - 1|^2, i.e. h (h^H w - 1).
/// The real gradient (d/dRe + j d/dIm) is twice this value.
template <typename Scalar>
CVector<Scalar> constraint_gradient(const CMatrix<Scalar>& wf, const CVector<Scalar>& h, Index k) {
  const Complex<Scalar> resp = (wf.row(k) * h).value();
  return h * std::conj(resp - Scalar(1));
}

/// One natural-gradient step with a quadratic geometric constraint:
///   W_f <- W_f + mu (I - E{phi(y_f) y_f^H}) W_f - mu gamma grad,
/// where phi(y_f)_k = y_{f}^k / r^k scores each output by its broadband norm
/// and grad stacks constraint_gradient for every constrained row.
template <typename Scalar>
DemixingStack<Scalar> gradient_update(const DemixingStack<Scalar>& w, const Spectrogram<Scalar>& spec,
                                      const SourceModel<Scalar>& model,
                                      const PriorConfig<Scalar>& targets, Scalar stepsize,
                                      Scalar constraint_weight) {
  detail::check_shapes(spec, w);
  targets.validate(spec.bins(), spec.channels());
  if (stepsize == Scalar(0)) return w;
  const Index channels = spec.channels();
  const Index frames = spec.frames();

  // Per-output inverse norms, shared by all bins.
  CMatrix<Scalar> inv_norm(channels, frames);
  for (Index k = 0; k < channels; ++k) {
    const RVector<Scalar> r = demixed_energies(spec, w, k);
    inv_norm.row(k) = contribution_weights(r, model).transpose().template cast<Complex<Scalar>>();
  }

  DemixingStack<Scalar> out = w;
  const CMatrix<Scalar> eye = CMatrix<Scalar>::Identity(channels, channels);
  for (Index f = 0; f < spec.bins(); ++f) {
    const CMatrix<Scalar> y = w[f] * spec.bin(f);
    const CMatrix<Scalar> phi = y.cwiseProduct(inv_norm);
    const CMatrix<Scalar> score = phi * y.adjoint() / static_cast<Scalar>(frames);
    CMatrix<Scalar> step = (eye - score) * w[f];
    for (std::size_t i = 0; i < targets.constrained_channels.size(); ++i) {
      const Index k = targets.constrained_channels[i];
      const CVector<Scalar> g = constraint_gradient(w[f], targets.steering[i][static_cast<std::size_t>(f)], k);
      step.row(k) -= constraint_weight * g.adjoint();
    }
    out[f] = w[f] + stepsize * step;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost.

template <typename Scalar>
struct CostValue {
  Scalar j_iva = 0;
  Scalar j_prior = 0;
  Scalar total() const { return j_iva + j_prior; }
};

template <typename Scalar>
struct CostTrace {
  std::vector<Scalar> j_iva;
  std::vector<Scalar> j_prior;

  void push(const CostValue<Scalar>& c) {
    j_iva.push_back(c.j_iva);
    j_prior.push_back(c.j_prior);
  }
  std::size_t size() const { return j_iva.size(); }
  Scalar total(std::size_t l) const { return j_iva[l] + j_prior[l]; }
  /// J_IVA(l) / J_IVA(0).
  Scalar normalized_iva(std::size_t l) const { return j_iva[l] / j_iva.front(); }
};

/// sum_f sum_{k in I} (w_f^k)^H D_f^k w_f^k.
template <typename Scalar>
Scalar prior_cost(const DemixingStack<Scalar>& w, const PriorConfig<Scalar>& prior) {
  Scalar acc = 0;
  for (std::size_t i = 0; i < prior.constrained_channels.size(); ++i) {
    const Index k = prior.constrained_channels[i];
    for (Index f = 0; f < w.bins(); ++f) {
      const CVector<Scalar> wk = w.filter(f, k);
      const auto& h = prior.steering[i][static_cast<std::size_t>(f)];
      const Scalar quad = prior.lambda_e * wk.squaredNorm() + std::norm(h.dot(wk));
      acc += quad / prior.sigma2[static_cast<std::size_t>(f)];
    }
  }
  return acc;
}

template <typename Scalar>
CostValue<Scalar> evaluate_cost(const Spectrogram<Scalar>& spec, const DemixingStack<Scalar>& w,
                                const SourceModel<Scalar>& model, const PriorConfig<Scalar>& prior) {
  detail::check_shapes(spec, w);
  prior.validate(spec.bins(), spec.channels());
  CostValue<Scalar> c;
  for (Index k = 0; k < spec.channels(); ++k) {
    const RVector<Scalar> r = demixed_energies(spec, w, k);
    Scalar g = 0;
    for (Index n = 0; n < r.size(); ++n) g += model.contrast(r(n));
    c.j_iva += Scalar(2) * g / static_cast<Scalar>(spec.frames());
  }
  for (Index f = 0; f < w.bins(); ++f) {
    const Scalar det = std::abs(w[f].determinant());
    if (!(det >= Scalar(1e-300)) || !std::isfinite(det))
      throw CostOverflow("evaluate_cost: |det W_f| = " + std::to_string(det) + " at bin " +
                         std::to_string(f));
    c.j_iva -= Scalar(2) * std::log(det);
  }
  c.j_prior = prior_cost(w, prior);
  return c;
}

// ---------------------------------------------------------------------------
// Drivers.

template <typename Scalar>
struct IvaResult {
  DemixingStack<Scalar> demixing;
  Spectrogram<Scalar> demixed;
  CostTrace<Scalar> trace;
};

/// Called with (iteration, W) after initialization (iteration 0) and after
/// every completed iteration.
template <typename Scalar>
using IterationObserver = std::function<void(Index, const DemixingStack<Scalar>&)>;

/// y_f = W_f x_f for all bins.
template <typename Scalar>
Spectrogram<Scalar> apply_demixing(const Spectrogram<Scalar>& spec, const DemixingStack<Scalar>& w) {
  detail::check_shapes(spec, w);
  Spectrogram<Scalar> out(spec.config(), spec.channels(), spec.frames(), spec.samples());
  for (Index f = 0; f < spec.bins(); ++f) out.bin(f).noalias() = w[f] * spec.bin(f);
  return out;
}

/// Majorize-minimize IVA with a directional prior on the channels listed in
/// `prior`. An empty prior gives plain auxIVA.
///
/// Starting from W_f = I, each iteration sweeps the channels; for channel k
/// the broadband energies are recomputed from the current demixing matrices,
/// then for each bin the weighted covariance is formed and row k of W_f is
/// replaced by the constrained or unconstrained update.
///
/// trace holds L + 1 entries, the first for the identity initialization.
template <typename Scalar>
IvaResult<Scalar> run_informed_iva(const Spectrogram<Scalar>& spec, const PriorConfig<Scalar>& prior,
                                   const SourceModel<Scalar>& model, Index iterations,
                                   const IterationObserver<Scalar>& observer = {}) {
  if (iterations < 0) throw InvalidInput("run_informed_iva: iterations must be >= 0");
  const Index bins = spec.bins();
  const Index channels = spec.channels();
  if (channels < 1 || spec.frames() < 1) throw InvalidInput("run_informed_iva: empty spectrogram");
  prior.validate(bins, channels);

  IvaResult<Scalar> res;
  res.demixing = DemixingStack<Scalar>::identity(bins, channels);
  DemixingStack<Scalar>& w = res.demixing;
  res.trace.push(evaluate_cost(spec, w, model, prior));
  if (observer) observer(0, w);

  for (Index l = 1; l <= iterations; ++l) {
    for (Index k = 0; k < channels; ++k) {
      const RVector<Scalar> weights = contribution_weights(demixed_energies(spec, w, k), model);
      const Index slot = prior.slot(k);
      for (Index f = 0; f < bins; ++f) {
        const CMatrix<Scalar> v = weighted_covariance_from_weights(spec, weights, f);
        try {
          if (slot >= 0) {
            const auto& h = prior.steering[static_cast<std::size_t>(slot)][static_cast<std::size_t>(f)];
            const CMatrix<Scalar> d =
                prior_matrix(h, prior.sigma2[static_cast<std::size_t>(f)], prior.lambda_e);
            w.set_filter(f, k, update_constrained(w[f], v, d, k));
          } else {
            w.set_filter(f, k, update_unconstrained(w[f], v, k));
          }
        } catch (const SingularUpdate& e) {
          throw SingularUpdate(std::string(e.what()) + " (iteration " + std::to_string(l) +
                               ", bin " + std::to_string(f) + ")");
        }
      }
    }
    res.trace.push(evaluate_cost(spec, w, model, prior));
    if (observer) observer(l, w);
  }
  res.demixed = apply_demixing(spec, w);
  return res;
}

/// Plain auxIVA: run_informed_iva with no constrained channels.
template <typename Scalar>
IvaResult<Scalar> run_auxiva(const Spectrogram<Scalar>& spec, const SourceModel<Scalar>& model,
                             Index iterations, const IterationObserver<Scalar>& observer = {}) {
  return run_informed_iva(spec, PriorConfig<Scalar>::uninformative(), model, iterations, observer);
}

/// Geometrically constrained natural-gradient IVA baseline. `targets` holds
/// the steering fields toward each constrained channel's desired source (a
/// unit response is enforced there). The trace's prior column records
/// gamma * sum |w^H h - 1|^2.
template <typename Scalar>
IvaResult<Scalar> run_gradient_iva(const Spectrogram<Scalar>& spec, const PriorConfig<Scalar>& targets,
                                   const SourceModel<Scalar>& model, Index iterations,
                                   Scalar stepsize = Scalar(0.05), Scalar constraint_weight = Scalar(0.5),
                                   const IterationObserver<Scalar>& observer = {}) {
  if (iterations < 0) throw InvalidInput("run_gradient_iva: iterations must be >= 0");
  if (spec.channels() < 1 || spec.frames() < 1)
    throw InvalidInput("run_gradient_iva: empty spectrogram");
  targets.validate(spec.bins(), spec.channels());

  auto penalty = [&](const DemixingStack<Scalar>& w) {
    Scalar acc = 0;
    for (std::size_t i = 0; i < targets.constrained_channels.size(); ++i)
      for (Index f = 0; f < w.bins(); ++f)
        acc += constraint_penalty(w[f], targets.steering[i][static_cast<std::size_t>(f)],
                                  targets.constrained_channels[i]);
    return constraint_weight * acc;
  };
  auto record = [&](const DemixingStack<Scalar>& w, CostTrace<Scalar>& trace) {
    CostValue<Scalar> c = evaluate_cost(spec, w, model, PriorConfig<Scalar>::uninformative());
    c.j_prior = penalty(w);
    trace.push(c);
  };

  IvaResult<Scalar> res;
  res.demixing = DemixingStack<Scalar>::identity(spec.bins(), spec.channels());
  record(res.demixing, res.trace);
  if (observer) observer(0, res.demixing);
  for (Index l = 1; l <= iterations; ++l) {
    res.demixing = gradient_update(res.demixing, spec, model, targets, stepsize, constraint_weight);
    if (!res.demixing.all_finite())
      throw SingularUpdate("run_gradient_iva: demixing diverged at iteration " + std::to_string(l));
    record(res.demixing, res.trace);
    if (observer) observer(l, res.demixing);
  }
  res.demixed = apply_demixing(spec, res.demixing);
  return res;
}

/// Minimal-distortion rescaling: channel k at bin f is multiplied by
/// [W_f^{-1}]_{ref,k}, which maps it onto its image at microphone `ref`.
/// A negative ref projects every channel onto the microphone with the same
/// index.
template <typename Scalar>
Spectrogram<Scalar> project_back(const Spectrogram<Scalar>& demixed, const DemixingStack<Scalar>& w,
                                 Index ref) {
  detail::check_shapes(demixed, w);
  if (ref >= demixed.channels()) throw InvalidInput("project_back: reference channel out of range");
  Spectrogram<Scalar> out = demixed;
  const Index channels = demixed.channels();
  for (Index f = 0; f < demixed.bins(); ++f) {
    Eigen::PartialPivLU<CMatrix<Scalar>> lu(w[f]);
    if (!(lu.rcond() > std::numeric_limits<Scalar>::epsilon() * Scalar(1e3)))
      throw SingularUpdate("project_back: singular demixing matrix at bin " + std::to_string(f));
    const CMatrix<Scalar> a = lu.inverse();
    for (Index k = 0; k < channels; ++k) out.bin(f).row(k) *= a(ref < 0 ? k : ref, k);
  }
  return out;
}

}  // namespace gciva

#endif  // GCIVA_IVA_HPP_

// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/loss/losses.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

const double kLn10 = std::numbers::ln10;

template <typename T>
void check_pair(const Spectrogram<T>& est, const Spectrogram<T>& ref,
                const char* what) {
  if (est.real.shape() != ref.real.shape() ||
      est.imag.shape() != ref.imag.shape() ||
      est.real.shape() != est.imag.shape()) {
    throw ShapeError(std::string(what) + ": estimate " +
                     shape_string(est.real.shape()) + " vs reference " +
                     shape_string(ref.real.shape()));
  }
}

template <typename T>
void init_grad(const Spectrogram<T>& like, Spectrogram<T>* grad) {
  if (grad) *grad = Spectrogram<T>(like.bins(), like.frames(), like.config);
}

double floored_log10(double mag, double floor) {
  return std::log10(std::max(mag, floor));
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must be in [0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be > 0");
  if (!(cmse_weight >= 0.0 && lsd_weight >= 0.0)) {
    throw ConfigError("auxiliary loss weights must be >= 0");
  }
}

template <typename T>
double loss_mag(const Spectrogram<T>& est, const Spectrogram<T>& ref,
                double log_floor, Spectrogram<T>* grad) {
  check_pair(est, ref, "loss_mag");
  init_grad(est, grad);
  const std::size_t n = est.real.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double er = est.real[i], ei = est.imag[i];
    const double em = std::sqrt(er * er + ei * ei);
    const double rm = std::sqrt(double(ref.real[i]) * ref.real[i] +
                                double(ref.imag[i]) * ref.imag[i]);
    const double diff = floored_log10(em, log_floor) - floored_log10(rm, log_floor);
    sum += diff * diff;
    if (grad && em > log_floor) {
      const double dm = 2.0 * diff / (double(n) * kLn10 * em);
      grad->real[i] = static_cast<T>(dm * er / em);
      grad->imag[i] = static_cast<T>(dm * ei / em);
    }
  }
  return sum / double(n);
}

template <typename T>
double loss_complex(const Spectrogram<T>& est, const Spectrogram<T>& ref,
                    Spectrogram<T>* grad) {
  check_pair(est, ref, "loss_complex");
  init_grad(est, grad);
  const std::size_t n = est.real.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dr = double(est.real[i]) - double(ref.real[i]);
    const double di = double(est.imag[i]) - double(ref.imag[i]);
    sum += dr * dr + di * di;
    if (grad) {
      grad->real[i] = static_cast<T>(2.0 * dr / double(n));
      grad->imag[i] = static_cast<T>(2.0 * di / double(n));
    }
  }
  return sum / double(n);
}

template <typename T>
double loss_stft(const Spectrogram<T>& est, const Spectrogram<T>& ref,
                 const LossWeights& w, Spectrogram<T>* grad) {
  w.validate();
  Spectrogram<T> gm, gc;
  const double mag = loss_mag(est, ref, w.log_floor, grad ? &gm : nullptr);
  const double cpx = loss_complex(est, ref, grad ? &gc : nullptr);
  if (grad) {
    init_grad(est, grad);
    for (std::size_t i = 0; i < gm.real.size(); ++i) {
      grad->real[i] = static_cast<T>((1.0 - w.beta) * gm.real[i] + w.beta * gc.real[i]);
      grad->imag[i] = static_cast<T>((1.0 - w.beta) * gm.imag[i] + w.beta * gc.imag[i]);
    }
  }
  return (1.0 - w.beta) * mag + w.beta * cpx;
}

template <typename T>
double si_sdr(std::span<const T> est, std::span<const T> ref, double epsilon,
              std::vector<T>* grad) {
  if (est.size() != ref.size()) {
    throw ShapeError("si_sdr: estimate has " + std::to_string(est.size()) +
                     " samples, reference " + std::to_string(ref.size()));
  }
  double ref_energy = 0.0, cross = 0.0, est_energy = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ref_energy += double(ref[i]) * ref[i];
    cross += double(est[i]) * ref[i];
    est_energy += double(est[i]) * est[i];
  }
  if (!(ref_energy > 0.0)) throw DataError("si_sdr: reference is all zeros");
  const double scale = cross / ref_energy;
  const double target = cross * scale;
  // Residual energy from the explicit residual, not est_energy - target,
  // which cancels catastrophically for near-perfect estimates.
  double residual = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double e = double(est[i]) - scale * ref[i];
    residual += e * e;
  }
  // The guard scales with the target energy, so the ratio is invariant to
  // the estimate's gain; epsilon = 10^(-cap/10) puts a perfect estimate at
  // the cap.
  const double denom = residual + epsilon * target;
  double value;
  bool clamped = false;
  if (!(target > 0.0)) {
    value = -kSiSdrCapDb;
    clamped = true;
  } else {
    value = 10.0 * std::log10(target / denom);
    if (value > kSiSdrCapDb || value < -kSiSdrCapDb) {
      value = std::clamp(value, -kSiSdrCapDb, kSiSdrCapDb);
      clamped = true;
    }
  }
  if (grad) {
    grad->assign(est.size(), T(0));
    if (!clamped) {
      const double c = 10.0 / kLn10;
      for (std::size_t i = 0; i < est.size(); ++i) {
        const double e = double(est[i]) - scale * ref[i];
        const double dt = 2.0 * scale * ref[i];
        (*grad)[i] = static_cast<T>(
            c * (dt / target - (2.0 * e + epsilon * dt) / denom));
      }
    }
  }
  return value;
}

template <typename T>
double loss_time_sisdr(std::span<const T> est, std::span<const T> ref,
                       double epsilon, std::vector<T>* grad) {
  const double v = si_sdr(est, ref, epsilon, grad);
  if (grad) {
    for (auto& g : *grad) g = -g;
  }
  return -v;
}

template <typename T>
double lsd(const Spectrogram<T>& est, const Spectrogram<T>& ref,
           double log_floor, Spectrogram<T>* grad) {
  check_pair(est, ref, "lsd");
  init_grad(est, grad);
  const std::size_t F = est.bins(), frames = est.frames();
  double total = 0.0;
  std::vector<double> diff(F);
  for (std::size_t t = 0; t < frames; ++t) {
    double ms = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t i = f * frames + t;
      const double em = std::hypot(double(est.real[i]), double(est.imag[i]));
      const double rm = std::hypot(double(ref.real[i]), double(ref.imag[i]));
      diff[f] = 20.0 * (floored_log10(em, log_floor) - floored_log10(rm, log_floor));
      ms += diff[f] * diff[f];
    }
    ms /= double(F);
    const double rms = std::sqrt(ms);
    total += rms;
    if (grad && rms > 0.0) {
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t i = f * frames + t;
        const double er = est.real[i], ei = est.imag[i];
        const double em = std::sqrt(er * er + ei * ei);
        if (em <= log_floor) continue;
        const double dd = diff[f] / (double(frames) * double(F) * rms);
        const double dm = dd * 20.0 / (kLn10 * em);
        grad->real[i] = static_cast<T>(dm * er / em);
        grad->imag[i] = static_cast<T>(dm * ei / em);
      }
    }
  }
  return total / double(frames);
}

template <typename T>
LossBreakdown total_loss(const Spectrogram<T>& est_spec,
                         const Spectrogram<T>& ref_spec,
                         std::span<const T> est_wave,
                         std::span<const T> ref_wave, const LossWeights& w,
                         Spectrogram<T>* grad_spec, std::vector<T>* grad_wave) {
  w.validate();
  LossBreakdown b;
  Spectrogram<T> gm, gc, gl;
  const bool want = grad_spec != nullptr;
  b.mag = loss_mag(est_spec, ref_spec, w.log_floor, want ? &gm : nullptr);
  b.complex = loss_complex(est_spec, ref_spec, want ? &gc : nullptr);
  b.cmse = b.complex;
  b.lsd = lsd(est_spec, ref_spec, w.log_floor,
              want && w.lsd_weight > 0.0 ? &gl : nullptr);
  b.stft = (1.0 - w.beta) * b.mag + w.beta * b.complex;
  b.time = loss_time_sisdr(est_wave, ref_wave, w.epsilon, grad_wave);
  b.total = b.stft + w.alpha * b.time + w.cmse_weight * b.cmse +
            w.lsd_weight * b.lsd;
  if (grad_wave) {
    for (auto& g : *grad_wave) g = static_cast<T>(w.alpha * g);
  }
  if (want) {
    init_grad(est_spec, grad_spec);
    const double wc = w.beta + w.cmse_weight;
    for (std::size_t i = 0; i < gm.real.size(); ++i) {
      double gr = (1.0 - w.beta) * gm.real[i] + wc * gc.real[i];
      double gi = (1.0 - w.beta) * gm.imag[i] + wc * gc.imag[i];
      if (w.lsd_weight > 0.0) {
        gr += w.lsd_weight * gl.real[i];
        gi += w.lsd_weight * gl.imag[i];
      }
      grad_spec->real[i] = static_cast<T>(gr);
      grad_spec->imag[i] = static_cast<T>(gi);
    }
  }
  return b;
}

template <typename T>
Var total_loss_op(Tape<T>& tape, Var output, const Spectrogram<T>& ref_spec,
                  std::span<const T> ref_wave, const LossWeights& w,
                  LossBreakdown* breakdown) {
  const Tensor<T>& out = tape.value(output);
  if (out.rank() != 4 || out.dim(0) != 1 || out.dim(1) != 2 ||
      out.dim(2) != ref_spec.bins() || out.dim(3) != ref_spec.frames()) {
    throw ShapeError("total_loss_op: output " + shape_string(out.shape()) +
                     " does not match reference spectrogram [" +
                     std::to_string(ref_spec.bins()) + ", " +
                     std::to_string(ref_spec.frames()) + "]");
  }
  const std::size_t n = ref_spec.real.size();
  Spectrogram<T> est(ref_spec.bins(), ref_spec.frames(), ref_spec.config);
  std::copy(out.data(), out.data() + n, est.real.data());
  std::copy(out.data() + n, out.data() + 2 * n, est.imag.data());
  const auto wave = istft(est, ref_wave.size());
  const bool want = tape.requires_grad(output);
  Spectrogram<T> grad_spec;
  std::vector<T> grad_wave;
  LossBreakdown b = total_loss<T>(est, ref_spec, wave, ref_wave, w,
                                  want ? &grad_spec : nullptr,
                                  want ? &grad_wave : nullptr);
  if (breakdown) *breakdown = b;
  Tensor<T> grad_out;
  if (want) {
    const auto from_wave = istft_backward<T>(est, grad_wave);
    grad_out = Tensor<T>(out.shape());
    for (std::size_t i = 0; i < n; ++i) {
      grad_out[i] = grad_spec.real[i] + from_wave.real[i];
      grad_out[n + i] = grad_spec.imag[i] + from_wave.imag[i];
    }
  }
  return tape.push(
      Tensor<T>({1}, static_cast<T>(b.total)), {output},
      [output, grad_out = std::move(grad_out)](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& go = t.grad(output);
        for (std::size_t i = 0; i < go.size(); ++i) go[i] += g[0] * grad_out[i];
      },
      "total_loss");
}

#define DRONESE_INSTANTIATE(T)                                                 \
  template double loss_mag<T>(const Spectrogram<T>&, const Spectrogram<T>&,    \
                              double, Spectrogram<T>*);                        \
  template double loss_complex<T>(const Spectrogram<T>&, const Spectrogram<T>&, \
                                  Spectrogram<T>*);                            \
  template double loss_stft<T>(const Spectrogram<T>&, const Spectrogram<T>&,   \
                               const LossWeights&, Spectrogram<T>*);           \
  template double si_sdr<T>(std::span<const T>, std::span<const T>, double,    \
                            std::vector<T>*);                                  \
  template double loss_time_sisdr<T>(std::span<const T>, std::span<const T>,   \
                                     double, std::vector<T>*);                 \
  template double lsd<T>(const Spectrogram<T>&, const Spectrogram<T>&, double, \
                         Spectrogram<T>*);                                     \
  template LossBreakdown total_loss<T>(                                        \
      const Spectrogram<T>&, const Spectrogram<T>&, std::span<const T>,        \
      std::span<const T>, const LossWeights&, Spectrogram<T>*,                 \
      std::vector<T>*);                                                        \
  template Var total_loss_op<T>(Tape<T>&, Var, const Spectrogram<T>&,          \
                                std::span<const T>, const LossWeights&,        \
                                LossBreakdown*);

DRONESE_INSTANTIATE(float)
DRONESE_INSTANTIATE(double)

}  // namespace dronese

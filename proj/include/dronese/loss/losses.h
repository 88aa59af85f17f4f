// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Training objective: spectral (log-magnitude and complex) terms mixed by
// beta, plus alpha times negative SI-SDR on the resynthesized waveform.
// Every loss optionally writes its gradient with respect to the estimate.

#pragma once

#include <span>
#include <vector>

#include "dronese/numerics/tape.h"
#include "dronese/spectral/stft.h"

namespace dronese {

inline constexpr double kSiSdrCapDb = 100.0;
inline constexpr double kSiSdrEpsilon = 1e-10;

struct LossWeights {
  double alpha = 0.5;
  double beta = 0.7;
  // SI-SDR guard relative to the target energy.
  double epsilon = kSiSdrEpsilon;
  double log_floor = 1e-8;
  // Auxiliary terms; zero means monitoring only.
  double cmse_weight = 0.0;
  double lsd_weight = 0.0;

  void validate() const;
};


// Mean squared log10-magnitude difference with magnitudes floored.
template <typename T>
double loss_mag(const Spectrogram<T>& est, const Spectrogram<T>& ref,
                double log_floor = 1e-8, Spectrogram<T>* grad = nullptr);

// Mean squared modulus of the complex difference.
template <typename T>
double loss_complex(const Spectrogram<T>& est, const Spectrogram<T>& ref,
                    Spectrogram<T>* grad = nullptr);

template <typename T>
double loss_stft(const Spectrogram<T>& est, const Spectrogram<T>& ref,
                 const LossWeights& w, Spectrogram<T>* grad = nullptr);

// SI-SDR in dB with the reference-side projection:
// 10 log10(|s_t|^2 / (|e|^2 + epsilon |s_t|^2)), clamped to
// [-kSiSdrCapDb, kSiSdrCapDb]. The gradient is zero when clamped.
template <typename T>
double si_sdr(std::span<const T> est, std::span<const T> ref,
              double epsilon = kSiSdrEpsilon, std::vector<T>* grad = nullptr);

// -si_sdr.
template <typename T>
double loss_time_sisdr(std::span<const T> est, std::span<const T> ref,
                       double epsilon = kSiSdrEpsilon,
                       std::vector<T>* grad = nullptr);

// Mean over frames of the RMS (over bins) 20 log10 magnitude difference.
template <typename T>
double lsd(const Spectrogram<T>& est, const Spectrogram<T>& ref,
           double log_floor = 1e-8, Spectrogram<T>* grad = nullptr);

template <typename T>
double cmse(const Spectrogram<T>& est, const Spectrogram<T>& ref,
            Spectrogram<T>* grad = nullptr) {
  return loss_complex(est, ref, grad);
}

struct LossBreakdown {
  double total = 0.0;
  double stft = 0.0;
  double mag = 0.0;
  double complex = 0.0;
  double time = 0.0;
  double lsd = 0.0;
  double cmse = 0.0;
};

// loss_stft + alpha * loss_time (+ weighted auxiliaries). Gradients, when
// requested, are with respect to the spectrum and the waveform separately.
template <typename T>
LossBreakdown total_loss(const Spectrogram<T>& est_spec,
                         const Spectrogram<T>& ref_spec,
                         std::span<const T> est_wave,
                         std::span<const T> ref_wave, const LossWeights& w,
                         Spectrogram<T>* grad_spec = nullptr,
                         std::vector<T>* grad_wave = nullptr);

// Tape op over a [1, 2, F, T] network output: resynthesizes the waveform to
// ref_wave.size() samples and returns the scalar total loss. The backward
// routes the waveform gradient through the inverse STFT.
template <typename T>
Var total_loss_op(Tape<T>& tape, Var output, const Spectrogram<T>& ref_spec,
                  std::span<const T> ref_wave, const LossWeights& w,
                  LossBreakdown* breakdown = nullptr);

}  // namespace dronese

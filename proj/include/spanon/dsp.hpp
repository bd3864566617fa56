#pragma once

#include <complex>
#include <string>
#include <vector>

#include "spanon/audio_io.hpp"
#include "spanon/common.hpp"

namespace spanon {

struct FeatureConfig {
  int n_mels = 40;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  int sample_rate = 16000;

  int window_samples() const;
  int hop_samples() const;
  size_t bins() const { return size_t(fft_size) / 2 + 1; }
  void validate() const;
};

// The two named feature configurations used throughout: a 40-mel / fft 512
// setup for speaker verification features and an 80-mel / fft 1024 setup for
// the pathology classifier; both 25 ms windows with 10 ms hops.
FeatureConfig asv_preset(int sample_rate = 16000);
FeatureConfig classifier_preset(int sample_rate = 16000);

struct Spectrogram {
  std::vector<std::vector<std::complex<double>>> frames;  // frames x (fft/2+1)
  FeatureConfig config;
};

struct MelSpectrogram {
  std::vector<std::vector<double>> frames;  // frames x n_mels, natural-log energies
  FeatureConfig config;
  std::string source_id;
};

struct PsdCurve {
  std::vector<double> freqs;  // Hz, strictly increasing
  std::vector<double> power;  // linear density, non-negative
  int segment_size = 0;
};

// Rational filter b(z)/a(z); a[0] must be nonzero (normalized internally).
struct FilterSpec {
  std::vector<double> b;
  std::vector<double> a;
};

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& x, bool inverse);

std::vector<double> hann_window(int n);  // periodic variant
size_t frame_count(size_t len, int window, int hop);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

Spectrogram stft(const AudioClip& clip, const FeatureConfig& config);

// Weighted overlap-add with window-squared normalization -- the least-squares
// inverse of stft; reconstructs the fully-overlapped interior exactly.
AudioClip istft_overlap_add(const Spectrogram& spec, const FeatureConfig& config);

// Triangular filters, centers equally spaced on the mel axis over [0, fs/2].
std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& config);

MelSpectrogram compute_log_mel(const AudioClip& clip, const FeatureConfig& config);

// Welch PSD: Hann-windowed 50%-overlap segments, density normalization
// |X|^2/(fs*sum w^2), one-sided doubling except DC/Nyquist.
PsdCurve compute_psd(const AudioClip& clip, int segment_size);

// First-order high-pass (bilinear transform), the default drift-removal filter.
FilterSpec highpass_filter(double cutoff_hz, int sample_rate);

// Forward pass then time-reversed pass: zero phase distortion.
AudioClip zero_phase_filter(const AudioClip& clip, const FilterSpec& filter);

// Iterative phase reconstruction from one-sided magnitudes. If error_trace is
// given it receives the spectral-convergence error of each iteration.
AudioClip griffin_lim(const std::vector<std::vector<double>>& magnitudes, const FeatureConfig& config,
                      int iterations, std::vector<double>* error_trace = nullptr);

// Non-negative least-squares inversion of the mel filterbank back to linear
// magnitudes (multiplicative updates), for mel-domain resynthesis.
std::vector<std::vector<double>> invert_mel_to_magnitude(const MelSpectrogram& mel);

// Textual feature dump: one header line, then one space-separated line per frame.
std::string mel_to_text(const MelSpectrogram& mel);

}  // namespace spanon

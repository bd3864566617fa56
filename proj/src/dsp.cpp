#include "spanon/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "spanon/polyroots.hpp"

namespace spanon {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<std::complex<double>> full_spectrum(const std::vector<std::complex<double>>& half, int fft_size) {
  std::vector<std::complex<double>> full(fft_size);
  for (int k = 0; k <= fft_size / 2; ++k) full[k] = half[k];
  for (int k = 1; k < fft_size / 2; ++k) full[fft_size - k] = std::conj(half[k]);
  return full;
}

}  // namespace

int FeatureConfig::window_samples() const { return int(std::lround(window_ms * sample_rate / 1000.0)); }
int FeatureConfig::hop_samples() const { return int(std::lround(hop_ms * sample_rate / 1000.0)); }

void FeatureConfig::validate() const {
  if (sample_rate <= 0) throw DataError("feature config: sample_rate must be positive");
  if (n_mels < 1) throw DataError("feature config: n_mels must be >= 1");
  if (!is_pow2(fft_size)) throw DataError("feature config: fft_size must be a power of two");
  if (window_samples() < 1) throw DataError("feature config: window too short");
  if (hop_samples() < 1) throw DataError("feature config: hop too short");
  if (hop_ms > window_ms) throw DataError("feature config: hop_ms must be <= window_ms");
  if (fft_size < window_samples()) throw DataError("feature config: fft_size must be >= window samples");
}

FeatureConfig asv_preset(int sample_rate) { return FeatureConfig{40, 25.0, 10.0, 512, sample_rate}; }
FeatureConfig classifier_preset(int sample_rate) { return FeatureConfig{80, 25.0, 10.0, 1024, sample_rate}; }

void fft_inplace(std::vector<std::complex<double>>& x, bool inverse) {
  size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0) throw DataError("fft size must be a power of two");
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * M_PI / double(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = x[i + k];
        std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    double inv = 1.0 / double(n);
    for (auto& v : x) v *= inv;
  }
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(i) / double(n)));
  return w;
}

size_t frame_count(size_t len, int window, int hop) {
  if (len < size_t(window)) return 0;
  return (len - size_t(window)) / size_t(hop) + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Spectrogram stft(const AudioClip& clip, const FeatureConfig& config) {
  config.validate();
  int win = config.window_samples();
  int hop = config.hop_samples();
  size_t n_frames = frame_count(clip.samples.size(), win, hop);
  if (n_frames == 0) throw DataError("clip shorter than one window");

  std::vector<double> w = hann_window(win);
  Spectrogram out;
  out.config = config;
  out.frames.resize(n_frames);
  std::vector<std::complex<double>> buf(config.fft_size);
  for (size_t f = 0; f < n_frames; ++f) {
    size_t start = f * size_t(hop);
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int i = 0; i < win; ++i) buf[i] = clip.samples[start + i] * w[i];
    fft_inplace(buf, false);
    out.frames[f].assign(buf.begin(), buf.begin() + long(config.bins()));
  }
  return out;
}

AudioClip istft_overlap_add(const Spectrogram& spec, const FeatureConfig& config) {
  config.validate();
  size_t bins = config.bins();
  for (const auto& fr : spec.frames)
    if (fr.size() != bins) throw DataError("inconsistent bin count");
  int win = config.window_samples();
  int hop = config.hop_samples();
  size_t n_frames = spec.frames.size();

  AudioClip out;
  out.sample_rate = config.sample_rate;
  if (n_frames == 0) return out;
  size_t len = (n_frames - 1) * size_t(hop) + size_t(win);
  out.samples.assign(len, 0.0);
  std::vector<double> norm(len, 0.0);
  std::vector<double> w = hann_window(win);

  for (size_t f = 0; f < n_frames; ++f) {
    auto full = full_spectrum(spec.frames[f], config.fft_size);
    fft_inplace(full, true);
    size_t start = f * size_t(hop);
    for (int i = 0; i < win; ++i) {
      out.samples[start + i] += w[i] * full[i].real();
      norm[start + i] += w[i] * w[i];
    }
  }
  for (size_t i = 0; i < len; ++i) out.samples[i] = norm[i] > 1e-12 ? out.samples[i] / norm[i] : 0.0;
  return out;
}

std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& config) {
  config.validate();
  size_t bins = config.bins();
  double mel_hi = hz_to_mel(double(config.sample_rate) / 2.0);
  std::vector<double> edges(config.n_mels + 2);
  for (int i = 0; i < config.n_mels + 2; ++i) edges[i] = mel_to_hz(mel_hi * double(i) / double(config.n_mels + 1));

  std::vector<std::vector<double>> fb(config.n_mels, std::vector<double>(bins, 0.0));
  for (int m = 0; m < config.n_mels; ++m) {
    double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double sum = 0.0;
    for (size_t k = 0; k < bins; ++k) {
      double f = double(k) * config.sample_rate / config.fft_size;
      double up = (f - lo) / std::max(mid - lo, 1e-12);
      double down = (hi - f) / std::max(hi - mid, 1e-12);
      double v = std::max(0.0, std::min(up, down));
      fb[m][k] = v;
      sum += v;
    }
    if (sum <= 0.0) throw DataError("n_mels too large for fft resolution (empty mel triangle)");
  }
  return fb;
}

MelSpectrogram compute_log_mel(const AudioClip& clip, const FeatureConfig& config) {
  Spectrogram spec = stft(clip, config);
  auto fb = mel_filterbank(config);
  const double floor_e = 1e-10;

  MelSpectrogram mel;
  mel.config = config;
  mel.source_id = clip.source_id;
  mel.frames.resize(spec.frames.size());
  size_t bins = config.bins();
  std::vector<double> power(bins);
  for (size_t f = 0; f < spec.frames.size(); ++f) {
    for (size_t k = 0; k < bins; ++k) power[k] = std::norm(spec.frames[f][k]);
    mel.frames[f].resize(config.n_mels);
    for (int m = 0; m < config.n_mels; ++m) {
      double e = 0.0;
      for (size_t k = 0; k < bins; ++k) e += fb[m][k] * power[k];
      mel.frames[f][m] = std::log(std::max(e, floor_e));
    }
  }
  return mel;
}

PsdCurve compute_psd(const AudioClip& clip, int segment_size) {
  if (!is_pow2(segment_size)) throw DataError("psd segment size must be a power of two");
  if (clip.sample_rate <= 0) throw DataError("invalid sample rate");
  if (clip.samples.size() < size_t(segment_size)) throw DataError("clip shorter than one segment");

  int hop = segment_size / 2;
  size_t n_seg = frame_count(clip.samples.size(), segment_size, hop);
  std::vector<double> w = hann_window(segment_size);
  double u = 0.0;
  for (double v : w) u += v * v;

  size_t bins = size_t(segment_size) / 2 + 1;
  PsdCurve psd;
  psd.segment_size = segment_size;
  psd.freqs.resize(bins);
  psd.power.assign(bins, 0.0);
  for (size_t k = 0; k < bins; ++k) psd.freqs[k] = double(k) * clip.sample_rate / segment_size;

  std::vector<std::complex<double>> buf(segment_size);
  for (size_t s = 0; s < n_seg; ++s) {
    size_t start = s * size_t(hop);
    for (int i = 0; i < segment_size; ++i) buf[i] = clip.samples[start + i] * w[i];
    fft_inplace(buf, false);
    for (size_t k = 0; k < bins; ++k) psd.power[k] += std::norm(buf[k]);
  }
  double scale = 1.0 / (double(clip.sample_rate) * u * double(n_seg));
  for (size_t k = 0; k < bins; ++k) {
    psd.power[k] *= scale;
    if (k != 0 && k != bins - 1) psd.power[k] *= 2.0;  // one-sided doubling
  }
  return psd;
}

FilterSpec highpass_filter(double cutoff_hz, int sample_rate) {
  // first-order Butterworth via bilinear transform
  double k = std::tan(M_PI * cutoff_hz / sample_rate);
  double norm = 1.0 / (1.0 + k);
  return FilterSpec{{norm, -norm}, {1.0, (k - 1.0) / (1.0 + k)}};
}

namespace {

std::vector<double> filter_once(const std::vector<double>& x, const std::vector<double>& bb,
                                const std::vector<double>& aa, const std::vector<double>& zi,
                                double zi_scale) {
  // direct form II transposed; bb/aa already padded to equal length
  size_t order = bb.size();
  size_t n_state = order > 0 ? order - 1 : 0;
  std::vector<double> z(n_state);
  for (size_t i = 0; i < n_state; ++i) z[i] = zi[i] * zi_scale;
  std::vector<double> y(x.size());
  for (size_t n = 0; n < x.size(); ++n) {
    double out = bb[0] * x[n] + (n_state ? z[0] : 0.0);
    for (size_t i = 0; i + 1 < n_state; ++i) z[i] = bb[i + 1] * x[n] + z[i + 1] - aa[i + 1] * out;
    if (n_state) z[n_state - 1] = bb[order - 1] * x[n] - aa[order - 1] * out;
    y[n] = out;
  }
  return y;
}

std::vector<double> steady_state_zi(const std::vector<double>& bb, const std::vector<double>& aa) {
  // state that puts the filter in steady state for a unit step input
  size_t order = bb.size();
  size_t n_state = order > 0 ? order - 1 : 0;
  double sb = 0.0, sa = 0.0;
  for (double v : bb) sb += v;
  for (double v : aa) sa += v;
  double dc = sb / sa;  // sa != 0 once stability is established
  std::vector<double> zi(n_state, 0.0);
  for (size_t i = n_state; i-- > 0;)
    zi[i] = (i + 1 < n_state ? zi[i + 1] : 0.0) + bb[i + 1] - aa[i + 1] * dc;
  return zi;
}

}  // namespace

AudioClip zero_phase_filter(const AudioClip& clip, const FilterSpec& filter) {
  if (filter.a.empty() || filter.a[0] == 0.0) throw DataError("filter denominator must start nonzero");
  std::vector<double> b(filter.b), a(filter.a);
  for (auto& v : b) v /= filter.a[0];
  for (auto& v : a) v /= filter.a[0];

  double slowest = 0.0;
  if (a.size() > 1) {
    std::vector<double> poly(a.begin() + 1, a.end());
    for (auto r : monic_roots(poly)) {
      if (std::abs(r) >= 1.0) throw DataError("unstable filter specification");
      slowest = std::max(slowest, std::abs(r));
    }
  }

  AudioClip out = clip;
  size_t n = clip.samples.size();
  if (n == 0) return out;

  size_t order = std::max(b.size(), a.size());
  std::vector<double> bb(order, 0.0), aa(order, 0.0);
  std::copy(b.begin(), b.end(), bb.begin());
  std::copy(a.begin(), a.end(), aa.begin());

  // reflect-pad far enough for startup transients to decay below double noise
  size_t pad = 3 * order;
  if (slowest > 0.0)
    pad = std::max(pad, size_t(std::min(std::log(1e-18) / std::log(slowest), 1e5)) + 1);
  pad = std::min(pad, n - 1);

  std::vector<double> x;
  x.reserve(n + 2 * pad);
  for (size_t i = 0; i < pad; ++i) x.push_back(2.0 * clip.samples[0] - clip.samples[pad - i]);
  x.insert(x.end(), clip.samples.begin(), clip.samples.end());
  for (size_t i = 0; i < pad; ++i) x.push_back(2.0 * clip.samples[n - 1] - clip.samples[n - 2 - i]);

  std::vector<double> zi = steady_state_zi(bb, aa);
  std::vector<double> y = filter_once(x, bb, aa, zi, x.front());
  std::reverse(y.begin(), y.end());
  y = filter_once(y, bb, aa, zi, y.front());
  std::reverse(y.begin(), y.end());
  out.samples.assign(y.begin() + pad, y.begin() + pad + n);
  return out;
}

namespace {

double spectral_convergence(const std::vector<std::vector<double>>& target, const Spectrogram& actual) {
  double num = 0.0, den = 0.0;
  for (size_t f = 0; f < target.size(); ++f)
    for (size_t k = 0; k < target[f].size(); ++k) {
      double d = std::abs(actual.frames[f][k]) - target[f][k];
      num += d * d;
      den += target[f][k] * target[f][k];
    }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

AudioClip griffin_lim(const std::vector<std::vector<double>>& magnitudes, const FeatureConfig& config,
                      int iterations, std::vector<double>* error_trace) {
  config.validate();
  if (iterations < 1) throw UsageError("griffin_lim iterations must be >= 1");
  size_t bins = config.bins();
  for (const auto& fr : magnitudes) {
    if (fr.size() != bins) throw DataError("inconsistent bin count");
    for (double m : fr)
      if (!(m >= 0.0)) throw DataError("negative magnitudes");
  }
  if (error_trace) error_trace->clear();

  Spectrogram spec;
  spec.config = config;
  spec.frames.resize(magnitudes.size());
  // zero-phase init keeps the whole reconstruction deterministic
  for (size_t f = 0; f < magnitudes.size(); ++f) {
    spec.frames[f].resize(bins);
    for (size_t k = 0; k < bins; ++k) spec.frames[f][k] = std::complex<double>(magnitudes[f][k], 0.0);
  }
  AudioClip x = istft_overlap_add(spec, config);
  if (x.samples.empty()) return x;

  for (int it = 0; it < iterations; ++it) {
    Spectrogram r = stft(x, config);
    if (error_trace) error_trace->push_back(spectral_convergence(magnitudes, r));
    for (size_t f = 0; f < magnitudes.size(); ++f)
      for (size_t k = 0; k < bins; ++k) {
        double mag = std::abs(r.frames[f][k]);
        std::complex<double> phase =
            mag > 1e-300 ? r.frames[f][k] / mag : std::complex<double>(1.0, 0.0);
        spec.frames[f][k] = magnitudes[f][k] * phase;
      }
    x = istft_overlap_add(spec, config);
  }
  return x;
}

std::vector<std::vector<double>> invert_mel_to_magnitude(const MelSpectrogram& mel) {
  const FeatureConfig& config = mel.config;
  auto fb = mel_filterbank(config);
  size_t bins = config.bins();
  int n_mels = config.n_mels;

  // column sums of the filterbank, for the transpose-normalized initial guess
  std::vector<double> colsum(bins, 0.0);
  for (int m = 0; m < n_mels; ++m)
    for (size_t k = 0; k < bins; ++k) colsum[k] += fb[m][k];

  std::vector<std::vector<double>> out(mel.frames.size());
  std::vector<double> e(n_mels), p(bins), num(bins), den(bins), mp(n_mels);
  for (size_t f = 0; f < mel.frames.size(); ++f) {
    for (int m = 0; m < n_mels; ++m) e[m] = std::exp(mel.frames[f][m]);
    // init: normalized transpose estimate
    for (size_t k = 0; k < bins; ++k) {
      double acc = 0.0;
      for (int m = 0; m < n_mels; ++m) acc += fb[m][k] * e[m];
      p[k] = colsum[k] > 1e-12 ? acc / colsum[k] : 0.0;
      num[k] = acc;
    }
    // multiplicative least-squares updates keep p non-negative
    for (int it = 0; it < 20; ++it) {
      for (int m = 0; m < n_mels; ++m) {
        double acc = 0.0;
        for (size_t k = 0; k < bins; ++k) acc += fb[m][k] * p[k];
        mp[m] = acc;
      }
      for (size_t k = 0; k < bins; ++k) {
        double acc = 0.0;
        for (int m = 0; m < n_mels; ++m) acc += fb[m][k] * mp[m];
        den[k] = acc;
        if (den[k] > 1e-30) p[k] *= num[k] / den[k];
      }
    }
    out[f].resize(bins);
    for (size_t k = 0; k < bins; ++k) out[f][k] = std::sqrt(std::max(p[k], 0.0));
  }
  return out;
}

std::string mel_to_text(const MelSpectrogram& mel) {
  char buf[64];
  std::string s;
  std::snprintf(buf, sizeof buf, "n_mels=%d", mel.config.n_mels);
  s += buf;
  std::snprintf(buf, sizeof buf, " window_ms=%g", mel.config.window_ms);
  s += buf;
  std::snprintf(buf, sizeof buf, " hop_ms=%g", mel.config.hop_ms);
  s += buf;
  std::snprintf(buf, sizeof buf, " fft_size=%d", mel.config.fft_size);
  s += buf;
  std::snprintf(buf, sizeof buf, " sample_rate=%d", mel.config.sample_rate);
  s += buf;
  std::snprintf(buf, sizeof buf, " frames=%zu\n", mel.frames.size());
  s += buf;
  for (const auto& fr : mel.frames) {
    for (size_t i = 0; i < fr.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", fr[i]);
      if (i) s += ' ';
      s += buf;
    }
    s += '\n';
  }
  return s;
}

}  // namespace spanon

#include "spanon/anonymize.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <json.hpp>

#include "spanon/dsp.hpp"
#include "spanon/polyroots.hpp"

namespace spanon {

namespace {

using cd = std::complex<double>;

constexpr double kRadiusCap = 1.0 - 1e-6;
constexpr double kRealTol = 1e-9;

double princarg(double phase) {
  return phase - 2.0 * M_PI * std::floor((phase + M_PI) / (2.0 * M_PI));
}

FeatureConfig fft_frame_config(int sample_rate, int fft_size, int window, int hop) {
  FeatureConfig cfg;
  cfg.n_mels = 1;
  cfg.fft_size = fft_size;
  cfg.sample_rate = sample_rate;
  cfg.window_ms = double(window) * 1000.0 / sample_rate;
  cfg.hop_ms = double(hop) * 1000.0 / sample_rate;
  return cfg;
}

}  // namespace

void McAdamsConfig::validate() const {
  if (!(alpha_min > 0.0) || !(alpha_max <= 1.2) || alpha_min > alpha_max)
    throw UsageError("invalid range: alpha bounds must satisfy 0 < alpha_min <= alpha_max <= 1.2");
  if (lpc_order < 2) throw UsageError("lpc_order must be >= 2");
  if (frame_ms <= 0 || hop_ms <= 0 || hop_ms > frame_ms) throw UsageError("invalid mcadams frame/hop");
  if (!(angle_epsilon > 0.0) || angle_epsilon >= M_PI / 2) throw UsageError("invalid angle_epsilon");
}

void PitchShiftConfig::validate() const {
  if (!(semitone_min > 0.0) || semitone_min > semitone_max || semitone_max > 12.0)
    throw UsageError("invalid range: semitone bounds must satisfy 0 < min <= max <= 12");
  if (vocoder_iterations < 1) throw UsageError("vocoder_iterations must be >= 1");
}

LpcFrameModel lpc_analyze(const std::vector<double>& frame, int order) {
  if (order < 1) throw DataError("lpc order must be >= 1");
  if (frame.size() <= size_t(order)) throw DataError("lpc order must be smaller than the frame length");

  LpcFrameModel model;
  model.order = order;
  model.coeffs.assign(size_t(order), 0.0);

  std::vector<double> r(size_t(order) + 1, 0.0);
  for (int k = 0; k <= order; ++k)
    for (size_t n = size_t(k); n < frame.size(); ++n) r[size_t(k)] += frame[n] * frame[n - size_t(k)];

  if (r[0] <= 1e-12) {
    model.silent = true;
    model.gain = 0.0;
    return model;  // flat model for silent frames
  }
  r[0] *= 1.0 + 1e-9;  // tiny ridge keeps pure tones non-singular

  double err = r[0];
  std::vector<double>& a = model.coeffs;
  std::vector<double> prev(size_t(order), 0.0);
  for (int i = 1; i <= order; ++i) {
    double acc = r[size_t(i)];
    for (int j = 1; j < i; ++j) acc -= a[size_t(j - 1)] * r[size_t(i - j)];
    double k = acc / err;
    if (k > 0.999999) k = 0.999999;
    if (k < -0.999999) k = -0.999999;
    std::copy(a.begin(), a.begin() + (i - 1), prev.begin());
    a[size_t(i - 1)] = k;
    for (int j = 1; j < i; ++j) a[size_t(j - 1)] = prev[size_t(j - 1)] - k * prev[size_t(i - 1 - j)];
    err *= (1.0 - k * k);
    if (err <= 1e-15 * r[0]) break;  // perfectly predictable; higher orders stay zero
  }
  model.gain = err;
  model.poles = find_poles(model.coeffs);
  return model;
}

std::vector<Pole> find_poles(const std::vector<double>& coeffs) {
  for (double c : coeffs)
    if (!std::isfinite(c)) throw DataError("non-finite prediction coefficient");
  size_t degree = coeffs.size();
  while (degree > 0 && std::fabs(coeffs[degree - 1]) < 1e-14) --degree;
  if (degree == 0) return {};

  // poles of 1/A(z) are the roots of z^p - a1 z^(p-1) - ... - ap
  std::vector<double> monic(degree);
  for (size_t i = 0; i < degree; ++i) monic[i] = -coeffs[i];
  std::vector<cd> roots = monic_roots(monic);

  // enforce exact conjugate symmetry: greedily pair up/down roots, average
  std::vector<cd> ups, downs;
  std::vector<double> reals;
  for (cd z : roots) {
    if (std::fabs(z.imag()) <= kRealTol * std::max(1.0, std::fabs(z.real())))
      reals.push_back(z.real());
    else if (z.imag() > 0)
      ups.push_back(z);
    else
      downs.push_back(z);
  }
  std::vector<Pole> poles;
  std::sort(ups.begin(), ups.end(), [](cd a, cd b) { return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag()); });
  std::vector<bool> taken(downs.size(), false);
  for (cd up : ups) {
    size_t best = downs.size();
    double best_d = 1e300;
    for (size_t j = 0; j < downs.size(); ++j) {
      if (taken[j]) continue;
      double d = std::abs(up - std::conj(downs[j]));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    cd z = up;
    if (best < downs.size()) {
      taken[best] = true;
      z = 0.5 * (up + std::conj(downs[best]));  // exact symmetry after averaging
    }
    Pole p{std::abs(z), std::atan2(std::fabs(z.imag()), z.real())};
    poles.push_back(p);
    poles.push_back(Pole{p.radius, -p.angle});
  }
  for (size_t j = 0; j < downs.size(); ++j)
    if (!taken[j]) reals.push_back(downs[j].real());  // orphan: collapse to the axis
  for (double x : reals) poles.push_back(Pole{std::fabs(x), x >= 0.0 ? 0.0 : M_PI});
  return poles;
}

std::vector<Pole> mcadams_transform_poles(const std::vector<Pole>& poles, double alpha, double angle_epsilon) {
  if (!(alpha > 0.0) || !(alpha <= 1.2)) throw UsageError("invalid alpha: accepted range is (0, 1.2]");
  std::vector<Pole> out;
  out.reserve(poles.size());
  for (Pole p : poles) {
    if (p.radius >= kRadiusCap) p.radius = kRadiusCap;
    double phi = std::fabs(p.angle);
    if (phi > angle_epsilon && phi < M_PI - angle_epsilon) {
      double shifted = std::pow(phi, alpha);
      shifted = std::min(std::max(shifted, angle_epsilon), M_PI - angle_epsilon);
      p.angle = p.angle >= 0.0 ? shifted : -shifted;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<double> poles_to_coeffs(const std::vector<Pole>& poles) {
  // conjugate-symmetry check: every off-axis pole needs a mirror partner
  std::vector<bool> matched(poles.size(), false);
  for (size_t i = 0; i < poles.size(); ++i) {
    if (matched[i]) continue;
    double phi = std::fabs(poles[i].angle);
    if (phi <= 1e-12 || std::fabs(phi - M_PI) <= 1e-12) {
      matched[i] = true;
      continue;
    }
    bool found = false;
    for (size_t j = i + 1; j < poles.size(); ++j) {
      if (matched[j]) continue;
      if (std::fabs(poles[j].radius - poles[i].radius) < 1e-7 &&
          std::fabs(poles[j].angle + poles[i].angle) < 1e-7) {
        matched[i] = matched[j] = true;
        found = true;
        break;
      }
    }
    if (!found) throw DataError("non-conjugate-symmetric pole set");
  }

  std::vector<cd> poly{cd(1.0, 0.0)};
  for (const Pole& p : poles) {
    cd root = std::polar(p.radius, p.angle);
    std::vector<cd> next(poly.size() + 1, cd(0.0, 0.0));
    for (size_t i = 0; i < poly.size(); ++i) {
      next[i] += poly[i];
      next[i + 1] -= poly[i] * root;
    }
    poly = std::move(next);
  }
  double biggest = 1.0;
  for (cd c : poly) biggest = std::max(biggest, std::abs(c));
  std::vector<double> coeffs(poly.size() - 1);
  for (size_t k = 1; k < poly.size(); ++k) {
    if (std::fabs(poly[k].imag()) > 1e-9 * biggest)
      throw NumericError("imaginary residue in reconstructed coefficients");
    coeffs[k - 1] = -poly[k].real();  // A(z) = 1 - sum a_k z^-k
  }
  return coeffs;
}

AudioClip anonymize_mcadams(const AudioClip& clip, const McAdamsConfig& config, double alpha) {
  config.validate();
  if (!(alpha > 0.0) || !(alpha <= 1.2)) throw UsageError("invalid alpha: accepted range is (0, 1.2]");
  if (clip.sample_rate <= 0) throw DataError("invalid sample rate");
  int win = int(std::lround(config.frame_ms * clip.sample_rate / 1000.0));
  int hop = int(std::lround(config.hop_ms * clip.sample_rate / 1000.0));
  size_t n_frames = frame_count(clip.samples.size(), win, hop);
  if (n_frames == 0) throw DataError("clip too short");

  std::vector<double> w = hann_window(win);
  size_t len = clip.samples.size();
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  out.samples.assign(len, 0.0);
  std::vector<double> norm(len, 0.0);

  std::vector<double> frame(static_cast<size_t>(win));
  std::vector<double> residual(static_cast<size_t>(win));
  std::vector<double> synth(static_cast<size_t>(win));
  std::vector<double> state(static_cast<size_t>(config.lpc_order), 0.0);  // carried across frames

  for (size_t f = 0; f < n_frames; ++f) {
    size_t start = f * size_t(hop);
    for (int i = 0; i < win; ++i) frame[size_t(i)] = clip.samples[start + size_t(i)] * w[size_t(i)];

    LpcFrameModel model = lpc_analyze(frame, config.lpc_order);
    std::vector<double> shifted =
        poles_to_coeffs(mcadams_transform_poles(model.poles, alpha, config.angle_epsilon));

    // inverse filter with the original coefficients, frame-local history
    const std::vector<double>& a = model.coeffs;
    for (int n = 0; n < win; ++n) {
      double acc = frame[size_t(n)];
      for (size_t k = 1; k <= a.size(); ++k)
        if (size_t(n) >= k) acc -= a[k - 1] * frame[size_t(n) - k];
      residual[size_t(n)] = acc;
    }
    // synthesis with the shifted coefficients; state crosses frame boundaries
    for (int n = 0; n < win; ++n) {
      double acc = residual[size_t(n)];
      for (size_t k = 1; k <= shifted.size(); ++k) {
        double past = size_t(n) >= k ? synth[size_t(n) - k] : state[k - 1 - size_t(n)];
        acc += shifted[k - 1] * past;
      }
      if (!std::isfinite(acc)) throw NumericError("mcadams synthesis diverged");
      synth[size_t(n)] = acc;
    }
    for (size_t k = 0; k < state.size(); ++k)
      state[k] = size_t(win) > k ? synth[size_t(win) - 1 - k] : state[k - size_t(win)];

    for (int i = 0; i < win; ++i) {
      out.samples[start + size_t(i)] += synth[size_t(i)] * w[size_t(i)];
      norm[start + size_t(i)] += w[size_t(i)] * w[size_t(i)];
    }
  }
  // flatten the interior exactly but keep partially-covered edges tapered:
  // dividing by a vanishing window sum would amplify the synthesis-filter
  // ring at the clip boundaries into a spike
  double cover = 0.0;
  for (size_t i = 0; i < len; ++i) cover = std::max(cover, norm[i]);
  double div_floor = 0.5 * cover;
  for (size_t i = 0; i < len; ++i)
    out.samples[i] = cover > 1e-12 ? out.samples[i] / std::max(norm[i], div_floor) : 0.0;

  double peak_in = 0.0, peak_out = 0.0;
  for (double s : clip.samples) peak_in = std::max(peak_in, std::fabs(s));
  for (double s : out.samples) peak_out = std::max(peak_out, std::fabs(s));
  if (peak_in > 0.0 && peak_out > 0.0) {
    double scale = peak_in / peak_out;
    for (double& s : out.samples) s *= scale;
  }
  return out;
}

double sample_alpha(uint64_t speaker_seed, const McAdamsConfig& config) {
  config.validate();
  Rng rng(speaker_seed);
  return rng.uniform(config.alpha_min, config.alpha_max);
}

AudioClip pitch_shift(const AudioClip& clip, double semitones) {
  if (std::fabs(semitones) > 12.0) throw UsageError("pitch shift must be within +-12 semitones");
  if (clip.sample_rate <= 0) throw DataError("invalid sample rate");
  const int fft = 1024, hop_a = 256;
  if (clip.samples.size() < size_t(fft)) throw DataError("clip too short");
  double rate = std::pow(2.0, semitones / 12.0);

  FeatureConfig cfg = fft_frame_config(clip.sample_rate, fft, fft, hop_a);
  Spectrogram spec = stft(clip, cfg);
  size_t n_frames = spec.frames.size();
  size_t bins = cfg.bins();

  std::vector<std::vector<double>> mag(n_frames, std::vector<double>(bins));
  std::vector<std::vector<double>> phase(n_frames, std::vector<double>(bins));
  for (size_t f = 0; f < n_frames; ++f)
    for (size_t k = 0; k < bins; ++k) {
      mag[f][k] = std::abs(spec.frames[f][k]);
      phase[f][k] = std::arg(spec.frames[f][k]);
    }

  // time-stretch by `rate`: walk fractional analysis positions at fixed
  // synthesis hop, accumulating instantaneous-frequency phase
  size_t out_frames = n_frames == 1 ? 1 : size_t(std::floor(double(n_frames - 1) * rate)) + 1;
  Spectrogram stretched;
  stretched.config = cfg;
  stretched.frames.assign(out_frames, std::vector<std::complex<double>>(bins));

  std::vector<double> psi = phase[0];
  for (size_t fo = 0; fo < out_frames; ++fo) {
    double pa = double(fo) / rate;
    size_t i0 = std::min(n_frames - 1, size_t(pa));
    size_t i1 = std::min(n_frames - 1, i0 + 1);
    double frac = std::min(1.0, std::max(0.0, pa - double(i0)));
    for (size_t k = 0; k < bins; ++k) {
      double m = (1.0 - frac) * mag[i0][k] + frac * mag[i1][k];
      stretched.frames[fo][k] = std::polar(m, psi[k]);
      // accumulate after emitting: instantaneous frequency at this position
      // advances the phase of the next synthesis frame (hops are equal)
      double omega = 2.0 * M_PI * double(k) / double(fft) * double(hop_a);
      double delta = i1 > i0 ? princarg(phase[i1][k] - phase[i0][k] - omega) + omega : omega;
      psi[k] += delta;
    }
  }
  AudioClip long_clip = istft_overlap_add(stretched, cfg);

  // resample back: output sample n reads stretched position n*rate
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  out.samples.resize(clip.samples.size());
  const std::vector<double>& y = long_clip.samples;
  auto at = [&](long i) -> double {
    if (i < 0 || y.empty()) return 0.0;
    if (size_t(i) >= y.size()) return 0.0;
    return y[size_t(i)];
  };
  for (size_t n = 0; n < out.samples.size(); ++n) {
    double pos = double(n) * rate;
    long i = long(std::floor(pos));
    double t = pos - double(i);
    // Catmull-Rom through the four neighbors
    double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
    out.samples[n] = p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
  }
  return out;
}

AudioClip anonymize_pitch(const AudioClip& clip, uint64_t speaker_seed, const PitchShiftConfig& config,
                          double* drawn_semitones) {
  config.validate();
  Rng rng(speaker_seed);
  double magnitude = rng.uniform(config.semitone_min, config.semitone_max);
  double semitones = (rng.next() & 1ull) ? magnitude : -magnitude;
  if (drawn_semitones) *drawn_semitones = semitones;

  AudioClip shifted = pitch_shift(clip, semitones);
  FeatureConfig preset = classifier_preset(clip.sample_rate);
  MelSpectrogram mel = compute_log_mel(shifted, preset);
  auto magnitudes = invert_mel_to_magnitude(mel);
  AudioClip voc = griffin_lim(magnitudes, preset, config.vocoder_iterations);

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  out.samples.assign(clip.samples.size(), 0.0);
  std::copy(voc.samples.begin(), voc.samples.begin() + long(std::min(voc.samples.size(), out.samples.size())),
            out.samples.begin());

  double peak_in = 0.0, peak_out = 0.0;
  for (double s : clip.samples) peak_in = std::max(peak_in, std::fabs(s));
  for (double s : out.samples) peak_out = std::max(peak_out, std::fabs(s));
  if (peak_in > 0.0 && peak_out > 0.0) {
    double scale = peak_in / peak_out;
    for (double& s : out.samples) s *= scale;
  }
  return out;
}

std::string provenance_to_json(const ProvenanceRecord& record) {
  nlohmann::json j;
  j["source_id"] = record.source_id;
  j["method"] = record.method;
  j["params"] = record.params;
  j["seed"] = record.seed;
  j["toolkit_version"] = record.version;
  return j.dump(2) + "\n";
}

std::string AnonymizerSpec::method_name() const {
  switch (method) {
    case Method::mcadams:
      return "mcadams";
    case Method::pitch:
      return "pitch";
    default:
      return "none";
  }
}

AudioClip apply_anonymizer(const AudioClip& clip, const AnonymizerSpec& spec, uint64_t seed,
                           const std::string& speaker_id, const std::string& salt,
                           std::map<std::string, double>* drawn_params) {
  if (spec.method == AnonymizerSpec::Method::none) {
    if (drawn_params) drawn_params->clear();
    return clip;
  }
  uint64_t speaker_seed = keyed_seed(seed, "anon|" + salt + "|" + speaker_id);
  if (spec.method == AnonymizerSpec::Method::mcadams) {
    double alpha = spec.fixed_alpha ? spec.alpha : sample_alpha(speaker_seed, spec.mcadams);
    if (drawn_params) (*drawn_params)["alpha"] = alpha;
    return anonymize_mcadams(clip, spec.mcadams, alpha);
  }
  double semitones = 0.0;
  AudioClip out = anonymize_pitch(clip, speaker_seed, spec.pitch, &semitones);
  if (drawn_params) (*drawn_params)["semitones"] = semitones;
  return out;
}

}  // namespace spanon

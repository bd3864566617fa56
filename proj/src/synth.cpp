#include "spanon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace spanon {

namespace {

// Box-Muller on top of the owned rng keeps noise reproducible everywhere.
double gauss(Rng& rng) {
  double u1 = std::max(rng.uniform(), 1e-300);
  double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct Resonator {
  double b1, b2;  // y[n] = x[n] + b1 y[n-1] + b2 y[n-2]
};

Resonator make_resonator(double freq, double bandwidth, int fs) {
  double r = std::exp(-M_PI * bandwidth / fs);
  double theta = 2.0 * M_PI * freq / fs;
  return Resonator{2.0 * r * std::cos(theta), -r * r};
}

void apply_resonator(std::vector<double>& x, const Resonator& res) {
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    double y = v + res.b1 * y1 + res.b2 * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

struct Signature {
  double jitter = 0.01;        // cycle-to-cycle period wobble
  double shimmer = 0.05;       // pulse amplitude wobble
  double noise = 0.012;        // aspiration noise level
  double am_depth = 0.25;      // syllable-rate modulation depth
  double centralize = 0.0;     // pull formants toward their mean
  bool nasal = false;          // extra low resonance + damped F2
};

Signature label_signature(const std::string& label) {
  if (label == "dysphonia") return {0.06, 0.25, 0.10, 0.25, 0.0, false};
  if (label == "dysarthria") return {0.02, 0.08, 0.02, 0.55, 0.35, false};
  if (label == "dysglossia") return {0.015, 0.06, 0.03, 0.30, 0.20, false};
  if (label == "clp") return {0.015, 0.06, 0.04, 0.25, 0.0, true};
  if (label == "other") return {0.03, 0.10, 0.05, 0.35, 0.15, false};
  return {};  // control
}

}  // namespace

SynthSpeaker make_synth_speaker(size_t index, uint64_t seed) {
  Rng rng(keyed_seed(seed, "speaker|" + std::to_string(index)));
  SynthSpeaker s;
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%03zu", index);
  s.id = buf;
  s.gender = (index % 2 == 0) ? "M" : "F";
  s.age_group = (index % 5 == 4) ? "child" : "adult";
  if (index % 3 == 0) {
    s.label = "control";
  } else if (s.age_group == "child") {
    s.label = "clp";
  } else {
    static const char* kCycle[4] = {"dysarthria", "dysphonia", "dysglossia", "other"};
    s.label = kCycle[index % 4];
  }
  s.f0 = s.gender == "M" ? rng.uniform(95.0, 150.0) : rng.uniform(165.0, 225.0);
  if (s.age_group == "child") s.f0 *= 1.25;
  s.formants = {rng.uniform(320.0, 780.0), rng.uniform(950.0, 1750.0), rng.uniform(2250.0, 2950.0),
                rng.uniform(3350.0, 4150.0)};
  s.bandwidths = {rng.uniform(60.0, 110.0), rng.uniform(70.0, 130.0), rng.uniform(110.0, 180.0),
                  rng.uniform(150.0, 240.0)};
  return s;
}

AudioClip synth_utterance(const SynthSpeaker& speaker, size_t utt_index, uint64_t seed, int sample_rate,
                          double duration_s) {
  Rng rng(keyed_seed(seed, "utt|" + speaker.id + "|" + std::to_string(utt_index)));
  Signature sig = label_signature(speaker.label);

  double f0 = speaker.f0 * (1.0 + 0.05 * (rng.uniform() - 0.5) * 2.0);
  std::array<double, 4> formants = speaker.formants;
  double mean_f = (formants[0] + formants[1] + formants[2] + formants[3]) / 4.0;
  for (double& f : formants) {
    f = f + sig.centralize * (mean_f - f);
    f *= 1.0 + 0.03 * (rng.uniform() - 0.5) * 2.0;
  }
  double dur = duration_s * (1.0 + 0.1 * (rng.uniform() - 0.5) * 2.0);
  size_t len = size_t(std::lround(dur * sample_rate));

  // glottal pulse train with jitter and shimmer, plus aspiration noise
  std::vector<double> x(len, 0.0);
  double period = double(sample_rate) / f0;
  double next_pulse = rng.uniform(0.0, period);
  while (next_pulse < double(len)) {
    size_t idx = size_t(next_pulse);
    double amp = 1.0 + sig.shimmer * gauss(rng);
    x[idx] += amp;
    if (idx + 1 < len) x[idx + 1] -= 0.4 * amp;  // crude glottal closure shape
    next_pulse += period * (1.0 + sig.jitter * gauss(rng));
  }
  for (double& v : x) v += sig.noise * gauss(rng);

  for (int i = 0; i < 4; ++i) apply_resonator(x, make_resonator(formants[i], speaker.bandwidths[i], sample_rate));
  if (sig.nasal) {
    apply_resonator(x, make_resonator(270.0, 80.0, sample_rate));
    // hypernasal damping: bleed energy away from the second formant
    Resonator damp = make_resonator(formants[1], speaker.bandwidths[1] * 4.0, sample_rate);
    std::vector<double> extra = x;
    apply_resonator(extra, damp);
    for (size_t i = 0; i < len; ++i) x[i] = 0.75 * x[i] + 0.25 * extra[i] * 0.05;
  }

  // syllable-rate amplitude modulation; floor keeps the clip fully voiced
  double syllable_hz = rng.uniform(2.8, 4.6);
  double phase0 = rng.uniform(0.0, 2.0 * M_PI);
  for (size_t i = 0; i < len; ++i) {
    double m = 1.0 - sig.am_depth * 0.5 * (1.0 + std::cos(2.0 * M_PI * syllable_hz * double(i) / sample_rate + phase0));
    x[i] *= std::max(m, 0.12);
  }

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  double scale = peak > 0.0 ? 0.5 / peak : 1.0;

  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.source_id = speaker.id + "_u" + std::to_string(utt_index);
  clip.samples.resize(len);
  for (size_t i = 0; i < len; ++i) clip.samples[i] = x[i] * scale;
  return clip;
}

void write_synth_corpus(size_t n_speakers, size_t utts_per_speaker, uint64_t seed, const std::string& out_dir,
                        int sample_rate, double duration_s) {
  if (n_speakers < 2) throw UsageError("synth corpus needs at least 2 speakers");
  if (utts_per_speaker < 2) throw UsageError("synth corpus needs at least 2 utterances per speaker");
  std::filesystem::create_directories(out_dir);

  std::ofstream spk(out_dir + "/speakers.csv");
  std::ofstream utt(out_dir + "/utterances.csv");
  if (!spk || !utt) throw DataError("unwritable path: " + out_dir);
  spk << "speaker_id,gender,age_group,label\n";
  utt << "utterance_id,speaker_id,path\n";

  for (size_t i = 0; i < n_speakers; ++i) {
    SynthSpeaker s = make_synth_speaker(i, seed);
    spk << s.id << ',' << s.gender << ',' << s.age_group << ',' << s.label << '\n';
    for (size_t u = 0; u < utts_per_speaker; ++u) {
      AudioClip clip = synth_utterance(s, u, seed, sample_rate, duration_s);
      std::string name = clip.source_id + ".wav";
      write_wav(clip, out_dir + "/" + name);
      utt << clip.source_id << ',' << s.id << ',' << name << '\n';
    }
  }
}

}  // namespace spanon

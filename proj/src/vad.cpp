#include "spanon/vad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace spanon {

namespace {

constexpr double kSilenceRms = 1e-6;

// linear-interpolated percentile over a copy, q in [0,1]
double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  double pos = q * double(v.size() - 1);
  size_t lo = size_t(pos);
  double frac = pos - double(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

struct GateRule {
  bool adaptive = false;
  double threshold_rms = 0.0;  // active iff rms >= threshold (when adaptive)
};

// The 30 dB gate is relative to an adaptive noise floor. When the 5th
// percentile sits within (threshold + 6) dB of the peak there is no
// measurable floor (steady tones, dense speech) and gating would eat the
// whole clip, so only the absolute silence floor applies.
GateRule make_rule(const std::vector<double>& rms, const VadConfig& config) {
  GateRule rule;
  double peak = *std::max_element(rms.begin(), rms.end());
  if (peak < kSilenceRms) return rule;  // nothing audible at all
  double floor_rms = std::max(percentile(rms, 0.05), kSilenceRms);
  double headroom = peak * std::pow(10.0, -(config.level_threshold_db + 6.0) / 20.0);
  if (floor_rms >= headroom) return rule;
  rule.adaptive = true;
  rule.threshold_rms = floor_rms * std::pow(10.0, config.level_threshold_db / 20.0);
  return rule;
}

// prefix sums of squares for O(1) window RMS
std::vector<double> energy_prefix(const std::vector<double>& x) {
  std::vector<double> p(x.size() + 1, 0.0);
  for (size_t i = 0; i < x.size(); ++i) p[i + 1] = p[i] + x[i] * x[i];
  return p;
}

double window_rms(const std::vector<double>& prefix, size_t lo, size_t hi) {
  if (hi <= lo) return 0.0;
  double e = prefix[hi] - prefix[lo];
  return std::sqrt(std::max(e, 0.0) / double(hi - lo));
}

}  // namespace

void VadConfig::validate() const {
  if (window_ms <= 0 || max_silence_ms <= 0 || smoothing_ms <= 0)
    throw DataError("vad config: durations must be positive");
  if (level_threshold_db < 0) throw DataError("vad config: threshold must be >= 0");
}

AudioClip gate_low_level(const AudioClip& clip, const VadConfig& config) {
  config.validate();
  if (clip.samples.empty()) throw DataError("empty clip");
  size_t win = std::max<size_t>(1, size_t(std::lround(config.window_ms * clip.sample_rate / 1000.0)));
  auto prefix = energy_prefix(clip.samples);

  size_t n_win = (clip.samples.size() + win - 1) / win;
  std::vector<double> rms(n_win);
  for (size_t w = 0; w < n_win; ++w)
    rms[w] = window_rms(prefix, w * win, std::min((w + 1) * win, clip.samples.size()));

  GateRule rule = make_rule(rms, config);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  for (size_t w = 0; w < n_win; ++w) {
    if (rms[w] < kSilenceRms) continue;
    if (rule.adaptive && rms[w] < rule.threshold_rms) continue;
    size_t lo = w * win, hi = std::min((w + 1) * win, clip.samples.size());
    out.samples.insert(out.samples.end(), clip.samples.begin() + long(lo), clip.samples.begin() + long(hi));
  }
  return out;
}

SegmentList detect_voice_segments(const AudioClip& clip, const VadConfig& config) {
  config.validate();
  if (clip.samples.empty()) throw DataError("empty clip");
  size_t len = clip.samples.size();
  size_t slot = std::max<size_t>(1, size_t(clip.sample_rate / 1000));  // 1 ms
  size_t win = std::max<size_t>(1, size_t(std::lround(config.window_ms * clip.sample_rate / 1000.0)));
  size_t n_slots = (len + slot - 1) / slot;
  auto prefix = energy_prefix(clip.samples);

  // noise floor estimated from full analysis windows centered on each slot;
  // the activity decision itself uses the slot's own rms so segment edges
  // stay within the smoothing window of the true speech boundary
  std::vector<double> win_rms(n_slots), slot_rms(n_slots);
  for (size_t s = 0; s < n_slots; ++s) {
    long center = long(s * slot + slot / 2);
    long lo = center - long(win) / 2;
    long hi = lo + long(win);
    lo = std::max(lo, 0L);
    hi = std::min(hi, long(len));
    win_rms[s] = window_rms(prefix, size_t(lo), size_t(hi));
    slot_rms[s] = window_rms(prefix, s * slot, std::min((s + 1) * slot, len));
  }

  GateRule rule = make_rule(win_rms, config);
  std::vector<char> active(n_slots, 0);
  for (size_t s = 0; s < n_slots; ++s)
    active[s] = slot_rms[s] >= kSilenceRms && (!rule.adaptive || slot_rms[s] >= rule.threshold_rms);

  // debounce: centered moving average of the binary decisions, >= 0.5 rounds up
  size_t smooth = std::max<size_t>(1, size_t(std::lround(config.smoothing_ms)));
  std::vector<char> smoothed(n_slots, 0);
  for (size_t s = 0; s < n_slots; ++s) {
    long lo = long(s) - long(smooth) / 2;
    long hi = lo + long(smooth);
    lo = std::max(lo, 0L);
    hi = std::min(hi, long(n_slots));
    int sum = 0;
    for (long i = lo; i < hi; ++i) sum += active[size_t(i)];
    smoothed[s] = 2 * sum >= (hi - lo);
  }

  // merge short inactive runs that sit between speech
  size_t max_gap = size_t(std::lround(config.max_silence_ms));
  size_t s = 0;
  while (s < n_slots) {
    if (smoothed[s]) {
      ++s;
      continue;
    }
    size_t run_start = s;
    while (s < n_slots && !smoothed[s]) ++s;
    bool interior = run_start > 0 && s < n_slots;
    if (interior && s - run_start <= max_gap)
      for (size_t i = run_start; i < s; ++i) smoothed[i] = 1;
  }

  SegmentList segments;
  s = 0;
  while (s < n_slots) {
    if (!smoothed[s]) {
      ++s;
      continue;
    }
    size_t run_start = s;
    while (s < n_slots && smoothed[s]) ++s;
    Segment seg;
    seg.start_sample = run_start * slot;
    seg.end_sample = std::min(s * slot, len);
    if (seg.end_sample > seg.start_sample) segments.push_back(seg);
  }
  return segments;
}

AudioClip apply_vad(const AudioClip& clip, const VadConfig& config) {
  AudioClip gated = gate_low_level(clip, config);
  if (gated.samples.empty()) throw DataError("no speech detected");
  SegmentList segments = detect_voice_segments(gated, config);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  for (const Segment& seg : segments)
    out.samples.insert(out.samples.end(), gated.samples.begin() + long(seg.start_sample),
                       gated.samples.begin() + long(seg.end_sample));
  if (out.samples.empty()) throw DataError("no speech detected");
  return out;
}

std::string segments_to_csv(const std::string& source_id, const SegmentList& segments) {
  std::string s = "source_id,start_sample,end_sample\n";
  char buf[128];
  for (const Segment& seg : segments) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu\n", source_id.c_str(), seg.start_sample, seg.end_sample);
    s += buf;
  }
  return s;
}

}  // namespace spanon

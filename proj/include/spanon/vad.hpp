#pragma once

#include <string>
#include <vector>

#include "spanon/audio_io.hpp"

namespace spanon {

struct VadConfig {
  double level_threshold_db = 30.0;  // dB above the adaptive noise floor
  double window_ms = 30.0;
  double max_silence_ms = 6.0;  // inactive runs this short are merged into speech
  double smoothing_ms = 8.0;    // moving average over the binary decisions

  void validate() const;
};

struct Segment {
  size_t start_sample = 0;
  size_t end_sample = 0;  // exclusive
};
using SegmentList = std::vector<Segment>;

// Remove windows whose RMS sits below level_threshold_db above the clip's
// noise floor (5th-percentile window RMS, floored at 1e-6). Clips with no
// measurable floor (everything within threshold+6 dB of the peak) pass
// through with only sub-1e-6 windows removed.
AudioClip gate_low_level(const AudioClip& clip, const VadConfig& config);

// Per-millisecond activity decisions from centered 30 ms RMS windows,
// smoothed by an 8 ms moving average, with inactive runs <= 6 ms merged.
SegmentList detect_voice_segments(const AudioClip& clip, const VadConfig& config);

// gate_low_level, then concatenation of the detected voice segments.
// Throws DataError("no speech detected") when nothing survives.
AudioClip apply_vad(const AudioClip& clip, const VadConfig& config);

std::string segments_to_csv(const std::string& source_id, const SegmentList& segments);

}  // namespace spanon

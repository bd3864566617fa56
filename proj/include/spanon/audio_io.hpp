#pragma once

#include <string>
#include <vector>

#include "spanon/common.hpp"

namespace spanon {

// Canonical in-memory audio: mono, double samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string source_id;

  size_t size() const { return samples.size(); }
  double duration_s() const { return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0; }
};

// PCM-16 RIFF/WAVE reader. Multichannel input is averaged to mono; samples are
// scaled by 1/32768 and clamped into [-1, 1]. Anything that is not PCM-16 is
// rejected, never converted.
AudioClip read_wav(const std::string& path);

// PCM-16 mono little-endian writer; samples clamped to [-1, 1] then quantized
// with round-to-nearest.
void write_wav(const AudioClip& clip, const std::string& path);

}  // namespace spanon

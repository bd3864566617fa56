#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "spanon/audio_io.hpp"

namespace spanon {

// One synthetic "speaker": a fixed vocal-tract resonance stack plus a pulse
// train fundamental, with label-dependent acoustic signatures so the utility
// axis has signal to find. Deterministic per (seed, index).
struct SynthSpeaker {
  std::string id;
  std::string gender;     // alternates M/F so both slices are populated
  std::string age_group;  // every fifth speaker is a child
  std::string label;      // every third is a control; others cycle disorders
  double f0 = 0.0;
  std::array<double, 4> formants{};
  std::array<double, 4> bandwidths{};
};

SynthSpeaker make_synth_speaker(size_t index, uint64_t seed);

// Per-utterance excitation noise, pitch/formant jitter, and syllable-rate
// amplitude modulation on top of the speaker's fixed identity.
AudioClip synth_utterance(const SynthSpeaker& speaker, size_t utt_index, uint64_t seed,
                          int sample_rate = 16000, double duration_s = 2.0);

// Write a full corpus: WAVs plus speakers.csv / utterances.csv in out_dir.
void write_synth_corpus(size_t n_speakers, size_t utts_per_speaker, uint64_t seed,
                        const std::string& out_dir, int sample_rate = 16000, double duration_s = 2.0);

}  // namespace spanon

#pragma once

#include <string>
#include <vector>

#include "spanon/dsp.hpp"

namespace spanon {

struct SpeakerEmbedding {
  std::vector<double> vector;  // unit L2 norm
  std::string speaker_id;
  std::string utterance_id;

  size_t dim() const { return vector.size(); }
};

// Reference embedding: per-band mean and per-band standard deviation over
// time (dim = 2*n_mels), L2-normalized. A statistics-pooling stand-in for a
// trained verification network; external embeddings plug in via
// load_embeddings with identical downstream behavior.
SpeakerEmbedding embed_utterance(const MelSpectrogram& mel);

// CSV schema: utterance_id,speaker_id,v1..vD (header required).
std::vector<SpeakerEmbedding> load_embeddings(const std::string& path);
std::string embeddings_to_csv(const std::vector<SpeakerEmbedding>& embeddings);

double cosine_score(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

// Normalized arithmetic mean of one speaker's embeddings.
SpeakerEmbedding enroll_speaker(const std::vector<SpeakerEmbedding>& embeddings);

}  // namespace spanon

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "spanon/embedding.hpp"
#include "spanon/synth.hpp"

using namespace spanon;
using testutil::TempDir;

namespace {

SpeakerEmbedding embed_clip(const AudioClip& clip, const std::string& spk, const std::string& utt) {
  MelSpectrogram mel = compute_log_mel(clip, asv_preset(clip.sample_rate));
  SpeakerEmbedding e = embed_utterance(mel);
  e.speaker_id = spk;
  e.utterance_id = utt;
  return e;
}

}  // namespace

TEST_SUITE("embedding") {

TEST_CASE("embedding dimension, unit norm and determinism") {
  AudioClip clip = testutil::voiced(0.5, 12);
  SpeakerEmbedding e = embed_clip(clip, "s", "u");
  CHECK(e.dim() == 80);  // mean + std over 40 mel bands

  double norm = 0.0;
  for (double v : e.vector) {
    CHECK(std::isfinite(v));
    norm += v * v;
  }
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));

  SpeakerEmbedding again = embed_clip(clip, "s", "u");
  CHECK(again.vector == e.vector);
}

TEST_CASE("too-short input is rejected") {
  MelSpectrogram mel;
  mel.config = asv_preset(16000);
  mel.frames.assign(1, std::vector<double>(40, -3.0));
  CHECK_THROWS_AS(embed_utterance(mel), DataError);
}

TEST_CASE("same synthetic speaker scores above different speakers") {
  SynthSpeaker a = make_synth_speaker(0, 7);
  SynthSpeaker b = make_synth_speaker(1, 7);

  SpeakerEmbedding a0 = embed_clip(synth_utterance(a, 0, 7), a.id, "a0");
  SpeakerEmbedding a1 = embed_clip(synth_utterance(a, 1, 7), a.id, "a1");
  SpeakerEmbedding b0 = embed_clip(synth_utterance(b, 0, 7), b.id, "b0");

  double same = cosine_score(a0, a1);
  double diff = cosine_score(a0, b0);
  CHECK(same > diff);
}

TEST_CASE("cosine score properties") {
  SpeakerEmbedding a = embed_clip(testutil::voiced(0.3, 1), "a", "a0");
  SpeakerEmbedding b = embed_clip(testutil::voiced(0.3, 2, 16000, 180.0), "b", "b0");

  CHECK(cosine_score(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_score(a, b) == cosine_score(b, a));
  CHECK(cosine_score(a, b) >= -1.0);
  CHECK(cosine_score(a, b) <= 1.0);

  SpeakerEmbedding short_vec;
  short_vec.vector.assign(4, 0.5);
  CHECK_THROWS_AS(cosine_score(a, short_vec), DataError);
}

TEST_CASE("embedding csv round-trips and 9+ significant digits survive") {
  TempDir dir;
  std::vector<SpeakerEmbedding> embs = {
      embed_clip(testutil::voiced(0.3, 21), "spk1", "u1"),
      embed_clip(testutil::voiced(0.3, 22), "spk1", "u2"),
      embed_clip(testutil::voiced(0.3, 23, 16000, 200.0), "spk2", "u3"),
  };
  std::string csv = embeddings_to_csv(embs);
  CHECK(csv.rfind("utterance_id,speaker_id,", 0) == 0);

  std::string path = dir.file("emb.csv");
  std::ofstream(path) << csv;
  std::vector<SpeakerEmbedding> back = load_embeddings(path);
  REQUIRE(back.size() == embs.size());
  for (size_t i = 0; i < embs.size(); ++i) {
    CHECK(back[i].utterance_id == embs[i].utterance_id);
    CHECK(back[i].speaker_id == embs[i].speaker_id);
    REQUIRE(back[i].dim() == embs[i].dim());
    for (size_t k = 0; k < embs[i].dim(); ++k)
      CHECK(back[i].vector[k] == doctest::Approx(embs[i].vector[k]).epsilon(1e-9));
  }
}

TEST_CASE("embedding csv loader rejects malformed input") {
  TempDir dir;

  SUBCASE("bad header") {
    std::string path = dir.file("h.csv");
    std::ofstream(path) << "id,spk,v1\nu1,s1,0.5\n";
    CHECK_THROWS_AS(load_embeddings(path), DataError);
  }
  SUBCASE("non-numeric entry") {
    std::string path = dir.file("n.csv");
    std::ofstream(path) << "utterance_id,speaker_id,v1,v2\nu1,s1,0.5,abc\n";
    CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains("non-numeric"), DataError);
  }
  SUBCASE("inconsistent dimension") {
    std::string path = dir.file("d.csv");
    std::ofstream(path) << "utterance_id,speaker_id,v1,v2\nu1,s1,0.5,0.5\nu2,s1,0.25\n";
    CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains("inconsistent dimension"), DataError);
  }
  SUBCASE("duplicate utterance id") {
    std::string path = dir.file("u.csv");
    std::ofstream(path) << "utterance_id,speaker_id,v1,v2\nu1,s1,0.5,0.5\nu1,s1,0.25,0.5\n";
    CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains("duplicate utterance_id"), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_embeddings(dir.file("absent.csv")), DataError);
  }
}

TEST_CASE("speaker enrollment centroid") {
  std::vector<SpeakerEmbedding> utts = {
      embed_clip(synth_utterance(make_synth_speaker(3, 9), 0, 9), "s3", "u0"),
      embed_clip(synth_utterance(make_synth_speaker(3, 9), 1, 9), "s3", "u1"),
      embed_clip(synth_utterance(make_synth_speaker(3, 9), 2, 9), "s3", "u2"),
  };
  SpeakerEmbedding centroid = enroll_speaker(utts);
  double norm = 0.0;
  for (double v : centroid.vector) norm += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(centroid.speaker_id == "s3");

  std::vector<SpeakerEmbedding> reversed(utts.rbegin(), utts.rend());
  SpeakerEmbedding centroid2 = enroll_speaker(reversed);
  for (size_t k = 0; k < centroid.dim(); ++k)
    CHECK(centroid2.vector[k] == doctest::Approx(centroid.vector[k]).epsilon(1e-12));

  SUBCASE("mixed speakers are rejected") {
    std::vector<SpeakerEmbedding> mixed = utts;
    mixed[1].speaker_id = "someone_else";
    CHECK_THROWS_AS(enroll_speaker(mixed), DataError);
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(enroll_speaker({}), DataError);
  }
}

}  // TEST_SUITE

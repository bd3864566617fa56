#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <fstream>

#include "helpers.hpp"
#include "spanon/audio_io.hpp"

using namespace spanon;
using testutil::TempDir;

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

// Hand-assembled WAV so the reader can be tested against byte-level cases the
// writer never produces (stereo, odd formats, truncation).
std::string make_wav_bytes(const std::vector<std::vector<int16_t>>& channels, uint32_t fs,
                           uint16_t format_tag = 1, uint16_t bits = 16) {
  uint16_t n_ch = uint16_t(channels.size());
  uint32_t n_frames = n_ch ? uint32_t(channels[0].size()) : 0;
  uint32_t data_len = n_frames * n_ch * 2;
  std::string s = "RIFF";
  put_u32(s, 36 + data_len);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, format_tag);
  put_u16(s, n_ch);
  put_u32(s, fs);
  put_u32(s, fs * n_ch * 2);
  put_u16(s, uint16_t(n_ch * 2));
  put_u16(s, bits);
  s += "data";
  put_u32(s, data_len);
  for (uint32_t i = 0; i < n_frames; ++i)
    for (uint16_t c = 0; c < n_ch; ++c) put_u16(s, uint16_t(channels[c][i]));
  return s;
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_SUITE("audio_io") {

TEST_CASE("write then read round-trips within one quantization step") {
  TempDir dir;
  AudioClip clip = testutil::noise(0.25, 7);
  std::string path = dir.file("rt.wav");
  write_wav(clip, path);
  AudioClip back = read_wav(path);
  REQUIRE(back.samples.size() == clip.samples.size());
  CHECK(back.sample_rate == clip.sample_rate);
  double worst = 0.0;
  for (size_t i = 0; i < clip.samples.size(); ++i)
    worst = std::max(worst, std::fabs(back.samples[i] - clip.samples[i]));
  CHECK(worst <= 1.0 / 32768.0);
}

TEST_CASE("one second mono at 16 kHz reads as 16000 samples") {
  TempDir dir;
  AudioClip clip = testutil::tone(440.0, 1.0, 16000);
  std::string path = dir.file("sec.wav");
  write_wav(clip, path);
  AudioClip back = read_wav(path);
  CHECK(back.samples.size() == 16000);
  CHECK(back.sample_rate == 16000);
}

TEST_CASE("stereo channels are averaged to mono") {
  TempDir dir;
  std::vector<int16_t> x(64);
  for (size_t i = 0; i < x.size(); ++i) x[i] = int16_t(100 * int(i % 50) - 2000);

  SUBCASE("opposite channels cancel") {
    std::vector<int16_t> neg(x.size());
    for (size_t i = 0; i < x.size(); ++i) neg[i] = int16_t(-x[i]);
    std::string path = dir.file("anti.wav");
    write_bytes(path, make_wav_bytes({x, neg}, 16000));
    AudioClip clip = read_wav(path);
    REQUIRE(clip.samples.size() == x.size());
    for (double s : clip.samples) CHECK(std::abs(s) <= 1.0 / 32768.0);
  }
  SUBCASE("identical channels read like the mono signal") {
    std::string path = dir.file("dup.wav");
    write_bytes(path, make_wav_bytes({x, x}, 16000));
    AudioClip clip = read_wav(path);
    REQUIRE(clip.samples.size() == x.size());
    for (size_t i = 0; i < x.size(); ++i)
      CHECK(clip.samples[i] == doctest::Approx(double(x[i]) / 32768.0).epsilon(1e-12));
  }
}

TEST_CASE("reader rejects malformed input with specific errors") {
  TempDir dir;

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(read_wav(dir.file("absent.wav")), doctest::Contains("missing file"), DataError);
  }
  SUBCASE("not a RIFF container") {
    std::string path = dir.file("junk.wav");
    write_bytes(path, "this is not audio at all, padded to be long enough....");
    CHECK_THROWS_WITH_AS(read_wav(path), doctest::Contains("not a RIFF/WAVE file"), DataError);
  }
  SUBCASE("non-PCM format tag") {
    std::string path = dir.file("float.wav");
    write_bytes(path, make_wav_bytes({{0, 0, 0, 0}}, 16000, /*format_tag=*/3));
    CHECK_THROWS_WITH_AS(read_wav(path), doctest::Contains("unsupported audio format"), DataError);
  }
  SUBCASE("non-16-bit depth") {
    std::string path = dir.file("deep.wav");
    write_bytes(path, make_wav_bytes({{0, 0, 0, 0}}, 16000, 1, /*bits=*/8));
    CHECK_THROWS_WITH_AS(read_wav(path), doctest::Contains("unsupported bit depth"), DataError);
  }
  SUBCASE("truncated data chunk") {
    std::string path = dir.file("trunc.wav");
    std::string bytes = make_wav_bytes({{1000, 2000, 3000, 4000}}, 16000);
    write_bytes(path, bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_WITH_AS(read_wav(path), doctest::Contains("truncated data chunk"), DataError);
  }
  SUBCASE("missing data chunk") {
    std::string path = dir.file("nodata.wav");
    std::string bytes = make_wav_bytes({{1, 2}}, 16000);
    write_bytes(path, bytes.substr(0, 36));  // ends right after fmt
    CHECK_THROWS_AS(read_wav(path), DataError);
  }
}

TEST_CASE("reader tolerates extra chunks before fmt/data") {
  TempDir dir;
  std::string s = "RIFF";
  std::string tail;
  tail += "LIST";
  put_u32(tail, 4);
  tail += "INFO";
  std::string rest = make_wav_bytes({{100, -100, 200, -200}}, 8000);
  tail += rest.substr(12);  // fmt+data part
  put_u32(s, uint32_t(4 + tail.size()));
  s += "WAVE" + tail;
  std::string path = dir.file("chunky.wav");
  write_bytes(path, s);
  AudioClip clip = read_wav(path);
  CHECK(clip.sample_rate == 8000);
  CHECK(clip.samples.size() == 4);
}

TEST_CASE("writer rejects empty clips and bad paths") {
  TempDir dir;
  AudioClip empty;
  empty.sample_rate = 16000;
  CHECK_THROWS_WITH_AS(write_wav(empty, dir.file("x.wav")), doctest::Contains("empty clip"), DataError);

  AudioClip clip = testutil::tone(100.0, 0.05);
  CHECK_THROWS_WITH_AS(write_wav(clip, dir.file("no_such_dir/x.wav")),
                       doctest::Contains("unwritable path"), DataError);
}

TEST_CASE("writer clamps out-of-range samples instead of wrapping") {
  TempDir dir;
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples = {1.5, -1.5, 1.0, -1.0};
  std::string path = dir.file("clip.wav");
  write_wav(clip, path);
  AudioClip back = read_wav(path);
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == doctest::Approx(-1.0));
  CHECK(back.samples[0] >= back.samples[2]);  // clamped, not wrapped negative
}

TEST_CASE("read never yields non-finite samples on arbitrary bytes") {
  TempDir dir;
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::string bytes;
    size_t len = 20 + rng.below(200);
    for (size_t i = 0; i < len; ++i) bytes.push_back(char(rng.next() & 0xff));
    std::string path = dir.file("fuzz.wav");
    write_bytes(path, bytes);
    try {
      AudioClip clip = read_wav(path);
      for (double s : clip.samples) CHECK(std::isfinite(s));
    } catch (const DataError&) {
      // rejection is the expected outcome for almost all random byte strings
    }
  }
}

}  // TEST_SUITE

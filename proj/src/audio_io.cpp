#include "spanon/audio_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace spanon {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

uint16_t read_u16(const unsigned char* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("missing file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file: " + path);

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_off = 0, data_len = 0;
  bool have_data = false;

  // walk chunks; tolerate any order and skip unknown chunks (word-aligned)
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (body + 16 > bytes.size() || chunk_len < 16) throw DataError("malformed fmt chunk: " + path);
      const unsigned char* p = bytes.data() + body;
      format = read_u16(p);
      channels = read_u16(p + 2);
      sample_rate = read_u32(p + 4);
      bits = read_u16(p + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
      have_data = true;
      if (body + chunk_len > bytes.size()) throw DataError("truncated data chunk: " + path);
    }
    pos = body + chunk_len + (chunk_len & 1);
  }
  if (!have_fmt) throw DataError("missing fmt chunk: " + path);
  if (!have_data) throw DataError("missing data chunk: " + path);
  if (format != 1) throw DataError("unsupported audio format (non-PCM): " + path);
  if (bits != 16) throw DataError("unsupported bit depth (only PCM-16): " + path);
  if (channels == 0) throw DataError("zero channels: " + path);
  if (sample_rate == 0) throw DataError("zero sample rate: " + path);
  if (data_len % (2 * channels) != 0) throw DataError("truncated data chunk: " + path);

  size_t n_frames = data_len / (2 * channels);
  AudioClip clip;
  clip.sample_rate = int(sample_rate);
  clip.samples.resize(n_frames);
  const unsigned char* d = bytes.data() + data_off;
  const double scale = 1.0 / 32768.0;
  for (size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (unsigned c = 0; c < channels; ++c) {
      int16_t s = int16_t(read_u16(d + (i * channels + c) * 2));
      acc += double(s);
    }
    double v = acc / channels * scale;
    clip.samples[i] = std::min(1.0, std::max(-1.0, v));
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
  if (clip.samples.empty()) throw DataError("empty clip");
  if (clip.sample_rate <= 0) throw DataError("invalid sample rate");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("unwritable path: " + path);

  uint32_t n = uint32_t(clip.samples.size());
  uint32_t data_len = n * 2;
  uint32_t sr = uint32_t(clip.sample_rate);
  uint32_t byte_rate = sr * 2;

  auto put_u32 = [&](uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&](uint16_t v) {
    unsigned char b[2] = {(unsigned char)(v), (unsigned char)(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
  };

  f.write("RIFF", 4);
  put_u32(36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(16);
  put_u16(1);   // PCM
  put_u16(1);   // mono
  put_u32(sr);
  put_u32(byte_rate);
  put_u16(2);   // block align
  put_u16(16);  // bits
  f.write("data", 4);
  put_u32(data_len);
  for (double s : clip.samples) {
    double c = std::min(1.0, std::max(-1.0, s));
    long q = std::lrint(c * 32768.0);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    put_u16(uint16_t(int16_t(q)));
  }
  if (!f) throw DataError("write failed: " + path);
}

}  // namespace spanon

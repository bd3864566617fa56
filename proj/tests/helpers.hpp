#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spanon/audio_io.hpp"
#include "spanon/common.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
struct TempDir {
  std::string path;
  TempDir() {
    static int counter = 0;
    path = (std::filesystem::temp_directory_path() /
            ("spanon_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++)))
               .string();
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (std::filesystem::path(path) / name).string();
  }
};

inline spanon::AudioClip tone(double freq_hz, double seconds, int fs = 16000, double amp = 0.5) {
  spanon::AudioClip clip;
  clip.sample_rate = fs;
  size_t n = size_t(seconds * fs);
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) clip.samples[i] = amp * std::sin(2.0 * M_PI * freq_hz * double(i) / fs);
  return clip;
}

inline spanon::AudioClip noise(double seconds, uint64_t seed, int fs = 16000, double amp = 0.3) {
  spanon::AudioClip clip;
  clip.sample_rate = fs;
  spanon::Rng rng(seed);
  size_t n = size_t(seconds * fs);
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) clip.samples[i] = amp * (2.0 * rng.uniform() - 1.0);
  return clip;
}

// Speech-like excitation: pulse train through a one-pole resonator plus noise.
inline spanon::AudioClip voiced(double seconds, uint64_t seed, int fs = 16000, double f0 = 120.0) {
  spanon::AudioClip clip;
  clip.sample_rate = fs;
  spanon::Rng rng(seed);
  size_t n = size_t(seconds * fs);
  clip.samples.assign(n, 0.0);
  double period = fs / f0;
  for (double pos = 0.0; pos < double(n); pos += period) clip.samples[size_t(pos)] = 1.0;
  // resonator near 500 Hz
  double r = 0.97, th = 2.0 * M_PI * 500.0 / fs;
  double a1 = 2.0 * r * std::cos(th), a2 = -r * r, y1 = 0.0, y2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double y = clip.samples[i] + a1 * y1 + a2 * y2 + 0.02 * (2.0 * rng.uniform() - 1.0);
    y2 = y1;
    y1 = y;
    clip.samples[i] = y;
  }
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::fabs(s));
  for (double& s : clip.samples) s *= 0.5 / peak;
  return clip;
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  size_t n = std::min(a.size(), b.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(n);
  mb /= double(n);
  double num = 0.0, da = 0.0, db = 0.0;
  for (size_t i = 0; i < n; ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  if (da <= 0.0 || db <= 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

inline double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double e = 0.0;
  for (double s : v) e += s * s;
  return std::sqrt(e / double(v.size()));
}

}  // namespace testutil

#include "spanon/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace spanon {

namespace {

void normalize(std::vector<double>& v, const char* what) {
  double norm = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw DataError(std::string("non-finite entry in ") + what);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw DataError(std::string("degenerate embedding (zero norm) in ") + what);
  for (double& x : v) x /= norm;
}

}  // namespace

SpeakerEmbedding embed_utterance(const MelSpectrogram& mel) {
  size_t frames = mel.frames.size();
  if (frames < 2) throw DataError("embedding needs >= 2 frames");
  int n = mel.config.n_mels;

  SpeakerEmbedding e;
  e.utterance_id = mel.source_id;
  e.vector.assign(size_t(2 * n), 0.0);
  for (const auto& fr : mel.frames)
    for (int m = 0; m < n; ++m) e.vector[size_t(m)] += fr[size_t(m)];
  for (int m = 0; m < n; ++m) e.vector[size_t(m)] /= double(frames);
  for (const auto& fr : mel.frames)
    for (int m = 0; m < n; ++m) {
      double d = fr[size_t(m)] - e.vector[size_t(m)];
      e.vector[size_t(n + m)] += d * d;
    }
  for (int m = 0; m < n; ++m) e.vector[size_t(n + m)] = std::sqrt(e.vector[size_t(n + m)] / double(frames));
  normalize(e.vector, "embed_utterance");
  return e;
}

std::vector<SpeakerEmbedding> load_embeddings(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("missing file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty embedding file: " + path);
  // header is fixed-prefix; the vector width is taken from the rows
  if (line.rfind("utterance_id,speaker_id", 0) != 0)
    throw DataError("bad embedding header (want utterance_id,speaker_id,v1..): " + path);

  std::vector<SpeakerEmbedding> out;
  std::set<std::string> seen;
  size_t dim = 0;
  size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    SpeakerEmbedding e;
    if (!std::getline(ss, e.utterance_id, ',')) throw DataError("short row in " + path);
    if (!std::getline(ss, e.speaker_id, ',')) throw DataError("short row in " + path);
    while (std::getline(ss, cell, ',')) {
      size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw DataError("non-numeric entry '" + cell + "' at line " + std::to_string(lineno));
      }
      if (used != cell.size()) throw DataError("non-numeric entry '" + cell + "' at line " + std::to_string(lineno));
      e.vector.push_back(v);
    }
    if (e.vector.empty()) throw DataError("row without vector at line " + std::to_string(lineno));
    if (dim == 0) dim = e.vector.size();
    if (e.vector.size() != dim) throw DataError("inconsistent dimension at line " + std::to_string(lineno));
    if (!seen.insert(e.utterance_id).second)
      throw DataError("duplicate utterance_id '" + e.utterance_id + "'");
    normalize(e.vector, "load_embeddings");
    out.push_back(std::move(e));
  }
  return out;
}

std::string embeddings_to_csv(const std::vector<SpeakerEmbedding>& embeddings) {
  std::string s = "utterance_id,speaker_id";
  size_t dim = embeddings.empty() ? 0 : embeddings.front().dim();
  char buf[48];
  for (size_t i = 1; i <= dim; ++i) {
    std::snprintf(buf, sizeof buf, ",v%zu", i);
    s += buf;
  }
  s += '\n';
  for (const auto& e : embeddings) {
    s += e.utterance_id;
    s += ',';
    s += e.speaker_id;
    for (double v : e.vector) {
      std::snprintf(buf, sizeof buf, ",%.12g", v);
      s += buf;
    }
    s += '\n';
  }
  return s;
}

double cosine_score(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  if (a.dim() != b.dim() || a.dim() == 0) throw DataError("cosine: dimension mismatch");
  double dot = 0.0;
  for (size_t i = 0; i < a.dim(); ++i) dot += a.vector[i] * b.vector[i];
  return std::max(-1.0, std::min(1.0, dot));
}

SpeakerEmbedding enroll_speaker(const std::vector<SpeakerEmbedding>& embeddings) {
  if (embeddings.empty()) throw DataError("enroll: empty collection");
  const SpeakerEmbedding& first = embeddings.front();
  SpeakerEmbedding out;
  out.speaker_id = first.speaker_id;
  out.vector.assign(first.dim(), 0.0);
  for (const auto& e : embeddings) {
    if (e.speaker_id != first.speaker_id) throw DataError("enroll: mixed speakers");
    if (e.dim() != first.dim()) throw DataError("enroll: dimension mismatch");
    for (size_t i = 0; i < e.dim(); ++i) out.vector[i] += e.vector[i];
  }
  for (double& v : out.vector) v /= double(embeddings.size());
  normalize(out.vector, "enroll_speaker");
  return out;
}

}  // namespace spanon

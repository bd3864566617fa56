#include "spanon/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spanon/audio_io.hpp"
#include "spanon/dsp.hpp"
#include "spanon/vad.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace spanon {

namespace {

const std::set<std::string> kGenders = {"F", "M"};
const std::set<std::string> kAgeGroups = {"adult", "child"};
const std::set<std::string> kLabels = {"control",   "dysarthria", "dysglossia", "dysphonia",
                                       "clp",       "other",      "patient"};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const Speaker& DatasetManifest::speaker(const std::string& id) const {
  for (const Speaker& s : speakers)
    if (s.id == id) return s;
  throw DataError("unknown speaker: " + id);
}

std::vector<const Utterance*> DatasetManifest::utterances_of(const std::string& speaker_id) const {
  std::vector<const Utterance*> out;
  for (const Utterance& u : utterances)
    if (u.speaker_id == speaker_id) out.push_back(&u);
  return out;
}

DatasetManifest load_manifest(const std::string& path) {
  fs::path given(path);
  fs::path dir, speakers_file;
  if (fs::is_directory(given)) {
    dir = given;
    speakers_file = given / "speakers.csv";
  } else {
    dir = given.parent_path();
    speakers_file = given;
  }
  fs::path utterances_file = dir / "utterances.csv";

  DatasetManifest manifest;
  std::set<std::string> speaker_ids;
  {
    std::ifstream in(speakers_file);
    if (!in) throw DataError("missing manifest file: " + speakers_file.string());
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"speaker_id", "gender", "age_group", "label"})
      throw DataError("malformed speakers.csv header in " + speakers_file.string());
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      std::vector<std::string> f = split_csv(line);
      if (f.size() != 4 || f[0].empty()) throw DataError("malformed speakers.csv row: " + line);
      if (!speaker_ids.insert(f[0]).second) throw DataError("duplicate speaker_id: " + f[0]);
      if (!kGenders.count(f[1])) throw DataError("unknown gender '" + f[1] + "' for speaker " + f[0]);
      if (!kAgeGroups.count(f[2])) throw DataError("unknown age_group '" + f[2] + "' for speaker " + f[0]);
      if (!kLabels.count(f[3])) throw DataError("unknown label '" + f[3] + "' for speaker " + f[0]);
      manifest.speakers.push_back({f[0], f[1], f[2], f[3]});
    }
  }
  {
    std::ifstream in(utterances_file);
    if (!in) throw DataError("missing manifest file: " + utterances_file.string());
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"utterance_id", "speaker_id", "path"})
      throw DataError("malformed utterances.csv header in " + utterances_file.string());
    std::set<std::string> utt_ids;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      std::vector<std::string> f = split_csv(line);
      if (f.size() != 3 || f[0].empty() || f[2].empty())
        throw DataError("malformed utterances.csv row: " + line);
      if (!utt_ids.insert(f[0]).second) throw DataError("duplicate utterance_id: " + f[0]);
      if (!speaker_ids.count(f[1]))
        throw DataError("dangling speaker reference: " + f[1] + " in utterance " + f[0]);
      fs::path p(f[2]);
      if (p.is_relative()) p = dir / p;
      manifest.utterances.push_back({f[0], f[1], p.string()});
    }
  }
  if (manifest.speakers.empty()) throw DataError("empty manifest: no speakers");
  if (manifest.utterances.empty()) throw DataError("empty manifest: no utterances");
  return manifest;
}

DatasetManifest pooled_view(const DatasetManifest& manifest) {
  DatasetManifest pooled = manifest;
  for (Speaker& s : pooled.speakers)
    if (s.label != "control") s.label = "patient";
  return pooled;
}

SplitPlan make_split(const DatasetManifest& manifest, const std::string& task, uint64_t seed) {
  std::vector<std::string> patients, controls;
  size_t child_patients = 0;
  for (const Speaker& s : manifest.speakers) {
    if (s.label == "control") {
      controls.push_back(s.id);
    } else if (task == "pooled" || s.label == task) {
      patients.push_back(s.id);
      if (s.age_group == "child") ++child_patients;
    }
  }
  if (patients.empty()) throw DataError("no patient speakers for task: " + task);
  if (controls.empty()) throw DataError("no control speakers in manifest");

  SplitPlan plan;
  plan.seed = seed;
  plan.child_task = 2 * child_patients > patients.size();

  Rng prng(keyed_seed(seed, "split|" + task + "|patients"));
  prng.shuffle(patients);
  Rng crng(keyed_seed(seed, "split|" + task + "|controls"));
  crng.shuffle(controls);

  size_t train_p = size_t(std::floor(0.7 * double(patients.size())));
  size_t train_c = size_t(std::floor(0.7 * double(controls.size())));

  auto take = [](const std::vector<std::string>& v, size_t from, size_t to) {
    return std::vector<std::string>(v.begin() + from, v.begin() + std::min(to, v.size()));
  };
  std::vector<std::string> train_pat = take(patients, 0, train_p);
  std::vector<std::string> test_pat = take(patients, train_p, patients.size());
  std::vector<std::string> train_con = take(controls, 0, train_c);
  std::vector<std::string> test_con = take(controls, train_c, controls.size());

  auto cap = [](std::vector<std::string>& v, double ratio, size_t other) {
    size_t limit = size_t(std::floor(ratio * double(other)));
    if (v.size() > limit) v.resize(limit);
  };
  if (plan.child_task) {
    cap(train_con, plan.control_cap_ratio, train_pat.size());
    cap(test_con, plan.control_cap_ratio, test_pat.size());
  } else {
    cap(train_pat, plan.patient_cap_ratio, train_con.size());
    cap(test_pat, plan.patient_cap_ratio, test_con.size());
  }

  plan.train = train_con;
  plan.train.insert(plan.train.end(), train_pat.begin(), train_pat.end());
  plan.test = test_con;
  plan.test.insert(plan.test.end(), test_pat.begin(), test_pat.end());
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  if (plan.train.empty() || plan.test.empty())
    throw DataError("degenerate split: a partition came out empty");
  return plan;
}

std::vector<TrialPair> generate_trials(const std::vector<std::string>& test_speakers,
                                       const DatasetManifest& manifest, uint64_t seed,
                                       int positives_per_speaker, double negative_ratio) {
  if (positives_per_speaker < 1) throw UsageError("positives_per_speaker must be >= 1");
  if (negative_ratio < 0.0) throw UsageError("negative_ratio must be >= 0");
  std::vector<std::string> sorted = test_speakers;
  std::sort(sorted.begin(), sorted.end());

  // speakers without two utterances can neither enroll nor be tested
  std::vector<std::string> speakers;
  for (const std::string& spk : sorted)
    if (manifest.utterances_of(spk).size() >= 2) speakers.push_back(spk);

  std::vector<TrialPair> trials;
  for (const std::string& spk : speakers) {
    std::vector<std::string> utts;
    for (const Utterance* u : manifest.utterances_of(spk)) utts.push_back(u->id);
    std::sort(utts.begin(), utts.end());

    Rng pos_rng(keyed_seed(seed, "trials|pos|" + spk));
    pos_rng.shuffle(utts);
    size_t n_pos = std::min(size_t(positives_per_speaker), utts.size());
    for (size_t i = 0; i < n_pos; ++i) trials.push_back({spk, utts[i], true});

    std::vector<std::string> others;
    for (const std::string& o : speakers)
      if (o != spk) others.push_back(o);
    if (others.empty()) continue;
    size_t n_neg = size_t(std::llround(negative_ratio * double(n_pos)));
    Rng neg_rng(keyed_seed(seed, "trials|neg|" + spk));
    size_t offset = neg_rng.below(others.size());
    for (size_t i = 0; i < n_neg; ++i) {
      const std::string& enroll = others[(offset + i) % others.size()];
      trials.push_back({enroll, utts[i % utts.size()], false});
    }
  }
  if (trials.empty()) throw DataError("no trials could be generated");
  return trials;
}

std::string trials_to_csv(const std::vector<TrialPair>& pairs, const TrialScoreSet& scores) {
  if (pairs.size() != scores.trials.size())
    throw DataError("trial pairs and scores are misaligned");
  std::ostringstream os;
  os << "enroll_id,test_id,score,label,gender,age_group,disorder\n";
  for (size_t i = 0; i < pairs.size(); ++i) {
    const Trial& t = scores.trials[i];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", t.score);
    os << pairs[i].enroll_speaker << ',' << pairs[i].test_utterance << ',' << buf << ','
       << (t.label ? 1 : 0) << ',' << t.gender << ',' << t.age_group << ',' << t.disorder << "\n";
  }
  return os.str();
}

namespace {

using EmbeddingTable = std::map<std::string, SpeakerEmbedding>;  // utterance id -> embedding

std::vector<const Utterance*> collect_utterances(const DatasetManifest& manifest,
                                                 const std::vector<std::string>& speakers) {
  std::set<std::string> wanted(speakers.begin(), speakers.end());
  std::vector<const Utterance*> out;
  for (const Utterance& u : manifest.utterances)
    if (wanted.count(u.speaker_id)) out.push_back(&u);
  return out;
}

AudioClip load_processed(const Utterance& utt, const AnonymizerSpec* anonymizer, uint64_t seed,
                         const std::string& salt, bool use_vad) {
  AudioClip clip = read_wav(utt.path);
  clip.source_id = utt.id;
  if (anonymizer && anonymizer->method != AnonymizerSpec::Method::none)
    clip = apply_anonymizer(clip, *anonymizer, seed, utt.speaker_id, salt);
  if (use_vad) clip = apply_vad(clip, VadConfig{});
  return clip;
}

EmbeddingTable embed_all(const std::vector<const Utterance*>& utts, const AnonymizerSpec* anonymizer,
                         uint64_t seed, const std::string& salt, const EvalOptions& options) {
  std::vector<SpeakerEmbedding> embeddings(utts.size());
  parallel_for(utts.size(), options.jobs, [&](size_t i) {
    AudioClip clip = load_processed(*utts[i], anonymizer, seed, salt, options.use_vad);
    MelSpectrogram mel = compute_log_mel(clip, asv_preset(clip.sample_rate));
    mel.source_id = utts[i]->id;
    SpeakerEmbedding e = embed_utterance(mel);
    e.speaker_id = utts[i]->speaker_id;
    e.utterance_id = utts[i]->id;
    embeddings[i] = std::move(e);
  });
  EmbeddingTable table;
  for (SpeakerEmbedding& e : embeddings) table.emplace(e.utterance_id, std::move(e));
  return table;
}

SpeakerEmbedding normalized_mean(const std::vector<const SpeakerEmbedding*>& members) {
  std::vector<double> sum(members.front()->dim(), 0.0);
  for (const SpeakerEmbedding* m : members)
    for (size_t i = 0; i < sum.size(); ++i) sum[i] += m->vector[i];
  double norm = 0.0;
  for (double v : sum) norm += v * v;
  norm = std::sqrt(norm);
  if (norm <= 0.0) throw DataError("degenerate embedding (zero norm) in enrollment centroid");
  SpeakerEmbedding out;
  out.vector.resize(sum.size());
  for (size_t i = 0; i < sum.size(); ++i) out.vector[i] = sum[i] / norm;
  out.speaker_id = members.front()->speaker_id;
  return out;
}

// Enrollment uses `enroll` embeddings; positives drop the test utterance from
// their own centroid (leave-one-out) so the pair is never self-scored.
TrialScoreSet score_trials(const std::vector<TrialPair>& trials, const EmbeddingTable& enroll,
                           const EmbeddingTable& test, const DatasetManifest& manifest) {
  std::map<std::string, std::vector<const SpeakerEmbedding*>> by_speaker;
  for (const auto& [utt_id, emb] : enroll) by_speaker[emb.speaker_id].push_back(&emb);

  std::map<std::string, const Speaker*> utt_speaker;
  for (const Utterance& u : manifest.utterances) utt_speaker[u.id] = &manifest.speaker(u.speaker_id);

  TrialScoreSet set;
  set.trials.reserve(trials.size());
  for (const TrialPair& pair : trials) {
    auto members_it = by_speaker.find(pair.enroll_speaker);
    if (members_it == by_speaker.end())
      throw DataError("no enrollment utterances for speaker: " + pair.enroll_speaker);
    std::vector<const SpeakerEmbedding*> members;
    for (const SpeakerEmbedding* m : members_it->second)
      if (!pair.label || m->utterance_id != pair.test_utterance) members.push_back(m);
    if (members.empty())
      throw DataError("empty enrollment set for speaker: " + pair.enroll_speaker);
    auto test_it = test.find(pair.test_utterance);
    if (test_it == test.end()) throw DataError("missing test embedding for: " + pair.test_utterance);

    Trial t;
    t.score = cosine_score(normalized_mean(members), test_it->second);
    t.label = pair.label;
    const Speaker* spk = utt_speaker.at(pair.test_utterance);
    t.gender = spk->gender;
    t.age_group = spk->age_group;
    t.disorder = spk->label;
    set.trials.push_back(std::move(t));
  }
  return set;
}

bool has_both_classes(const TrialScoreSet& set) {
  return set.count_positive() > 0 && set.count_negative() > 0;
}

std::map<std::string, std::pair<TrialScoreSet, TrialScoreSet>> partition_subgroups(
    const TrialScoreSet& original, const TrialScoreSet& anonymized) {
  std::map<std::string, std::pair<TrialScoreSet, TrialScoreSet>> groups;
  for (size_t i = 0; i < original.trials.size(); ++i) {
    const Trial& t = original.trials[i];
    for (const std::string& key : {"gender=" + t.gender, "age=" + t.age_group, "disorder=" + t.disorder}) {
      groups[key].first.trials.push_back(original.trials[i]);
      groups[key].second.trials.push_back(anonymized.trials[i]);
    }
  }
  return groups;
}

}  // namespace

TrialScoreSet score_trial_pairs(const DatasetManifest& manifest, const std::vector<TrialPair>& pairs,
                                const AnonymizerSpec& test_side, uint64_t seed,
                                const EvalOptions& options) {
  std::map<std::string, std::string> owner;
  for (const Utterance& u : manifest.utterances) owner[u.id] = u.speaker_id;
  std::set<std::string> speaker_set;
  for (const TrialPair& p : pairs) {
    speaker_set.insert(p.enroll_speaker);
    auto it = owner.find(p.test_utterance);
    if (it == owner.end()) throw DataError("unknown utterance in trial list: " + p.test_utterance);
    speaker_set.insert(it->second);
  }
  std::vector<const Utterance*> utts =
      collect_utterances(manifest, {speaker_set.begin(), speaker_set.end()});
  EmbeddingTable original = embed_all(utts, nullptr, seed, "", options);
  if (test_side.method == AnonymizerSpec::Method::none)
    return score_trials(pairs, original, original, manifest);
  EmbeddingTable test = embed_all(utts, &test_side, seed, "test", options);
  return score_trials(pairs, original, test, manifest);
}

PrivacyReport run_privacy_eval(const DatasetManifest& manifest, const AnonymizerSpec& anonymizer,
                               uint64_t seed, const EvalOptions& options) {
  SplitPlan split = make_split(manifest, options.task, seed);
  std::vector<TrialPair> trials = generate_trials(split.test, manifest, seed,
                                                  options.positives_per_speaker, options.negative_ratio);
  std::vector<const Utterance*> utts = collect_utterances(manifest, split.test);

  EmbeddingTable original = embed_all(utts, nullptr, seed, "", options);
  TrialScoreSet scores_original = score_trials(trials, original, original, manifest);

  PrivacyReport report;
  report.original = compute_eer(scores_original);
  report.n_trials = trials.size();
  report.n_test_speakers = split.test.size();

  int reps = std::max(1, options.repetitions);
  TrialScoreSet scores_anonymized_first;
  for (int r = 0; r < reps; ++r) {
    std::string salt = r == 0 ? "test" : "test|rep" + std::to_string(r);
    EmbeddingTable anonymized = embed_all(utts, &anonymizer, seed, salt, options);
    TrialScoreSet scores = score_trials(trials, original, anonymized, manifest);
    EerResult eer = compute_eer(scores);
    if (r == 0) {
      report.anonymized = eer;
      scores_anonymized_first = std::move(scores);
    }
    report.repetition_eers_anonymized.push_back(eer.eer_percent);
    report.repetition_eers_original.push_back(report.original.eer_percent);
  }
  report.mean_eer_original = report.original.eer_percent;
  report.mean_eer_anonymized =
      std::accumulate(report.repetition_eers_anonymized.begin(), report.repetition_eers_anonymized.end(), 0.0) /
      double(reps);

  for (auto& [key, pair] : partition_subgroups(scores_original, scores_anonymized_first)) {
    SubgroupEer sub;
    sub.n_trials = pair.first.trials.size();
    sub.eer_defined = has_both_classes(pair.first);
    if (sub.eer_defined) {
      sub.eer_original = compute_eer(pair.first).eer_percent;
      sub.eer_anonymized = compute_eer(pair.second).eer_percent;
    }
    report.subgroups.emplace(key, sub);
  }
  return report;
}

ReferenceClassifier train_reference_classifier(const std::vector<std::vector<double>>& features,
                                               const std::vector<int>& labels, uint64_t seed) {
  (void)seed;  // zero-initialized full-batch descent is already deterministic
  if (features.empty() || features.size() != labels.size())
    throw DataError("training set is empty or misaligned with labels");
  size_t n = features.size(), d = features[0].size();
  for (const auto& row : features)
    if (row.size() != d) throw DataError("inconsistent feature dimension in training set");
  size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    n_pos += size_t(y);
  }
  size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("single-class training set");

  ReferenceClassifier model;
  model.feature_mean.assign(d, 0.0);
  model.feature_scale.assign(d, 1.0);
  for (size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& row : features) mean += row[j];
    mean /= double(n);
    double var = 0.0;
    for (const auto& row : features) var += (row[j] - mean) * (row[j] - mean);
    var /= double(n);
    model.feature_mean[j] = mean;
    model.feature_scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j)
      x[i][j] = (features[i][j] - model.feature_mean[j]) / model.feature_scale[j];

  double w_pos = double(n) / (2.0 * double(n_pos));
  double w_neg = double(n) / (2.0 * double(n_neg));
  model.weights.assign(d, 0.0);
  model.bias = 0.0;
  model.epochs = 200;
  const double lr = 0.1;

  std::vector<double> grad(d);
  for (int epoch = 0; epoch < model.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0, loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double z = model.bias;
      for (size_t j = 0; j < d; ++j) z += model.weights[j] * x[i][j];
      z = std::clamp(z, -35.0, 35.0);
      double p = 1.0 / (1.0 + std::exp(-z));
      double y = double(labels[i]);
      double w = labels[i] ? w_pos : w_neg;
      loss -= w * (y * std::log(std::max(p, 1e-12)) + (1.0 - y) * std::log(std::max(1.0 - p, 1e-12)));
      double g = w * (p - y);
      for (size_t j = 0; j < d; ++j) grad[j] += g * x[i][j];
      grad_b += g;
    }
    for (size_t j = 0; j < d; ++j) model.weights[j] -= lr * grad[j] / double(n);
    model.bias -= lr * grad_b / double(n);
    model.loss_trace.push_back(loss / double(n));
  }
  return model;
}

double classifier_score(const ReferenceClassifier& model, const std::vector<double>& features) {
  if (features.size() != model.weights.size())
    throw DataError("feature dimension does not match the trained classifier");
  double z = model.bias;
  for (size_t j = 0; j < features.size(); ++j)
    z += model.weights[j] * (features[j] - model.feature_mean[j]) / model.feature_scale[j];
  z = std::clamp(z, -35.0, 35.0);
  return 1.0 / (1.0 + std::exp(-z));
}

namespace {

std::vector<double> classifier_features(const AudioClip& clip) {
  MelSpectrogram mel = compute_log_mel(clip, classifier_preset(clip.sample_rate));
  size_t frames = mel.frames.size(), bands = mel.frames[0].size();
  if (frames < 2) throw DataError("clip too short for classifier features");
  std::vector<double> out(2 * bands, 0.0);
  for (size_t b = 0; b < bands; ++b) {
    double mean = 0.0;
    for (size_t f = 0; f < frames; ++f) mean += mel.frames[f][b];
    mean /= double(frames);
    double var = 0.0;
    for (size_t f = 0; f < frames; ++f) var += (mel.frames[f][b] - mean) * (mel.frames[f][b] - mean);
    out[b] = mean;
    out[bands + b] = std::sqrt(var / double(frames));
  }
  return out;
}

struct LabeledFeatures {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::vector<Speaker> tags;  // per row, the utterance's speaker
};

LabeledFeatures extract_features(const DatasetManifest& manifest, const std::vector<std::string>& speakers,
                                 const std::string& task, const AnonymizerSpec* anonymizer, uint64_t seed,
                                 const std::string& salt, const EvalOptions& options) {
  std::vector<const Utterance*> utts = collect_utterances(manifest, speakers);
  LabeledFeatures out;
  out.x.resize(utts.size());
  out.y.resize(utts.size());
  out.tags.resize(utts.size());
  parallel_for(utts.size(), options.jobs, [&](size_t i) {
    AudioClip clip = load_processed(*utts[i], anonymizer, seed, salt, options.use_vad);
    out.x[i] = classifier_features(clip);
    const Speaker& spk = manifest.speaker(utts[i]->speaker_id);
    out.y[i] = spk.label == "control" ? 0 : (task == "pooled" || spk.label == task ? 1 : 0);
    out.tags[i] = spk;
  });
  return out;
}

SubgroupUtility subgroup_utility(const TrialScoreSet& set, double threshold) {
  SubgroupUtility sub;
  sub.n = set.trials.size();
  size_t correct = 0;
  for (const Trial& t : set.trials)
    if ((t.score >= threshold) == t.label) ++correct;
  sub.accuracy = 100.0 * double(correct) / double(set.trials.size());
  if (has_both_classes(set)) {
    sub.auroc = compute_auroc(set);
  } else {
    sub.single_class = true;
  }
  return sub;
}

}  // namespace

UtilityReport run_utility_eval(const ReferenceClassifier& model,
                               const std::vector<std::vector<double>>& test_features,
                               const std::vector<int>& labels, const std::vector<Speaker>& tags) {
  if (test_features.empty() || test_features.size() != labels.size() || labels.size() != tags.size())
    throw DataError("test set is empty or misaligned with labels");
  TrialScoreSet set;
  for (size_t i = 0; i < test_features.size(); ++i) {
    Trial t;
    t.score = classifier_score(model, test_features[i]);
    t.label = labels[i] == 1;
    t.gender = tags[i].gender;
    t.age_group = tags[i].age_group;
    t.disorder = tags[i].label;
    set.trials.push_back(std::move(t));
  }

  UtilityReport report;
  report.n_test = set.trials.size();
  double threshold = youden_threshold(set);
  report.overall = classification_metrics(set, threshold);

  std::map<std::string, TrialScoreSet> groups;
  for (const Trial& t : set.trials) {
    groups["gender=" + t.gender].trials.push_back(t);
    groups["age=" + t.age_group].trials.push_back(t);
  }
  for (const auto& [key, group] : groups)
    report.subgroups.emplace(key, subgroup_utility(group, threshold));

  auto parity = [&](const std::string& a, const std::string& b, const std::string& tie_minority,
                    std::optional<double>& out, std::string& minority_name) {
    auto ia = report.subgroups.find(a), ib = report.subgroups.find(b);
    if (ia == report.subgroups.end() || ib == report.subgroups.end()) return;
    const SubgroupUtility &sa = ia->second, &sb = ib->second;
    bool a_minor = sa.n != sb.n ? sa.n < sb.n : a == tie_minority;
    const SubgroupUtility& minor = a_minor ? sa : sb;
    const SubgroupUtility& major = a_minor ? sb : sa;
    minority_name = a_minor ? a : b;
    out = statistical_parity_difference(minor.accuracy, major.accuracy);
  };
  parity("gender=F", "gender=M", "gender=F", report.ptd_gender, report.gender_minority);
  parity("age=child", "age=adult", "age=child", report.ptd_age, report.age_minority);
  return report;
}

UtilityReport run_utility_pipeline(const DatasetManifest& manifest, const AnonymizerSpec& anonymizer,
                                   uint64_t seed, const EvalOptions& options) {
  SplitPlan split = make_split(manifest, options.task, seed);
  LabeledFeatures train =
      extract_features(manifest, split.train, options.task, &anonymizer, seed, "train", options);
  LabeledFeatures test =
      extract_features(manifest, split.test, options.task, &anonymizer, seed, "test", options);
  ReferenceClassifier model = train_reference_classifier(train.x, train.y, seed);
  UtilityReport report = run_utility_eval(model, test.x, test.y, test.tags);
  report.n_train = train.x.size();
  return report;
}

SweepReport run_sweep(const DatasetManifest& manifest, const std::vector<double>& alphas, uint64_t seed,
                      const EvalOptions& options, const AnonymizerSpec& base) {
  if (alphas.empty()) throw UsageError("sweep needs at least one alpha");
  SplitPlan split = make_split(manifest, options.task, seed);
  std::vector<TrialPair> trials = generate_trials(split.test, manifest, seed,
                                                  options.positives_per_speaker, options.negative_ratio);
  std::vector<const Utterance*> test_utts = collect_utterances(manifest, split.test);

  EmbeddingTable original = embed_all(test_utts, nullptr, seed, "", options);
  TrialScoreSet scores_original = score_trials(trials, original, original, manifest);

  SweepReport report;
  report.seed = seed;
  report.eer_original = compute_eer(scores_original).eer_percent;

  for (double alpha : alphas) {
    AnonymizerSpec spec = base;
    spec.method = AnonymizerSpec::Method::mcadams;
    spec.fixed_alpha = true;
    spec.alpha = alpha;

    SweepRow row;
    row.alpha = alpha;
    EmbeddingTable anonymized = embed_all(test_utts, &spec, seed, "test", options);
    TrialScoreSet scores = score_trials(trials, original, anonymized, manifest);
    row.eer_percent = compute_eer(scores).eer_percent;
    std::map<std::string, TrialScoreSet> groups;
    for (const Trial& t : scores.trials) {
      groups["gender=" + t.gender].trials.push_back(t);
      groups["age=" + t.age_group].trials.push_back(t);
    }
    for (const auto& [key, group] : groups)
      if (has_both_classes(group)) row.subgroup_eer[key] = compute_eer(group).eer_percent;

    LabeledFeatures train =
        extract_features(manifest, split.train, options.task, &spec, seed, "train", options);
    LabeledFeatures test =
        extract_features(manifest, split.test, options.task, &spec, seed, "test", options);
    ReferenceClassifier model = train_reference_classifier(train.x, train.y, seed);
    UtilityReport utility = run_utility_eval(model, test.x, test.y, test.tags);
    row.auroc = utility.overall.auroc;
    row.accuracy = utility.overall.accuracy;
    row.sensitivity = utility.overall.sensitivity;
    row.specificity = utility.overall.specificity;
    report.rows.push_back(std::move(row));
  }

  if (report.rows.size() >= 3) {
    std::vector<double> eers, aurocs;
    for (const SweepRow& row : report.rows) {
      eers.push_back(row.eer_percent);
      aurocs.push_back(row.auroc);
    }
    try {
      report.eer_auroc_correlation = pearson_r(eers, aurocs);
    } catch (const DataError&) {
      report.eer_auroc_correlation = PearsonResult{};  // constant column; leave the neutral default
    }
  }
  return report;
}

PooledReport run_pooled_eval(const DatasetManifest& manifest, const AnonymizerSpec& anonymizer,
                             uint64_t seed, const EvalOptions& options) {
  DatasetManifest pooled = pooled_view(manifest);
  EvalOptions opts = options;
  opts.task = "pooled";
  PooledReport report;
  report.privacy = run_privacy_eval(pooled, anonymizer, seed, opts);
  auto it = report.privacy.subgroups.find("disorder=patient");
  if (it != report.privacy.subgroups.end()) report.patient_subset = it->second;
  it = report.privacy.subgroups.find("disorder=control");
  if (it != report.privacy.subgroups.end()) report.control_subset = it->second;
  report.utility = run_utility_pipeline(pooled, anonymizer, seed, opts);
  return report;
}

InversionReport run_inversion_attack(const DatasetManifest& manifest, const AnonymizerSpec& anonymizer,
                                     uint64_t seed, const EvalOptions& options) {
  if (anonymizer.method == AnonymizerSpec::Method::none)
    throw UsageError("inversion attack needs an anonymization method");
  SplitPlan split = make_split(manifest, options.task, seed);
  std::vector<TrialPair> trials = generate_trials(split.test, manifest, seed,
                                                  options.positives_per_speaker, options.negative_ratio);
  std::vector<const Utterance*> utts = collect_utterances(manifest, split.test);

  EmbeddingTable original = embed_all(utts, nullptr, seed, "", options);
  EmbeddingTable anon_test = embed_all(utts, &anonymizer, seed, "test", options);
  // The informed attacker re-anonymizes enrollment data with fresh draws from
  // the same parameter distribution (they know the method, not the seed).
  EmbeddingTable anon_enroll = embed_all(utts, &anonymizer, seed, "enroll", options);

  InversionReport report;
  report.n_trials = trials.size();
  report.eer_original = compute_eer(score_trials(trials, original, original, manifest)).eer_percent;
  report.eer_naive = compute_eer(score_trials(trials, original, anon_test, manifest)).eer_percent;
  report.eer_inverse = compute_eer(score_trials(trials, anon_enroll, anon_test, manifest)).eer_percent;
  return report;
}

// --- report plumbing --------------------------------------------------------

namespace {

json subgroup_eer_json(const SubgroupEer& sub) {
  return json{{"eer_original_percent", sub.eer_defined ? json(sub.eer_original) : json(nullptr)},
              {"eer_anonymized_percent", sub.eer_defined ? json(sub.eer_anonymized) : json(nullptr)},
              {"n_trials", sub.n_trials}};
}

json utility_metrics_json(const UtilityMetrics& m) {
  return json{{"auroc", m.auroc},
              {"accuracy", m.accuracy},
              {"sensitivity", m.sensitivity},
              {"specificity", m.specificity},
              {"threshold", m.threshold}};
}

}  // namespace

std::string privacy_report_json(const PrivacyReport& report) {
  json j;
  j["eer_original_percent"] = report.original.eer_percent;
  j["eer_anonymized_percent"] = report.anonymized.eer_percent;
  j["threshold_original"] = report.original.threshold;
  j["threshold_anonymized"] = report.anonymized.threshold;
  j["mean_eer_original_percent"] = report.mean_eer_original;
  j["mean_eer_anonymized_percent"] = report.mean_eer_anonymized;
  j["repetition_eers_original"] = report.repetition_eers_original;
  j["repetition_eers_anonymized"] = report.repetition_eers_anonymized;
  j["n_trials"] = report.n_trials;
  j["n_test_speakers"] = report.n_test_speakers;
  json subs = json::object();
  for (const auto& [key, sub] : report.subgroups) subs[key] = subgroup_eer_json(sub);
  j["subgroups"] = subs;
  return j.dump(2) + "\n";
}

std::string utility_report_json(const UtilityReport& report) {
  json j;
  j["overall"] = utility_metrics_json(report.overall);
  json subs = json::object();
  for (const auto& [key, sub] : report.subgroups) {
    json s{{"accuracy", sub.accuracy}, {"n", sub.n}, {"single_class", sub.single_class}};
    s["auroc"] = sub.auroc ? json(*sub.auroc) : json(nullptr);
    subs[key] = s;
  }
  j["subgroups"] = subs;
  j["ptd_gender"] = report.ptd_gender ? json(*report.ptd_gender) : json(nullptr);
  j["gender_minority"] = report.gender_minority;
  j["ptd_age"] = report.ptd_age ? json(*report.ptd_age) : json(nullptr);
  j["age_minority"] = report.age_minority;
  j["n_train"] = report.n_train;
  j["n_test"] = report.n_test;
  return j.dump(2) + "\n";
}

std::string sweep_report_json(const SweepReport& report) {
  json j;
  j["eer_original_percent"] = report.eer_original;
  j["seed"] = report.seed;
  j["correlation"] = json{{"r", report.eer_auroc_correlation.r}, {"p", report.eer_auroc_correlation.p}};
  json rows = json::array();
  for (const SweepRow& row : report.rows) {
    json r{{"alpha", row.alpha},
           {"eer_percent", row.eer_percent},
           {"auroc", row.auroc},
           {"accuracy", row.accuracy},
           {"sensitivity", row.sensitivity},
           {"specificity", row.specificity}};
    json subs = json::object();
    for (const auto& [key, eer] : row.subgroup_eer) subs[key] = eer;
    r["subgroup_eer"] = subs;
    rows.push_back(r);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string pooled_report_json(const PooledReport& report) {
  json j;
  j["privacy"] = json::parse(privacy_report_json(report.privacy));
  j["patient_subset"] = subgroup_eer_json(report.patient_subset);
  j["control_subset"] = subgroup_eer_json(report.control_subset);
  j["utility"] = json::parse(utility_report_json(report.utility));
  return j.dump(2) + "\n";
}

std::string inversion_report_json(const InversionReport& report) {
  json j;
  j["eer_original_percent"] = report.eer_original;
  j["eer_naive_percent"] = report.eer_naive;
  j["eer_inverse_percent"] = report.eer_inverse;
  j["n_trials"] = report.n_trials;
  return j.dump(2) + "\n";
}

std::string sweep_report_csv(const SweepReport& report) {
  std::ostringstream os;
  os << "alpha,eer_percent,auroc,accuracy,sensitivity,specificity\n";
  for (const SweepRow& row : report.rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.alpha, row.eer_percent,
                  row.auroc, row.accuracy, row.sensitivity, row.specificity);
    os << buf;
  }
  return os.str();
}

std::string report_to_json_text(const std::string& kind, uint64_t seed, const std::string& config_hash,
                                const std::string& body_json) {
  json j;
  j["kind"] = kind;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["toolkit_version"] = kVersion;
  j["report"] = json::parse(body_json);
  return j.dump(2) + "\n";
}

namespace {

void flatten_json(const json& j, const std::string& prefix, std::ostringstream& os) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), os);
  } else if (j.is_array()) {
    for (size_t i = 0; i < j.size(); ++i) flatten_json(j[i], prefix + "[" + std::to_string(i) + "]", os);
  } else {
    os << prefix << "," << j.dump() << "\n";
  }
}

json sweep_rows_of(const json& j) {
  if (j.contains("rows")) return j["rows"];
  if (j.contains("report") && j["report"].contains("rows")) return j["report"]["rows"];
  return json();
}

}  // namespace

void emit_report(const std::string& json_text, const std::string& format, const std::string& path) {
  std::string out;
  if (format == "json") {
    out = json_text;
  } else if (format == "csv") {
    json j = json::parse(json_text);
    json rows = sweep_rows_of(j);
    std::ostringstream os;
    if (rows.is_array()) {
      os << "alpha,eer_percent,auroc,accuracy,sensitivity,specificity\n";
      for (const json& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r["alpha"].get<double>(),
                      r["eer_percent"].get<double>(), r["auroc"].get<double>(),
                      r["accuracy"].get<double>(), r["sensitivity"].get<double>(),
                      r["specificity"].get<double>());
        os << buf;
      }
    } else {
      os << "key,value\n";
      flatten_json(j, "", os);
    }
    out = os.str();
  } else {
    throw UsageError("unknown report format: " + format);
  }
  if (path == "-" || path.empty()) {
    std::cout << out;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("unwritable path: " + path);
  f << out;
  if (!f.good()) throw DataError("unwritable path: " + path);
}

std::string config_hash(const AnonymizerSpec& spec, const EvalOptions& options, uint64_t seed) {
  std::ostringstream os;
  os << spec.method_name() << '|' << (spec.fixed_alpha ? 1 : 0) << '|' << fmt_double(spec.alpha) << '|'
     << fmt_double(spec.mcadams.alpha_min) << '|' << fmt_double(spec.mcadams.alpha_max) << '|'
     << fmt_double(spec.mcadams.frame_ms) << '|' << fmt_double(spec.mcadams.hop_ms) << '|'
     << spec.mcadams.lpc_order << '|' << fmt_double(spec.mcadams.angle_epsilon) << '|'
     << fmt_double(spec.pitch.semitone_min) << '|' << fmt_double(spec.pitch.semitone_max) << '|'
     << spec.pitch.vocoder_iterations << '|' << options.task << '|' << options.positives_per_speaker
     << '|' << fmt_double(options.negative_ratio) << '|' << options.repetitions << '|'
     << (options.use_vad ? 1 : 0) << '|' << seed;
  return hash_hex(fnv1a64(os.str(), 0xcbf29ce484222325ull));
}

}  // namespace spanon

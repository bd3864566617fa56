#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spanon/anonymize.hpp"
#include "spanon/embedding.hpp"
#include "spanon/metrics.hpp"

namespace spanon {

struct Speaker {
  std::string id;
  std::string gender;     // F | M
  std::string age_group;  // adult | child
  std::string label;      // control | dysarthria | dysglossia | dysphonia | clp | other (| patient when pooled)
};

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::string path;
};

struct DatasetManifest {
  std::vector<Speaker> speakers;
  std::vector<Utterance> utterances;

  const Speaker& speaker(const std::string& id) const;
  std::vector<const Utterance*> utterances_of(const std::string& speaker_id) const;
};

// `path` is a directory holding speakers.csv + utterances.csv (or the path of
// speakers.csv itself, with utterances.csv alongside). Relative audio paths
// resolve against that directory.
DatasetManifest load_manifest(const std::string& path);

// Relabel every non-control speaker as "patient" (the pooled-evaluation view).
DatasetManifest pooled_view(const DatasetManifest& manifest);

struct SplitPlan {
  std::vector<std::string> train;  // speaker ids, sorted
  std::vector<std::string> test;
  uint64_t seed = 0;
  double patient_cap_ratio = 2.0;
  double control_cap_ratio = 1.5;
  bool child_task = false;
};

// Seeded per-class 70/30 speaker split (70% rounded down), then caps inside
// each partition: adult tasks cap patients at 2x controls, child tasks cap
// controls at 1.5x patients. A task counts as "child" when a strict majority
// of its patient speakers are children.
SplitPlan make_split(const DatasetManifest& manifest, const std::string& task, uint64_t seed);

struct TrialPair {
  std::string enroll_speaker;
  std::string test_utterance;
  bool label = false;
};

// Up to positives_per_speaker same-speaker pairs per test speaker (leave-one-
// out centroid enrollment at scoring time) and negative_ratio times as many
// cross-speaker pairs, all keyed by (seed, speaker id).
std::vector<TrialPair> generate_trials(const std::vector<std::string>& test_speakers,
                                       const DatasetManifest& manifest, uint64_t seed,
                                       int positives_per_speaker, double negative_ratio);

// Scored-trial export, one row per trial:
// enroll_id,test_id,score,label,gender,age_group,disorder
std::string trials_to_csv(const std::vector<TrialPair>& pairs, const TrialScoreSet& scores);

struct EvalOptions {
  std::string task = "pooled";  // disorder label, or "pooled" for patient-vs-control
  int positives_per_speaker = 10;
  double negative_ratio = 1.0;
  int repetitions = 1;
  unsigned jobs = 1;
  bool use_vad = true;
};

// Score one trial list through the standard pipeline: enrollment on original
// audio, test side anonymized per `test_side` (method none scores original
// against original). Order matches `pairs`.
TrialScoreSet score_trial_pairs(const DatasetManifest& manifest, const std::vector<TrialPair>& pairs,
                                const AnonymizerSpec& test_side, uint64_t seed,
                                const EvalOptions& options);

struct SubgroupEer {
  double eer_original = 0.0;
  double eer_anonymized = 0.0;
  size_t n_trials = 0;
  bool eer_defined = true;  // false when the subgroup lacks one trial class
};

struct PrivacyReport {
  EerResult original;    // enrollment and test both original
  EerResult anonymized;  // enrollment original, test anonymized (attacker model)
  double mean_eer_original = 0.0;  // across repetitions
  double mean_eer_anonymized = 0.0;
  std::vector<double> repetition_eers_original;
  std::vector<double> repetition_eers_anonymized;
  std::map<std::string, SubgroupEer> subgroups;  // "gender=F", "age=child", "disorder=..."
  size_t n_trials = 0;
  size_t n_test_speakers = 0;
};

PrivacyReport run_privacy_eval(const DatasetManifest& manifest, const AnonymizerSpec& anonymizer,
                               uint64_t seed, const EvalOptions& options);

struct ReferenceClassifier {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_mean;   // train-split standardization
  std::vector<double> feature_scale;
  std::vector<double> loss_trace;
  int epochs = 0;
};

// Class-weighted logistic regression, full-batch gradient descent, zero init;
// deterministic. labels are 0/1.
ReferenceClassifier train_reference_classifier(const std::vector<std::vector<double>>& features,
                                               const std::vector<int>& labels, uint64_t seed);

double classifier_score(const ReferenceClassifier& model, const std::vector<double>& features);

struct SubgroupUtility {
  double accuracy = 0.0;
  std::optional<double> auroc;  // empty when the subgroup has one class only
  size_t n = 0;
  bool single_class = false;
};

struct UtilityReport {
  UtilityMetrics overall;
  std::map<std::string, SubgroupUtility> subgroups;  // "gender=F", "age=adult", ...
  std::optional<double> ptd_gender;                  // (minority - majority)/100
  std::string gender_minority;
  std::optional<double> ptd_age;
  std::string age_minority;
  size_t n_train = 0;
  size_t n_test = 0;
};

// Scores a labeled, tagged test set against a trained classifier.
UtilityReport run_utility_eval(const ReferenceClassifier& model,
                               const std::vector<std::vector<double>>& test_features,
                               const std::vector<int>& labels, const std::vector<Speaker>& tags);

// End-to-end utility pipeline: split, features (anonymized on both sides when
// the spec says so), train, evaluate.
UtilityReport run_utility_pipeline(const DatasetManifest& manifest, const AnonymizerSpec& anonymizer,
                                   uint64_t seed, const EvalOptions& options);

struct SweepRow {
  double alpha = 0.0;
  double eer_percent = 0.0;
  double auroc = 0.0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  std::map<std::string, double> subgroup_eer;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  PearsonResult eer_auroc_correlation;
  double eer_original = 0.0;  // unanonymized baseline on the same trials
  uint64_t seed = 0;
};

// Fixed-alpha anonymization at each requested coefficient over one frozen
// split and trial list (paired design); privacy enrolls on original audio,
// utility retrains on anonymized train audio.
SweepReport run_sweep(const DatasetManifest& manifest, const std::vector<double>& alphas, uint64_t seed,
                      const EvalOptions& options, const AnonymizerSpec& base = {});

struct PooledReport {
  PrivacyReport privacy;            // on the pooled patient-vs-control view
  SubgroupEer patient_subset;       // test trials whose test speaker is a patient
  SubgroupEer control_subset;
  UtilityReport utility;
};

PooledReport run_pooled_eval(const DatasetManifest& manifest, const AnonymizerSpec& anonymizer,
                             uint64_t seed, const EvalOptions& options);

struct InversionReport {
  double eer_original = 0.0;  // enroll original, test original
  double eer_naive = 0.0;     // enroll original, test anonymized
  double eer_inverse = 0.0;   // enroll anonymized (fresh draws), test anonymized
  size_t n_trials = 0;
};

InversionReport run_inversion_attack(const DatasetManifest& manifest, const AnonymizerSpec& anonymizer,
                                     uint64_t seed, const EvalOptions& options);

// --- report plumbing ------------------------------------------------------

// Canonical JSON text (sorted keys, 2-space indent, trailing newline).
std::string report_to_json_text(const std::string& kind, uint64_t seed, const std::string& config_hash,
                                const std::string& body_json);

std::string privacy_report_json(const PrivacyReport& report);
std::string utility_report_json(const UtilityReport& report);
std::string sweep_report_json(const SweepReport& report);
std::string pooled_report_json(const PooledReport& report);
std::string inversion_report_json(const InversionReport& report);
std::string sweep_report_csv(const SweepReport& report);

// Serialize a finished report (already-canonical JSON body) to disk as JSON,
// or as a flat key,value CSV (sweep reports become one row per alpha).
void emit_report(const std::string& json_text, const std::string& format, const std::string& path);

// FNV-1a over the canonical option/anonymizer encoding; printed with every run.
std::string config_hash(const AnonymizerSpec& spec, const EvalOptions& options, uint64_t seed);

}  // namespace spanon

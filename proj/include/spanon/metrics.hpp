#pragma once

#include <string>
#include <vector>

#include "spanon/common.hpp"

namespace spanon {

struct Trial {
  double score = 0.0;
  bool label = false;  // true = same-speaker / positive class
  std::string gender;
  std::string age_group;
  std::string disorder;
};

struct TrialScoreSet {
  std::vector<Trial> trials;

  size_t count_positive() const;
  size_t count_negative() const;
};

struct RocPoint {
  double threshold = 0.0;
  double far_percent = 0.0;  // negatives accepted (score >= threshold)
  double frr_percent = 0.0;  // positives rejected
};

struct EerResult {
  double eer_percent = 0.0;
  double threshold = 0.0;
  double far_at_threshold = 0.0;
  double frr_at_threshold = 0.0;
};

struct UtilityMetrics {
  double auroc = 0.0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double threshold = 0.0;
};

struct OddsResult {
  double expected_false_accepts = 0.0;
  long long odds_denominator = 1;  // the N of "1:N"
};

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;  // fractional under Welch
  bool degenerate = false;  // zero pooled variance with unequal means
};

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;
};

// Step curve over all distinct thresholds (accept iff score >= threshold),
// plus one sentinel threshold above the maximum score. FAR is non-increasing
// and FRR non-decreasing along the curve.
std::vector<RocPoint> compute_roc(const TrialScoreSet& trials);

// EER by linear interpolation between the bracketing ROC steps.
EerResult compute_eer(const TrialScoreSet& trials);

// Mann-Whitney pair statistic in percent; ties count 1/2. Label-flip
// antisymmetry is exact: the value is canonicalized through the smaller side
// of the U statistic before the single floating division.
double compute_auroc(const TrialScoreSet& trials);

UtilityMetrics classification_metrics(const TrialScoreSet& trials, double threshold);

// Smallest threshold maximizing Youden's J (sensitivity + specificity - 1).
double youden_threshold(const TrialScoreSet& trials);

// (accuracy_minority - accuracy_majority) / 100, both in percent.
double statistical_parity_difference(double accuracy_minority, double accuracy_majority);

OddsResult identification_odds(long long n_speakers, double eer_percent);

// Student's pooled-variance two-sample t by default; Welch behind the flag.
TTestResult unpaired_t_test(const std::vector<double>& a, const std::vector<double>& b, bool welch = false);

PearsonResult pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Regularized incomplete beta I_x(a, b); exposed for the t-distribution tests.
double incomplete_beta(double a, double b, double x);

}  // namespace spanon

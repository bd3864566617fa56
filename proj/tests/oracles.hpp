#pragma once

// Independent reference implementations used to check the library. These are
// deliberately written the slow, obvious way (exhaustive sweeps, O(n^2) pair
// counting) and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

// EER by exhaustive threshold sweep: evaluate FAR/FRR below the minimum score,
// at the midpoint of every adjacent distinct-score pair, and above the
// maximum; locate the FAR-FRR sign change and interpolate linearly.
inline double eer_percent(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> all = pos;
  all.insert(all.end(), neg.begin(), neg.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds;
  thresholds.push_back(all.front() - 1.0);
  for (size_t i = 0; i + 1 < all.size(); ++i) thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  thresholds.push_back(all.back() + 1.0);
  // evaluating at each distinct score too covers the >= boundary exactly
  for (double s : all) thresholds.push_back(s);
  std::sort(thresholds.begin(), thresholds.end());

  auto far_at = [&](double t) {
    size_t accepted = 0;
    for (double s : neg)
      if (s >= t) ++accepted;
    return 100.0 * double(accepted) / double(neg.size());
  };
  auto frr_at = [&](double t) {
    size_t rejected = 0;
    for (double s : pos)
      if (s < t) ++rejected;
    return 100.0 * double(rejected) / double(pos.size());
  };

  double prev_far = far_at(thresholds[0]);
  double prev_frr = frr_at(thresholds[0]);
  if (prev_far - prev_frr == 0.0) return prev_far;
  for (size_t i = 1; i < thresholds.size(); ++i) {
    double far = far_at(thresholds[i]);
    double frr = frr_at(thresholds[i]);
    double da = prev_far - prev_frr;
    double db = far - frr;
    if (db == 0.0) return 0.5 * (far + frr);
    if ((da > 0.0) != (db > 0.0)) {
      double lambda = da / (da - db);
      return prev_far + lambda * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return prev_far;  // curves never crossed (degenerate single-step case)
}

// AUROC by direct pair counting, ties at half weight.
inline double auroc_percent(const std::vector<double>& pos, const std::vector<double>& neg) {
  double score = 0.0;
  for (double p : pos)
    for (double n : neg) {
      if (p > n)
        score += 1.0;
      else if (p == n)
        score += 0.5;
    }
  return 100.0 * score / (double(pos.size()) * double(neg.size()));
}

}  // namespace oracle

#include "spanon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spanon {

namespace {

void split_scores(const TrialScoreSet& set, std::vector<double>& pos, std::vector<double>& neg) {
  for (const Trial& t : set.trials) {
    if (!std::isfinite(t.score)) throw DataError("non-finite trial score");
    (t.label ? pos : neg).push_back(t.score);
  }
  if (pos.empty() || neg.empty()) throw DataError("single-class input: need both positive and negative trials");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
}

size_t count_at_least(const std::vector<double>& sorted, double t) {
  return size_t(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
}

size_t count_below(const std::vector<double>& sorted, double t) {
  return size_t(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
}

}  // namespace

size_t TrialScoreSet::count_positive() const {
  size_t n = 0;
  for (const Trial& t : trials) n += t.label ? 1 : 0;
  return n;
}

size_t TrialScoreSet::count_negative() const { return trials.size() - count_positive(); }

std::vector<RocPoint> compute_roc(const TrialScoreSet& set) {
  std::vector<double> pos, neg;
  split_scores(set, pos, neg);

  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size() + 1);
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);  // sentinel: accept nothing

  std::vector<RocPoint> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    RocPoint p;
    p.threshold = t;
    p.far_percent = 100.0 * double(count_at_least(neg, t)) / double(neg.size());
    p.frr_percent = 100.0 * double(count_below(pos, t)) / double(pos.size());
    curve.push_back(p);
  }
  return curve;
}

EerResult compute_eer(const TrialScoreSet& set) {
  std::vector<RocPoint> curve = compute_roc(set);
  EerResult res;
  for (size_t i = 0; i < curve.size(); ++i) {
    double diff = curve[i].far_percent - curve[i].frr_percent;
    if (diff == 0.0) {
      res.eer_percent = curve[i].far_percent;
      res.threshold = curve[i].threshold;
      res.far_at_threshold = curve[i].far_percent;
      res.frr_at_threshold = curve[i].frr_percent;
      return res;
    }
    if (diff < 0.0) {
      // sign change between i-1 and i (diff starts at +100)
      const RocPoint& a = curve[i - 1];
      const RocPoint& b = curve[i];
      double da = a.far_percent - a.frr_percent;
      double db = diff;
      double s = da / (da - db);
      res.far_at_threshold = a.far_percent + s * (b.far_percent - a.far_percent);
      res.frr_at_threshold = a.frr_percent + s * (b.frr_percent - a.frr_percent);
      res.eer_percent = res.far_at_threshold;
      res.threshold = a.threshold + s * (b.threshold - a.threshold);
      return res;
    }
  }
  throw NumericError("eer crossing not found");  // unreachable: sentinel forces a sign change
}

double compute_auroc(const TrialScoreSet& set) {
  std::vector<double> pos, neg;
  split_scores(set, pos, neg);

  // integer half-units: 2*wins + ties, so the only floating step is one division
  unsigned long long u2 = 0;
  for (double s : pos) {
    size_t wins = count_below(neg, s);
    size_t ties = size_t(std::upper_bound(neg.begin(), neg.end(), s) - std::lower_bound(neg.begin(), neg.end(), s));
    u2 += 2ull * wins + ties;
  }
  unsigned long long m2 = 2ull * pos.size() * neg.size();
  unsigned long long u2_small = std::min(u2, m2 - u2);
  double base = 100.0 * double(u2_small) / double(m2);
  // label-flip antisymmetry is exact: the larger side is literally 100 - base
  return (2ull * u2 <= m2) ? base : 100.0 - base;
}

UtilityMetrics classification_metrics(const TrialScoreSet& set, double threshold) {
  size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const Trial& t : set.trials) {
    bool predicted = t.score >= threshold;
    if (t.label && predicted) ++tp;
    else if (t.label) ++fn;
    else if (predicted) ++fp;
    else ++tn;
  }
  if (tp + fn == 0 || tn + fp == 0) throw DataError("single-class input: need both classes");
  UtilityMetrics m;
  m.threshold = threshold;
  m.sensitivity = 100.0 * double(tp) / double(tp + fn);
  m.specificity = 100.0 * double(tn) / double(tn + fp);
  m.accuracy = 100.0 * double(tp + tn) / double(set.trials.size());
  m.auroc = compute_auroc(set);
  return m;
}

double youden_threshold(const TrialScoreSet& set) {
  std::vector<double> pos, neg;
  split_scores(set, pos, neg);
  std::vector<double> candidates;
  candidates.insert(candidates.end(), pos.begin(), pos.end());
  candidates.insert(candidates.end(), neg.begin(), neg.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best_t = candidates.front();
  double best_j = -2.0;
  for (double t : candidates) {
    double sens = double(count_at_least(pos, t)) / double(pos.size());
    double spec = double(count_below(neg, t)) / double(neg.size());
    double j = sens + spec - 1.0;
    if (j > best_j) {
      best_j = j;
      best_t = t;
    }
  }
  return best_t;
}

double statistical_parity_difference(double accuracy_minority, double accuracy_majority) {
  if (accuracy_minority < 0 || accuracy_minority > 100 || accuracy_majority < 0 || accuracy_majority > 100)
    throw DataError("accuracies must be in [0, 100]");
  return (accuracy_minority - accuracy_majority) / 100.0;
}

OddsResult identification_odds(long long n_speakers, double eer_percent) {
  if (n_speakers < 2) throw UsageError("identification odds need n >= 2 speakers");
  if (!(eer_percent >= 0.0 && eer_percent <= 100.0)) throw UsageError("eer must be in [0, 100]");
  OddsResult r;
  r.expected_false_accepts = double(n_speakers - 1) * eer_percent / 100.0;
  long long rounded = llround(r.expected_false_accepts);
  r.odds_denominator = rounded < 1 ? 1 : rounded;
  return r;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // continued fraction (modified Lentz)
  auto betacf = [](double a_, double b_, double x_) {
    const int max_iter = 300;
    const double eps = 3e-16, fpmin = 1e-300;
    double qab = a_ + b_, qap = a_ + 1.0, qam = a_ - 1.0;
    double c = 1.0, d = 1.0 - qab * x_ / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
      int m2 = 2 * m;
      double aa = m * (b_ - m) * x_ / ((qam + m2) * (a_ + m2));
      d = 1.0 + aa * d;
      if (std::fabs(d) < fpmin) d = fpmin;
      c = 1.0 + aa / c;
      if (std::fabs(c) < fpmin) c = fpmin;
      d = 1.0 / d;
      h *= d * c;
      aa = -(a_ + m) * (qab + m) * x_ / ((a_ + m2) * (qap + m2));
      d = 1.0 + aa * d;
      if (std::fabs(d) < fpmin) d = fpmin;
      c = 1.0 + aa / c;
      if (std::fabs(c) < fpmin) c = fpmin;
      d = 1.0 / d;
      double del = d * c;
      h *= del;
      if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
  };
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

namespace {

double t_two_tailed_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

}  // namespace

TTestResult unpaired_t_test(const std::vector<double>& a, const std::vector<double>& b, bool welch) {
  if (a.size() < 2 || b.size() < 2) throw DataError("t-test needs >= 2 samples per group");
  double na = double(a.size()), nb = double(b.size());
  double ma = 0.0, mb = 0.0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= na;
  mb /= nb;
  double ssa = 0.0, ssb = 0.0;
  for (double v : a) ssa += (v - ma) * (v - ma);
  for (double v : b) ssb += (v - mb) * (v - mb);

  TTestResult res;
  double se;
  if (welch) {
    double va = ssa / (na - 1.0), vb = ssb / (nb - 1.0);
    se = std::sqrt(va / na + vb / nb);
    double num = (va / na + vb / nb) * (va / na + vb / nb);
    double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
    res.df = den > 0.0 ? num / den : na + nb - 2.0;
  } else {
    res.df = na + nb - 2.0;
    double sp2 = (ssa + ssb) / res.df;
    se = std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
  }

  if (se == 0.0) {
    if (ma == mb) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      res.p = 0.0;
      res.degenerate = true;
    }
    return res;
  }
  res.t = (ma - mb) / se;
  res.p = t_two_tailed_p(res.t, res.df);
  return res;
}

PearsonResult pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  size_t n = x.size();
  if (n < 3) throw DataError("pearson: need length >= 3");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: constant input");

  PearsonResult res;
  res.r = sxy / std::sqrt(sxx * syy);
  res.r = std::max(-1.0, std::min(1.0, res.r));
  double df = double(n) - 2.0;
  if (std::fabs(res.r) >= 1.0) {
    res.p = 0.0;
  } else {
    double t = res.r * std::sqrt(df / (1.0 - res.r * res.r));
    res.p = t_two_tailed_p(t, df);
  }
  return res;
}

}  // namespace spanon

#include "ps/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ps/error.hpp"

namespace ps {

namespace {

double far_at(const std::vector<double>& spoof_sorted, double thr) {
  // fraction of spoof scored >= thr (falsely accepted as bona fide)
  const auto it = std::lower_bound(spoof_sorted.begin(), spoof_sorted.end(), thr);
  return static_cast<double>(spoof_sorted.end() - it) / spoof_sorted.size();
}

double frr_at(const std::vector<double>& bona_sorted, double thr) {
  // fraction of bona fide scored < thr (falsely rejected)
  const auto it = std::lower_bound(bona_sorted.begin(), bona_sorted.end(), thr);
  return static_cast<double>(it - bona_sorted.begin()) / bona_sorted.size();
}

}  // namespace

EerResult eer(const std::vector<double>& bona_scores,
              const std::vector<double>& spoof_scores) {
  if (bona_scores.empty() || spoof_scores.empty())
    throw DataError("eer: empty class list");

  std::vector<double> bona = bona_scores, spoof = spoof_scores;
  std::sort(bona.begin(), bona.end());
  std::sort(spoof.begin(), spoof.end());

  std::vector<double> all;
  all.reserve(bona.size() + spoof.size());
  all.insert(all.end(), bona.begin(), bona.end());
  all.insert(all.end(), spoof.begin(), spoof.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds;
  thresholds.reserve(all.size() + 1);
  thresholds.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  thresholds.push_back(all.back() + 1.0);

  double prev_thr = thresholds.front();
  double prev_far = far_at(spoof, prev_thr);
  double prev_frr = frr_at(bona, prev_thr);
  double prev_d = prev_far - prev_frr;
  if (prev_d == 0.0) return {prev_far, prev_thr};

  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const double thr = thresholds[i];
    const double far = far_at(spoof, thr);
    const double frr = frr_at(bona, thr);
    const double d = far - frr;
    if (d == 0.0) return {far, thr};
    if (prev_d > 0.0 && d < 0.0) {
      const double t = prev_d / (prev_d - d);
      return {prev_frr + t * (frr - prev_frr), prev_thr + t * (thr - prev_thr)};
    }
    prev_thr = thr;
    prev_far = far;
    prev_frr = frr;
    prev_d = d;
  }
  throw InternalError("eer: no FAR/FRR crossing found");
}

double segment_eer(const std::vector<ScoredTrial>& set, int k) {
  std::vector<double> bona, spoof;
  for (const auto& trial : set) {
    const auto& s = trial.scores.seg[k];
    const auto& y = trial.labels.labels[k];
    if (s.size() != y.size())
      throw DataError("segment_eer: score/label length mismatch in trial " +
                      trial.trial_id);
    for (std::size_t i = 0; i < s.size(); ++i)
      (y[i] ? spoof : bona).push_back(s[i]);
  }
  return eer(bona, spoof).eer;
}

double utterance_eer(const std::vector<ScoredTrial>& set) {
  std::vector<double> bona, spoof;
  for (const auto& trial : set)
    (trial.labels.utterance_spoof ? spoof : bona).push_back(trial.scores.utt);
  return eer(bona, spoof).eer;
}

LooResult leave_one_out(const std::vector<ScoredTrial>& set,
                        const std::string& method, int k) {
  LooResult r;
  r.full_eer = segment_eer(set, k);

  std::vector<ScoredTrial> kept;
  for (const auto& trial : set) {
    const bool has = std::find(trial.methods.begin(), trial.methods.end(),
                               method) != trial.methods.end();
    if (!has) kept.push_back(trial);
  }
  r.loo_eer = segment_eer(kept, k);  // throws when a class empties out
  r.delta = r.loo_eer - r.full_eer;
  return r;
}

std::array<std::optional<double>, 4> boundary_breakdown(
    const std::vector<ScoredTrial>& set, int k) {
  std::array<std::vector<double>, 4> spoof;
  std::vector<double> bona;
  for (const auto& trial : set) {
    const auto& s = trial.scores.seg[k];
    const auto& y = trial.labels.labels[k];
    if (s.size() != y.size())
      throw DataError("boundary_breakdown: score/label length mismatch in trial " +
                      trial.trial_id);
    const std::size_t span =
        static_cast<std::size_t>(trial.sample_rate_hz / 50) << k;
    for (std::size_t m = 0; m < s.size(); ++m) {
      if (!y[m]) {
        bona.push_back(s[m]);
        continue;
      }
      const std::size_t begin = m * span, end = begin + span;
      std::size_t count = 0;
      for (std::size_t b : trial.boundaries)
        if (b >= begin && b < end) ++count;
      spoof[std::min<std::size_t>(count, 3)].push_back(s[m]);
    }
  }

  std::array<std::optional<double>, 4> out;
  for (int bucket = 0; bucket < 4; ++bucket) {
    if (spoof[bucket].empty() || bona.empty()) continue;
    out[bucket] = eer(bona, spoof[bucket]).eer;
  }
  return out;
}

std::vector<RatioGroupRow> ratio_group_eer(
    const std::vector<ScoredTrial>& set,
    std::optional<std::uint64_t> equalize_seed) {
  std::vector<double> bona;
  std::array<std::vector<double>, 10> spoof;
  for (const auto& trial : set) {
    if (!trial.labels.utterance_spoof) {
      bona.push_back(trial.scores.utt);
      continue;
    }
    if (trial.ratio_level < 0 || trial.ratio_level > 9)
      throw DataError("ratio_group_eer: invalid ratio level in trial " +
                      trial.trial_id);
    spoof[trial.ratio_level].push_back(trial.scores.utt);
  }
  if (bona.empty()) throw DataError("ratio_group_eer: no bona fide trials");

  if (equalize_seed) {
    std::size_t smallest = SIZE_MAX;
    for (const auto& level : spoof)
      if (!level.empty()) smallest = std::min(smallest, level.size());
    std::mt19937_64 rng(*equalize_seed);
    for (auto& level : spoof) {
      if (level.size() <= smallest) continue;
      std::shuffle(level.begin(), level.end(), rng);
      level.resize(smallest);
    }
  }

  std::vector<RatioGroupRow> rows;
  for (int level = 0; level < 10; ++level) {
    if (spoof[level].empty()) continue;  // omitted with a warning upstream
    rows.push_back({level, eer(bona, spoof[level]).eer, spoof[level].size()});
  }
  return rows;
}

}  // namespace ps

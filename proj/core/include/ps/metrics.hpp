#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ps/backend.hpp"
#include "ps/labeling.hpp"

namespace ps {

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Equal error rate, higher score = bona fide. Thresholds swept at score
// midpoints with linear interpolation of the FAR/FRR crossing.
EerResult eer(const std::vector<double>& bona_scores,
              const std::vector<double>& spoof_scores);

struct ScoredTrial {
  std::string trial_id;
  ScoreSet scores;
  MultiResLabels labels;
  std::vector<std::string> methods;
  std::vector<std::size_t> boundaries;  // sample indices
  int ratio_level = 0;
  int sample_rate_hz = 16000;
};

// Pools segment scores at resolution k across trials by label, then eer().
double segment_eer(const std::vector<ScoredTrial>& set, int k);

double utterance_eer(const std::vector<ScoredTrial>& set);

struct LooResult {
  double full_eer = 0.0;
  double loo_eer = 0.0;
  double delta = 0.0;
};

// Re-evaluates at resolution k after dropping every trial whose methods
// contain `method`; bona fide trials are always retained.
LooResult leave_one_out(const std::vector<ScoredTrial>& set,
                        const std::string& method, int k);

// Buckets spoofed segments by the number of concatenation boundaries inside
// their span: 0, 1, 2, >=3. Bona fide segments are pooled as the shared
// negative reference. Empty buckets come back as nullopt.
std::array<std::optional<double>, 4> boundary_breakdown(
    const std::vector<ScoredTrial>& set, int k);

struct RatioGroupRow {
  int level = 0;
  double eer = 0.0;
  std::size_t n_spoof = 0;
};

// Utterance EER per intra-ratio level, spoofed trials of that level against
// all bona fide trials. Empty levels are omitted. When equalize_seed is set,
// every level is subsampled to the smallest level size.
std::vector<RatioGroupRow> ratio_group_eer(
    const std::vector<ScoredTrial>& set,
    std::optional<std::uint64_t> equalize_seed = std::nullopt);

}  // namespace ps

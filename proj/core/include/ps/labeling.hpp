#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ps/forge.hpp"

namespace ps {

inline constexpr std::array<int, 6> kResolutionsMs{20, 40, 80, 160, 320, 640};
inline constexpr int kNumResolutions = 6;

// Boolean labels at the six temporal resolutions plus the utterance label.
// 1 = spoof throughout.
struct MultiResLabels {
  std::array<std::vector<std::uint8_t>, kNumResolutions> labels;
  bool utterance_spoof = false;
};

// 20 ms frame labels: a frame is spoof iff it contains at least one spoof
// sample. The final partial frame is kept.
std::vector<std::uint8_t> frame_labels(const Provenance& p, int sample_rate_hz);

// OR over non-overlapping pairs; an odd tail passes through.
std::vector<std::uint8_t> coarsen(const std::vector<std::uint8_t>& labels);

MultiResLabels build_multires(const Provenance& p, int sample_rate_hz);

struct RatioReport {
  std::array<double, kNumResolutions> pct{};  // percent spoof per resolution
  double utterance_pct = 0.0;
};

RatioReport class_ratio_report(const std::vector<MultiResLabels>& all);

struct CountReport {
  std::array<std::size_t, kNumResolutions> counts{};
  std::size_t utterances = 0;
};

CountReport count_report(const std::vector<MultiResLabels>& all);

}  // namespace ps

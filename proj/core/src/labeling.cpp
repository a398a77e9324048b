#include "ps/labeling.hpp"

#include "ps/error.hpp"

namespace ps {

std::vector<std::uint8_t> frame_labels(const Provenance& p, int sample_rate_hz) {
  if (p.mask.empty()) throw DataError("frame_labels: empty mask");
  const std::size_t frame = static_cast<std::size_t>(sample_rate_hz / 50);  // 20 ms
  const std::size_t n = (p.mask.size() + frame - 1) / frame;
  std::vector<std::uint8_t> out(n, 0);
  for (std::size_t i = 0; i < p.mask.size(); ++i)
    if (p.mask[i]) out[i / frame] = 1;
  return out;
}

std::vector<std::uint8_t> coarsen(const std::vector<std::uint8_t>& labels) {
  if (labels.empty()) throw DataError("coarsen: empty input");
  std::vector<std::uint8_t> out((labels.size() + 1) / 2);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::size_t a = 2 * j, b = 2 * j + 1;
    out[j] = labels[a] || (b < labels.size() && labels[b]);
  }
  return out;
}

MultiResLabels build_multires(const Provenance& p, int sample_rate_hz) {
  MultiResLabels out;
  out.labels[0] = frame_labels(p, sample_rate_hz);
  for (int k = 1; k < kNumResolutions; ++k) out.labels[k] = coarsen(out.labels[k - 1]);
  for (auto v : out.labels[0])
    if (v) out.utterance_spoof = true;
  return out;
}

RatioReport class_ratio_report(const std::vector<MultiResLabels>& all) {
  if (all.empty()) throw DataError("class_ratio_report: empty collection");
  RatioReport r;
  std::array<std::size_t, kNumResolutions> spoof{}, total{};
  std::size_t utt_spoof = 0;
  for (const auto& l : all) {
    for (int k = 0; k < kNumResolutions; ++k) {
      total[k] += l.labels[k].size();
      for (auto v : l.labels[k]) spoof[k] += v;
    }
    utt_spoof += l.utterance_spoof ? 1 : 0;
  }
  for (int k = 0; k < kNumResolutions; ++k)
    r.pct[k] = total[k] ? 100.0 * spoof[k] / total[k] : 0.0;
  r.utterance_pct = 100.0 * utt_spoof / all.size();
  return r;
}

CountReport count_report(const std::vector<MultiResLabels>& all) {
  CountReport r;
  for (const auto& l : all) {
    for (int k = 0; k < kNumResolutions; ++k) r.counts[k] += l.labels[k].size();
  }
  r.utterances = all.size();
  return r;
}

}  // namespace ps

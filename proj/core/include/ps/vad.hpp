#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ps/waveform.hpp"

namespace ps {

// One flag per 10 ms frame, hop-aligned to the waveform start.
struct FrameDecisions {
  static constexpr int kFrameMs = 10;
  std::vector<std::uint8_t> flags;  // 1 = speech

  std::size_t size() const { return flags.size(); }
};

struct SpeechSegment {
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;  // exclusive
  SampleClass label = SampleClass::kBonaFide;

  std::size_t length() const { return end_sample - start_sample; }
};

// Adaptive energy threshold detector.
FrameDecisions vad_energy(const Waveform& w);

// Zero-crossing rate gated by energy.
FrameDecisions vad_zero_crossing(const Waveform& w);

// Normalized spectral entropy gated by energy.
FrameDecisions vad_spectral_entropy(const Waveform& w);

// Frame is speech iff at least two of the three inputs say so.
FrameDecisions majority_vote(const FrameDecisions& d1, const FrameDecisions& d2,
                             const FrameDecisions& d3);

// Maximal true runs; gaps <= merge_gap_ms are bridged, runs shorter than
// min_dur_ms are dropped. Sample bounds are frame aligned and clipped to
// total_samples.
std::vector<SpeechSegment> decisions_to_segments(const FrameDecisions& d,
                                                 int sample_rate_hz,
                                                 std::size_t total_samples,
                                                 int min_dur_ms = 100,
                                                 int merge_gap_ms = 30);

// Debug dump: "index<TAB>d1 d2 d3 vote" per frame.
std::string vad_debug_dump(const FrameDecisions& d1, const FrameDecisions& d2,
                           const FrameDecisions& d3, const FrameDecisions& vote);

}  // namespace ps

#pragma once

#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ps/vad.hpp"
#include "ps/waveform.hpp"

namespace ps {

struct PoolEntry {
  std::string utterance_id;
  std::string speaker_id;
  SampleClass cls = SampleClass::kBonaFide;
  std::string method_id = "-";  // generation system tag, "-" for bona fide
  Waveform wav;
  std::vector<SpeechSegment> segments;
  bool clipped = false;  // set when level normalization had to clip
};

struct UtterancePool {
  std::vector<PoolEntry> entries;

  // Checks id uniqueness, method tags and a single shared sample rate.
  void validate() const;
};

struct SpanSubstitution {
  std::size_t target_start = 0;  // in final trial coordinates
  std::size_t target_end = 0;
  std::string source_utterance;
  std::size_t source_start = 0;
  std::size_t source_end = 0;
};

struct Provenance {
  std::vector<std::uint8_t> mask;  // SampleClass per sample
  std::vector<std::size_t> boundaries;  // sorted concatenation points
  std::set<std::string> methods;
  std::vector<SpanSubstitution> substitution_log;
};

struct ForgedTrial {
  std::string trial_id;
  std::string target_utterance;
  Waveform wav;
  Provenance prov;
  double intra_ratio = 0.0;
  int ratio_level = 0;
  bool clipped = false;
};

struct ForgeParams {
  double dur_tolerance = 0.2;
  double xfade_ms = 10.0;
  double search_ms = 40.0;
  int n_sub_min = 1;
  int n_sub_max = 3;
};

struct AlignResult {
  long offset = 0;
  double peak_corr = 0.0;
  bool degenerate = false;
};

// Best lag for joining source_span into target_span, by normalized
// cross-correlation of the span-start neighborhoods over +-search_ms.
// Ties go to the smallest |offset|.
AlignResult align_boundary(const Waveform& target, std::size_t t_start,
                           std::size_t t_end, const Waveform& source,
                           std::size_t s_start, std::size_t s_end,
                           double search_ms = 40.0);

// Replaces target[t_start, t_end) with source[s_start, s_end), linear
// cross-fades of xfade_ms at interior junctions. Mask class switches at the
// fade midpoint; boundary indices are the mask transition points.
void splice(Waveform& target, Provenance& prov, std::size_t t_start,
            std::size_t t_end, const Waveform& source, std::size_t s_start,
            std::size_t s_end, SampleClass source_cls,
            const std::string& source_method, double xfade_ms = 10.0);

double intra_ratio(const Provenance& p);

// floor(r*10), clamped so r = 1.0 lands in level 9.
int quantize_ratio(double r);

// Selection state for one target utterance: tracks used source segments and
// already substituted target segments.
class SubstitutionSelector {
 public:
  SubstitutionSelector(const UtterancePool& pool, const PoolEntry& target,
                       double dur_tolerance = 0.2);

  struct Selection {
    std::size_t target_segment_index;
    SpeechSegment target_segment;
    const PoolEntry* source;
    std::size_t source_segment_index;
    SpeechSegment source_segment;
  };

  // Draws an admissible (target segment, source segment) pair and marks both
  // used. Throws DataError("no admissible segment") when exhausted.
  Selection next(std::mt19937_64& rng);

 private:
  const UtterancePool& pool_;
  const PoolEntry& target_;
  double dur_tolerance_;
  std::vector<bool> target_used_;
  std::set<std::pair<std::string, std::size_t>> source_used_;
};

// Runs n_substitutions select -> align -> splice rounds on a copy of the
// target utterance.
ForgedTrial forge_trial(const UtterancePool& pool, const PoolEntry& target,
                        int n_substitutions, std::mt19937_64& rng,
                        const ForgeParams& params, const std::string& trial_id);

// Level-balanced subsample: quotas of total_target/10 per ratio level,
// deficits redistributed, sampling without replacement.
std::vector<ForgedTrial> balance_sample(std::vector<ForgedTrial> trials,
                                        std::size_t total_target,
                                        std::mt19937_64& rng);

// Deterministic per-trial RNG stream.
std::mt19937_64 trial_rng(std::uint64_t global_seed, const std::string& trial_id);

}  // namespace ps

#include "ps/forge.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ps/error.hpp"

namespace ps {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void UtterancePool::validate() const {
  std::set<std::string> ids;
  int rate = 0;
  for (const auto& e : entries) {
    if (!ids.insert(e.utterance_id).second)
      throw DataError("duplicate utterance_id: " + e.utterance_id);
    if (e.cls == SampleClass::kSpoof && (e.method_id.empty() || e.method_id == "-"))
      throw DataError("spoof entry without method_id: " + e.utterance_id);
    if (rate == 0) rate = e.wav.sample_rate_hz;
    if (e.wav.sample_rate_hz != rate)
      throw DataError("mixed sample rates in pool (entry " + e.utterance_id + ")");
  }
}

AlignResult align_boundary(const Waveform& target, std::size_t t_start,
                           std::size_t t_end, const Waveform& source,
                           std::size_t s_start, std::size_t s_end,
                           double search_ms) {
  if (t_start >= t_end || t_end > target.size())
    throw DataError("align_boundary: invalid target span");
  if (s_start >= s_end || s_end > source.size())
    throw DataError("align_boundary: invalid source span");

  const int sr = target.sample_rate_hz;
  const long search = std::lround(search_ms * sr / 1000.0);
  const std::size_t win_cap = static_cast<std::size_t>(sr / 20);  // 50 ms
  std::size_t win = std::min({t_end - t_start, s_end - s_start, win_cap});
  win = std::min(win, target.size() - t_start);
  if (win == 0) return {0, 0.0, true};

  double u_norm2 = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double x = target.samples[t_start + i];
    u_norm2 += x * x;
  }
  if (u_norm2 <= 0.0) return {0, 0.0, true};

  AlignResult best{0, -2.0, false};
  bool any = false;
  // Lags in order of increasing magnitude so ties keep the smallest |offset|.
  for (long step = 0; step <= search; ++step) {
    for (int sign = 0; sign < (step == 0 ? 1 : 2); ++sign) {
      const long lag = sign == 0 ? step : -step;
      const long begin = static_cast<long>(s_start) + lag;
      if (begin < 0) continue;
      if (static_cast<std::size_t>(begin) + win > source.size()) continue;
      double dot = 0.0, v_norm2 = 0.0;
      for (std::size_t i = 0; i < win; ++i) {
        const double v = source.samples[static_cast<std::size_t>(begin) + i];
        dot += target.samples[t_start + i] * v;
        v_norm2 += v * v;
      }
      if (v_norm2 <= 0.0) continue;
      const double corr = dot / std::sqrt(u_norm2 * v_norm2);
      any = true;
      if (corr > best.peak_corr) {
        best.offset = lag;
        best.peak_corr = corr;
      }
    }
  }
  if (!any) return {0, 0.0, true};
  return best;
}

void splice(Waveform& target, Provenance& prov, std::size_t t_start,
            std::size_t t_end, const Waveform& source, std::size_t s_start,
            std::size_t s_end, SampleClass source_cls,
            const std::string& source_method, double xfade_ms) {
  const std::size_t total = target.size();
  if (t_start >= t_end || t_end > total) throw DataError("splice: invalid target span");
  if (s_start >= s_end || s_end > source.size())
    throw DataError("splice: invalid source span");
  if (prov.mask.size() != total) throw InternalError("splice: mask length mismatch");

  for (const auto& sub : prov.substitution_log) {
    if (t_start < sub.target_end && sub.target_start < t_end)
      throw DataError("splice: span overlaps a previous substitution");
  }

  const std::size_t lt = t_end - t_start;
  const std::size_t ls = s_end - s_start;
  const std::size_t fade =
      static_cast<std::size_t>(std::lround(xfade_ms * target.sample_rate_hz / 1000.0));
  if (fade >= lt || fade >= ls) throw DataError("splice: fade longer than span");

  const bool entry_fade = t_start > 0;
  const bool exit_fade = t_end < total;

  std::vector<double> out;
  out.reserve(total - lt + ls);
  out.insert(out.end(), target.samples.begin(), target.samples.begin() + t_start);
  for (std::size_t i = 0; i < ls; ++i) {
    double v = source.samples[s_start + i];
    if (entry_fade && i < fade) {
      const double a = (i + 1.0) / (fade + 1.0);
      v = (1.0 - a) * target.samples[t_start + i] + a * v;
    }
    if (exit_fade && i >= ls - fade) {
      const double b = (i - (ls - fade) + 1.0) / (fade + 1.0);
      v = (1.0 - b) * v + b * target.samples[t_end - ls + i];
    }
    out.push_back(v);
  }
  out.insert(out.end(), target.samples.begin() + t_end, target.samples.end());

  // Class switches at the fade midpoints.
  const std::size_t switch_in = t_start + (entry_fade ? fade / 2 : 0);
  const std::size_t switch_out = t_start + ls - (exit_fade ? (fade + 1) / 2 : 0);

  std::vector<std::uint8_t> mask;
  mask.reserve(out.size());
  mask.insert(mask.end(), prov.mask.begin(), prov.mask.begin() + t_start);
  for (std::size_t i = 0; i < ls; ++i) {
    const std::size_t o = t_start + i;
    if (o < switch_in) {
      mask.push_back(prov.mask[t_start + i]);
    } else if (o >= switch_out) {
      mask.push_back(prov.mask[o - t_start + t_end - ls]);
    } else {
      mask.push_back(static_cast<std::uint8_t>(source_cls));
    }
  }
  mask.insert(mask.end(), prov.mask.begin() + t_end, prov.mask.end());

  const long delta = static_cast<long>(ls) - static_cast<long>(lt);

  std::vector<std::size_t> boundaries;
  for (std::size_t b : prov.boundaries) {
    if (b < t_start)
      boundaries.push_back(b);
    else if (b >= t_end)
      boundaries.push_back(static_cast<std::size_t>(static_cast<long>(b) + delta));
    // transitions cannot lie inside the replaced span (no overlap allowed)
  }
  if (entry_fade) boundaries.push_back(switch_in);
  if (exit_fade) boundaries.push_back(switch_out);
  std::sort(boundaries.begin(), boundaries.end());

  for (auto& sub : prov.substitution_log) {
    if (sub.target_start >= t_end) {
      sub.target_start = static_cast<std::size_t>(static_cast<long>(sub.target_start) + delta);
      sub.target_end = static_cast<std::size_t>(static_cast<long>(sub.target_end) + delta);
    }
  }
  SpanSubstitution rec;
  rec.target_start = t_start;
  rec.target_end = t_start + ls;
  rec.source_start = s_start;
  rec.source_end = s_end;
  prov.substitution_log.push_back(rec);

  if (source_cls == SampleClass::kSpoof && !source_method.empty() &&
      source_method != "-")
    prov.methods.insert(source_method);

  target.samples = std::move(out);
  prov.mask = std::move(mask);
  prov.boundaries = std::move(boundaries);
}

double intra_ratio(const Provenance& p) {
  if (p.mask.empty()) throw DataError("intra_ratio: empty mask");
  std::size_t spoof = 0;
  for (auto m : p.mask) spoof += m;
  return static_cast<double>(spoof) / static_cast<double>(p.mask.size());
}

int quantize_ratio(double r) {
  if (r < 0.0 || r > 1.0) throw DataError("quantize_ratio: out of range");
  return std::min(static_cast<int>(std::floor(r * 10.0)), 9);
}

SubstitutionSelector::SubstitutionSelector(const UtterancePool& pool,
                                           const PoolEntry& target,
                                           double dur_tolerance)
    : pool_(pool),
      target_(target),
      dur_tolerance_(dur_tolerance),
      target_used_(target.segments.size(), false) {}

SubstitutionSelector::Selection SubstitutionSelector::next(std::mt19937_64& rng) {
  const SampleClass want =
      target_.cls == SampleClass::kBonaFide ? SampleClass::kSpoof : SampleClass::kBonaFide;

  std::vector<std::size_t> target_candidates;
  for (std::size_t i = 0; i < target_.segments.size(); ++i)
    if (!target_used_[i]) target_candidates.push_back(i);
  std::shuffle(target_candidates.begin(), target_candidates.end(), rng);

  for (std::size_t ti : target_candidates) {
    const auto& tseg = target_.segments[ti];
    const double tol = dur_tolerance_ * static_cast<double>(tseg.length());

    std::vector<Selection> admissible;
    for (const auto& entry : pool_.entries) {
      if (entry.utterance_id == target_.utterance_id) continue;
      if (entry.speaker_id != target_.speaker_id) continue;
      if (entry.cls != want) continue;
      for (std::size_t si = 0; si < entry.segments.size(); ++si) {
        if (source_used_.count({entry.utterance_id, si})) continue;
        const auto& sseg = entry.segments[si];
        const double diff = std::abs(static_cast<double>(sseg.length()) -
                                     static_cast<double>(tseg.length()));
        if (diff > tol) continue;
        admissible.push_back({ti, tseg, &entry, si, sseg});
      }
    }
    if (admissible.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, admissible.size() - 1);
    Selection sel = admissible[pick(rng)];
    target_used_[ti] = true;
    source_used_.insert({sel.source->utterance_id, sel.source_segment_index});
    return sel;
  }
  throw DataError("no admissible segment");
}

ForgedTrial forge_trial(const UtterancePool& pool, const PoolEntry& target,
                        int n_substitutions, std::mt19937_64& rng,
                        const ForgeParams& params, const std::string& trial_id) {
  ForgedTrial trial;
  trial.trial_id = trial_id;
  trial.target_utterance = target.utterance_id;
  trial.wav = target.wav;
  trial.clipped = target.clipped;
  trial.prov.mask.assign(target.wav.size(), static_cast<std::uint8_t>(target.cls));
  if (target.cls == SampleClass::kSpoof) trial.prov.methods.insert(target.method_id);

  const SampleClass source_cls =
      target.cls == SampleClass::kBonaFide ? SampleClass::kSpoof : SampleClass::kBonaFide;

  SubstitutionSelector selector(pool, target, params.dur_tolerance);
  // Current-coordinate view of the target's segments, indexed like
  // target.segments; updated after each splice shifts the timeline.
  std::vector<SpeechSegment> current = target.segments;

  for (int round = 0; round < n_substitutions; ++round) {
    auto sel = selector.next(rng);
    SpeechSegment tseg = current[sel.target_segment_index];

    auto align = align_boundary(trial.wav, tseg.start_sample, tseg.end_sample,
                                sel.source->wav, sel.source_segment.start_sample,
                                sel.source_segment.end_sample, params.search_ms);
    long s0 = static_cast<long>(sel.source_segment.start_sample) + align.offset;
    long s1 = static_cast<long>(sel.source_segment.end_sample) + align.offset;
    if (s0 < 0 || static_cast<std::size_t>(s1) > sel.source->wav.size()) {
      s0 = static_cast<long>(sel.source_segment.start_sample);
      s1 = static_cast<long>(sel.source_segment.end_sample);
    }

    const std::size_t lt = tseg.length();
    const std::size_t ls = static_cast<std::size_t>(s1 - s0);
    double xfade = params.xfade_ms;
    const std::size_t min_len = std::min(lt, ls);
    const double max_fade_ms =
        1000.0 * (static_cast<double>(min_len) - 1.0) / trial.wav.sample_rate_hz;
    if (xfade > max_fade_ms / 2.0) xfade = max_fade_ms / 2.0;

    splice(trial.wav, trial.prov, tseg.start_sample, tseg.end_sample,
           sel.source->wav, static_cast<std::size_t>(s0),
           static_cast<std::size_t>(s1), source_cls, sel.source->method_id, xfade);
    trial.prov.substitution_log.back().source_utterance = sel.source->utterance_id;

    const long delta = static_cast<long>(ls) - static_cast<long>(lt);
    for (auto& seg : current) {
      if (seg.start_sample >= tseg.end_sample) {
        seg.start_sample = static_cast<std::size_t>(static_cast<long>(seg.start_sample) + delta);
        seg.end_sample = static_cast<std::size_t>(static_cast<long>(seg.end_sample) + delta);
      }
    }
  }

  if (std::none_of(trial.prov.mask.begin(), trial.prov.mask.end(),
                   [](std::uint8_t m) { return m != 0; }))
    trial.prov.methods.clear();

  trial.intra_ratio = intra_ratio(trial.prov);
  trial.ratio_level = quantize_ratio(trial.intra_ratio);
  return trial;
}

std::vector<ForgedTrial> balance_sample(std::vector<ForgedTrial> trials,
                                        std::size_t total_target,
                                        std::mt19937_64& rng) {
  if (total_target > trials.size())
    throw DataError("balance_sample: target exceeds available trials");

  std::array<std::vector<std::size_t>, 10> by_level;
  for (std::size_t i = 0; i < trials.size(); ++i)
    by_level[trials[i].ratio_level].push_back(i);

  std::array<std::size_t, 10> take{};
  const std::size_t base = total_target / 10;
  const std::size_t rem = total_target % 10;
  std::size_t assigned = 0;
  for (int l = 0; l < 10; ++l) {
    const std::size_t quota = base + (static_cast<std::size_t>(l) < rem ? 1 : 0);
    take[l] = std::min(quota, by_level[l].size());
    assigned += take[l];
  }
  // Redistribute deficits over levels that still have stock.
  while (assigned < total_target) {
    bool progressed = false;
    for (int l = 0; l < 10 && assigned < total_target; ++l) {
      if (take[l] < by_level[l].size()) {
        ++take[l];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }

  std::vector<ForgedTrial> out;
  out.reserve(assigned);
  for (int l = 0; l < 10; ++l) {
    auto idx = by_level[l];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < take[l]; ++i) out.push_back(std::move(trials[idx[i]]));
  }
  std::sort(out.begin(), out.end(), [](const ForgedTrial& a, const ForgedTrial& b) {
    return a.trial_id < b.trial_id;
  });
  return out;
}

std::mt19937_64 trial_rng(std::uint64_t global_seed, const std::string& trial_id) {
  return std::mt19937_64(global_seed ^ fnv1a(trial_id));
}

}  // namespace ps

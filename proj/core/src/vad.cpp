#include "ps/vad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fft.hpp"
#include "ps/error.hpp"

namespace ps {

namespace {

constexpr double kFloorRms = 1e-4;  // -80 dBov, below this a frame is silence

std::size_t frame_count(const Waveform& w) {
  const std::size_t hop = static_cast<std::size_t>(w.sample_rate_hz / 100);
  return (w.samples.size() + hop - 1) / hop;
}

std::vector<double> frame_rms(const Waveform& w) {
  const std::size_t hop = static_cast<std::size_t>(w.sample_rate_hz / 100);
  std::vector<double> rms(frame_count(w));
  for (std::size_t f = 0; f < rms.size(); ++f) {
    const std::size_t begin = f * hop;
    const std::size_t len = std::min(hop, w.samples.size() - begin);
    double e = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double s = w.samples[begin + i];
      e += s * s;
    }
    rms[f] = std::sqrt(e / static_cast<double>(len));
  }
  return rms;
}

}  // namespace

FrameDecisions vad_energy(const Waveform& w) {
  const auto rms = frame_rms(w);
  const double peak = *std::max_element(rms.begin(), rms.end());
  // Frame is active when within 35 dB of the loudest frame.
  const double gate = std::max(peak * std::pow(10.0, -35.0 / 20.0), kFloorRms);
  FrameDecisions d;
  d.flags.resize(rms.size());
  for (std::size_t f = 0; f < rms.size(); ++f) d.flags[f] = rms[f] >= gate;
  return d;
}

FrameDecisions vad_zero_crossing(const Waveform& w) {
  const std::size_t hop = static_cast<std::size_t>(w.sample_rate_hz / 100);
  const auto rms = frame_rms(w);
  const double peak = *std::max_element(rms.begin(), rms.end());
  const double gate = std::max(peak * std::pow(10.0, -40.0 / 20.0), kFloorRms);

  FrameDecisions d;
  d.flags.resize(rms.size());
  for (std::size_t f = 0; f < rms.size(); ++f) {
    const std::size_t begin = f * hop;
    const std::size_t len = std::min(hop, w.samples.size() - begin);
    std::size_t crossings = 0;
    for (std::size_t i = 1; i < len; ++i) {
      const bool a = w.samples[begin + i - 1] >= 0.0;
      const bool b = w.samples[begin + i] >= 0.0;
      if (a != b) ++crossings;
    }
    const double zcr = len > 1 ? static_cast<double>(crossings) / (len - 1) : 0.0;
    // Voiced/unvoiced speech lives well below the ZCR of wideband noise.
    d.flags[f] = rms[f] >= gate && zcr > 0.005 && zcr < 0.45;
  }
  return d;
}

FrameDecisions vad_spectral_entropy(const Waveform& w) {
  const std::size_t hop = static_cast<std::size_t>(w.sample_rate_hz / 100);
  const auto rms = frame_rms(w);
  const double peak = *std::max_element(rms.begin(), rms.end());
  const double gate = std::max(peak * std::pow(10.0, -40.0 / 20.0), kFloorRms);
  constexpr std::size_t kNfft = 256;

  FrameDecisions d;
  d.flags.resize(rms.size());
  for (std::size_t f = 0; f < rms.size(); ++f) {
    if (rms[f] < gate) {
      d.flags[f] = 0;
      continue;
    }
    const std::size_t begin = f * hop;
    const std::size_t len = std::min(hop, w.samples.size() - begin);
    auto p = detail::power_spectrum(w.samples.data() + begin, len, kNfft);
    double total = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) total += p[i];
    if (total <= 0.0) {
      d.flags[f] = 0;
      continue;
    }
    double h = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) {
      const double q = p[i] / total;
      if (q > 0.0) h -= q * std::log(q);
    }
    const double h_norm = h / std::log(static_cast<double>(p.size() - 1));
    // Structured (non-flat) spectra read as speech.
    d.flags[f] = h_norm < 0.92;
  }
  return d;
}

FrameDecisions majority_vote(const FrameDecisions& d1, const FrameDecisions& d2,
                             const FrameDecisions& d3) {
  if (d1.size() != d2.size() || d2.size() != d3.size())
    throw DataError("majority_vote: length mismatch");
  FrameDecisions out;
  out.flags.resize(d1.size());
  for (std::size_t f = 0; f < d1.size(); ++f) {
    const int n = int(d1.flags[f] != 0) + int(d2.flags[f] != 0) + int(d3.flags[f] != 0);
    out.flags[f] = n >= 2;
  }
  return out;
}

std::vector<SpeechSegment> decisions_to_segments(const FrameDecisions& d,
                                                 int sample_rate_hz,
                                                 std::size_t total_samples,
                                                 int min_dur_ms,
                                                 int merge_gap_ms) {
  const std::size_t hop = static_cast<std::size_t>(sample_rate_hz / 100);
  std::vector<std::uint8_t> flags = d.flags;

  // Bridge short gaps.
  const std::size_t max_gap = static_cast<std::size_t>(merge_gap_ms / FrameDecisions::kFrameMs);
  std::size_t last_true = flags.size();
  for (std::size_t f = 0; f < flags.size(); ++f) {
    if (!flags[f]) continue;
    if (last_true != flags.size() && f - last_true - 1 <= max_gap) {
      for (std::size_t g = last_true + 1; g < f; ++g) flags[g] = 1;
    }
    last_true = f;
  }

  const std::size_t min_frames =
      static_cast<std::size_t>((min_dur_ms + FrameDecisions::kFrameMs - 1) /
                               FrameDecisions::kFrameMs);
  std::vector<SpeechSegment> out;
  std::size_t f = 0;
  while (f < flags.size()) {
    if (!flags[f]) {
      ++f;
      continue;
    }
    std::size_t begin = f;
    while (f < flags.size() && flags[f]) ++f;
    if (f - begin >= min_frames) {
      SpeechSegment s;
      s.start_sample = begin * hop;
      s.end_sample = std::min(f * hop, total_samples);
      if (s.end_sample > s.start_sample) out.push_back(s);
    }
  }
  return out;
}

std::string vad_debug_dump(const FrameDecisions& d1, const FrameDecisions& d2,
                           const FrameDecisions& d3, const FrameDecisions& vote) {
  std::ostringstream os;
  for (std::size_t f = 0; f < vote.size(); ++f) {
    os << f << '\t' << int(d1.flags[f]) << ' ' << int(d2.flags[f]) << ' '
       << int(d3.flags[f]) << ' ' << int(vote.flags[f]) << '\n';
  }
  return os.str();
}

}  // namespace ps

#pragma once

#include <filesystem>

#include "ps/waveform.hpp"

namespace ps {

// Reads a RIFF/WAVE file. Mono 16-bit PCM only; samples are scaled by
// 1/32768. Chunks may appear in any order.
Waveform read_wav(const std::filesystem::path& path);

// Writes canonical RIFF/fmt/data chunk order, mono 16-bit PCM.
void write_wav(const Waveform& w, const std::filesystem::path& path);

// Active speech level in dBov. A 10 ms frame is active when its RMS is
// within 35 dB of the loudest frame; the level is the RMS over active
// frames only. Throws DataError on all-silent input.
double active_speech_level_db(const Waveform& w);

struct NormalizeResult {
  Waveform wav;
  double gain = 1.0;
  bool clipped = false;
};

// Scales the whole waveform by one gain so that the active speech level
// hits target_dbov. Samples that would overflow are hard-clipped and the
// result is flagged.
NormalizeResult normalize_level(const Waveform& w, double target_dbov = -26.0);

}  // namespace ps

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ps {

// Mono PCM signal. Samples live in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

enum class SampleClass : std::uint8_t { kBonaFide = 0, kSpoof = 1 };

}  // namespace ps

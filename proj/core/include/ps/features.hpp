#pragma once

#include <cstddef>
#include <vector>

#include "ps/waveform.hpp"

namespace ps {

struct LfccConfig {
  int window = 512;        // samples, power of two (also the FFT size)
  int hop = 320;           // 20 ms at 16 kHz
  int n_filters = 20;      // linear triangular filters over 0..Nyquist
  int n_ceps = 20;
  bool with_deltas = true;  // append delta and delta-delta
  double log_floor = 1e-10;
};

struct FeatureSequence {
  std::size_t n_frames = 0;
  std::size_t dim = 0;
  int frame_shift_ms = 20;
  std::vector<double> data;  // row-major, n_frames x dim

  double& at(std::size_t frame, std::size_t d) { return data[frame * dim + d]; }
  double at(std::size_t frame, std::size_t d) const { return data[frame * dim + d]; }
};

// Linear frequency cepstral coefficients with a 20 ms frame shift.
// N = (T - window) / hop + 1; throws DataError when T < window.
FeatureSequence lfcc(const Waveform& w, const LfccConfig& cfg = {});

// Center frequency (Hz) of filter i, exposed for tests.
double lfcc_filter_center_hz(const LfccConfig& cfg, int sample_rate_hz, int i);

}  // namespace ps

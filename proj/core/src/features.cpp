#include "ps/features.hpp"

#include <cmath>

#include "fft.hpp"
#include "ps/error.hpp"

namespace ps {

namespace {

// Triangular filterbank with linearly spaced centers over 0..Nyquist.
// Returns n_filters rows of nfft/2+1 weights.
std::vector<std::vector<double>> linear_filterbank(const LfccConfig& cfg,
                                                   int sample_rate_hz) {
  const int n_bins = cfg.window / 2 + 1;
  const double nyquist = sample_rate_hz / 2.0;
  const double spacing = nyquist / (cfg.n_filters + 1);

  std::vector<std::vector<double>> fb(cfg.n_filters, std::vector<double>(n_bins, 0.0));
  for (int i = 0; i < cfg.n_filters; ++i) {
    const double left = i * spacing;
    const double center = (i + 1) * spacing;
    const double right = (i + 2) * spacing;
    for (int b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate_hz / cfg.window;
      if (f <= left || f >= right) continue;
      fb[i][b] = f < center ? (f - left) / (center - left)
                            : (right - f) / (right - center);
    }
  }
  return fb;
}

// Orthonormal DCT-II, n_ceps x n_filters.
std::vector<std::vector<double>> dct_matrix(int n_ceps, int n_filters) {
  std::vector<std::vector<double>> m(n_ceps, std::vector<double>(n_filters));
  for (int k = 0; k < n_ceps; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_filters);
    for (int j = 0; j < n_filters; ++j)
      m[k][j] = scale * std::cos(M_PI * k * (2 * j + 1) / (2.0 * n_filters));
  }
  return m;
}

// +-2 frame regression deltas with edge replication.
std::vector<std::vector<double>> deltas(const std::vector<std::vector<double>>& x) {
  const long n = static_cast<long>(x.size());
  const std::size_t dim = x[0].size();
  std::vector<std::vector<double>> out(n, std::vector<double>(dim, 0.0));
  auto clamp = [n](long i) { return std::min(std::max(i, 0L), n - 1); };
  for (long t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < dim; ++d) {
      double num = 0.0;
      for (long w = 1; w <= 2; ++w)
        num += w * (x[clamp(t + w)][d] - x[clamp(t - w)][d]);
      out[t][d] = num / 10.0;  // 2 * (1^2 + 2^2)
    }
  }
  return out;
}

}  // namespace

double lfcc_filter_center_hz(const LfccConfig& cfg, int sample_rate_hz, int i) {
  const double nyquist = sample_rate_hz / 2.0;
  return (i + 1) * nyquist / (cfg.n_filters + 1);
}

FeatureSequence lfcc(const Waveform& w, const LfccConfig& cfg) {
  const std::size_t window = static_cast<std::size_t>(cfg.window);
  if (w.samples.size() < window)
    throw DataError("lfcc: waveform shorter than one analysis window");

  const std::size_t n_frames = (w.samples.size() - window) / cfg.hop + 1;
  const auto fb = linear_filterbank(cfg, w.sample_rate_hz);
  const auto dct = dct_matrix(cfg.n_ceps, cfg.n_filters);

  std::vector<double> hann(window);
  for (std::size_t i = 0; i < window; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / window);

  std::vector<std::vector<double>> ceps(n_frames, std::vector<double>(cfg.n_ceps));
  std::vector<double> frame(window);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t begin = t * cfg.hop;
    for (std::size_t i = 0; i < window; ++i)
      frame[i] = w.samples[begin + i] * hann[i];
    const auto power = detail::power_spectrum(frame.data(), window, window);

    std::vector<double> loge(cfg.n_filters);
    for (int f = 0; f < cfg.n_filters; ++f) {
      double e = 0.0;
      for (std::size_t b = 0; b < power.size(); ++b) e += fb[f][b] * power[b];
      loge[f] = std::log(std::max(e, cfg.log_floor));
    }
    for (int k = 0; k < cfg.n_ceps; ++k) {
      double c = 0.0;
      for (int f = 0; f < cfg.n_filters; ++f) c += dct[k][f] * loge[f];
      ceps[t][k] = c;
    }
  }

  FeatureSequence out;
  out.n_frames = n_frames;
  out.dim = static_cast<std::size_t>(cfg.n_ceps) * (cfg.with_deltas ? 3 : 1);
  out.data.resize(out.n_frames * out.dim);

  if (cfg.with_deltas) {
    const auto d1 = deltas(ceps);
    const auto d2 = deltas(d1);
    for (std::size_t t = 0; t < n_frames; ++t) {
      for (int k = 0; k < cfg.n_ceps; ++k) {
        out.at(t, k) = ceps[t][k];
        out.at(t, cfg.n_ceps + k) = d1[t][k];
        out.at(t, 2 * cfg.n_ceps + k) = d2[t][k];
      }
    }
  } else {
    for (std::size_t t = 0; t < n_frames; ++t)
      for (int k = 0; k < cfg.n_ceps; ++k) out.at(t, k) = ceps[t][k];
  }
  return out;
}

}  // namespace ps

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ps/labeling.hpp"
#include "ps/matrix.hpp"

namespace ps {

// Parameter tensor with its accumulated gradient.
struct Tensor {
  Matrix v;
  Matrix g;

  Tensor() = default;
  explicit Tensor(Matrix value) : v(std::move(value)), g(Matrix::zeros_like(v)) {}
  void zero_grad() { g.fill(0.0); }
};

struct GmlpBlockParams {
  Tensor ln_gamma, ln_beta;   // 1 x D
  Tensor w_expand, b_expand;  // D x 2D, 1 x 2D
  Tensor t_kernel;            // 1 x taps, shared across channels
  Tensor gate_bias;           // 1 x D
  Tensor w_proj, b_proj;      // D x D, 1 x D
};

struct TowerParams {
  std::vector<GmlpBlockParams> blocks;
  Tensor head_w;  // 1 x D, the class-direction weight for this resolution
  Tensor head_b;  // 1 x 1
};

struct DownsampleParams {
  Tensor w;  // D x D channel mix (kernel size 1)
  Tensor b;  // 1 x D
};

struct BackendConfig {
  std::size_t dim = 60;   // feature/hidden width, constant through the tower
  int n_blocks = 5;
  int t_kernel_taps = 15;  // odd
};

struct BackendParams {
  BackendConfig cfg;
  std::vector<TowerParams> towers;       // one per resolution
  std::vector<DownsampleParams> downs;   // between consecutive resolutions
  Tensor utt_w, utt_b;                   // utterance head on mean-pooled h^5

  static BackendParams init(const BackendConfig& cfg, std::uint64_t seed);

  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void zero_grad();
};

struct ScoreSet {
  std::array<std::vector<double>, kNumResolutions> seg;
  double utt = 0.0;
};

// Max-pool by 2 (lone tail passes through) then per-frame channel mix.
Matrix downsample(const Matrix& h, const DownsampleParams& p);

// Five stacked gMLP blocks plus the per-position linear head.
std::vector<double> gmlp_score(const Matrix& h, const TowerParams& p);

// Full forward pass: scores at all six resolutions plus the utterance score.
ScoreSet forward(const Matrix& feats, const BackendParams& p);

// Hidden sequences h^0..h^5 (inputs to the scoring towers).
std::array<Matrix, kNumResolutions> forward_hidden(const Matrix& feats,
                                                   const BackendParams& p);

// Repeat each segment score over its 2^k constituent 20 ms frames; the tail
// takes the nearest segment.
std::vector<double> align_score_to_frames(const std::vector<double>& s, int k,
                                          std::size_t n_frames);

// Per-position inner product with a weight vector.
std::vector<double> rescore(const std::vector<double>& w, const Matrix& h);

double utterance_from_min(const std::vector<double>& s);

struct Strategy {
  enum Kind { kMulti, kSingle, kUtteranceOnly };
  Kind kind = kMulti;
  int k = 0;  // resolution index for kSingle

  static Strategy multi() { return {kMulti, 0}; }
  static Strategy single(int k) { return {kSingle, k}; }
  static Strategy utterance_only() { return {kUtteranceOnly, 0}; }
};

// Squared error between squashed scores and {0,1} targets (1 = bona fide),
// averaged per resolution and summed over the terms the strategy selects.
struct ScoreLoss {
  double value = 0.0;
  std::array<std::vector<double>, kNumResolutions> dseg;  // dL/ds per resolution
  double dutt = 0.0;
};

ScoreLoss score_loss(const ScoreSet& scores, const MultiResLabels& labels,
                     const Strategy& strat);

// Forward + loss + exact reverse-mode gradients accumulated into p.
// Only the layers on the strategy's computation path receive gradient.
double loss_and_backward(const Matrix& feats, const MultiResLabels& labels,
                         BackendParams& p, const Strategy& strat,
                         ScoreSet* scores_out = nullptr);

// Truncates 20 ms labels to n_frames and rebuilds the coarser levels, so
// label vectors line up with feature-derived score lengths.
MultiResLabels align_labels(const MultiResLabels& labels, std::size_t n_frames);

}  // namespace ps

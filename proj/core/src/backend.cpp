#include "ps/backend.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ps/error.hpp"

namespace ps {

namespace {

constexpr double kLnEps = 1e-5;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct BlockCache {
  Matrix x;                     // input, M x D
  std::vector<double> invstd;   // per row
  Matrix xhat;                  // M x D
  Matrix ln_out;                // M x D
  Matrix u, v;                  // expansion halves, M x D each
  Matrix vconv;                 // gated half after temporal mixing
  Matrix gated;
};

struct TowerCache {
  std::vector<BlockCache> blocks;
  Matrix top;  // output of the block stack
};

struct DownCache {
  Matrix pooled;                       // ceil(M/2) x D
  std::vector<std::size_t> src_row;    // argmax input row per pooled cell
};

Matrix block_forward(const GmlpBlockParams& p, const Matrix& x, BlockCache& c) {
  const std::size_t m = x.rows, d = x.cols;
  const std::size_t taps = p.t_kernel.v.cols;
  const long radius = static_cast<long>(taps / 2);

  c.x = x;
  c.invstd.resize(m);
  c.xhat = Matrix(m, d);
  c.ln_out = Matrix(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = x.row(r);
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    c.invstd[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (xr[j] - mu) * inv;
      c.xhat.at(r, j) = xh;
      c.ln_out.at(r, j) = p.ln_gamma.v.d[j] * xh + p.ln_beta.v.d[j];
    }
  }

  c.u = Matrix(m, d);
  c.v = Matrix(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = c.ln_out.row(r);
    for (std::size_t j = 0; j < 2 * d; ++j) {
      double acc = p.b_expand.v.d[j];
      for (std::size_t i = 0; i < d; ++i) acc += in[i] * p.w_expand.v.at(i, j);
      if (j < d)
        c.u.at(r, j) = acc;
      else
        c.v.at(r, j - d) = acc;
    }
  }

  c.vconv = Matrix(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = p.gate_bias.v.d[j];
      for (std::size_t t = 0; t < taps; ++t) {
        const long src = static_cast<long>(r) + static_cast<long>(t) - radius;
        if (src < 0 || src >= static_cast<long>(m)) continue;
        acc += p.t_kernel.v.d[t] * c.v.at(static_cast<std::size_t>(src), j);
      }
      c.vconv.at(r, j) = acc;
    }
  }

  c.gated = Matrix(m, d);
  for (std::size_t i = 0; i < m * d; ++i) c.gated.d[i] = c.u.d[i] * c.vconv.d[i];

  Matrix out(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    const double* g = c.gated.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = p.b_proj.v.d[j] + x.at(r, j);
      for (std::size_t i = 0; i < d; ++i) acc += g[i] * p.w_proj.v.at(i, j);
      out.at(r, j) = acc;
    }
  }
  return out;
}

// Accumulates parameter gradients and returns dL/dx.
Matrix block_backward(GmlpBlockParams& p, const BlockCache& c, const Matrix& dout) {
  const std::size_t m = c.x.rows, d = c.x.cols;
  const std::size_t taps = p.t_kernel.v.cols;
  const long radius = static_cast<long>(taps / 2);

  Matrix dx = dout;  // residual path

  Matrix dgated(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    const double* dor = dout.row(r);
    for (std::size_t j = 0; j < d; ++j) p.b_proj.g.d[j] += dor[j];
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      const double gi = c.gated.at(r, i);
      for (std::size_t j = 0; j < d; ++j) {
        acc += dor[j] * p.w_proj.v.at(i, j);
        p.w_proj.g.at(i, j) += gi * dor[j];
      }
      dgated.at(r, i) = acc;
    }
  }

  Matrix du(m, d), dvconv(m, d);
  for (std::size_t i = 0; i < m * d; ++i) {
    du.d[i] = dgated.d[i] * c.vconv.d[i];
    dvconv.d[i] = dgated.d[i] * c.u.d[i];
  }

  Matrix dv(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dvconv.at(r, j);
      p.gate_bias.g.d[j] += g;
      for (std::size_t t = 0; t < taps; ++t) {
        const long src = static_cast<long>(r) + static_cast<long>(t) - radius;
        if (src < 0 || src >= static_cast<long>(m)) continue;
        p.t_kernel.g.d[t] += c.v.at(static_cast<std::size_t>(src), j) * g;
        dv.at(static_cast<std::size_t>(src), j) += p.t_kernel.v.d[t] * g;
      }
    }
  }

  Matrix dln(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = c.ln_out.row(r);
    for (std::size_t j = 0; j < 2 * d; ++j) {
      const double de = j < d ? du.at(r, j) : dv.at(r, j - d);
      p.b_expand.g.d[j] += de;
      for (std::size_t i = 0; i < d; ++i) {
        p.w_expand.g.at(i, j) += in[i] * de;
        dln.at(r, i) += p.w_expand.v.at(i, j) * de;
      }
    }
  }

  for (std::size_t r = 0; r < m; ++r) {
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    std::vector<double> dxhat(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double dl = dln.at(r, j);
      const double xh = c.xhat.at(r, j);
      p.ln_gamma.g.d[j] += dl * xh;
      p.ln_beta.g.d[j] += dl;
      dxhat[j] = dl * p.ln_gamma.v.d[j];
      sum_dxhat += dxhat[j];
      sum_dxhat_xhat += dxhat[j] * xh;
    }
    const double inv = c.invstd[r];
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = c.xhat.at(r, j);
      dx.at(r, j) += inv * (dxhat[j] - sum_dxhat / d - xh * sum_dxhat_xhat / d);
    }
  }
  return dx;
}

std::vector<double> tower_forward(const TowerParams& p, const Matrix& h,
                                  TowerCache& c) {
  c.blocks.resize(p.blocks.size());
  Matrix cur = h;
  for (std::size_t b = 0; b < p.blocks.size(); ++b)
    cur = block_forward(p.blocks[b], cur, c.blocks[b]);
  c.top = std::move(cur);

  std::vector<double> s(c.top.rows);
  for (std::size_t r = 0; r < c.top.rows; ++r) {
    double acc = p.head_b.v.d[0];
    for (std::size_t j = 0; j < c.top.cols; ++j)
      acc += p.head_w.v.d[j] * c.top.at(r, j);
    s[r] = acc;
  }
  return s;
}

Matrix tower_backward(TowerParams& p, const TowerCache& c,
                      const std::vector<double>& ds) {
  Matrix dtop(c.top.rows, c.top.cols);
  for (std::size_t r = 0; r < c.top.rows; ++r) {
    p.head_b.g.d[0] += ds[r];
    for (std::size_t j = 0; j < c.top.cols; ++j) {
      p.head_w.g.d[j] += ds[r] * c.top.at(r, j);
      dtop.at(r, j) = ds[r] * p.head_w.v.d[j];
    }
  }
  Matrix d = std::move(dtop);
  for (std::size_t b = p.blocks.size(); b-- > 0;)
    d = block_backward(p.blocks[b], c.blocks[b], d);
  return d;
}

Matrix down_forward(const DownsampleParams& p, const Matrix& h, DownCache& c) {
  const std::size_t m = h.rows, d = h.cols;
  const std::size_t out_rows = (m + 1) / 2;
  c.pooled = Matrix(out_rows, d);
  c.src_row.resize(out_rows * d);
  for (std::size_t j = 0; j < out_rows; ++j) {
    const std::size_t a = 2 * j, b = 2 * j + 1;
    for (std::size_t cch = 0; cch < d; ++cch) {
      if (b < m && h.at(b, cch) > h.at(a, cch)) {
        c.pooled.at(j, cch) = h.at(b, cch);
        c.src_row[j * d + cch] = b;
      } else {
        c.pooled.at(j, cch) = h.at(a, cch);
        c.src_row[j * d + cch] = a;
      }
    }
  }
  Matrix out(out_rows, d);
  for (std::size_t r = 0; r < out_rows; ++r) {
    const double* pr = c.pooled.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = p.b.v.d[j];
      for (std::size_t i = 0; i < d; ++i) acc += pr[i] * p.w.v.at(i, j);
      out.at(r, j) = acc;
    }
  }
  return out;
}

Matrix down_backward(DownsampleParams& p, const DownCache& c, const Matrix& dout,
                     std::size_t in_rows) {
  const std::size_t d = c.pooled.cols;
  Matrix dpooled(c.pooled.rows, d);
  for (std::size_t r = 0; r < dout.rows; ++r) {
    const double* dor = dout.row(r);
    for (std::size_t j = 0; j < d; ++j) p.b.g.d[j] += dor[j];
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      const double pi = c.pooled.at(r, i);
      for (std::size_t j = 0; j < d; ++j) {
        acc += dor[j] * p.w.v.at(i, j);
        p.w.g.at(i, j) += pi * dor[j];
      }
      dpooled.at(r, i) = acc;
    }
  }
  Matrix dh(in_rows, d);
  for (std::size_t r = 0; r < dpooled.rows; ++r)
    for (std::size_t j = 0; j < d; ++j)
      dh.at(c.src_row[r * d + j], j) += dpooled.at(r, j);
  return dh;
}

Tensor make_tensor(std::size_t r, std::size_t c, double fill = 0.0) {
  return Tensor(Matrix(r, c, fill));
}

}  // namespace

BackendParams BackendParams::init(const BackendConfig& cfg, std::uint64_t seed) {
  if (cfg.t_kernel_taps % 2 == 0)
    throw UsageError("t_kernel_taps must be odd");
  const std::size_t d = cfg.dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto xavier = [&](std::size_t rin, std::size_t rout) {
    Matrix m(rin, rout);
    const double a = std::sqrt(6.0 / static_cast<double>(rin + rout));
    std::uniform_real_distribution<double> uni(-a, a);
    for (auto& x : m.d) x = uni(rng);
    return Tensor(std::move(m));
  };

  BackendParams p;
  p.cfg = cfg;
  p.towers.resize(kNumResolutions);
  for (auto& tower : p.towers) {
    tower.blocks.resize(cfg.n_blocks);
    for (auto& blk : tower.blocks) {
      blk.ln_gamma = make_tensor(1, d, 1.0);
      blk.ln_beta = make_tensor(1, d, 0.0);
      blk.w_expand = xavier(d, 2 * d);
      blk.b_expand = make_tensor(1, 2 * d, 0.0);
      blk.t_kernel = make_tensor(1, cfg.t_kernel_taps, 0.0);
      for (auto& x : blk.t_kernel.v.d) x = 1e-3 * gauss(rng);
      blk.gate_bias = make_tensor(1, d, 1.0);
      blk.w_proj = xavier(d, d);
      blk.b_proj = make_tensor(1, d, 0.0);
    }
    tower.head_w = make_tensor(1, d, 0.0);
    for (auto& x : tower.head_w.v.d) x = gauss(rng) / std::sqrt(double(d));
    tower.head_b = make_tensor(1, 1, 0.0);
  }
  p.downs.resize(kNumResolutions - 1);
  for (auto& down : p.downs) {
    down.w = make_tensor(d, d, 0.0);
    std::uniform_real_distribution<double> uni(-0.1, 0.1);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        down.w.v.at(i, j) = (i == j ? 1.0 : 0.0) + uni(rng) / std::sqrt(double(d));
    down.b = make_tensor(1, d, 0.0);
  }
  p.utt_w = make_tensor(1, d, 0.0);
  for (auto& x : p.utt_w.v.d) x = gauss(rng) / std::sqrt(double(d));
  p.utt_b = make_tensor(1, 1, 0.0);
  return p;
}

void BackendParams::for_each(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t k = 0; k < towers.size(); ++k) {
    const std::string tk = "tower" + std::to_string(k);
    for (std::size_t b = 0; b < towers[k].blocks.size(); ++b) {
      const std::string bk = tk + ".block" + std::to_string(b);
      auto& blk = towers[k].blocks[b];
      fn(bk + ".ln_gamma", blk.ln_gamma);
      fn(bk + ".ln_beta", blk.ln_beta);
      fn(bk + ".w_expand", blk.w_expand);
      fn(bk + ".b_expand", blk.b_expand);
      fn(bk + ".t_kernel", blk.t_kernel);
      fn(bk + ".gate_bias", blk.gate_bias);
      fn(bk + ".w_proj", blk.w_proj);
      fn(bk + ".b_proj", blk.b_proj);
    }
    fn(tk + ".head_w", towers[k].head_w);
    fn(tk + ".head_b", towers[k].head_b);
  }
  for (std::size_t k = 0; k < downs.size(); ++k) {
    const std::string dk = "down" + std::to_string(k);
    fn(dk + ".w", downs[k].w);
    fn(dk + ".b", downs[k].b);
  }
  fn("utt.w", utt_w);
  fn("utt.b", utt_b);
}

void BackendParams::zero_grad() {
  for_each([](const std::string&, Tensor& t) { t.zero_grad(); });
}

Matrix downsample(const Matrix& h, const DownsampleParams& p) {
  if (h.rows == 0) throw DataError("downsample: empty input");
  DownCache c;
  return down_forward(p, h, c);
}

std::vector<double> gmlp_score(const Matrix& h, const TowerParams& p) {
  TowerCache c;
  return tower_forward(p, h, c);
}

std::array<Matrix, kNumResolutions> forward_hidden(const Matrix& feats,
                                                   const BackendParams& p) {
  if (feats.rows == 0) throw DataError("forward: empty feature sequence");
  if (feats.cols != p.cfg.dim)
    throw DataError("forward: feature dim does not match backend dim");
  std::array<Matrix, kNumResolutions> h;
  h[0] = feats;
  for (int k = 0; k + 1 < kNumResolutions; ++k) {
    DownCache c;
    h[k + 1] = down_forward(p.downs[k], h[k], c);
  }
  return h;
}

ScoreSet forward(const Matrix& feats, const BackendParams& p) {
  auto h = forward_hidden(feats, p);
  ScoreSet s;
  for (int k = 0; k < kNumResolutions; ++k) s.seg[k] = gmlp_score(h[k], p.towers[k]);

  const Matrix& top = h[kNumResolutions - 1];
  double acc = p.utt_b.v.d[0];
  for (std::size_t j = 0; j < top.cols; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < top.rows; ++r) mean += top.at(r, j);
    mean /= static_cast<double>(top.rows);
    acc += p.utt_w.v.d[j] * mean;
  }
  s.utt = acc;
  return s;
}

std::vector<double> align_score_to_frames(const std::vector<double>& s, int k,
                                          std::size_t n_frames) {
  if (s.empty()) throw DataError("align_score_to_frames: empty scores");
  const std::size_t factor = std::size_t(1) << k;
  std::vector<double> out(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i)
    out[i] = s[std::min(i / factor, s.size() - 1)];
  return out;
}

std::vector<double> rescore(const std::vector<double>& w, const Matrix& h) {
  if (w.size() != h.cols) throw DataError("rescore: weight/hidden dim mismatch");
  std::vector<double> s(h.rows);
  for (std::size_t r = 0; r < h.rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < h.cols; ++j) acc += w[j] * h.at(r, j);
    s[r] = acc;
  }
  return s;
}

double utterance_from_min(const std::vector<double>& s) {
  if (s.empty()) throw DataError("utterance_from_min: empty scores");
  return *std::min_element(s.begin(), s.end());
}

ScoreLoss score_loss(const ScoreSet& scores, const MultiResLabels& labels,
                     const Strategy& strat) {
  ScoreLoss out;

  auto add_resolution = [&](int k) {
    const auto& s = scores.seg[k];
    const auto& y = labels.labels[k];
    if (s.size() != y.size())
      throw DataError("loss: score/label length mismatch at resolution " +
                      std::to_string(kResolutionsMs[k]) + " ms");
    const double inv_m = 1.0 / static_cast<double>(s.size());
    out.dseg[k].resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double prob = sigmoid(s[i]);
      const double target = y[i] ? 0.0 : 1.0;  // 1 = bona fide
      const double diff = prob - target;
      out.value += diff * diff * inv_m;
      out.dseg[k][i] = 2.0 * diff * prob * (1.0 - prob) * inv_m;
    }
  };
  auto add_utt = [&] {
    const double prob = sigmoid(scores.utt);
    const double target = labels.utterance_spoof ? 0.0 : 1.0;
    const double diff = prob - target;
    out.value += diff * diff;
    out.dutt = 2.0 * diff * prob * (1.0 - prob);
  };

  switch (strat.kind) {
    case Strategy::kMulti:
      for (int k = 0; k < kNumResolutions; ++k) add_resolution(k);
      add_utt();
      break;
    case Strategy::kSingle:
      if (strat.k < 0 || strat.k >= kNumResolutions)
        throw UsageError("loss: invalid resolution index");
      if (labels.labels[strat.k].empty())
        throw DataError("loss: missing labels for requested resolution");
      add_resolution(strat.k);
      break;
    case Strategy::kUtteranceOnly:
      add_utt();
      break;
  }
  return out;
}

double loss_and_backward(const Matrix& feats, const MultiResLabels& labels,
                         BackendParams& p, const Strategy& strat,
                         ScoreSet* scores_out) {
  if (feats.rows == 0) throw DataError("loss_and_backward: empty features");
  if (feats.cols != p.cfg.dim)
    throw DataError("loss_and_backward: feature dim mismatch");

  std::array<bool, kNumResolutions> need_tower{};
  bool need_utt = false;
  int depth = kNumResolutions - 1;
  switch (strat.kind) {
    case Strategy::kMulti:
      need_tower.fill(true);
      need_utt = true;
      break;
    case Strategy::kSingle:
      if (strat.k < 0 || strat.k >= kNumResolutions)
        throw UsageError("train: invalid resolution index");
      need_tower[strat.k] = true;
      depth = strat.k;
      break;
    case Strategy::kUtteranceOnly:
      need_utt = true;
      break;
  }

  std::array<Matrix, kNumResolutions> h;
  std::array<DownCache, kNumResolutions - 1> dcache;
  h[0] = feats;
  for (int k = 0; k < depth; ++k) h[k + 1] = down_forward(p.downs[k], h[k], dcache[k]);

  ScoreSet scores;
  std::array<TowerCache, kNumResolutions> tcache;
  for (int k = 0; k <= depth; ++k)
    if (need_tower[k]) scores.seg[k] = tower_forward(p.towers[k], h[k], tcache[k]);

  std::vector<double> e_u;
  if (need_utt) {
    const Matrix& top = h[kNumResolutions - 1];
    e_u.resize(top.cols);
    double acc = p.utt_b.v.d[0];
    for (std::size_t j = 0; j < top.cols; ++j) {
      double mean = 0.0;
      for (std::size_t r = 0; r < top.rows; ++r) mean += top.at(r, j);
      e_u[j] = mean / static_cast<double>(top.rows);
      acc += p.utt_w.v.d[j] * e_u[j];
    }
    scores.utt = acc;
  }

  const ScoreLoss sl = score_loss(scores, labels, strat);
  if (scores_out) *scores_out = scores;

  std::array<Matrix, kNumResolutions> dh;
  for (int k = 0; k <= depth; ++k) dh[k] = Matrix::zeros_like(h[k]);

  for (int k = 0; k <= depth; ++k) {
    if (!need_tower[k]) continue;
    Matrix d = tower_backward(p.towers[k], tcache[k], sl.dseg[k]);
    for (std::size_t i = 0; i < d.d.size(); ++i) dh[k].d[i] += d.d[i];
  }
  if (need_utt) {
    const Matrix& top = h[kNumResolutions - 1];
    const double inv_m = 1.0 / static_cast<double>(top.rows);
    p.utt_b.g.d[0] += sl.dutt;
    for (std::size_t j = 0; j < top.cols; ++j) {
      p.utt_w.g.d[j] += sl.dutt * e_u[j];
      const double dcol = sl.dutt * p.utt_w.v.d[j] * inv_m;
      for (std::size_t r = 0; r < top.rows; ++r) dh[kNumResolutions - 1].at(r, j) += dcol;
    }
  }
  for (int k = depth; k >= 1; --k) {
    Matrix d = down_backward(p.downs[k - 1], dcache[k - 1], dh[k], h[k - 1].rows);
    for (std::size_t i = 0; i < d.d.size(); ++i) dh[k - 1].d[i] += d.d[i];
  }
  return sl.value;
}

MultiResLabels align_labels(const MultiResLabels& labels, std::size_t n_frames) {
  if (labels.labels[0].size() < n_frames)
    throw DataError("align_labels: fewer labels than frames");
  MultiResLabels out;
  out.labels[0].assign(labels.labels[0].begin(),
                       labels.labels[0].begin() + n_frames);
  for (int k = 1; k < kNumResolutions; ++k) out.labels[k] = coarsen(out.labels[k - 1]);
  out.utterance_spoof = labels.utterance_spoof;
  return out;
}

}  // namespace ps

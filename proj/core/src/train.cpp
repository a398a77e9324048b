#include "ps/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ps/error.hpp"

namespace ps {

std::vector<EpochLog> train(const std::vector<TrainSample>& data,
                            BackendParams& params, const TrainConfig& cfg,
                            const Strategy& strategy) {
  if (data.empty()) throw DataError("train: empty dataset");
  if (strategy.kind == Strategy::kSingle) {
    for (const auto& sample : data)
      if (sample.labels.labels[strategy.k].empty())
        throw DataError("train: missing labels for resolution " +
                        std::to_string(kResolutionsMs[strategy.k]) + " ms");
  }

  std::vector<Tensor*> tensors;
  params.for_each([&](const std::string&, Tensor& t) { tensors.push_back(&t); });
  std::vector<Matrix> m, v;
  m.reserve(tensors.size());
  v.reserve(tensors.size());
  for (auto* t : tensors) {
    m.push_back(Matrix::zeros_like(t->v));
    v.push_back(Matrix::zeros_like(t->v));
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLog> log;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr =
        cfg.lr * std::pow(0.5, cfg.lr_halve_every > 0 ? epoch / cfg.lr_halve_every : 0);
    std::shuffle(order.begin(), order.end(), rng);

    double total = 0.0;
    for (std::size_t idx : order) {
      params.zero_grad();
      total += loss_and_backward(data[idx].feats, data[idx].labels, params, strategy);
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t t = 0; t < tensors.size(); ++t) {
        auto& val = tensors[t]->v.d;
        const auto& grad = tensors[t]->g.d;
        for (std::size_t i = 0; i < val.size(); ++i) {
          m[t].d[i] = cfg.beta1 * m[t].d[i] + (1.0 - cfg.beta1) * grad[i];
          v[t].d[i] = cfg.beta2 * v[t].d[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
          const double mhat = m[t].d[i] / bc1;
          const double vhat = v[t].d[i] / bc2;
          val[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
      }
    }
    log.push_back({epoch, total / static_cast<double>(data.size()), lr});
  }
  return log;
}

}  // namespace ps

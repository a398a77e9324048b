#pragma once

#include <cstdint>
#include <vector>

#include "ps/backend.hpp"

namespace ps {

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-5;
  int lr_halve_every = 10;  // epochs
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

struct TrainSample {
  Matrix feats;           // N x D
  MultiResLabels labels;  // aligned to N (see align_labels)
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

// Adam with batch size 1; sample order reshuffled each epoch from the seed.
std::vector<EpochLog> train(const std::vector<TrainSample>& data,
                            BackendParams& params, const TrainConfig& cfg,
                            const Strategy& strategy);

}  // namespace ps

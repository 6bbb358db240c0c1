#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bhsrs/adam.hpp"
#include "bhsrs/cube.hpp"
#include "bhsrs/layers.hpp"
#include "bhsrs/split.hpp"

namespace bhsrs {

struct TrainConfig {
  int64_t epochs = 100;
  int64_t batch = 16;
  double lr = 0.001;
  bool augment = true;
  uint64_t seed = 0;  // data shuffling, augmentation and weight noise derive from this
};

struct EpochStats {
  int64_t epoch = 0;       // 1-based
  double train_loss = 0.0; // per-sample cost (includes the complexity term in BNN mode)
  double train_nll = 0.0;  // per-sample negative log likelihood alone
  double train_kl = 0.0;   // complexity term per training sample (0 in CNN mode)
  double val_nll = 0.0;
  double val_kappa = 0.0;
};

struct TrainResult {
  std::unique_ptr<Network> net;  // weights of the best validation epoch
  int64_t best_epoch = 0;        // 1-based; 0 if training never completed an epoch
  double best_val_kappa = 0.0;
  std::vector<EpochStats> history;
  bool diverged = false;         // loss left the finite range; best weights still returned
};

// Minibatch training with a stochastic-gradient cost:
//   BNN: complexity/n_batches + summed NLL per batch (one epoch sums to the
//        full variational objective), stochastic forward passes
//   CNN: mean NLL per batch, deterministic forward passes
// After every epoch the deterministic pass is scored on the validation
// pixels; the epoch with the highest agreement score is kept. With no
// validation pixels the final epoch is kept. Deterministic for a given
// config (noise, shuffling and augmentation all derive from config.seed).
TrainResult train_network(const NetworkConfig& net_config, const FeatureCube& features,
                          const LabelMap& labels, const Split& split, const TrainConfig& config);

// history as CSV with a header row.
void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace bhsrs

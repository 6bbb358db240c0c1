#include "bhsrs/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "bhsrs/metrics.hpp"
#include "bhsrs/ops.hpp"
#include "bhsrs/patches.hpp"
#include "bhsrs/predict.hpp"
#include "bhsrs/rng.hpp"

namespace bhsrs {

namespace {

// Deterministic score of the current weights on held-out samples.
std::pair<double, double> evaluate(const Network& net, const FeatureCube& features,
                                   const std::vector<Sample>& samples, int64_t batch) {
  const int64_t n = static_cast<int64_t>(samples.size());
  const int64_t k = net.config().n_classes;
  const std::vector<double> probs = predict_mean(net, features, samples, batch);
  double nll = 0.0;
  std::vector<int32_t> ref(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int32_t label = samples[static_cast<size_t>(i)].label;
    ref[static_cast<size_t>(i)] = label;
    nll -= std::log(std::max(probs[static_cast<size_t>(i * k + label)], 1e-300));
  }
  const Confusion c = confusion_matrix(ref, argmax_rows(probs, n, k), k);
  return {nll / static_cast<double>(n), kappa(c)};
}

}  // namespace

TrainResult train_network(const NetworkConfig& net_config, const FeatureCube& features,
                          const LabelMap& labels, const Split& split, const TrainConfig& config) {
  features.validate();
  if (config.epochs < 0) throw InputError("train: epochs must be nonnegative");
  if (config.batch < 1) throw InputError("train: batch must be positive");
  if (features.bands != net_config.in_channels) {
    throw InputError(cat("train: network expects ", net_config.in_channels,
                         " input channels, features have ", features.bands));
  }

  Rng base(config.seed);
  Rng rng_model = base.spawn(1);  // weight init and per-activation noise
  Rng rng_data = base.spawn(2);   // shuffling and augmentation

  std::vector<Sample> train = samples_for_role(labels, split, Role::Train);
  const std::vector<Sample> val = samples_for_role(labels, split, Role::Val);
  if (train.empty()) throw InputError("train: split has no training pixels");
  const int64_t n_train = static_cast<int64_t>(train.size());
  const int64_t n_batches = (n_train + config.batch - 1) / config.batch;
  const bool bnn = net_config.mode == Mode::BNN;

  TrainResult result;
  result.net = std::make_unique<Network>(net_config, rng_model);
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  Adam opt(result.net->named_params(), adam_config);

  std::unique_ptr<Network> best;
  for (int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng_data.shuffle(train.begin(), train.end());
    double epoch_nll = 0.0, epoch_kl = 0.0;
    for (int64_t first = 0; first < n_train; first += config.batch) {
      const int64_t m = std::min(config.batch, n_train - first);
      Tensor x = extract_patches(features, train, first, m, net_config.patch);
      if (config.augment) augment_patches(x, rng_data);
      std::vector<int64_t> y(static_cast<size_t>(m));
      for (int64_t i = 0; i < m; ++i) {
        y[static_cast<size_t>(i)] = train[static_cast<size_t>(first + i)].label;
      }

      double batch_cost;
      {
        Tape tape;
        const Tensor logp = result.net->forward(x, &rng_model, bnn);
        Tensor loss;
        if (bnn) {
          // Summed over an epoch this is complexity + data misfit in full.
          const Tensor kl_term = mul_scalar(result.net->kl(), 1.0 / static_cast<double>(n_batches));
          const Tensor nll = nll_loss(logp, y, Reduction::Sum);
          epoch_nll += nll.item();
          epoch_kl += kl_term.item();
          loss = add(kl_term, nll);
        } else {
          loss = nll_loss(logp, y, Reduction::Mean);
          epoch_nll += loss.item() * static_cast<double>(m);
        }
        batch_cost = loss.item();
        if (!std::isfinite(batch_cost)) {
          result.diverged = true;
          break;
        }
        backward(loss);
      }
      opt.step();
      opt.zero_grad();
    }
    if (result.diverged) break;

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_nll = epoch_nll / static_cast<double>(n_train);
    stats.train_kl = epoch_kl / static_cast<double>(n_train);
    stats.train_loss = stats.train_nll + stats.train_kl;
    if (!val.empty()) {
      const auto [nll, k] = evaluate(*result.net, features, val, config.batch);
      stats.val_nll = nll;
      stats.val_kappa = k;
      if (best == nullptr || stats.val_kappa > result.best_val_kappa) {
        result.best_val_kappa = stats.val_kappa;
        result.best_epoch = epoch;
        best = std::make_unique<Network>(result.net->clone());
      }
    }
    result.history.push_back(stats);
  }

  if (val.empty() || best == nullptr) {
    // No selection signal: keep whatever the last finished epoch produced.
    result.best_epoch = static_cast<int64_t>(result.history.size());
    if (!result.history.empty() && !val.empty()) {
      result.best_val_kappa = result.history.back().val_kappa;
    }
  } else {
    result.net = std::move(best);
  }
  return result;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(cat("cannot open '", path, "' for writing"));
  out << std::setprecision(17);
  out << "epoch,train_loss,train_nll,val_loss,val_kappa\n";
  for (const EpochStats& e : history) {
    out << e.epoch << "," << e.train_loss << "," << e.train_nll << "," << e.val_nll << ","
        << e.val_kappa << "\n";
  }
  if (!out) throw IoError(cat("short write to '", path, "'"));
}

}  // namespace bhsrs

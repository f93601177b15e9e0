#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "emap/nn/parameters.hpp"

namespace emap {

struct AdamConfig {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam on trainable parameters, then clears all gradients.
/// Throws StateError when a trainable parameter has no gradient.
void adam_step(ParameterStore& store, const AdamConfig& cfg = {});

/// Stops once the best validation loss has not strictly decreased for
/// `patience` consecutive epochs. Epochs are 1-based.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience = 5);

  /// Records one epoch; returns true when training should stop after it.
  bool update(double val_loss);

  std::size_t epochs() const noexcept { return epochs_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_; }
  bool improved_last() const noexcept { return improved_last_; }
  bool stopped() const noexcept { return stopped_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_ = 0.0;
  bool improved_last_ = false;
  bool stopped_ = false;
};

struct EarlyStopResult {
  std::optional<std::size_t> stop_epoch;
  std::size_t best_epoch = 0;
};

/// Applies the rule to a complete loss history.
EarlyStopResult early_stop(std::span<const double> val_losses, std::size_t patience = 5);

}  // namespace emap

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emap/data/dataset.hpp"
#include "emap/models/classifiers.hpp"

namespace emap {

enum class LossKind { bce, mse };
std::string to_string(LossKind k);
LossKind parse_loss_kind(const std::string& text);

struct TrainConfig {
  double lr = 3e-5;
  std::size_t patience = 5;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 32;
  LossKind loss = LossKind::bce;
  std::uint64_t seed = 0;
  bool restore_best = true;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t stop_epoch = 0;  // last epoch run
  bool early_stopped = false;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double wall_seconds = 0.0;  // not part of any reproducible artifact
  std::vector<std::pair<std::string, double>> final_metrics;
};

/// One supervised objective over index sets. `loss` records the mean loss of
/// the listed items on the tape; `val` selects the validation pool.
struct Objective {
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::function<Var<float>(Tape<float>&, const BoundParameters<float>&, std::span<const std::size_t>, bool val)> loss;
};

/// Mini-batch Adam with per-epoch seeded shuffling and early stopping on the
/// validation loss. Best-epoch weights are restored when cfg.restore_best.
/// A non-finite value anywhere aborts with NumericError naming epoch and batch.
TrainReport fit(ParameterStore& params, const Objective& objective, const TrainConfig& cfg);

/// Mean objective loss over a pool in inference mode.
double evaluate_loss(const ParameterStore& params, const Objective& objective, bool val, std::size_t batch_size);

/// Copies the listed images into one batch tensor.
Tensor gather(const Tensor& images, std::span<const std::size_t> indices);

/// BCE on sigmoid(t) against labels.
TrainReport train_blackbox(ModelGraph& model, const Dataset& data, const TrainConfig& cfg);

/// MSE between the teacher's t (computed once per image) and t-hat.
/// Throws StateError when any encoder parameter is trainable or changes.
TrainReport distill_interpretable(ModelGraph& student, const ModelGraph& teacher, const Dataset& data,
                                  const TrainConfig& cfg);

/// Distillation against fixed per-image targets for the train and val splits.
TrainReport distill_to_targets(ModelGraph& student, const Dataset& data, std::span<const float> train_targets,
                               std::span<const float> val_targets, const TrainConfig& cfg);

/// BCE on sigmoid(t-hat) with every parameter trainable.
TrainReport direct_train_interpretable(ModelGraph& model, const Dataset& data, const TrainConfig& cfg);

/// How a (C, h, w) latent is laid into an S x S zero image.
///  raster:  flatten channel-major, fill rows from (0,0).
///  spatial: depth-to-space; channel c = (2a + b) lands at (2i + a, 2j + b) for
///           the top-left 2h x 2w block, needs C <= 4.
enum class FillRule { raster, spatial };
std::string to_string(FillRule r);
FillRule parse_fill_rule(const std::string& text);

/// latent (N, C, h, w) -> (N, 1, S, S). Throws ArgumentError when it does not fit.
Tensor zero_pad_target(const Tensor& latent, std::size_t out_size, FillRule rule = FillRule::raster);

/// Supervises the E-map directly (MSE against per-image target maps), with
/// the unity head ignored.
TrainReport train_emap_regression(ModelGraph& model, const Tensor& train_targets, const Tensor& val_targets,
                                  const Dataset& data, const TrainConfig& cfg);

}  // namespace emap

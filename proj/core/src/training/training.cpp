#include "emap/training/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "emap/nn/optim.hpp"
#include "emap/util/log.hpp"
#include "emap/util/rng.hpp"

namespace emap {
namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::vector<Tensor> snapshot(const ParameterStore& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<int> labels_at(const std::vector<int>& labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(labels[i]);
  return out;
}

Tensor values_at(std::span<const float> values, std::span<const std::size_t> idx) {
  Tensor out({idx.size(), 1});
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = values[idx[k]];
  return out;
}

const SplitData& pool(const Dataset& d, bool val) { return val ? d.val : d.train; }

Objective classification_objective(const ModelGraph& model, const Dataset& data) {
  Objective o;
  o.train_size = data.train.size();
  o.val_size = data.val.size();
  o.loss = [&model, &data](Tape<float>& tape, const BoundParameters<float>& p, std::span<const std::size_t> idx,
                           bool val) {
    const SplitData& s = pool(data, val);
    const auto t = model_statistic(model, p, tape.constant(gather(s.images, idx)));
    return ops::bce_loss(t, labels_at(s.labels, idx));
  };
  return o;
}

void require_frozen_encoder(const ModelGraph& m) {
  for (const auto& p : m.params)
    if (p.name.rfind("enc.", 0) == 0 && p.trainable)
      throw StateError("encoder parameter '" + p.name + "' is trainable; distillation requires a frozen encoder");
}

}  // namespace

std::string to_string(LossKind k) { return k == LossKind::bce ? "bce" : "mse"; }

LossKind parse_loss_kind(const std::string& text) {
  if (text == "bce") return LossKind::bce;
  if (text == "mse") return LossKind::mse;
  throw ArgumentError("unknown loss '" + text + "' (expected bce or mse)");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("train.lr must be a finite non-negative number");
  if (patience < 1) throw ArgumentError("train.patience must be >= 1");
  if (max_epochs < 1) throw ArgumentError("train.max_epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("train.batch_size must be >= 1");
}

Tensor gather(const Tensor& images, std::span<const std::size_t> indices) {
  Shape s = images.shape();
  const std::size_t per = images.size() / s[0];
  s[0] = indices.size();
  Tensor out(s);
  for (std::size_t k = 0; k < indices.size(); ++k)
    std::memcpy(out.raw() + k * per, images.raw() + indices[k] * per, per * sizeof(float));
  return out;
}

double evaluate_loss(const ParameterStore& params, const Objective& objective, bool val, std::size_t batch_size) {
  const std::size_t n = val ? objective.val_size : objective.train_size;
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t first = 0; first < n; first += batch_size) {
    const std::size_t count = std::min(batch_size, n - first);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), first);
    Tape<float> tape(GradMode::inference);
    const auto p = bind(params, tape, false);
    total += static_cast<double>(objective.loss(tape, p, idx, val).value()[0]) * static_cast<double>(count);
  }
  return total / static_cast<double>(n);
}

TrainReport fit(ParameterStore& params, const Objective& objective, const TrainConfig& cfg) {
  cfg.validate();
  if (objective.train_size == 0 || objective.val_size == 0)
    throw ArgumentError("training needs non-empty train and validation pools");
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  EarlyStopper stopper(cfg.patience);
  std::vector<Tensor> best = snapshot(params);
  const AdamConfig adam{cfg.lr};

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = shuffled(objective.train_size, derive_seed(cfg.seed, "shuffle", epoch));
    double train_total = 0.0;
    std::size_t batch = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size, ++batch) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      const std::span<const std::size_t> idx(order.data() + first, count);
      try {
        Tape<float> tape;
        const auto p = bind(params, tape);
        const auto loss = objective.loss(tape, p, idx, false);
        train_total += static_cast<double>(loss.value()[0]) * static_cast<double>(count);
        tape.backward(loss);
        collect_grads(params, tape, p);
        adam_step(params, adam);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) + ": " + e.what());
      }
    }
    const double val_loss = evaluate_loss(params, objective, true, cfg.batch_size);
    if (!std::isfinite(val_loss))
      throw NumericError("epoch " + std::to_string(epoch) + ": validation loss is not finite");
    const double train_loss = train_total / static_cast<double>(order.size());
    report.epochs.push_back({epoch, train_loss, val_loss});
    log::info("epoch", "epoch=" + std::to_string(epoch) + " train_loss=" + fmt(train_loss) + " val_loss=" + fmt(val_loss));

    const bool stop = stopper.update(val_loss);
    if (stopper.improved_last()) best = snapshot(params);
    report.stop_epoch = epoch;
    if (stop) {
      report.early_stopped = true;
      break;
    }
  }
  report.best_epoch = stopper.best_epoch();
  report.best_val_loss = stopper.best_loss();
  if (cfg.restore_best)
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value = best[i];
  params.zero_grads();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train_blackbox(ModelGraph& model, const Dataset& data, const TrainConfig& cfg) {
  if (model.kind != ModelKind::blackbox) throw ArgumentError("train_blackbox needs a black-box model");
  if (cfg.loss != LossKind::bce) throw ArgumentError("black-box training uses the bce loss");
  return fit(model.params, classification_objective(model, data), cfg);
}

TrainReport distill_to_targets(ModelGraph& student, const Dataset& data, std::span<const float> train_targets,
                               std::span<const float> val_targets, const TrainConfig& cfg) {
  if (student.kind != ModelKind::interpretable) throw ArgumentError("distillation needs an interpretable student");
  if (train_targets.size() != data.train.size() || val_targets.size() != data.val.size())
    throw ArgumentError("one distillation target per train and val image is required");
  require_frozen_encoder(student);
  const auto encoder_before = student.params.value_bytes("enc.");

  Objective o;
  o.train_size = data.train.size();
  o.val_size = data.val.size();
  o.loss = [&](Tape<float>& tape, const BoundParameters<float>& p, std::span<const std::size_t> idx, bool val) {
    const auto out = interpretable_forward(student, p, tape.constant(gather(pool(data, val).images, idx)));
    return ops::mse_loss(out.t, values_at(val ? val_targets : train_targets, idx));
  };
  TrainReport r = fit(student.params, o, cfg);
  if (student.params.value_bytes("enc.") != encoder_before)
    throw StateError("encoder parameters changed during distillation");
  return r;
}

TrainReport distill_interpretable(ModelGraph& student, const ModelGraph& teacher, const Dataset& data,
                                  const TrainConfig& cfg) {
  if (teacher.kind != ModelKind::blackbox) throw ArgumentError("the distillation teacher must be a black-box");
  if (cfg.loss != LossKind::mse) throw ArgumentError("distillation uses the mse loss");
  require_frozen_encoder(student);
  const auto teacher_before = teacher.params.value_bytes();
  const auto train_t = predict(teacher, data.train.images);
  const auto val_t = predict(teacher, data.val.images);
  TrainReport r = distill_to_targets(student, data, train_t, val_t, cfg);
  if (teacher.params.value_bytes() != teacher_before) throw StateError("teacher parameters changed during distillation");
  return r;
}

TrainReport direct_train_interpretable(ModelGraph& model, const Dataset& data, const TrainConfig& cfg) {
  if (model.kind != ModelKind::interpretable) throw ArgumentError("direct training needs an interpretable model");
  if (cfg.loss != LossKind::bce) throw ArgumentError("direct training uses the bce loss");
  return fit(model.params, classification_objective(model, data), cfg);
}

std::string to_string(FillRule r) { return r == FillRule::raster ? "raster" : "spatial"; }

FillRule parse_fill_rule(const std::string& text) {
  if (text == "raster") return FillRule::raster;
  if (text == "spatial") return FillRule::spatial;
  throw ArgumentError("unknown fill rule '" + text + "' (expected raster or spatial)");
}

Tensor zero_pad_target(const Tensor& latent, std::size_t out_size, FillRule rule) {
  if (latent.rank() != 4) throw ShapeError("latent must be (N, C, h, w), got " + to_string(latent.shape()));
  const std::size_t N = latent.dim(0), C = latent.dim(1), h = latent.dim(2), w = latent.dim(3);
  const std::size_t S = out_size, per = C * h * w;
  if (per > S * S)
    throw ArgumentError("latent of " + std::to_string(per) + " values does not fit a " + std::to_string(S) + "x" +
                        std::to_string(S) + " image");
  if (rule == FillRule::spatial && (C > 4 || 2 * h > S || 2 * w > S))
    throw ArgumentError("spatial fill needs at most 4 channels and 2h, 2w <= S");
  Tensor out({N, 1, S, S});
  for (std::size_t n = 0; n < N; ++n) {
    const float* src = latent.raw() + n * per;
    float* dst = out.raw() + n * S * S;
    if (rule == FillRule::raster) {
      std::copy(src, src + per, dst);
      continue;
    }
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) dst[(2 * i + c / 2) * S + 2 * j + c % 2] = src[(c * h + i) * w + j];
  }
  return out;
}

TrainReport train_emap_regression(ModelGraph& model, const Tensor& train_targets, const Tensor& val_targets,
                                  const Dataset& data, const TrainConfig& cfg) {
  if (model.kind != ModelKind::interpretable) throw ArgumentError("E-map regression needs an interpretable model");
  if (train_targets.dim(0) != data.train.size() || val_targets.dim(0) != data.val.size())
    throw ArgumentError("one target map per train and val image is required");
  Objective o;
  o.train_size = data.train.size();
  o.val_size = data.val.size();
  o.loss = [&](Tape<float>& tape, const BoundParameters<float>& p, std::span<const std::size_t> idx, bool val) {
    const auto out = interpretable_forward(model, p, tape.constant(gather(pool(data, val).images, idx)));
    return ops::mse_loss(out.emap, gather(val ? val_targets : train_targets, idx));
  };
  return fit(model.params, o, cfg);
}

}  // namespace emap

#include "emap/nn/optim.hpp"

#include <cmath>

namespace emap {

void adam_step(ParameterStore& store, const AdamConfig& cfg) {
  for (const auto& p : store)
    if (p.trainable && p.grad.empty())
      throw StateError("adam_step: parameter '" + p.name + "' has no gradient; run backward first");
  const std::uint64_t t = store.adam_steps() + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& p : store) {
    if (!p.trainable) continue;
    if (p.m.empty()) p.m = Tensor::zeros(p.value.shape());
    if (p.v.empty()) p.v = Tensor::zeros(p.value.shape());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double m = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      p.m[i] = static_cast<float>(m);
      p.v[i] = static_cast<float>(v);
      const double step = cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
      // skipping zero steps keeps a signed zero parameter bit-identical
      if (step != 0.0) p.value[i] = static_cast<float>(p.value[i] - step);
    }
  }
  store.set_adam_steps(t);
  store.zero_grads();
}

EarlyStopper::EarlyStopper(std::size_t patience) : patience_(patience) {
  if (patience == 0) throw ArgumentError("patience must be >= 1");
}

bool EarlyStopper::update(double val_loss) {
  ++epochs_;
  improved_last_ = epochs_ == 1 || val_loss < best_;
  if (improved_last_) {
    best_ = val_loss;
    best_epoch_ = epochs_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  stopped_ = since_best_ >= patience_;
  return stopped_;
}

EarlyStopResult early_stop(std::span<const double> val_losses, std::size_t patience) {
  if (val_losses.empty()) throw ArgumentError("early_stop needs at least one epoch");
  EarlyStopper s(patience);
  EarlyStopResult r;
  for (const double loss : val_losses) {
    if (s.update(loss)) {
      r.stop_epoch = s.epochs();
      break;
    }
  }
  r.best_epoch = s.best_epoch();
  return r;
}

}  // namespace emap

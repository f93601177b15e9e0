#include "emap/training/zeropad.hpp"

#include <sstream>

#include "emap/util/log.hpp"
#include "emap/util/rng.hpp"

namespace emap {
namespace {

ZeroPadRow measure(const ModelGraph& student, const Dataset& data, double sigma, const ZeroPadConfig& cfg) {
  ZeroPadRow row;
  row.sigma = sigma;
  row.mean_ssim = mean_ssim_to_target(student, data.test, cfg.fill);
  const EmapBatch e = compute_emaps(student, data.test.images);
  const std::size_t plane = e.emaps.size() / e.emaps.dim(0);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    if (data.test.labels[i] != 1 || !data.test.has_masks()) continue;
    sum += overlap_top_k({e.emaps.raw() + i * plane, plane}, {data.test.masks.raw() + i * plane, plane},
                         cfg.top_fraction);
    ++n;
  }
  row.mean_overlap = n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  row.distilled_acc = accuracy(e.t, data.test.labels);
  return row;
}

}  // namespace

double mean_ssim_to_target(const ModelGraph& interpretable, const SplitData& split, FillRule fill) {
  const std::size_t S = interpretable.encoder.image_size;
  const Tensor target = zero_pad_target(compute_latent(interpretable, split.images), S, fill);
  const Tensor maps = compute_emaps(interpretable, split.images).emaps;
  double sum = 0.0;
  for (std::size_t i = 0; i < split.size(); ++i)
    sum += ssim({maps.raw() + i * S * S, S * S}, {target.raw() + i * S * S, S * S}, S, S);
  return sum / static_cast<double>(split.size());
}

void perturb_decoder(ModelGraph& model, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return;
  for (auto& p : model.params) {
    if (p.name.rfind("dec.", 0) != 0) continue;
    Rng rng(derive_seed(seed, "perturb/" + p.name));
    for (auto& v : p.value.data()) v = static_cast<float>(v + rng.normal(0.0, sigma));
  }
}

ZeroPadReport zero_pad_experiment(const ModelGraph& blackbox, const Dataset& data, const DistillSetup& setup,
                                  const ZeroPadConfig& cfg) {
  const std::size_t S = blackbox.encoder.image_size;
  ZeroPadReport report;

  ModelGraph stage1 = build_interpretable(blackbox, setup.decoder, setup.init);
  const Tensor train_targets = zero_pad_target(compute_latent(blackbox, data.train.images), S, cfg.fill);
  const Tensor val_targets = zero_pad_target(compute_latent(blackbox, data.val.images), S, cfg.fill);
  log::info("zeropad_stage", "stage=1 fill=" + to_string(cfg.fill));
  report.stage1 = train_emap_regression(stage1, train_targets, val_targets, data, cfg.stage1);
  report.stage1_converged = report.stage1.best_val_loss <= cfg.stage1_threshold;
  if (!report.stage1_converged) {
    std::ostringstream os;
    os << "best_val_mse=" << report.stage1.best_val_loss << " threshold=" << cfg.stage1_threshold;
    log::warn("zeropad_stage1_not_converged", os.str());
  }

  const auto teacher_train = predict(blackbox, data.train.images);
  const auto teacher_val = predict(blackbox, data.val.images);
  std::vector<double> sigmas{0.0};
  sigmas.insert(sigmas.end(), cfg.noise_sigmas.begin(), cfg.noise_sigmas.end());
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    ModelGraph student = stage1;
    perturb_decoder(student, sigmas[k], derive_seed(cfg.noise_seed, "zeropad/noise", k));
    std::ostringstream os;
    os << "stage=" << (k == 0 ? 2 : 3) << " sigma=" << sigmas[k];
    log::info("zeropad_stage", os.str());
    distill_to_targets(student, data, teacher_train, teacher_val, setup.train);
    report.rows.push_back(measure(student, data, sigmas[k], cfg));
  }
  return report;
}

}  // namespace emap

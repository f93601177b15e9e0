#include "emap/eval/studies.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "emap/data/image_io.hpp"
#include "emap/tensor/f32t.hpp"
#include "emap/util/log.hpp"

namespace emap {
namespace {

std::span<const float> plane(const Tensor& t, std::size_t i) {
  const std::size_t per = t.size() / t.dim(0);
  return {t.raw() + i * per, per};
}

double variance(std::span<const float> v) {
  double mean = 0.0;
  for (const float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (const float x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

double mask_percent(std::span<const float> mask) {
  std::size_t n = 0;
  for (const float v : mask) n += v != 0.0f;
  return 100.0 * static_cast<double>(n) / static_cast<double>(mask.size());
}

void require_masks(const SplitData& s) {
  if (!s.has_masks()) throw ArgumentError("overlap needs a split with tumor masks");
}

}  // namespace

MetricsReport evaluate(const ModelGraph& blackbox, const ModelGraph* interpretable, const SplitData& split,
                       double top_fraction, std::size_t batch_size) {
  const auto t = predict(blackbox, split.images, batch_size);
  if (!interpretable) return summarize(t, t, split.labels);
  const EmapBatch e = compute_emaps(*interpretable, split.images, batch_size);
  std::vector<double> overlaps(split.size(), std::numeric_limits<double>::quiet_NaN());
  if (split.has_masks())
    for (std::size_t i = 0; i < split.size(); ++i)
      if (split.labels[i] == 1) overlaps[i] = overlap_top_k(plane(e.emaps, i), plane(split.masks, i), top_fraction);
  return summarize(t, e.t, split.labels, overlaps);
}

ModelGraph distill_new(const ModelGraph& blackbox, const Dataset& data, const DistillSetup& setup,
                       TrainReport* report) {
  ModelGraph student = build_interpretable(blackbox, setup.decoder, setup.init);
  TrainReport r = distill_interpretable(student, blackbox, data, setup.train);
  if (report) *report = std::move(r);
  return student;
}

std::string to_string(AttributionMethod m) {
  switch (m) {
    case AttributionMethod::emap: return "emap";
    case AttributionMethod::saliency: return "saliency";
    case AttributionMethod::integrated_gradients: return "integrated_gradients";
  }
  return "?";
}

OverlapStudy overlap_study(const ModelGraph& interpretable, const ModelGraph& blackbox, const SplitData& split,
                           double top_fraction, std::size_t ig_steps) {
  require_masks(split);
  std::vector<std::size_t> abnormal;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split.labels[i] == 1) abnormal.push_back(i);
  if (abnormal.empty()) throw ArgumentError("overlap needs at least one abnormal image");
  const Tensor images = gather(split.images, abnormal);

  const Tensor emaps = compute_emaps(interpretable, images).emaps;
  const ScalarModel bb = scalar_model(blackbox);
  const Tensor sal = saliency(bb, images, 16);
  const Tensor ig = integrated_gradients(bb, images, ig_steps, nullptr, 16);

  OverlapStudy out;
  std::array<double, 3> sum{};
  for (std::size_t k = 0; k < abnormal.size(); ++k) {
    const auto mask = plane(split.masks, abnormal[k]);
    out.random_baseline += mask_percent(mask);
    const std::array<const Tensor*, 3> maps{&emaps, &sal, &ig};
    for (std::size_t m = 0; m < 3; ++m) {
      const double p = overlap_top_k(plane(*maps[m], k), mask, top_fraction);
      out.rows.push_back({abnormal[k], static_cast<AttributionMethod>(m), p});
      sum[m] += p;
    }
  }
  const double n = static_cast<double>(abnormal.size());
  for (std::size_t m = 0; m < 3; ++m) out.mean[m] = sum[m] / n;
  out.random_baseline /= n;
  return out;
}

StabilityResult stability_study(const ModelGraph& blackbox, const Dataset& data, const std::vector<InitKind>& schemes,
                                const DistillSetup& setup) {
  StabilityResult r;
  const double target_var = variance(predict(blackbox, data.val.images));
  std::vector<Tensor> maps;
  for (const InitKind kind : schemes) {
    DistillSetup arm = setup;
    arm.init.kind = kind;
    r.arms.push_back(to_string(kind));
    log::info("stability_arm", "init=" + to_string(kind));
    bool ok = false;
    ModelGraph student;
    try {
      TrainReport rep;
      student = distill_new(blackbox, data, arm, &rep);
      ok = rep.best_val_loss < target_var;
    } catch (const NumericError& e) {
      log::warn("stability_arm_failed", "init=" + to_string(kind) + " error=\"" + e.what() + "\"");
    }
    r.converged.push_back(ok);
    maps.push_back(ok ? compute_emaps(student, data.test.images).emaps : Tensor());
    r.models.push_back(std::move(student));
  }

  const std::size_t k = schemes.size(), S = blackbox.encoder.image_size;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.mean_ssim.assign(k, std::vector<double>(k, nan));
  double pair_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!r.converged[i]) continue;
    for (std::size_t j = i; j < k; ++j) {
      if (!r.converged[j]) continue;
      double s = 0.0;
      for (std::size_t n = 0; n < data.test.size(); ++n) s += ssim(plane(maps[i], n), plane(maps[j], n), S, S);
      s /= static_cast<double>(data.test.size());
      r.mean_ssim[i][j] = r.mean_ssim[j][i] = s;
      if (i != j) {
        pair_sum += s;
        ++pairs;
      }
    }
  }
  r.mean_pairwise = pairs ? pair_sum / static_cast<double>(pairs) : nan;
  return r;
}

std::vector<SweepRow> sweep_encoder_depth(const Dataset& data, const std::vector<std::size_t>& depths,
                                          const BlackBoxSetup& blackbox, const DistillSetup& setup) {
  std::vector<SweepRow> rows;
  for (const std::size_t d : depths) {
    BlackBoxSpec spec = blackbox.spec;
    spec.conv_layers = d;
    log::info("sweep_arm", "encoder_conv_layers=" + std::to_string(d));
    ModelGraph bb = build_blackbox(spec, blackbox.init);
    train_blackbox(bb, data, blackbox.train);
    const ModelGraph student = distill_new(bb, data, setup);
    rows.push_back({std::to_string(d), accuracy(predict(bb, data.test.images), data.test.labels),
                    accuracy(predict(student, data.test.images), data.test.labels)});
  }
  return rows;
}

std::vector<SweepRow> sweep_decoder_depth(const ModelGraph& blackbox, const Dataset& data,
                                          const std::vector<std::size_t>& conv_layers, const DistillSetup& setup) {
  const double bb_acc = accuracy(predict(blackbox, data.test.images), data.test.labels);
  std::vector<SweepRow> rows;
  for (const std::size_t c : conv_layers) {
    DistillSetup arm = setup;
    arm.decoder.conv_layers = c;
    log::info("sweep_arm", "decoder_conv_layers=" + std::to_string(c));
    const ModelGraph student = distill_new(blackbox, data, arm);
    rows.push_back({std::to_string(c), bb_acc, accuracy(predict(student, data.test.images), data.test.labels)});
  }
  return rows;
}

FpFnSummary export_fp_fn(const ModelGraph& interpretable, const SplitData& split, const std::filesystem::path& dir,
                         std::size_t per_category) {
  static const std::array<const char*, 4> names{"TP", "TN", "FP", "FN"};
  const EmapBatch e = compute_emaps(interpretable, split.images);
  const std::size_t S = interpretable.encoder.image_size;
  FpFnSummary out;
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.csv");
  if (!index) throw IoError("cannot write " + (dir / "index.csv").string());
  index << "category,image_index,label,t_hat,image_file,emap_file\n";
  index << std::setprecision(9);
  for (std::size_t i = 0; i < split.size(); ++i) {
    const bool pred = e.t[i] > 0.0f, pos = split.labels[i] == 1;
    const std::size_t cat = pred ? (pos ? 0 : 2) : (pos ? 3 : 1);
    ++out.found[cat];
    if (out.written[cat] >= per_category) continue;
    const std::filesystem::path sub = dir / names[cat];
    std::filesystem::create_directories(sub);
    char stem[32];
    std::snprintf(stem, sizeof stem, "%06zu", i);
    const std::string image_file = std::string(names[cat]) + "/" + stem + "_image.pgm";
    const std::string emap_file = std::string(names[cat]) + "/" + stem + "_emap.f32t";
    write_pgm(dir / image_file, split.images.raw() + i * S * S, S, S);
    write_f32t(dir / emap_file, e.emaps.slice_batch(i, 1));
    index << names[cat] << ',' << i << ',' << split.labels[i] << ',' << e.t[i] << ',' << image_file << ','
          << emap_file << '\n';
    ++out.written[cat];
    out.files += 2;
  }
  for (std::size_t c = 0; c < 4; ++c)
    if (out.found[c] == 0) log::info("fpfn_category_empty", std::string("category=") + names[c]);
  if (!index) throw IoError("failed writing " + (dir / "index.csv").string());
  return out;
}

}  // namespace emap

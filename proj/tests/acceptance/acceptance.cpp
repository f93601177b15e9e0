// End-to-end acceptance run: one PASS/FAIL line per criterion on stdout,
// progress on stderr. Exit status 0 only when every criterion passes.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "emap/io/checkpoint.hpp"
#include "emap/io/config.hpp"
#include "emap/io/export.hpp"
#include "emap/tensor/f32t.hpp"
#include "emap/tensor/grad_check.hpp"
#include "emap/util/log.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace emap::acceptance {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

// Pinned tolerances.
constexpr double kPrimitiveGradTol = 1e-4;
constexpr double kCompositeGradTol = 1e-3;
constexpr int kGradInstances = 20;
constexpr double kBlackBoxAccLo = 0.70, kBlackBoxAccHi = 0.95;
constexpr double kAccGap = 0.02;
constexpr double kAucGap = 0.02;
constexpr double kEstimationMse = 0.05;
constexpr double kLocalizationFactor = 5.0;
constexpr double kMonteCarloPoints = 2.0;
constexpr double kStabilitySsim = 0.7;
constexpr double kZeroPadStage2Ssim = 0.9;
constexpr double kZeroPadEscapeSsim = 0.5;
constexpr double kEscapeSigma = 0.3;
constexpr double kAucOracleTol = 1e-9;

struct Line {
  int id;
  std::string title;
  bool pass;
  std::string detail;
};

std::vector<Line> g_lines;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  g_lines.push_back({id, title, pass, detail});
  std::printf("%s  [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: gradients

struct Worst {
  double err = 0.0;
  std::string where;
  void update(double e, const std::string& w) {
    if (where.empty() || e > err) {
      err = e;
      where = w;
    }
  }
};

void gradient_criterion() {
  const auto t0 = std::chrono::steady_clock::now();
  using Fn = GradCheckFn;
  Worst prim;
  for (int s = 0; s < kGradInstances; ++s) {
    const std::uint64_t k = static_cast<std::uint64_t>(s);
    const std::vector<int> labels{0, 1, 1, 0, 1};
    const auto target = random_tensor({5, 1}, 400 + k);
    const std::vector<std::tuple<std::string, Fn, std::vector<Tensor64>>> cases{
        {"conv2d same",
         [](Tape<double>&, std::span<const Var<double>> in) { return ops::conv2d(in[0], in[1], in[2]); },
         {random_tensor({1, 2, 6, 6}, 100 + k), random_tensor({3, 2, 5, 5}, 200 + k), random_tensor({3}, 300 + k)}},
        {"conv2d valid stride 2",
         [](Tape<double>&, std::span<const Var<double>> in) {
           return ops::conv2d(in[0], in[1], in[2], {Padding::valid, 2});
         },
         {random_tensor({1, 2, 7, 7}, 110 + k), random_tensor({2, 2, 3, 3}, 210 + k), random_tensor({2}, 310 + k)}},
        {"transpose_conv2d",
         [](Tape<double>&, std::span<const Var<double>> in) { return ops::transpose_conv2d(in[0], in[1], in[2]); },
         {random_tensor({2, 3, 3, 2}, k), random_tensor({3, 2, 2, 2}, 50 + k), random_tensor({2}, 90 + k)}},
        {"maxpool2x2", [](Tape<double>&, std::span<const Var<double>> in) { return ops::maxpool2x2(in[0]); },
         {random_tensor({2, 2, 4, 6}, 500 + k)}},
        {"dense", [](Tape<double>&, std::span<const Var<double>> in) { return ops::dense(in[0], in[1], in[2]); },
         {random_tensor({3, 7}, k), random_tensor({7, 1}, 40 + k), random_tensor({1}, 80 + k)}},
        {"relu", [](Tape<double>&, std::span<const Var<double>> in) { return ops::relu(in[0]); },
         {random_tensor({2, 3, 4, 4}, 900 + k)}},
        {"sigmoid", [](Tape<double>&, std::span<const Var<double>> in) { return ops::sigmoid(in[0]); },
         {random_tensor({2, 3, 4, 4}, 950 + k, -4, 4)}},
        {"concat_channels",
         [](Tape<double>&, std::span<const Var<double>> in) { return ops::concat_channels(in[0], in[1]); },
         {random_tensor({2, 3, 4, 4}, k), random_tensor({2, 1, 4, 4}, 60 + k)}},
        {"sum_all", [](Tape<double>&, std::span<const Var<double>> in) { return ops::sum_all(in[0]); },
         {random_tensor({2, 2, 3, 3}, 30 + k)}},
        {"sum_per_item", [](Tape<double>&, std::span<const Var<double>> in) { return ops::sum_per_item(in[0]); },
         {random_tensor({3, 1, 4, 4}, 70 + k)}},
        {"weighted_sum",
         [w = random_tensor({2, 1, 3, 3}, 600 + k)](Tape<double>&, std::span<const Var<double>> in) {
           return ops::weighted_sum(in[0], w);
         },
         {random_tensor({2, 1, 3, 3}, 650 + k)}},
        {"bce_loss", [labels](Tape<double>&, std::span<const Var<double>> in) { return ops::bce_loss(in[0], labels); },
         {random_tensor({5, 1}, k, -3, 3)}},
        {"mse_loss", [target](Tape<double>&, std::span<const Var<double>> in) { return ops::mse_loss(in[0], target); },
         {random_tensor({5, 1}, 20 + k)}},
    };
    for (const auto& [name, fn, inputs] : cases)
      prim.update(grad_check(fn, inputs), name + " #" + std::to_string(s));
  }

  Worst comp;
  BlackBoxSpec e;
  e.conv_layers = 4;
  e.filters = 2;
  e.kernel = 5;
  e.image_size = 8;
  DecoderSpec d;
  d.tconv_filters = 2;
  d.conv_layers = 3;
  d.filters = 2;
  d.kernel = 5;
  for (int s = 0; s < kGradInstances; ++s) {
    const std::uint64_t k = static_cast<std::uint64_t>(s);
    const auto m = build_interpretable_from_scratch(e, d, {InitKind::glorot_uniform, 1000 + k});
    std::vector<Tensor64> inputs{random_tensor({1, 1, 8, 8}, 2000 + k, 0.0, 1.0)};
    // Zero-initialized biases leave pre-activations exactly on ReLU kinks where
    // no derivative exists; random biases give a generic point.
    std::uint64_t b = 0;
    for (const auto& p : m.params)
      inputs.push_back(p.name.ends_with(".bias")
                           ? random_tensor(p.value.shape(), derive_seed(3000, "bias", 100 * k + b++), -0.1, 0.1)
                           : p.value.cast<double>());
    const GradCheckFn fn = [&m](Tape<double>&, std::span<const Var<double>> in) {
      BoundParameters<double> p{{in.begin() + 1, in.end()}};
      return interpretable_forward(m, p, in[0]).emap;
    };
    comp.update(grad_check(fn, inputs), "interpretable #" + std::to_string(s));
  }
  const double secs = seconds_since(t0);
  report(1, "gradient correctness", prim.err <= kPrimitiveGradTol && comp.err <= kCompositeGradTol && secs < 60.0,
         "primitives max rel err " + num(prim.err, 3) + " at " + prim.where + " (<= 1e-4), composite " +
             num(comp.err, 3) + " at " + comp.where + " (<= 1e-3), " + num(secs, 3) + " s (< 60)");
}

// ---- 9: oracles

void oracle_criterion() {
  double auc_gap = 0.0;
  for (std::uint64_t inst = 0; inst < 100; ++inst) {
    Rng rng(derive_seed(31, "auc", inst));
    const std::size_t n = 2 + rng.below(299);
    std::vector<float> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = i == 0 ? 0 : (i == 1 ? 1 : static_cast<int>(rng.below(2)));
      s[i] = static_cast<float>(rng.below(25)) * 0.5f + static_cast<float>(l[i]);
    }
    auc_gap = std::max(auc_gap, std::abs(roc_auc(s, l).auc - testing::pairwise_auc(s, l)));
  }

  std::size_t ssim_ok = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const Tensor x = random_tensor<float>({64, 64}, 7000 + k, 0.0, 1.0);
    ssim_ok += ssim(x.data(), x.data(), 64, 64) == 1.0;
  }

  const std::size_t S = 64;
  std::vector<float> mask(S * S, 0.0f);
  std::size_t area = 0;
  for (int y = -6; y <= 6; ++y)
    for (int x = -6; x <= 6; ++x)
      if (x * x + y * y <= 36) {
        mask[(32 + y) * S + 32 + x] = 1.0f;
        ++area;
      }
  const double expected = 100.0 * static_cast<double>(area) / static_cast<double>(S * S);
  Rng rng(77);
  std::vector<float> map(S * S);
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    for (auto& v : map) v = static_cast<float>(rng.uniform());
    total += overlap_top_k(map, mask, 0.01);
  }
  const double mc = total / trials;
  report(9, "oracle equivalence",
         auc_gap <= kAucOracleTol && ssim_ok == 100 && std::abs(mc - expected) <= kMonteCarloPoints,
         "max |AUC - pairwise| " + num(auc_gap, 3) + " (<= 1e-9), SSIM(x,x)=1 on " + std::to_string(ssim_ok) +
             "/100, Monte Carlo overlap " + num(mc) + " vs mask fraction " + num(expected) + " (+-2)");
}

// ---- pipeline criteria

struct Pipeline {
  RunConfig cfg;
  fs::path work;
  std::optional<Dataset> data;
  std::optional<ModelGraph> blackbox, student;
};

// Monte Carlo estimate of the random-map overlap on the abnormal images of a split.
double monte_carlo_baseline(const SplitData& split, double top_fraction, int draws_per_image) {
  const std::size_t px = split.masks.size() / split.size();
  Rng rng(99);
  std::vector<float> map(px);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split.labels[i] != 1) continue;
    const std::span<const float> mask(split.masks.raw() + i * px, px);
    for (int d = 0; d < draws_per_image; ++d) {
      for (auto& v : map) v = static_cast<float>(rng.uniform());
      total += overlap_top_k(map, mask, top_fraction);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

void unity_criterion(Pipeline& p) {
  const SplitData& test = p.data->test;
  const EmapBatch e = compute_emaps(*p.student, test.images, p.cfg.eval_batch_size);
  const fs::path dir = p.work / "emaps";
  fs::create_directories(dir);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    char base[16];
    std::snprintf(base, sizeof base, "%06zu", i);
    export_emap(e.emaps.slice_batch(i, 1), i, dir / base);
    const Tensor back = read_f32t(dir / (std::string(base) + ".f32t"));
    const float sum = raster_sum<float>(back.data());
    exact += std::memcmp(&sum, &e.t[i], sizeof(float)) == 0;
  }
  report(2, "unity-head identity", exact == test.size(),
         std::to_string(exact) + "/" + std::to_string(test.size()) +
             " test images with forward t_hat bit-equal to the raster sum of the exported E-map");
}

void parity_criteria(Pipeline& p, double distill_seconds, double blackbox_seconds) {
  const MetricsReport m = evaluate(*p.blackbox, &*p.student, p.data->test, p.cfg.top_fraction, p.cfg.eval_batch_size);
  write_metrics_csv(p.work / "metrics.csv", m.rows());
  const double dacc = std::abs(m.accuracy - m.blackbox_accuracy), dauc = std::abs(m.auc - m.blackbox_auc);
  const double minutes = (distill_seconds + blackbox_seconds) / 60.0;
  report(3, "accuracy parity",
         m.blackbox_accuracy >= kBlackBoxAccLo && m.blackbox_accuracy <= kBlackBoxAccHi && dacc <= kAccGap &&
             dauc <= kAucGap,
         "black-box acc " + num(m.blackbox_accuracy) + " (0.70-0.95), distilled acc " + num(m.accuracy) +
             ", |dacc| " + num(dacc, 3) + " (<= 0.02), AUC " + num(m.blackbox_auc) + " vs " + num(m.auc) +
             ", |dAUC| " + num(dauc, 3) + " (<= 0.02), training " + num(minutes, 3) + " min");
  report(4, "estimation error", m.estimation_mse <= kEstimationMse,
         "test MSE(t, t_hat) " + num(m.estimation_mse, 4) + " (<= 0.05), MAE " + num(m.estimation_mae, 4));
}

void localization_criterion(Pipeline& p) {
  const OverlapStudy s =
      overlap_study(*p.student, *p.blackbox, p.data->test, p.cfg.top_fraction, p.cfg.ig_steps);
  write_overlap_csv(p.work / "overlap.csv", s);
  const double mc = monte_carlo_baseline(p.data->test, p.cfg.top_fraction, 20);
  const double emap = s.mean[0];
  report(5, "localization",
         emap >= kLocalizationFactor * s.random_baseline && std::abs(mc - s.random_baseline) <= kMonteCarloPoints,
         "E-map top-1% overlap " + num(emap) + "% vs random baseline " + num(s.random_baseline) + "% (ratio " +
             num(emap / s.random_baseline, 3) + ", >= 5), Monte Carlo baseline " + num(mc) + "%; saliency " +
             num(s.mean[1]) + "%, integrated gradients " + num(s.mean[2]) + "%");
}

void stability_criterion(Pipeline& p) {
  const StabilityResult r = stability_study(*p.blackbox, *p.data, p.cfg.stability_schemes, p.cfg.distill_setup());
  write_stability_csv(p.work / "stability.csv", r);
  std::string arms;
  bool all = true;
  for (std::size_t i = 0; i < r.arms.size(); ++i) {
    arms += (i ? ", " : "") + r.arms[i] + (r.converged[i] ? "" : " (not converged)");
    all = all && r.converged[i];
  }
  report(6, "stability", all && r.mean_pairwise >= kStabilitySsim,
         "mean pairwise E-map SSIM " + num(r.mean_pairwise) + " (>= 0.7) over " + arms);
}

void sweep_criterion(Pipeline& p) {
  const std::vector<std::size_t> depths{0, 5};
  const auto rows = sweep_decoder_depth(*p.blackbox, *p.data, depths, p.cfg.distill_setup());
  write_sweep_csv(p.work / "sweep.csv", rows);
  report(7, "decoder-depth trend", rows[1].distilled_acc > rows[0].distilled_acc,
         "distilled acc with 5 conv layers " + num(rows[1].distilled_acc) + " vs 0 layers " +
             num(rows[0].distilled_acc) + " (strictly greater; black-box " + num(rows[0].blackbox_acc) + ")");
}

void zeropad_criterion(Pipeline& p) {
  ZeroPadConfig z = p.cfg.zeropad();
  z.noise_sigmas = {kEscapeSigma};
  const ZeroPadReport r = zero_pad_experiment(*p.blackbox, *p.data, p.cfg.distill_setup(), z);
  write_zeropad_csv(p.work / "zeropad.csv", r);
  double baseline = 0.0;
  std::size_t n = 0;
  const SplitData& test = p.data->test;
  const std::size_t px = test.masks.size() / test.size();
  for (std::size_t i = 0; i < test.size(); ++i)
    if (test.labels[i] == 1) {
      std::size_t in = 0;
      for (std::size_t k = 0; k < px; ++k) in += test.masks[i * px + k] != 0.0f;
      baseline += 100.0 * static_cast<double>(in) / static_cast<double>(px);
      ++n;
    }
  baseline /= static_cast<double>(n);
  const ZeroPadRow& stage2 = r.rows.front();
  const ZeroPadRow& noisy = r.rows.back();
  report(8, "zero-padding control",
         stage2.mean_ssim >= kZeroPadStage2Ssim && noisy.mean_ssim <= kZeroPadEscapeSsim &&
             noisy.mean_overlap > baseline,
         std::string("stage 1 ") + (r.stage1_converged ? "converged" : "NOT converged") + " (val MSE " +
             num(r.stage1.best_val_loss, 3) + "), stage-2 SSIM to target " + num(stage2.mean_ssim) +
             " (>= 0.9), sigma=0.3 SSIM " + num(noisy.mean_ssim) + " (<= 0.5), sigma=0.3 overlap " +
             num(noisy.mean_overlap) + "% vs baseline " + num(baseline) + "%");
}

// ---- 10: reproducibility through the command line tool

int run_tool(const std::string& emap, const std::string& args, const fs::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + emap + "' " + args + " 2>>tool.log";
  return std::system(cmd.c_str());
}

std::vector<std::string> compare_trees(const fs::path& a, const fs::path& b, std::size_t& compared) {
  std::vector<std::string> diffs;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    // train.json carries wall-clock seconds; everything else must match
    if (rel.filename() == "train.json") continue;
    ++compared;
    if (!fs::exists(b / rel) || read_file_bytes(entry.path()) != read_file_bytes(b / rel))
      diffs.push_back(rel.string());
  }
  return diffs;
}

void reproducibility_criterion(const RunConfig& cfg, const std::string& emap, const fs::path& work) {
  const fs::path dir = work / "repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  RunConfig short_cfg = cfg;
  short_cfg.max_epochs = 2;
  short_cfg.distill_max_epochs = 2;
  write_text(dir / "run.ini", to_ini(short_cfg));
  const std::string seed = " --seed " + std::to_string(cfg.seed);
  const std::vector<std::pair<std::string, std::string>> stages{
      {"data", "gen-data"},
      {"bb", "train-blackbox --data data_a"},
      {"di", "distill --data data_a --blackbox bb_a/blackbox.ckpt"},
      {"ev", "eval --data data_a --blackbox bb_a/blackbox.ckpt --interpretable di_a/interpretable.ckpt"},
      {"ex", "emap-export --data data_a --interpretable di_a/interpretable.ckpt --count 8"},
  };
  std::size_t compared = 0;
  std::vector<std::string> diffs;
  std::string failed;
  for (const auto& [name, args] : stages) {
    for (const char* run : {"_a", "_b"}) {
      const int rc = run_tool(emap, "--config run.ini" + seed + " --out " + name + run + " " + args, dir);
      if (rc != 0) failed += " " + name + run;
    }
    if (fs::exists(dir / (name + "_a")) && fs::exists(dir / (name + "_b")))
      for (const auto& d : compare_trees(dir / (name + "_a"), dir / (name + "_b"), compared))
        diffs.push_back(name + "/" + d);
  }
  std::string detail = std::to_string(compared) + " files compared across gen-data, train-blackbox, distill, eval, "
                       "emap-export (training stages capped at 2 epochs), " + std::to_string(diffs.size()) + " differ";
  for (const auto& d : diffs) detail += " " + d;
  if (!failed.empty()) detail += "; failed runs:" + failed;
  report(10, "reproducibility", failed.empty() && diffs.empty() && compared > 0, detail);
}

}  // namespace

int run(int argc, char** argv) {
  std::string config, emap, work;
  std::string only;
  CLI::App app{"acceptance suite"};
  app.add_option("--config", config, "acceptance run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--emap", emap, "emap command line binary")->required()->check(CLI::ExistingFile);
  app.add_option("--work", work, "scratch directory")->required();
  app.add_option("--only", only, "comma separated criterion ids");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  for (std::stringstream s(only); s.good();) {
    std::string id;
    std::getline(s, id, ',');
    if (!id.empty()) selected.insert(std::stoi(id));
  }
  const auto want = [&](std::initializer_list<int> ids) {
    if (selected.empty()) return true;
    for (int id : ids)
      if (selected.count(id)) return true;
    return false;
  };

  const auto t0 = std::chrono::steady_clock::now();
  Pipeline p;
  p.cfg = load_run_config(config);
  p.work = fs::absolute(work);
  fs::create_directories(p.work);
  emap = fs::absolute(emap).string();

  const auto guarded = [](std::initializer_list<int> ids, const std::string& stage, const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception& e) {
      for (int id : ids) report(id, "criterion", false, stage + " threw: " + e.what());
    }
  };

  if (want({1})) guarded({1}, "gradient check", gradient_criterion);
  if (want({9})) guarded({9}, "oracles", oracle_criterion);

  if (want({2, 3, 4, 5, 6, 7, 8})) {
    guarded({2, 3, 4, 5, 6, 7, 8}, "pipeline", [&] {
      log::info("acceptance", "stage=data");
      p.data = gen_dataset(p.cfg.data);
      log::info("acceptance", "stage=blackbox");
      ModelGraph bb = build_blackbox(p.cfg.blackbox, p.cfg.blackbox_init);
      const TrainReport bbr = train_blackbox(bb, *p.data, p.cfg.blackbox_train());
      p.blackbox = std::move(bb);
      save_checkpoint(*p.blackbox, {}, p.work / "blackbox.ckpt");
      log::info("acceptance", "stage=distill");
      TrainReport dr;
      p.student = distill_new(*p.blackbox, *p.data, p.cfg.distill_setup(), &dr);
      save_checkpoint(*p.student, {}, p.work / "interpretable.ckpt");
      if (want({2})) guarded({2}, "unity identity", [&] { unity_criterion(p); });
      if (want({3, 4})) guarded({3, 4}, "parity", [&] { parity_criteria(p, dr.wall_seconds, bbr.wall_seconds); });
      if (want({5})) guarded({5}, "localization", [&] { localization_criterion(p); });
      if (want({6})) guarded({6}, "stability", [&] { stability_criterion(p); });
      if (want({7})) guarded({7}, "decoder sweep", [&] { sweep_criterion(p); });
      if (want({8})) guarded({8}, "zero padding", [&] { zeropad_criterion(p); });
    });
  }
  if (want({10})) guarded({10}, "reproducibility", [&] { reproducibility_criterion(p.cfg, emap, p.work); });

  std::size_t passed = 0;
  for (const auto& l : g_lines) passed += l.pass;
  std::printf("acceptance: %zu/%zu criteria passed in %.0f s\n", passed, g_lines.size(), seconds_since(t0));
  return passed == g_lines.size() ? 0 : 1;
}

}  // namespace emap::acceptance

int main(int argc, char** argv) { return emap::acceptance::run(argc, argv); }

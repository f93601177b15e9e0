#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "emap/io/checkpoint.hpp"
#include "emap/io/export.hpp"
#include "emap/tensor/f32t.hpp"
#include "emap/util/log.hpp"
#include "run_dir.hpp"

namespace emap::cli {
namespace {

namespace fs = std::filesystem;

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

// Raised while resolving inputs, before any work starts.
struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string data, blackbox, interpretable, split = "test";
  std::vector<std::string> inputs;
  std::size_t count = 16;
};

struct Context {
  Options opt;
  RunConfig cfg;
};

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? parse_run_config("") : load_run_config(o.config);
  if (o.seed) {
    cfg.apply_seed(*o.seed);
    cfg.validate();
  }
  return cfg;
}

std::uint64_t file_hash(const fs::path& p) {
  const auto bytes = read_file_bytes(p);
  return crc32(bytes.data(), bytes.size());
}

Dataset use_data(Context& c, RunDir& dir) {
  Dataset ds = load_dataset(c.opt.data);
  dir.record_input("dataset", c.opt.data, ds.content_hash());
  if (ds.config.image_size != c.cfg.blackbox.image_size) {
    log::info("image_size", "from_data=" + std::to_string(ds.config.image_size));
    c.cfg.data.image_size = c.cfg.blackbox.image_size = ds.config.image_size;
  }
  return ds;
}

ModelGraph use_model(const std::string& path, const std::string& kind, ModelKind expected, RunDir& dir) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.model.kind != expected)
    throw ArgumentError(path + ": model kind is " + to_string(ck.model.kind) + ", expected " + to_string(expected));
  dir.record_input(kind, path, file_hash(path));
  return std::move(ck.model);
}

const SplitData& pick_split(const Dataset& ds, const std::string& name) {
  if (name == "train") return ds.train;
  if (name == "val") return ds.val;
  if (name == "test") return ds.test;
  throw ArgumentError("unknown split '" + name + "'");
}

CheckpointMeta meta_for(const Dataset& ds, const RunConfig& cfg, const TrainConfig& train, const TrainReport& r) {
  CheckpointMeta m;
  m.train = train;
  m.dataset_hash = config_hash(ds.config);
  m.seeds = {{"master", cfg.seed}, {"data", ds.config.seed}, {"shuffle", train.seed}};
  m.epoch = r.best_epoch;
  return m;
}

void write_eval(RunDir& dir, const MetricsReport& r, const SplitData& split) {
  auto rows = r.rows();
  write_metrics_csv(dir / "metrics.csv", rows);
  std::vector<float> t(r.records.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.records[i].t_hat;
  write_roc_csv(dir / "roc.csv", roc_auc(t, split.labels));
  write_records_csv(dir / "records.csv", r);
}

// ---- commands

void gen_data(Context& c) {
  RunDir dir(c.opt.out);
  dir.echo_config(c.cfg);
  const Dataset ds = gen_dataset(c.cfg.data, c.opt.threads);
  save_dataset(ds, dir.path());
  log::info("dataset", "hash=" + hex64(ds.content_hash()));
  dir.commit();
}

void train_blackbox_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  dir.echo_config(c.cfg);
  const TrainConfig tc = c.cfg.blackbox_train();
  ModelGraph bb = build_blackbox(c.cfg.blackbox, c.cfg.blackbox_init);
  const TrainReport r = train_blackbox(bb, ds, tc);
  save_checkpoint(bb, meta_for(ds, c.cfg, tc, r), dir / "blackbox.ckpt");
  write_train_report(dir / "train", r);
  write_eval(dir, evaluate(bb, nullptr, ds.test, c.cfg.top_fraction, c.cfg.eval_batch_size), ds.test);
  dir.commit();
}

void distill_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph bb = use_model(c.opt.blackbox, "blackbox", ModelKind::blackbox, dir);
  dir.echo_config(c.cfg);
  const DistillSetup setup = c.cfg.distill_setup();
  TrainReport r;
  const ModelGraph student = distill_new(bb, ds, setup, &r);
  save_checkpoint(student, meta_for(ds, c.cfg, setup.train, r), dir / "interpretable.ckpt");
  write_train_report(dir / "train", r);
  write_eval(dir, evaluate(bb, &student, ds.test, c.cfg.top_fraction, c.cfg.eval_batch_size), ds.test);
  dir.commit();
}

void direct_train_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  dir.echo_config(c.cfg);
  const TrainConfig tc = c.cfg.direct_train();
  ModelGraph m = build_interpretable_from_scratch(c.cfg.blackbox, c.cfg.decoder, c.cfg.decoder_init);
  const TrainReport r = direct_train_interpretable(m, ds, tc);
  save_checkpoint(m, meta_for(ds, c.cfg, tc, r), dir / "interpretable.ckpt");
  write_train_report(dir / "train", r);
  write_eval(dir, evaluate(m, &m, ds.test, c.cfg.top_fraction, c.cfg.eval_batch_size), ds.test);
  dir.commit();
}

void eval_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph bb = use_model(c.opt.blackbox, "blackbox", ModelKind::blackbox, dir);
  std::optional<ModelGraph> interp;
  if (!c.opt.interpretable.empty())
    interp = use_model(c.opt.interpretable, "interpretable", ModelKind::interpretable, dir);
  dir.echo_config(c.cfg);
  const SplitData& split = pick_split(ds, c.opt.split);
  const ModelGraph* im = interp ? &*interp : nullptr;
  write_eval(dir, evaluate(bb, im, split, c.cfg.top_fraction, c.cfg.eval_batch_size), split);
  dir.commit();
}

void emap_export_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph m = use_model(c.opt.interpretable, "interpretable", ModelKind::interpretable, dir);
  dir.echo_config(c.cfg);
  const SplitData& split = pick_split(ds, c.opt.split);
  const std::size_t n = std::min(c.opt.count, split.size());
  const EmapBatch e = compute_emaps(m, split.images.slice_batch(0, n), c.cfg.eval_batch_size);
  std::string index = "image_index,label,t_hat,base\n";
  for (std::size_t i = 0; i < n; ++i) {
    char base[32];
    std::snprintf(base, sizeof base, "%06zu", i);
    export_emap(e.emaps.slice_batch(i, 1), i, dir / base);
    index += std::to_string(i) + "," + std::to_string(split.labels[i]) + "," + format_number(e.t[i]) + "," + base + "\n";
  }
  write_text(dir / "index.csv", index);
  dir.commit();
}

void stability_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph bb = use_model(c.opt.blackbox, "blackbox", ModelKind::blackbox, dir);
  dir.echo_config(c.cfg);
  const StabilityResult r = stability_study(bb, ds, c.cfg.stability_schemes, c.cfg.distill_setup());
  write_stability_csv(dir / "stability.csv", r);
  write_metrics_csv(dir / "metrics.csv", {{"mean_pairwise_ssim", r.mean_pairwise}});
  // map triplets: the same test images under every arm
  const std::size_t n = std::min(c.opt.count, ds.test.size());
  fs::create_directories(dir / "maps");
  for (std::size_t a = 0; a < r.arms.size(); ++a) {
    save_checkpoint(r.models[a], {}, dir / (r.arms[a] + ".ckpt"));
    const EmapBatch e = compute_emaps(r.models[a], ds.test.images.slice_batch(0, n), c.cfg.eval_batch_size);
    for (std::size_t i = 0; i < n; ++i) {
      char base[64];
      std::snprintf(base, sizeof base, "%06zu_%s", i, r.arms[a].c_str());
      export_emap(e.emaps.slice_batch(i, 1), i, dir.path() / "maps" / base);
    }
  }
  dir.commit();
}

void zeropad_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph bb = use_model(c.opt.blackbox, "blackbox", ModelKind::blackbox, dir);
  dir.echo_config(c.cfg);
  const ZeroPadReport r = zero_pad_experiment(bb, ds, c.cfg.distill_setup(), c.cfg.zeropad());
  if (!r.stage1_converged) log::warn("zeropad", "stage1_converged=false");
  write_zeropad_csv(dir / "zeropad.csv", r);
  write_train_report(dir / "stage1", r.stage1);
  write_metrics_csv(dir / "metrics.csv", {{"stage1_best_val_loss", r.stage1.best_val_loss},
                                          {"stage1_converged", r.stage1_converged ? 1.0 : 0.0}});
  dir.commit();
}

void sweep_encoder_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  dir.echo_config(c.cfg);
  write_sweep_csv(dir / "sweep.csv",
                  sweep_encoder_depth(ds, c.cfg.encoder_depths, c.cfg.blackbox_setup(), c.cfg.distill_setup()));
  dir.commit();
}

void sweep_decoder_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph bb = use_model(c.opt.blackbox, "blackbox", ModelKind::blackbox, dir);
  dir.echo_config(c.cfg);
  write_sweep_csv(dir / "sweep.csv", sweep_decoder_depth(bb, ds, c.cfg.decoder_depths, c.cfg.distill_setup()));
  dir.commit();
}

void overlap_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph bb = use_model(c.opt.blackbox, "blackbox", ModelKind::blackbox, dir);
  const ModelGraph m = use_model(c.opt.interpretable, "interpretable", ModelKind::interpretable, dir);
  dir.echo_config(c.cfg);
  const OverlapStudy s = overlap_study(m, bb, pick_split(ds, c.opt.split), c.cfg.top_fraction, c.cfg.ig_steps);
  write_overlap_csv(dir / "overlap.csv", s);
  write_metrics_csv(dir / "metrics.csv", {{"mean_overlap_emap", s.mean[0]},
                                          {"mean_overlap_saliency", s.mean[1]},
                                          {"mean_overlap_integrated_gradients", s.mean[2]},
                                          {"random_baseline", s.random_baseline}});
  dir.commit();
}

void histogram_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph m = use_model(c.opt.interpretable, "interpretable", ModelKind::interpretable, dir);
  dir.echo_config(c.cfg);
  const SplitData& split = pick_split(ds, c.opt.split);
  const EmapBatch e = compute_emaps(m, split.images, c.cfg.eval_batch_size);
  const std::size_t px = e.emaps.size() / split.size();
  std::vector<float> normal, abnormal;
  for (std::size_t i = 0; i < split.size(); ++i) {
    auto& dst = split.labels[i] ? abnormal : normal;
    dst.insert(dst.end(), e.emaps.data().begin() + i * px, e.emaps.data().begin() + (i + 1) * px);
  }
  write_histogram_csv(dir / "histogram.csv", positive_pixel_histogram(normal, abnormal, c.cfg.histogram_bins));
  dir.commit();
}

void fpfn_cmd(Context& c) {
  RunDir dir(c.opt.out);
  const Dataset ds = use_data(c, dir);
  const ModelGraph m = use_model(c.opt.interpretable, "interpretable", ModelKind::interpretable, dir);
  dir.echo_config(c.cfg);
  const FpFnSummary s = export_fp_fn(m, pick_split(ds, c.opt.split), dir.path(), c.cfg.fpfn_per_category);
  log::info("fpfn", "files=" + std::to_string(s.files));
  dir.commit();
}

// Collects the metrics.csv of every input run directory into one table.
void report_cmd(Context& c) {
  RunDir dir(c.opt.out);
  std::string md = "# emap report\n\n";
  std::string csv = "run,metric,value\n";
  for (const auto& in : c.opt.inputs) {
    const fs::path p(in);
    md += "## " + p.filename().string() + "\n\n";
    if (fs::exists(p / "config.ini")) {
      const RunConfig rc = load_run_config(p / "config.ini");
      md += "tumor_amplitude " + format_number(rc.data.tumor_amplitude) + ", tumor_width " +
            format_number(rc.data.tumor_width) + ", seed " + std::to_string(rc.seed) + "\n\n";
    }
    for (const char* name : {"metrics.csv", "sweep.csv", "stability.csv", "zeropad.csv", "histogram.csv"}) {
      if (!fs::exists(p / name)) continue;
      const auto bytes = read_file_bytes(p / name);
      const std::string text(bytes.begin(), bytes.end());
      md += "`" + std::string(name) + "`\n\n```\n" + text + "```\n\n";
      if (std::string(name) == "metrics.csv") {
        std::istringstream lines(text);
        std::string line;
        std::getline(lines, line);
        while (std::getline(lines, line))
          if (!line.empty()) csv += p.filename().string() + "," + line + "\n";
      }
    }
    dir.record_input("run", p, fs::exists(p / "metrics.csv") ? file_hash(p / "metrics.csv") : 0);
  }
  write_text(dir / "report.md", md);
  write_text(dir / "summary.csv", csv);
  dir.commit();
}

}  // namespace

int run(int argc, char** argv) {
  Context ctx;
  Options& o = ctx.opt;
  CLI::App app{"emap: self-interpretable classifiers via equivalency maps"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--config", o.config, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed; overrides [experiment] seed");
  app.add_option("--out", o.out, "output directory (written atomically)");
  app.add_option("--threads", o.threads, "worker threads for data generation")->check(CLI::Range(1, 256));

  std::function<void(Context&)> action;
  auto command = [&](CLI::App* parent, const std::string& name, const std::string& help, void (*fn)(Context&)) {
    CLI::App* sub = parent->add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&action, fn] { action = fn; });
    return sub;
  };
  auto need = [&](CLI::App* sub, const std::string& flag, std::string& target, const std::string& help) {
    sub->add_option(flag, target, help)->required()->check(CLI::ExistingPath);
  };
  auto split_opt = [&](CLI::App* sub) {
    sub->add_option("--split", o.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  };

  command(&app, "gen-data", "synthesize the tumor dataset", gen_data);
  auto* tb = command(&app, "train-blackbox", "train the black-box classifier", train_blackbox_cmd);
  need(tb, "--data", o.data, "dataset directory");
  auto* di = command(&app, "distill", "distill an interpretable decoder onto a black-box", distill_cmd);
  need(di, "--data", o.data, "dataset directory");
  need(di, "--blackbox", o.blackbox, "black-box checkpoint");
  auto* dt = command(&app, "direct-train", "train the interpretable model end to end", direct_train_cmd);
  need(dt, "--data", o.data, "dataset directory");
  auto* ev = command(&app, "eval", "evaluate checkpoints on a split", eval_cmd);
  need(ev, "--data", o.data, "dataset directory");
  need(ev, "--blackbox", o.blackbox, "black-box checkpoint");
  ev->add_option("--interpretable", o.interpretable, "interpretable checkpoint")->check(CLI::ExistingFile);
  split_opt(ev);
  auto* ex = command(&app, "emap-export", "export E-maps of the first --count images", emap_export_cmd);
  need(ex, "--data", o.data, "dataset directory");
  need(ex, "--interpretable", o.interpretable, "interpretable checkpoint");
  ex->add_option("--count", o.count, "number of images");
  split_opt(ex);

  auto* exp = app.add_subcommand("experiment", "run one study");
  exp->require_subcommand(1);
  exp->fallthrough();
  auto* st = command(exp, "stability", "distill once per initialization scheme", stability_cmd);
  need(st, "--data", o.data, "dataset directory");
  need(st, "--blackbox", o.blackbox, "black-box checkpoint");
  st->add_option("--count", o.count, "test images exported per arm");
  auto* zp = command(exp, "zeropad", "zero-padding control", zeropad_cmd);
  need(zp, "--data", o.data, "dataset directory");
  need(zp, "--blackbox", o.blackbox, "black-box checkpoint");
  auto* se = command(exp, "sweep-encoder", "vary black-box depth", sweep_encoder_cmd);
  need(se, "--data", o.data, "dataset directory");
  auto* sd = command(exp, "sweep-decoder", "vary decoder depth on a fixed black-box", sweep_decoder_cmd);
  need(sd, "--data", o.data, "dataset directory");
  need(sd, "--blackbox", o.blackbox, "black-box checkpoint");
  auto* ov = command(exp, "overlap", "top-k mask overlap of E-maps, saliency and IG", overlap_cmd);
  need(ov, "--data", o.data, "dataset directory");
  need(ov, "--blackbox", o.blackbox, "black-box checkpoint");
  need(ov, "--interpretable", o.interpretable, "interpretable checkpoint");
  split_opt(ov);
  auto* hi = command(exp, "histogram", "positive E-map pixel histogram per class", histogram_cmd);
  need(hi, "--data", o.data, "dataset directory");
  need(hi, "--interpretable", o.interpretable, "interpretable checkpoint");
  split_opt(hi);
  auto* fp = command(exp, "fpfn", "export example E-maps per outcome", fpfn_cmd);
  need(fp, "--data", o.data, "dataset directory");
  need(fp, "--interpretable", o.interpretable, "interpretable checkpoint");
  split_opt(fp);

  auto* rp = command(&app, "report", "summarize run directories", report_cmd);
  rp->add_option("runs", o.inputs, "run directories")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    ctx.cfg = resolve_config(o);
    if (o.out.empty()) throw ConfigFailure("--out is required");
  } catch (const std::exception& e) {
    std::cerr << "emap: config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    action(ctx);
  } catch (const std::exception& e) {
    std::cerr << "emap: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}

}  // namespace emap::cli

int main(int argc, char** argv) { return emap::cli::run(argc, argv); }

#include "emap/io/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "emap/util/rng.hpp"

namespace emap {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& text, const std::string& expected) {
  throw ArgumentError(key + ": expected " + expected + ", got '" + text + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    bad(key, text, std::is_floating_point_v<T> ? "a number" : "a non-negative integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string t = trim(raw);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  bad(key, t, "true or false");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& raw, const std::function<T(const std::string&)>& item) {
  std::vector<T> out;
  std::stringstream ss(raw);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (trim(part).empty()) bad(key, raw, "a comma separated list");
    out.push_back(item(trim(part)));
  }
  if (out.empty()) bad(key, raw, "a non-empty comma separated list");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

template <typename E, typename P>
E parse_enum(const std::string& key, const std::string& raw, P parser) {
  try {
    return parser(trim(raw));
  } catch (const ArgumentError& e) {
    throw ArgumentError(key + ": " + e.what());
  }
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string& name, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define EMAP_SIZE(sec, k, member)                                                                                   \
  Field {                                                                                                           \
    sec, k, [](RunConfig& c, const std::string& n, const std::string& v) { c.member = parse_number<std::size_t>(n, v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                                                            \
  }
#define EMAP_REAL(sec, k, member)                                                                                 \
  Field {                                                                                                         \
    sec, k, [](RunConfig& c, const std::string& n, const std::string& v) { c.member = parse_number<double>(n, v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                                                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      EMAP_SIZE("data", "image_size", data.image_size),
      EMAP_SIZE("data", "train_per_class", data.train_per_class),
      EMAP_SIZE("data", "val_per_class", data.val_per_class),
      EMAP_SIZE("data", "test_per_class", data.test_per_class),
      EMAP_REAL("data", "mean_clusters", data.mean_clusters),
      EMAP_REAL("data", "mean_blobs_per_cluster", data.mean_blobs_per_cluster),
      EMAP_REAL("data", "cluster_spread", data.cluster_spread),
      EMAP_REAL("data", "blob_width", data.blob_width),
      EMAP_REAL("data", "blob_amplitude", data.blob_amplitude),
      EMAP_REAL("data", "tumor_amplitude", data.tumor_amplitude),
      EMAP_REAL("data", "tumor_width", data.tumor_width),
      EMAP_REAL("data", "mask_radius_factor", data.mask_radius_factor),
      EMAP_REAL("data", "support_radius_factor", data.support_radius_factor),
      {"data", "variant",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.data.variant = parse_enum<Variant>(n, v, parse_variant);
       },
       [](const RunConfig& c) { return to_string(c.data.variant); }},

      EMAP_SIZE("blackbox", "conv_layers", blackbox.conv_layers),
      EMAP_SIZE("blackbox", "filters", blackbox.filters),
      EMAP_SIZE("blackbox", "kernel", blackbox.kernel),
      {"blackbox", "init",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.blackbox_init.kind = parse_enum<InitKind>(n, v, parse_init_kind);
       },
       [](const RunConfig& c) { return to_string(c.blackbox_init.kind); }},
      EMAP_REAL("blackbox", "normal_std", blackbox_init.normal_std),
      EMAP_REAL("blackbox", "uniform_limit", blackbox_init.uniform_limit),

      EMAP_SIZE("decoder", "tconv_filters", decoder.tconv_filters),
      EMAP_SIZE("decoder", "conv_layers", decoder.conv_layers),
      EMAP_SIZE("decoder", "filters", decoder.filters),
      EMAP_SIZE("decoder", "kernel", decoder.kernel),
      {"decoder", "penultimate",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.decoder.penultimate = parse_enum<Activation>(n, v, parse_activation);
       },
       [](const RunConfig& c) { return to_string(c.decoder.penultimate); }},
      {"decoder", "init",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.decoder_init.kind = parse_enum<InitKind>(n, v, parse_init_kind);
       },
       [](const RunConfig& c) { return to_string(c.decoder_init.kind); }},
      EMAP_REAL("decoder", "normal_std", decoder_init.normal_std),
      EMAP_REAL("decoder", "uniform_limit", decoder_init.uniform_limit),

      EMAP_REAL("train", "blackbox_lr", blackbox_lr),
      EMAP_REAL("train", "distill_lr", distill_lr),
      EMAP_REAL("train", "direct_lr", direct_lr),
      EMAP_SIZE("train", "patience", patience),
      EMAP_SIZE("train", "max_epochs", max_epochs),
      EMAP_SIZE("train", "distill_max_epochs", distill_max_epochs),
      EMAP_SIZE("train", "batch_size", batch_size),
      {"train", "restore_best",
       [](RunConfig& c, const std::string& n, const std::string& v) { c.restore_best = parse_bool(n, v); },
       [](const RunConfig& c) { return fmt_bool(c.restore_best); }},

      EMAP_REAL("eval", "top_fraction", top_fraction),
      EMAP_SIZE("eval", "ig_steps", ig_steps),
      EMAP_SIZE("eval", "batch_size", eval_batch_size),
      EMAP_SIZE("eval", "fpfn_per_category", fpfn_per_category),
      EMAP_SIZE("eval", "histogram_bins", histogram_bins),

      {"experiment", "seed",
       [](RunConfig& c, const std::string& n, const std::string& v) { c.seed = parse_number<std::uint64_t>(n, v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"experiment", "stability_schemes",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.stability_schemes = parse_list<InitKind>(
             n, v, [&n](const std::string& s) { return parse_enum<InitKind>(n, s, parse_init_kind); });
       },
       [](const RunConfig& c) {
         return join(c.stability_schemes, [](InitKind k) { return to_string(k); });
       }},
      {"experiment", "encoder_depths",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.encoder_depths =
             parse_list<std::size_t>(n, v, [&n](const std::string& s) { return parse_number<std::size_t>(n, s); });
       },
       [](const RunConfig& c) { return join(c.encoder_depths, [](std::size_t d) { return fmt(d); }); }},
      {"experiment", "decoder_depths",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.decoder_depths =
             parse_list<std::size_t>(n, v, [&n](const std::string& s) { return parse_number<std::size_t>(n, s); });
       },
       [](const RunConfig& c) { return join(c.decoder_depths, [](std::size_t d) { return fmt(d); }); }},
      {"experiment", "noise_sigmas",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.noise_sigmas =
             parse_list<double>(n, v, [&n](const std::string& s) { return parse_number<double>(n, s); });
       },
       [](const RunConfig& c) { return join(c.noise_sigmas, [](double d) { return fmt(d); }); }},
      {"experiment", "zeropad_fill",
       [](RunConfig& c, const std::string& n, const std::string& v) {
         c.zeropad_fill = parse_enum<FillRule>(n, v, parse_fill_rule);
       },
       [](const RunConfig& c) { return to_string(c.zeropad_fill); }},
      EMAP_REAL("experiment", "zeropad_stage1_lr", zeropad_stage1_lr),
      EMAP_REAL("experiment", "zeropad_stage1_threshold", zeropad_stage1_threshold),
  };
  return f;
}

#undef EMAP_SIZE
#undef EMAP_REAL

void require(bool ok, const std::string& what) {
  if (!ok) throw ArgumentError(what);
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  data.seed = derive_seed(s, "data");
  blackbox_init.seed = derive_seed(s, "blackbox/init");
  decoder_init.seed = derive_seed(s, "decoder/init");
}

void RunConfig::validate() const {
  data.validate(1);
  blackbox.validate();
  decoder.validate();
  for (const auto& [name, lr] : {std::pair{"train.blackbox_lr", blackbox_lr}, std::pair{"train.distill_lr", distill_lr},
                                 std::pair{"train.direct_lr", direct_lr},
                                 std::pair{"experiment.zeropad_stage1_lr", zeropad_stage1_lr}})
    require(lr >= 0.0 && std::isfinite(lr), std::string(name) + " must be a finite non-negative number");
  require(patience >= 1, "train.patience must be >= 1");
  require(max_epochs >= 1, "train.max_epochs must be >= 1");
  require(distill_max_epochs >= 1, "train.distill_max_epochs must be >= 1");
  require(batch_size >= 1, "train.batch_size must be >= 1");
  require(top_fraction > 0.0 && top_fraction <= 1.0, "eval.top_fraction must be in (0, 1]");
  require(ig_steps >= 1, "eval.ig_steps must be >= 1");
  require(eval_batch_size >= 1, "eval.batch_size must be >= 1");
  require(histogram_bins >= 1, "eval.histogram_bins must be >= 1");
  require(blackbox_init.normal_std > 0.0 && decoder_init.normal_std > 0.0, "normal_std must be positive");
  require(blackbox_init.uniform_limit > 0.0 && decoder_init.uniform_limit > 0.0, "uniform_limit must be positive");
  for (const std::size_t d : encoder_depths) require(d >= 1, "experiment.encoder_depths entries must be >= 1");
  for (const double s : noise_sigmas)
    require(s >= 0.0 && std::isfinite(s), "experiment.noise_sigmas entries must be finite and >= 0");
  require(zeropad_stage1_threshold > 0.0, "experiment.zeropad_stage1_threshold must be positive");
}

TrainConfig RunConfig::blackbox_train() const {
  return {blackbox_lr, patience, max_epochs, batch_size, LossKind::bce, derive_seed(seed, "blackbox/shuffle"),
          restore_best};
}

TrainConfig RunConfig::distill_train() const {
  return {distill_lr, patience, distill_max_epochs, batch_size, LossKind::mse, derive_seed(seed, "distill/shuffle"),
          restore_best};
}

TrainConfig RunConfig::direct_train() const {
  return {direct_lr, patience, max_epochs, batch_size, LossKind::bce, derive_seed(seed, "direct/shuffle"),
          restore_best};
}

DistillSetup RunConfig::distill_setup() const { return {decoder, decoder_init, distill_train()}; }

BlackBoxSetup RunConfig::blackbox_setup() const {
  BlackBoxSpec spec = blackbox;
  spec.image_size = data.image_size;
  return {spec, blackbox_init, blackbox_train()};
}

ZeroPadConfig RunConfig::zeropad() const {
  ZeroPadConfig z;
  z.noise_sigmas = noise_sigmas;
  z.fill = zeropad_fill;
  z.stage1 = {zeropad_stage1_lr, patience, distill_max_epochs, batch_size, LossKind::mse,
              derive_seed(seed, "zeropad/shuffle"), restore_best};
  z.stage1_threshold = zeropad_stage1_threshold;
  z.top_fraction = top_fraction;
  z.noise_seed = derive_seed(seed, "zeropad/noise");
  return z;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ArgumentError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty())
      throw ArgumentError(source + ": key '" + section + "' outside any section");
    bool known = false;
    for (const auto& f : fields()) known |= section == f.section;
    if (!known) throw ArgumentError(source + ": unknown section [" + section + "]");
    for (const auto& [key, value] : entries) {
      const std::string name = section + "." + key;
      const Field* field = nullptr;
      for (const auto& f : fields())
        if (section == f.section && key == f.key) field = &f;
      if (!field) throw ArgumentError(source + ": unknown key '" + name + "'");
      field->set(cfg, name, value.data());
    }
  }
  cfg.apply_seed(cfg.seed);
  cfg.blackbox.image_size = cfg.data.image_size;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

std::string to_ini(const RunConfig& cfg) {
  std::string out, section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      section = f.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace emap

#include "emap/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "emap/data/image_io.hpp"
#include "emap/tensor/f32t.hpp"
#include "emap/util/log.hpp"
#include "emap/util/rng.hpp"

namespace emap {
namespace {

constexpr std::array<Split, 3> kSplits{Split::train, Split::val, Split::test};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void min_max_normalize(std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mn = *lo, mx = *hi;
  if (!(mx > mn)) {
    std::fill(v.begin(), v.end(), 0.5);
    return;
  }
  for (auto& x : v) x = (x - mn) / (mx - mn);
}

DatasetConfig parse_canonical(const std::string& text, const std::filesystem::path& source) {
  DatasetConfig c;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(source.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError(source.string() + ": missing key '" + key + "'");
    return it->second;
  };
  c.image_size = std::stoul(get("image_size"));
  c.train_per_class = std::stoul(get("train_per_class"));
  c.val_per_class = std::stoul(get("val_per_class"));
  c.test_per_class = std::stoul(get("test_per_class"));
  c.mean_clusters = std::stod(get("mean_clusters"));
  c.mean_blobs_per_cluster = std::stod(get("mean_blobs_per_cluster"));
  c.cluster_spread = std::stod(get("cluster_spread"));
  c.blob_width = std::stod(get("blob_width"));
  c.blob_amplitude = std::stod(get("blob_amplitude"));
  c.tumor_amplitude = std::stod(get("tumor_amplitude"));
  c.tumor_width = std::stod(get("tumor_width"));
  c.mask_radius_factor = std::stod(get("mask_radius_factor"));
  c.support_radius_factor = std::stod(get("support_radius_factor"));
  c.variant = parse_variant(get("variant"));
  c.seed = std::stoull(get("seed"));
  return c;
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::single_tumor ? "single_tumor" : "two_tumor"; }

Variant parse_variant(const std::string& text) {
  if (text == "single_tumor") return Variant::single_tumor;
  if (text == "two_tumor") return Variant::two_tumor;
  throw ArgumentError("unknown variant '" + text + "' (expected single_tumor or two_tumor)");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::size_t DatasetConfig::per_class(Split s) const {
  switch (s) {
    case Split::train: return train_per_class;
    case Split::val: return val_per_class;
    case Split::test: return test_per_class;
  }
  return 0;
}

void DatasetConfig::validate(std::size_t pool_layers) const {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw ArgumentError("data." + field + ": " + why);
  };
  if (image_size < 8 || (image_size & (image_size - 1)) != 0) fail("image_size", "must be a power of two >= 8");
  if (image_size % (std::size_t{1} << pool_layers) != 0) fail("image_size", "must be divisible by 2^pool_layers");
  if (train_per_class == 0) fail("train_per_class", "must be > 0");
  if (val_per_class == 0) fail("val_per_class", "must be > 0");
  if (test_per_class == 0) fail("test_per_class", "must be > 0");
  if (!(mean_clusters >= 0)) fail("mean_clusters", "must be >= 0");
  if (!(mean_blobs_per_cluster >= 0)) fail("mean_blobs_per_cluster", "must be >= 0");
  if (!(cluster_spread >= 0)) fail("cluster_spread", "must be >= 0");
  if (!(blob_width > 0)) fail("blob_width", "must be > 0");
  if (!std::isfinite(blob_amplitude)) fail("blob_amplitude", "must be finite");
  if (!(tumor_amplitude >= 0) || !std::isfinite(tumor_amplitude)) fail("tumor_amplitude", "must be finite and >= 0");
  if (!(tumor_width > 0)) fail("tumor_width", "must be > 0");
  if (!(mask_radius_factor > 0)) fail("mask_radius_factor", "must be > 0");
  if (!(support_radius_factor >= mask_radius_factor)) fail("support_radius_factor", "must be >= mask_radius_factor");
}

std::string DatasetConfig::canonical() const {
  std::ostringstream os;
  os << "image_size=" << image_size << "\n"
     << "train_per_class=" << train_per_class << "\n"
     << "val_per_class=" << val_per_class << "\n"
     << "test_per_class=" << test_per_class << "\n"
     << "mean_clusters=" << fmt(mean_clusters) << "\n"
     << "mean_blobs_per_cluster=" << fmt(mean_blobs_per_cluster) << "\n"
     << "cluster_spread=" << fmt(cluster_spread) << "\n"
     << "blob_width=" << fmt(blob_width) << "\n"
     << "blob_amplitude=" << fmt(blob_amplitude) << "\n"
     << "tumor_amplitude=" << fmt(tumor_amplitude) << "\n"
     << "tumor_width=" << fmt(tumor_width) << "\n"
     << "mask_radius_factor=" << fmt(mask_radius_factor) << "\n"
     << "support_radius_factor=" << fmt(support_radius_factor) << "\n"
     << "variant=" << to_string(variant) << "\n"
     << "seed=" << seed << "\n";
  return os.str();
}

std::uint64_t config_hash(const DatasetConfig& cfg) {
  const std::string s = cfg.canonical();
  return fnv1a(0xcbf29ce484222325ULL, s.data(), s.size());
}

std::array<std::size_t, 2> grid_position(std::size_t image_size, int position_index) {
  if (position_index < 0 || position_index > 8)
    throw ArgumentError("tumor position index " + std::to_string(position_index) + " outside 0..8");
  const std::size_t i = static_cast<std::size_t>(position_index) / 3 + 1;
  const std::size_t j = static_cast<std::size_t>(position_index) % 3 + 1;
  return {i * image_size / 4, j * image_size / 4};
}

SplitData& Dataset::split(Split s) {
  return s == Split::train ? train : s == Split::val ? val : test;
}
const SplitData& Dataset::split(Split s) const {
  return s == Split::train ? train : s == Split::val ? val : test;
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Split s : kSplits) {
    const SplitData& d = split(s);
    h = fnv1a(h, d.images.raw(), d.images.size() * sizeof(float));
    h = fnv1a(h, d.masks.raw(), d.masks.size() * sizeof(float));
    h = fnv1a(h, d.labels.data(), d.labels.size() * sizeof(int));
  }
  return h;
}

Tensor gen_background(const DatasetConfig& cfg, std::uint64_t image_seed) {
  const std::size_t S = cfg.image_size;
  Rng rng(derive_seed(image_seed, "background"));
  std::vector<double> img(S * S, 0.0);
  std::vector<double> gx(S), gy(S);
  const double inv = 1.0 / (2.0 * cfg.blob_width * cfg.blob_width);
  const auto clusters = rng.poisson(cfg.mean_clusters);
  for (std::uint64_t k = 0; k < clusters; ++k) {
    const double cy = rng.uniform(0.0, static_cast<double>(S));
    const double cx = rng.uniform(0.0, static_cast<double>(S));
    const auto blobs = rng.poisson(cfg.mean_blobs_per_cluster);
    for (std::uint64_t b = 0; b < blobs; ++b) {
      const double by = cy + rng.normal(0.0, cfg.cluster_spread);
      const double bx = cx + rng.normal(0.0, cfg.cluster_spread);
      // separable Gaussian evaluated over the whole image
      for (std::size_t i = 0; i < S; ++i) {
        const double dy = static_cast<double>(i) - by;
        const double dx = static_cast<double>(i) - bx;
        gy[i] = std::exp(-dy * dy * inv);
        gx[i] = std::exp(-dx * dx * inv);
      }
      for (std::size_t i = 0; i < S; ++i) {
        const double a = cfg.blob_amplitude * gy[i];
        double* row = img.data() + i * S;
        for (std::size_t j = 0; j < S; ++j) row[j] += a * gx[j];
      }
    }
  }
  min_max_normalize(img);
  Tensor out({1, 1, S, S});
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<float>(img[i]);
  return out;
}

TumorInsertion insert_tumor(const Tensor& background, int position_index, double amplitude, double width,
                            double mask_radius_factor, double support_radius_factor) {
  if (background.rank() != 4 || background.dim(0) != 1 || background.dim(1) != 1 ||
      background.dim(2) != background.dim(3))
    throw ShapeError("insert_tumor expects a (1,1,S,S) image, got " + to_string(background.shape()));
  const std::size_t S = background.dim(2);
  const auto [cy, cx] = grid_position(S, position_index);
  TumorInsertion r{background, Tensor::zeros(background.shape())};
  const double mask_r2 = std::pow(mask_radius_factor * width, 2);
  const double support_r2 = std::pow(support_radius_factor * width, 2);
  const double inv = 1.0 / (2.0 * width * width);
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t j = 0; j < S; ++j) {
      const double dy = static_cast<double>(i) - static_cast<double>(cy);
      const double dx = static_cast<double>(j) - static_cast<double>(cx);
      const double r2 = dy * dy + dx * dx;
      const std::size_t k = i * S + j;
      if (r2 <= mask_r2) r.mask[k] = 1.0f;
      if (r2 > support_r2) continue;
      const double v = static_cast<double>(r.image[k]) + amplitude * std::exp(-r2 * inv);
      r.image[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return r;
}

void gen_item(const DatasetConfig& cfg, Split split, std::size_t index, SplitData& out) {
  const std::size_t S = cfg.image_size;
  const std::size_t plane = S * S;
  const std::uint64_t seed = derive_seed(cfg.seed, "image/" + to_string(split), index);
  const int label = static_cast<int>(index % 2);
  Tensor image = gen_background(cfg, seed);
  Tensor mask = Tensor::zeros({1, 1, S, S});
  int position = kNoTumor;
  if (label == 1) {
    Rng rng(derive_seed(seed, "tumor"));
    position = static_cast<int>(rng.below(9));
    if (cfg.variant == Variant::two_tumor) {
      auto centre = insert_tumor(image, 4, cfg.tumor_amplitude, cfg.tumor_width, cfg.mask_radius_factor,
                                 cfg.support_radius_factor);
      image = std::move(centre.image);
      mask = std::move(centre.mask);
    }
    auto ins = insert_tumor(image, position, cfg.tumor_amplitude, cfg.tumor_width, cfg.mask_radius_factor,
                            cfg.support_radius_factor);
    image = std::move(ins.image);
    for (std::size_t k = 0; k < plane; ++k) mask[k] = std::max(mask[k], ins.mask[k]);
  }
  std::copy(image.raw(), image.raw() + plane, out.images.raw() + index * plane);
  std::copy(mask.raw(), mask.raw() + plane, out.masks.raw() + index * plane);
  out.labels[index] = label;
  out.positions[index] = position;
  out.seeds[index] = seed;
}

Dataset gen_dataset(const DatasetConfig& cfg, std::size_t threads) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  const std::size_t S = cfg.image_size;
  for (const Split s : kSplits) {
    SplitData& d = ds.split(s);
    const std::size_t n = 2 * cfg.per_class(s);
    d.images = Tensor({n, 1, S, S});
    d.masks = Tensor({n, 1, S, S});
    d.labels.assign(n, 0);
    d.positions.assign(n, kNoTumor);
    d.seeds.assign(n, 0);
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
      for (std::size_t i = 0; i < n; ++i) gen_item(cfg, s, i, d);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < n; i += workers) gen_item(cfg, s, i, d);
        });
      for (auto& t : pool) t.join();
    }
  }
  return ds;
}

SplitData load_image_dir(const std::filesystem::path& dir, std::size_t expected_size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<std::pair<fs::path, int>> files;
  for (const int label : {0, 1}) {
    const fs::path sub = dir / std::to_string(label);
    if (!fs::is_directory(sub)) continue;
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(sub))
      if (e.is_regular_file()) found.push_back(e.path());
    std::sort(found.begin(), found.end());
    for (auto& p : found) files.emplace_back(std::move(p), label);
  }
  SplitData d;
  if (files.empty()) {
    log::warn("load_image_dir.empty", "path=" + dir.string());
    return d;
  }
  const std::size_t plane = expected_size * expected_size;
  d.images = Tensor({files.size(), 1, expected_size, expected_size});
  for (std::size_t i = 0; i < files.size(); ++i) {
    const Tensor img = read_gray_image(files[i].first);
    if (img.dim(2) != expected_size || img.dim(3) != expected_size)
      throw IoError(files[i].first.string() + ": image is " + std::to_string(img.dim(3)) + "x" +
                    std::to_string(img.dim(2)) + ", expected " + std::to_string(expected_size) + "x" +
                    std::to_string(expected_size));
    std::copy(img.raw(), img.raw() + plane, d.images.raw() + i * plane);
    d.labels.push_back(files[i].second);
    d.positions.push_back(kNoTumor);
    d.seeds.push_back(0);
    d.sources.push_back(files[i].first.string());
  }
  return d;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << "index,split,label,position_index,seed\n";
  for (const Split s : kSplits) {
    const SplitData& d = ds.split(s);
    write_f32t(dir / (to_string(s) + "_images.f32t"), d.images);
    write_f32t(dir / (to_string(s) + "_masks.f32t"), d.masks);
    for (std::size_t i = 0; i < d.size(); ++i)
      manifest << i << "," << to_string(s) << "," << d.labels[i] << "," << d.positions[i] << "," << d.seeds[i]
               << "\n";
  }
  const std::string m = manifest.str();
  write_file_bytes(dir / "manifest.csv", {m.begin(), m.end()});
  const std::string c = "[data]\n" + ds.config.canonical();
  write_file_bytes(dir / "dataset.ini", {c.begin(), c.end()});
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  const auto cfg_bytes = read_file_bytes(dir / "dataset.ini");
  ds.config = parse_canonical(std::string(cfg_bytes.begin(), cfg_bytes.end()), dir / "dataset.ini");
  for (const Split s : kSplits) {
    SplitData& d = ds.split(s);
    d.images = read_f32t(dir / (to_string(s) + "_images.f32t"));
    d.masks = read_f32t(dir / (to_string(s) + "_masks.f32t"));
  }
  const auto mbytes = read_file_bytes(dir / "manifest.csv");
  std::istringstream in(std::string(mbytes.begin(), mbytes.end()));
  std::string line;
  std::getline(in, line);
  if (line != "index,split,label,position_index,seed") throw IoError((dir / "manifest.csv").string() + ": bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, split, label, pos, seed;
    std::getline(row, idx, ',');
    std::getline(row, split, ',');
    std::getline(row, label, ',');
    std::getline(row, pos, ',');
    std::getline(row, seed, ',');
    if (split != "train" && split != "val" && split != "test")
      throw IoError("manifest: unknown split '" + split + "'");
    SplitData& d = split == "train" ? ds.train : split == "val" ? ds.val : ds.test;
    if (std::stoul(idx) != d.labels.size()) throw IoError("manifest: rows out of order at '" + line + "'");
    d.labels.push_back(std::stoi(label));
    d.positions.push_back(std::stoi(pos));
    d.seeds.push_back(std::stoull(seed));
  }
  for (const Split s : kSplits) {
    const SplitData& d = ds.split(s);
    if (d.images.rank() != 4 || d.images.dim(0) != d.size() || d.masks.shape() != d.images.shape())
      throw IoError(dir.string() + ": " + to_string(s) + " tensors disagree with the manifest");
  }
  return ds;
}

void export_split_pgm(const SplitData& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "0");
  std::filesystem::create_directories(dir / "1");
  const std::size_t S = split.images.dim(2);
  for (std::size_t i = 0; i < split.size(); ++i) {
    std::ostringstream name;
    name << std::setw(6) << std::setfill('0') << i << ".pgm";
    write_pgm(dir / std::to_string(split.labels[i]) / name.str(), split.images.raw() + i * S * S, S, S, 255);
  }
}

}  // namespace emap

#include "emap/io/checkpoint.hpp"

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include "emap/tensor/f32t.hpp"

namespace emap {
namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

json encoder_json(const BlackBoxSpec& e) {
  return {{"conv_layers", e.conv_layers}, {"filters", e.filters}, {"kernel", e.kernel},
          {"in_channels", e.in_channels}, {"image_size", e.image_size}};
}

json decoder_json(const DecoderSpec& d) {
  return {{"tconv_filters", d.tconv_filters}, {"conv_layers", d.conv_layers}, {"filters", d.filters},
          {"kernel", d.kernel}, {"penultimate", to_string(d.penultimate)}};
}

json train_json(const TrainConfig& t) {
  return {{"lr", t.lr}, {"patience", t.patience}, {"max_epochs", t.max_epochs}, {"batch_size", t.batch_size},
          {"loss", to_string(t.loss)}, {"seed", hex64(t.seed)}, {"restore_best", t.restore_best}};
}

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& why) const {
    throw IoError("checkpoint " + source_ + ": " + field + ": " + why);
  }

  const json& get(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.is_object() || !obj.contains(key)) fail(path + key, "missing");
    return obj.at(key);
  }

  template <typename T>
  T value(const json& obj, const std::string& key, const std::string& path) const {
    const json& v = get(obj, key, path);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      fail(path + key, "has the wrong type");
    }
  }

 private:
  std::string source_;
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
  boost::crc_32_type crc;
  crc.process_bytes(data, n);
  return crc.checksum();
}

std::vector<std::uint8_t> encode_checkpoint(const ModelGraph& model, const CheckpointMeta& meta) {
  json manifest = json::array();
  std::size_t offset = 0;
  for (const auto& p : model.params) {
    const std::size_t bytes = p.value.size() * 4;
    manifest.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}, {"bytes", bytes},
                        {"trainable", p.trainable}});
    offset += bytes;
  }
  json seeds = json::object();
  for (const auto& [k, v] : meta.seeds) seeds[k] = hex64(v);

  json header{{"format", "emap-checkpoint"},
              {"kind", to_string(model.kind)},
              {"encoder", encoder_json(model.encoder)},
              {"init",
               {{"kind", to_string(model.init.kind)},
                {"seed", hex64(model.init.seed)},
                {"normal_std", model.init.normal_std},
                {"uniform_limit", model.init.uniform_limit}}},
              {"parameters", manifest},
              {"train", meta.train ? train_json(*meta.train) : json(nullptr)},
              {"dataset_config_hash", hex64(meta.dataset_hash)},
              {"seeds", seeds},
              {"epoch", meta.epoch},
              {"adam_steps", model.params.adam_steps()},
              // wall-clock times would break byte-identical re-runs; training progress is in epoch/adam_steps
              {"timestamps", nullptr}};
  if (model.kind == ModelKind::interpretable) header["decoder"] = decoder_json(model.decoder);

  const std::string text = header.dump();
  std::vector<std::uint8_t> out{'E', 'M', 'A', 'P', kCheckpointVersion};
  put_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset + 4);
  for (const auto& p : model.params)
    for (const float v : p.value.data()) put_f32_le(out, v);
  put_u32_le(out, crc32(out.data(), out.size()));
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  const Reader r(source);
  if (bytes.size() < 4 || std::string(bytes.begin(), bytes.begin() + 4) != "EMAP") r.fail("magic", "not an EMAP file");
  if (bytes.size() < 13) r.fail("crc", "file truncated");
  const std::size_t body = bytes.size() - 4;
  if (crc32(bytes.data(), body) != get_u32_le(bytes.data() + body)) r.fail("crc", "checksum mismatch");
  if (bytes[4] != kCheckpointVersion)
    r.fail("version", "unsupported version " + std::to_string(bytes[4]) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::size_t header_len = get_u32_le(bytes.data() + 5);
  if (9 + header_len > body) r.fail("header_length", "exceeds the file size");

  json h;
  try {
    h = json::parse(bytes.begin() + 9, bytes.begin() + 9 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    r.fail("header", std::string("invalid JSON: ") + e.what());
  }

  Checkpoint ck;
  ModelGraph& m = ck.model;
  try {
    m.kind = parse_model_kind(r.value<std::string>(h, "kind", ""));
  } catch (const ArgumentError& e) {
    r.fail("kind", e.what());
  }
  const json& enc = r.get(h, "encoder", "");
  m.encoder.conv_layers = r.value<std::size_t>(enc, "conv_layers", "encoder.");
  m.encoder.filters = r.value<std::size_t>(enc, "filters", "encoder.");
  m.encoder.kernel = r.value<std::size_t>(enc, "kernel", "encoder.");
  m.encoder.in_channels = r.value<std::size_t>(enc, "in_channels", "encoder.");
  m.encoder.image_size = r.value<std::size_t>(enc, "image_size", "encoder.");
  if (m.kind == ModelKind::interpretable) {
    const json& dec = r.get(h, "decoder", "");
    m.decoder.tconv_filters = r.value<std::size_t>(dec, "tconv_filters", "decoder.");
    m.decoder.conv_layers = r.value<std::size_t>(dec, "conv_layers", "decoder.");
    m.decoder.filters = r.value<std::size_t>(dec, "filters", "decoder.");
    m.decoder.kernel = r.value<std::size_t>(dec, "kernel", "decoder.");
    try {
      m.decoder.penultimate = parse_activation(r.value<std::string>(dec, "penultimate", "decoder."));
    } catch (const ArgumentError& e) {
      r.fail("decoder.penultimate", e.what());
    }
  }
  const json& init = r.get(h, "init", "");
  try {
    m.init.kind = parse_init_kind(r.value<std::string>(init, "kind", "init."));
  } catch (const ArgumentError& e) {
    r.fail("init.kind", e.what());
  }
  m.init.seed = parse_hex64(r.value<std::string>(init, "seed", "init."));
  m.init.normal_std = r.value<double>(init, "normal_std", "init.");
  m.init.uniform_limit = r.value<double>(init, "uniform_limit", "init.");

  const json& train = r.get(h, "train", "");
  if (!train.is_null()) {
    TrainConfig t;
    t.lr = r.value<double>(train, "lr", "train.");
    t.patience = r.value<std::size_t>(train, "patience", "train.");
    t.max_epochs = r.value<std::size_t>(train, "max_epochs", "train.");
    t.batch_size = r.value<std::size_t>(train, "batch_size", "train.");
    t.loss = parse_loss_kind(r.value<std::string>(train, "loss", "train."));
    t.seed = parse_hex64(r.value<std::string>(train, "seed", "train."));
    t.restore_best = r.value<bool>(train, "restore_best", "train.");
    ck.meta.train = t;
  }
  ck.meta.dataset_hash = parse_hex64(r.value<std::string>(h, "dataset_config_hash", ""));
  for (const auto& [k, v] : r.get(h, "seeds", "").items()) ck.meta.seeds[k] = parse_hex64(v.get<std::string>());
  ck.meta.epoch = r.value<std::size_t>(h, "epoch", "");

  const std::vector<LayerSpec> layers = m.layers();
  std::vector<std::pair<std::string, Shape>> expected;
  for (const auto& l : layers) {
    expected.emplace_back(l.name + ".weight", l.weight_shape);
    expected.emplace_back(l.name + ".bias", l.bias_shape);
  }
  const json& manifest = r.get(h, "parameters", "");
  if (!manifest.is_array() || manifest.size() != expected.size())
    r.fail("parameters", "expected " + std::to_string(expected.size()) + " entries for this architecture");
  const std::uint8_t* blob = bytes.data() + 9 + header_len;
  const std::size_t blob_len = body - 9 - header_len;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const std::string path = "parameters[" + std::to_string(i) + "].";
    const json& e = manifest[i];
    const auto name = r.value<std::string>(e, "name", path);
    if (name != expected[i].first) r.fail(path + "name", "'" + name + "' where '" + expected[i].first + "' belongs");
    const auto shape = r.value<Shape>(e, "shape", path);
    if (shape != expected[i].second) r.fail(path + "shape", to_string(shape) + " does not match the architecture");
    const auto off = r.value<std::size_t>(e, "offset", path);
    const auto len = r.value<std::size_t>(e, "bytes", path);
    if (off != offset || len != numel(shape) * 4) r.fail(path + "bytes", "offset or length disagrees with the shape");
    if (off + len > blob_len) r.fail(path + "bytes", "runs past the end of the weight blob");
    std::vector<float> values(numel(shape));
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = get_f32_le(blob + off + 4 * k);
    m.params.add(name, Tensor(shape, std::move(values)), r.value<bool>(e, "trainable", path));
    offset += len;
  }
  if (offset != blob_len) r.fail("parameters", "weight blob length " + std::to_string(blob_len) +
                                                   " disagrees with the manifest total " + std::to_string(offset));
  m.params.set_adam_steps(r.value<std::uint64_t>(h, "adam_steps", ""));
  return ck;
}

void save_checkpoint(const ModelGraph& model, const CheckpointMeta& meta, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

}  // namespace emap

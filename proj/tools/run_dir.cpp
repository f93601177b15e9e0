#include "run_dir.hpp"

#include <cstdio>

#include "emap/io/export.hpp"
#include "emap/util/log.hpp"

namespace emap::cli {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

RunDir::RunDir(fs::path out) : out_(std::move(out)) {
  if (out_.empty()) throw ArgumentError("--out is required");
  if (!out_.has_filename()) out_ = out_.parent_path();
  staging_ = out_;
  staging_ += ".partial";
  fs::remove_all(staging_);
  fs::create_directories(staging_);
}

void RunDir::echo_config(const RunConfig& cfg) {
  write_text(staging_ / "config.ini", to_ini(cfg));
  const TrainConfig bb = cfg.blackbox_train(), ds = cfg.distill_train(), dt = cfg.direct_train();
  std::string s = "name,seed\n";
  for (const auto& [name, v] : std::vector<std::pair<std::string, std::uint64_t>>{
           {"master", cfg.seed},
           {"data", cfg.data.seed},
           {"blackbox/init", cfg.blackbox_init.seed},
           {"decoder/init", cfg.decoder_init.seed},
           {"blackbox/shuffle", bb.seed},
           {"distill/shuffle", ds.seed},
           {"direct/shuffle", dt.seed},
           {"zeropad/noise", cfg.zeropad().noise_seed}})
    s += name + "," + std::to_string(v) + "\n";
  write_text(staging_ / "seeds.csv", s);
}

void RunDir::record_input(const std::string& kind, const fs::path& path, std::uint64_t hash) {
  inputs_.push_back(kind + "," + path.lexically_normal().string() + "," + hex64(hash));
}

void RunDir::commit() {
  std::string s = "kind,path,hash\n";
  for (const auto& row : inputs_) s += row + "\n";
  write_text(staging_ / "inputs.csv", s);
  fs::remove_all(out_);
  fs::rename(staging_, out_);
  log::info("wrote", "dir=" + out_.string());
}

}  // namespace emap::cli

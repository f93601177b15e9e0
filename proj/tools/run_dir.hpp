#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emap/io/config.hpp"

namespace emap::cli {

/// Output directory written under "<out>.partial" and renamed onto <out>
/// only by commit(). A failed run leaves the .partial directory behind.
class RunDir {
 public:
  explicit RunDir(std::filesystem::path out);

  const std::filesystem::path& path() const { return staging_; }
  std::filesystem::path operator/(const std::string& name) const { return staging_ / name; }

  /// config.ini (fully resolved) and seeds.txt.
  void echo_config(const RunConfig& cfg);
  /// One inputs.csv row per consumed artifact.
  void record_input(const std::string& kind, const std::filesystem::path& path, std::uint64_t hash);

  void commit();

 private:
  std::filesystem::path out_, staging_;
  std::vector<std::string> inputs_;
};

std::string hex64(std::uint64_t v);

}  // namespace emap::cli

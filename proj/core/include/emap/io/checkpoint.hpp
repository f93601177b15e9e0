#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emap/models/classifiers.hpp"
#include "emap/training/training.hpp"

namespace emap {

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Everything besides the weights that a checkpoint records.
struct CheckpointMeta {
  std::optional<TrainConfig> train;
  std::uint64_t dataset_hash = 0;  // config_hash of the training data
  std::map<std::string, std::uint64_t> seeds;
  std::size_t epoch = 0;  // best epoch restored, 0 when untrained
};

struct Checkpoint {
  ModelGraph model;
  CheckpointMeta meta;
};

/// "EMAP", version u8, u32 LE header length, JSON header, f32 LE blobs in
/// manifest order, CRC-32 of all preceding bytes (u32 LE).
std::vector<std::uint8_t> encode_checkpoint(const ModelGraph& model, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

void save_checkpoint(const ModelGraph& model, const CheckpointMeta& meta, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CRC-32 (IEEE) of a byte range.
std::uint32_t crc32(const std::uint8_t* data, std::size_t n);

}  // namespace emap

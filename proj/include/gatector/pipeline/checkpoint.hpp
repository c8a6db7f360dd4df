#pragma once

// Binary checkpoint container:
//   "GTCK" | u32 format_version | u64 header_bytes | JSON header | float32 blob
// The header lists every tensor as {name, group, shape, offset} into the blob.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "gatector/nn/adam.hpp"
#include "gatector/pipeline/config.hpp"

namespace gatector {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  nlohmann::json config;  // RunConfig snapshot
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> adam_m, adam_v;
  std::int64_t adam_steps = 0;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  nlohmann::json history = nlohmann::json::array();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Flat name -> tensor copy of a parameter store.
std::map<std::string, Tensor> snapshot_parameters(const nn::ParameterStore& store);
/// Copies tensors into a store; every store entry must be present with a matching shape.
void restore_parameters(nn::ParameterStore& store, const std::map<std::string, Tensor>& params);

}  // namespace gatector

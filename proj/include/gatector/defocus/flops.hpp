#pragma once

// Multiply-accumulate accounting for network stages. One number per stage:
// convolution C_in*C_out*k^2*H_out*W_out, transposed convolution
// C_in*C_out*k^2*H_in*W_in, interpolation (kernel support)*C*H_out*W_out,
// Defocus/Focus 0 (pure permutation).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gatector {

enum class StageKind { kConv, kDeconv, kInterpolation, kDefocus, kFocus, kLinear };

struct Stage {
  std::string name;
  StageKind kind = StageKind::kConv;
  int c_in = 0;
  int c_out = 0;
  int kernel = 1;
  int h_in = 0, w_in = 0;
  int h_out = 0, w_out = 0;
  int factor = 2;                 // interpolation / defocus ratio
  std::string mode = "bilinear";  // interpolation kernel: bilinear | nearest
};

struct StageCost {
  std::string name;
  StageKind kind;
  std::int64_t macs;
};

struct FlopReport {
  std::int64_t total_macs = 0;
  std::vector<StageCost> per_stage;
};

std::int64_t stage_macs(const Stage& stage);
FlopReport flop_count(std::span<const Stage> stages);

const char* to_string(StageKind kind);
StageKind stage_kind_from_string(const std::string& s);

/// Parses {"stages": [...]} (or a bare array). Conv stages may give h_out/w_out
/// directly or h_in/w_in plus "stride"/"pad".
std::vector<Stage> stages_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const FlopReport& report);

}  // namespace gatector

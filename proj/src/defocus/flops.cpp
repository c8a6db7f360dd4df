#include "gatector/defocus/flops.hpp"

#include "gatector/common/error.hpp"
#include "gatector/kernels/kernels.hpp"

namespace gatector {

namespace {

int interpolation_support(const std::string& mode) {
  if (mode == "bilinear") return 4;
  if (mode == "nearest") return 1;
  if (mode == "bicubic") return 16;
  fail(ErrorKind::kInvalidArgument, "unknown interpolation mode '" + mode + "'");
}

int get_int(const nlohmann::json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<int>();
}

}  // namespace

const char* to_string(StageKind kind) {
  switch (kind) {
    case StageKind::kConv: return "conv";
    case StageKind::kDeconv: return "deconv";
    case StageKind::kInterpolation: return "interpolation";
    case StageKind::kDefocus: return "defocus";
    case StageKind::kFocus: return "focus";
    case StageKind::kLinear: return "linear";
  }
  return "unknown";
}

StageKind stage_kind_from_string(const std::string& s) {
  if (s == "conv") return StageKind::kConv;
  if (s == "deconv") return StageKind::kDeconv;
  if (s == "interpolation" || s == "interp") return StageKind::kInterpolation;
  if (s == "defocus") return StageKind::kDefocus;
  if (s == "focus") return StageKind::kFocus;
  if (s == "linear") return StageKind::kLinear;
  fail(ErrorKind::kInvalidArgument, "unknown stage kind '" + s + "'");
}

std::int64_t stage_macs(const Stage& s) {
  const auto k2 = static_cast<std::int64_t>(s.kernel) * s.kernel;
  switch (s.kind) {
    case StageKind::kConv:
      return static_cast<std::int64_t>(s.c_in) * s.c_out * k2 * s.h_out * s.w_out;
    case StageKind::kDeconv:
      return static_cast<std::int64_t>(s.c_in) * s.c_out * k2 * s.h_in * s.w_in;
    case StageKind::kInterpolation: {
      const int h = s.h_out > 0 ? s.h_out : s.h_in * s.factor;
      const int w = s.w_out > 0 ? s.w_out : s.w_in * s.factor;
      return static_cast<std::int64_t>(interpolation_support(s.mode)) * s.c_in * h * w;
    }
    case StageKind::kDefocus:
    case StageKind::kFocus:
      return 0;
    case StageKind::kLinear:
      return static_cast<std::int64_t>(s.c_in) * s.c_out;
  }
  return 0;
}

FlopReport flop_count(std::span<const Stage> stages) {
  FlopReport r;
  for (const auto& s : stages) {
    const auto m = stage_macs(s);
    r.per_stage.push_back({s.name, s.kind, m});
    r.total_macs += m;
  }
  return r;
}

std::vector<Stage> stages_from_json(const nlohmann::json& doc) {
  const nlohmann::json& arr = doc.is_array() ? doc : doc.at("stages");
  require(arr.is_array(), "flop descriptor: 'stages' must be an array");
  std::vector<Stage> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& j = arr[i];
    require(j.contains("kind"), "flop descriptor: stage " + std::to_string(i) + " has no 'kind'");
    Stage s;
    s.kind = stage_kind_from_string(j.at("kind").get<std::string>());
    s.name = j.value("name", std::string(to_string(s.kind)) + "_" + std::to_string(i));
    s.c_in = get_int(j, "c_in", get_int(j, "channels", 0));
    s.c_out = get_int(j, "c_out", s.c_in);
    s.kernel = get_int(j, "kernel", 1);
    s.h_in = get_int(j, "h_in", 0);
    s.w_in = get_int(j, "w_in", s.h_in);
    s.h_out = get_int(j, "h_out", 0);
    s.w_out = get_int(j, "w_out", s.h_out);
    s.factor = get_int(j, "factor", 2);
    s.mode = j.value("mode", std::string("bilinear"));
    if (s.kind == StageKind::kLinear) {
      s.c_in = get_int(j, "in_features", s.c_in);
      s.c_out = get_int(j, "out_features", s.c_out);
    }
    if (s.kind == StageKind::kConv && s.h_out == 0) {
      require(s.h_in > 0, "flop descriptor: conv stage '" + s.name + "' needs h_out or h_in");
      const int stride = get_int(j, "stride", 1), pad = get_int(j, "pad", s.kernel / 2);
      s.h_out = kernels::conv_out_size(s.h_in, s.kernel, stride, pad);
      s.w_out = kernels::conv_out_size(s.w_in, s.kernel, stride, pad);
    }
    require(s.c_in >= 0 && s.c_out >= 0, "flop descriptor: negative channel count in '" + s.name + "'");
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json to_json(const FlopReport& report) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : report.per_stage) per.push_back({{"name", s.name}, {"kind", to_string(s.kind)}, {"macs", s.macs}});
  return {{"total_macs", report.total_macs}, {"per_stage", per}};
}

}  // namespace gatector

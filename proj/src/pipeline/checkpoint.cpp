#include "gatector/pipeline/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace gatector {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'G', 'T', 'C', 'K'};

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  nlohmann::json header = {{"format_version", ckpt.format_version},
                           {"config", ckpt.config},
                           {"adam_steps", ckpt.adam_steps},
                           {"step", ckpt.step},
                           {"epoch", ckpt.epoch},
                           {"history", ckpt.history},
                           {"tensors", nlohmann::json::array()}};
  std::uint64_t offset = 0;
  std::vector<const Tensor*> order;
  for (const auto& [group, map] : {std::pair{"param", &ckpt.params}, std::pair{"adam_m", &ckpt.adam_m},
                                   std::pair{"adam_v", &ckpt.adam_v}}) {
    for (const auto& [name, t] : *map) {
      header["tensors"].push_back({{"name", name}, {"group", group}, {"shape", t.shape()}, {"offset", offset}});
      offset += t.size();
      order.push_back(&t);
    }
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::kIo, "cannot write checkpoint '" + tmp.string() + "'");
    const std::uint32_t version = ckpt.format_version;
    const std::uint64_t header_bytes = text.size();
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&header_bytes), sizeof header_bytes);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Tensor* t : order)
      out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float)));
    if (!out) fail(ErrorKind::kIo, "failed writing checkpoint '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t header_bytes = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_bytes), sizeof header_bytes);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::kData, "'" + path.string() + "' is not a checkpoint");
  if (version != kCheckpointVersion)
    fail(ErrorKind::kData, "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                               std::to_string(kCheckpointVersion) + ")");
  std::string text(header_bytes, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_bytes));
  const auto blob_start = in.tellg();
  if (!in) fail(ErrorKind::kData, "truncated checkpoint header in '" + path.string() + "'");

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.format_version = header.at("format_version").get<std::uint32_t>();
    ckpt.config = header.at("config");
    ckpt.adam_steps = header.at("adam_steps").get<std::int64_t>();
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.epoch = header.at("epoch").get<std::int64_t>();
    ckpt.history = header.at("history");
    for (const auto& e : header.at("tensors")) {
      Tensor t(e.at("shape").get<Shape>());
      in.seekg(blob_start + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>() * sizeof(float)));
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
      if (!in) fail(ErrorKind::kData, "truncated tensor data in '" + path.string() + "'");
      const auto group = e.at("group").get<std::string>();
      auto& map = group == "param" ? ckpt.params : group == "adam_m" ? ckpt.adam_m : ckpt.adam_v;
      map.emplace(e.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, "malformed checkpoint header in '" + path.string() + "': " + e.what());
  }
  return ckpt;
}

std::map<std::string, Tensor> snapshot_parameters(const nn::ParameterStore& store) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, p] : store.entries()) out.emplace(name, p->value);
  return out;
}

void restore_parameters(nn::ParameterStore& store, const std::map<std::string, Tensor>& params) {
  for (const auto& [name, p] : store.entries()) {
    const auto it = params.find(name);
    if (it == params.end()) fail(ErrorKind::kData, "checkpoint lacks parameter '" + name + "'");
    if (it->second.shape() != p->value.shape())
      fail(ErrorKind::kData, "parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                                 " in checkpoint, model expects " + shape_string(p->value.shape()));
    p->value = it->second;
  }
  if (params.size() != store.entries().size())
    fail(ErrorKind::kData, "checkpoint holds parameters the model does not define");
}

}  // namespace gatector

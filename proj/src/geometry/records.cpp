#include "gatector/geometry/records.hpp"

#include <fstream>

#include "gatector/common/error.hpp"

namespace gatector {

void to_json(nlohmann::json& j, const BoundingBox& b) {
  j = {{"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}, {"category_id", b.category_id}};
  if (b.score) j["score"] = *b.score;
}

void from_json(const nlohmann::json& j, BoundingBox& b) {
  j.at("x1").get_to(b.x1);
  j.at("y1").get_to(b.y1);
  j.at("x2").get_to(b.x2);
  j.at("y2").get_to(b.y2);
  b.category_id = j.value("category_id", 0);
  if (j.contains("score") && !j.at("score").is_null()) b.score = j.at("score").get<double>();
  else b.score.reset();
}

void to_json(nlohmann::json& j, const ImageRecord& r) {
  j = {{"image_id", r.image_id},
       {"boxes", r.boxes},
       {"gaze_point", {r.gaze_point.x, r.gaze_point.y}},
       {"gaze_box_index", r.gaze_box_index}};
  if (r.head_box) j["head_box"] = *r.head_box;
}

void from_json(const nlohmann::json& j, ImageRecord& r) {
  const auto& id = j.at("image_id");
  r.image_id = id.is_string() ? id.get<std::string>() : id.dump();
  r.boxes = j.at("boxes").get<std::vector<BoundingBox>>();
  const auto& gp = j.at("gaze_point");
  if (gp.is_array() && gp.size() == 2) r.gaze_point = {gp[0].get<double>(), gp[1].get<double>()};
  else throw nlohmann::json::type_error::create(302, "gaze_point must be [x, y]", &gp);
  r.gaze_box_index = j.value("gaze_box_index", -1);
  if (j.contains("head_box")) r.head_box = j.at("head_box").get<BoundingBox>();
  else r.head_box.reset();
}

ImageRecord parse_record(const std::string& line, int line_number) {
  try {
    const auto j = nlohmann::json::parse(line);
    ImageRecord r = j.get<ImageRecord>();
    for (const auto& b : r.boxes)
      if (!b.valid()) fail(ErrorKind::kData, "line " + std::to_string(line_number) + ": invalid box geometry");
    if (r.gaze_box_index >= static_cast<int>(r.boxes.size()))
      fail(ErrorKind::kData, "line " + std::to_string(line_number) + ": gaze_box_index out of range");
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, "line " + std::to_string(line_number) + ": malformed record: " + e.what());
  }
}

std::vector<ImageRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<ImageRecord> out;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(line, line_number));
  }
  return out;
}

void write_records(const std::filesystem::path& path, std::span<const ImageRecord> records) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp);
    for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
    if (!out) fail(ErrorKind::kIo, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gatector

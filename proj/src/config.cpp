#include "capypipe/config.hpp"

#include <fstream>

#include "capypipe/errors.hpp"

namespace capypipe {

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::Whitespace: return "whitespace";
    case Normalization::Full: return "full";
  }
  return "?";
}

Normalization parse_normalization(std::string_view s) {
  for (auto v :
       {Normalization::None, Normalization::Whitespace, Normalization::Full}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown normalization '" + std::string(s) + "'");
}

std::vector<std::string> validate(const PipelineConfig& c) {
  std::vector<std::string> v;
  if (!(c.wer_threshold > 0.0 && c.wer_threshold <= 1.0)) {
    v.emplace_back("wer_threshold must be in (0, 1]");
  }
  if (!(c.s2tt_similarity_threshold >= 0.0 &&
        c.s2tt_similarity_threshold <= 1.0)) {
    v.emplace_back("s2tt_similarity_threshold must be in [0, 1]");
  }
  if (!(c.cluster_jaccard_threshold > 0.0 &&
        c.cluster_jaccard_threshold <= 1.0)) {
    v.emplace_back("cluster_jaccard_threshold must be in (0, 1]");
  }
  if (c.cluster_shingle_n < 1) v.emplace_back("cluster_shingle_n must be >= 1");
  if (c.max_slices < 1 || c.max_slices > 9) {
    v.emplace_back("max_slices must be in 1..9");
  }
  if (c.cell_size <= 0) v.emplace_back("cell_size must be > 0");
  if (!(c.video_fps > 0.0)) v.emplace_back("video_fps must be > 0");
  if (c.video_frame_cap < 1) v.emplace_back("video_frame_cap must be >= 1");
  return v;
}

PipelineConfig config_from_json(const Json& j, PipelineConfig c) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "wer_threshold") {
        c.wer_threshold = value.get<double>();
      } else if (key == "s2tt_similarity_threshold") {
        c.s2tt_similarity_threshold = value.get<double>();
      } else if (key == "dedup_normalization") {
        c.dedup_normalization = parse_normalization(value.get<std::string>());
      } else if (key == "cluster_jaccard_threshold") {
        c.cluster_jaccard_threshold = value.get<double>();
      } else if (key == "cluster_shingle_n") {
        c.cluster_shingle_n = value.get<int>();
      } else if (key == "max_slices") {
        c.max_slices = value.get<int>();
      } else if (key == "cell_size") {
        c.cell_size = value.get<int>();
      } else if (key == "video_fps") {
        c.video_fps = value.get<double>();
      } else if (key == "video_frame_cap") {
        c.video_frame_cap = value.get<int>();
      } else {
        throw ValidationError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  if (auto v = validate(c); !v.empty()) throw ValidationError(v.front());
  return c;
}

Json to_json(const PipelineConfig& c) {
  Json j = Json::object();
  j["wer_threshold"] = c.wer_threshold;
  j["s2tt_similarity_threshold"] = c.s2tt_similarity_threshold;
  j["dedup_normalization"] = to_string(c.dedup_normalization);
  j["cluster_jaccard_threshold"] = c.cluster_jaccard_threshold;
  j["cluster_shingle_n"] = c.cluster_shingle_n;
  j["max_slices"] = c.max_slices;
  j["cell_size"] = c.cell_size;
  j["video_fps"] = c.video_fps;
  j["video_frame_cap"] = c.video_frame_cap;
  return j;
}

PipelineConfig load_config(const std::filesystem::path& path,
                           PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j, base);
}

}  // namespace capypipe

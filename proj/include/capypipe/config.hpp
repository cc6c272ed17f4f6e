#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "capypipe/manifest.hpp"
#include "capypipe/text.hpp"

namespace capypipe {

// Knobs shared by every pipeline stage. Defaults carry the published
// constants (WER 0.3, 9 slices of 448 px, 1 fps capped at 128 frames);
// similarity and clustering thresholds are tunable defaults.
struct PipelineConfig {
  double wer_threshold = 0.3;
  double s2tt_similarity_threshold = 0.5;
  Normalization dedup_normalization = Normalization::Full;
  double cluster_jaccard_threshold = 0.8;
  int cluster_shingle_n = 3;
  int max_slices = 9;
  int cell_size = 448;
  double video_fps = 1.0;
  int video_frame_cap = 128;

  bool operator==(const PipelineConfig&) const = default;
};

std::vector<std::string> validate(const PipelineConfig& config);

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view s);

// Applies the keys present in `j` on top of `base`. Unknown keys are rejected
// with ValidationError.
PipelineConfig config_from_json(const Json& j, PipelineConfig base = {});
Json to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path,
                           PipelineConfig base = {});

}  // namespace capypipe

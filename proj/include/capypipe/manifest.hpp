#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace capypipe {

using Json = nlohmann::ordered_json;

enum class Scenario { ASR, S2TT, Caption, QA, CrossModal };
enum class Language { ZH, ENG, ZH_ENG, ENG_ZH };
enum class MediaKind { Image, Video, Audio };

std::string_view to_string(Scenario s);
std::string_view to_string(Language l);
std::string_view to_string(MediaKind k);
Scenario parse_scenario(std::string_view s);
Language parse_language(std::string_view s);
MediaKind parse_media_kind(std::string_view s);

struct MediaRef {
  MediaKind kind = MediaKind::Image;
  std::string path;
  std::optional<int> width;
  std::optional<int> height;
  std::optional<double> duration;
  std::optional<int> sample_rate;
  Json extra = Json::object();

  bool operator==(const MediaRef&) const = default;
};

struct FilterVerdict {
  bool kept = true;
  std::string stage;
  std::optional<std::string> metric_name;
  std::optional<double> metric_value;
  std::optional<std::string> reason;

  bool operator==(const FilterVerdict&) const = default;
};

// One manifest row. Fields the schema does not know are kept in `extra`
// and written back after the known keys.
struct SampleRecord {
  std::string id;
  Scenario scenario = Scenario::QA;
  Language language = Language::ENG;
  std::vector<MediaRef> media;
  std::string text;
  std::optional<std::string> hypothesis;
  std::optional<std::string> translation;
  std::string source;
  std::optional<FilterVerdict> verdict;
  Json extra = Json::object();

  bool operator==(const SampleRecord&) const = default;
};

// Empty result means the record satisfies every type invariant. Id
// uniqueness is a manifest-level property checked by read/write.
std::vector<std::string> validate(const SampleRecord& record);

Json to_json(const SampleRecord& record);
SampleRecord record_from_json(const Json& j);

// Parses a single manifest line. Throws FormatError.
SampleRecord parse_record_line(std::string_view line);
std::string serialize_record(const SampleRecord& record);

std::vector<SampleRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<SampleRecord>& records,
                    const std::filesystem::path& path);

}  // namespace capypipe

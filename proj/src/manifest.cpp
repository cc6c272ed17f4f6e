#include "capypipe/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "capypipe/errors.hpp"

namespace capypipe {

namespace {

constexpr std::string_view kKnownRecordKeys[] = {
    "id",     "scenario",   "language", "media",  "text",
    "hypothesis", "translation", "source", "verdict"};
constexpr std::string_view kKnownMediaKeys[] = {
    "kind", "path", "width", "height", "duration", "sample_rate"};

template <size_t N>
bool is_known(const std::string& key, const std::string_view (&known)[N]) {
  for (auto k : known) {
    if (k == key) return true;
  }
  return false;
}

const Json& require(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw FormatError(std::string("missing required key '") + key + "'");
  }
  return *it;
}

std::string require_string(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_string()) {
    throw FormatError(std::string("key '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw FormatError(std::string("key '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

template <typename T>
std::optional<T> optional_number(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) {
    throw FormatError(std::string("key '") + key + "' must be a number");
  }
  return it->get<T>();
}

MediaRef media_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("media entries must be objects");
  MediaRef m;
  m.kind = parse_media_kind(require_string(j, "kind"));
  m.path = require_string(j, "path");
  m.width = optional_number<int>(j, "width");
  m.height = optional_number<int>(j, "height");
  m.duration = optional_number<double>(j, "duration");
  m.sample_rate = optional_number<int>(j, "sample_rate");
  for (const auto& [key, value] : j.items()) {
    if (!is_known(key, kKnownMediaKeys)) m.extra[key] = value;
  }
  return m;
}

Json media_to_json(const MediaRef& m) {
  Json j = Json::object();
  j["kind"] = to_string(m.kind);
  j["path"] = m.path;
  if (m.width) j["width"] = *m.width;
  if (m.height) j["height"] = *m.height;
  if (m.duration) j["duration"] = *m.duration;
  if (m.sample_rate) j["sample_rate"] = *m.sample_rate;
  for (const auto& [key, value] : m.extra.items()) j[key] = value;
  return j;
}

FilterVerdict verdict_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("verdict must be an object");
  FilterVerdict v;
  const Json& kept = require(j, "kept");
  if (!kept.is_boolean()) throw FormatError("verdict.kept must be a boolean");
  v.kept = kept.get<bool>();
  v.stage = optional_string(j, "stage").value_or("");
  v.metric_name = optional_string(j, "metric_name");
  v.metric_value = optional_number<double>(j, "metric_value");
  v.reason = optional_string(j, "reason");
  return v;
}

Json verdict_to_json(const FilterVerdict& v) {
  Json j = Json::object();
  j["kept"] = v.kept;
  j["stage"] = v.stage;
  if (v.metric_name) j["metric_name"] = *v.metric_name;
  if (v.metric_value) j["metric_value"] = *v.metric_value;
  if (v.reason) j["reason"] = *v.reason;
  return j;
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::ASR: return "ASR";
    case Scenario::S2TT: return "S2TT";
    case Scenario::Caption: return "Caption";
    case Scenario::QA: return "QA";
    case Scenario::CrossModal: return "CrossModal";
  }
  return "?";
}

std::string_view to_string(Language l) {
  switch (l) {
    case Language::ZH: return "ZH";
    case Language::ENG: return "ENG";
    case Language::ZH_ENG: return "ZH_ENG";
    case Language::ENG_ZH: return "ENG_ZH";
  }
  return "?";
}

std::string_view to_string(MediaKind k) {
  switch (k) {
    case MediaKind::Image: return "image";
    case MediaKind::Video: return "video";
    case MediaKind::Audio: return "audio";
  }
  return "?";
}

Scenario parse_scenario(std::string_view s) {
  for (auto v : {Scenario::ASR, Scenario::S2TT, Scenario::Caption,
                 Scenario::QA, Scenario::CrossModal}) {
    if (to_string(v) == s) return v;
  }
  throw FormatError("unknown scenario '" + std::string(s) + "'");
}

Language parse_language(std::string_view s) {
  for (auto v :
       {Language::ZH, Language::ENG, Language::ZH_ENG, Language::ENG_ZH}) {
    if (to_string(v) == s) return v;
  }
  throw FormatError("unknown language '" + std::string(s) + "'");
}

MediaKind parse_media_kind(std::string_view s) {
  for (auto v : {MediaKind::Image, MediaKind::Video, MediaKind::Audio}) {
    if (to_string(v) == s) return v;
  }
  throw FormatError("unknown media kind '" + std::string(s) + "'");
}

std::vector<std::string> validate(const SampleRecord& record) {
  std::vector<std::string> violations;
  if (record.id.empty()) violations.emplace_back("id must be non-empty");

  size_t audio_refs = 0;
  for (const auto& m : record.media) {
    if (m.kind == MediaKind::Audio) ++audio_refs;
    if (m.kind == MediaKind::Image) {
      if ((m.width && *m.width <= 0) || (m.height && *m.height <= 0)) {
        violations.push_back("image ref '" + m.path +
                             "' requires width and height > 0");
      }
    }
    if (m.kind == MediaKind::Audio) {
      if (m.duration && !(*m.duration >= 0.0)) {
        violations.push_back("audio ref '" + m.path +
                             "' requires duration >= 0");
      }
      if (m.sample_rate && *m.sample_rate <= 0) {
        violations.push_back("audio ref '" + m.path +
                             "' requires sample_rate > 0");
      }
    }
  }
  if (record.scenario == Scenario::ASR && audio_refs != 1) {
    violations.emplace_back("ASR requires exactly one audio ref");
  }
  if (record.scenario == Scenario::S2TT &&
      record.language != Language::ZH_ENG &&
      record.language != Language::ENG_ZH) {
    violations.emplace_back(
        "S2TT requires language pair ZH_ENG or ENG_ZH, got " +
        std::string(to_string(record.language)));
  }
  if (record.verdict && !record.verdict->kept &&
      (record.verdict->stage.empty() || !record.verdict->metric_name)) {
    violations.emplace_back(
        "verdict kept=false requires stage and metric_name");
  }
  return violations;
}

SampleRecord record_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("record must be a JSON object");
  SampleRecord r;
  r.id = require_string(j, "id");
  r.scenario = parse_scenario(require_string(j, "scenario"));
  r.language = parse_language(require_string(j, "language"));
  r.text = require_string(j, "text");
  if (auto it = j.find("media"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw FormatError("key 'media' must be an array");
    for (const auto& m : *it) r.media.push_back(media_from_json(m));
  }
  r.hypothesis = optional_string(j, "hypothesis");
  r.translation = optional_string(j, "translation");
  r.source = optional_string(j, "source").value_or("");
  if (auto it = j.find("verdict"); it != j.end() && !it->is_null()) {
    r.verdict = verdict_from_json(*it);
  }
  for (const auto& [key, value] : j.items()) {
    if (!is_known(key, kKnownRecordKeys)) r.extra[key] = value;
  }
  return r;
}

Json to_json(const SampleRecord& r) {
  Json j = Json::object();
  j["id"] = r.id;
  j["scenario"] = to_string(r.scenario);
  j["language"] = to_string(r.language);
  Json media = Json::array();
  for (const auto& m : r.media) media.push_back(media_to_json(m));
  j["media"] = std::move(media);
  j["text"] = r.text;
  if (r.hypothesis) j["hypothesis"] = *r.hypothesis;
  if (r.translation) j["translation"] = *r.translation;
  j["source"] = r.source;
  if (r.verdict) j["verdict"] = verdict_to_json(*r.verdict);
  for (const auto& [key, value] : r.extra.items()) j[key] = value;
  return j;
}

SampleRecord parse_record_line(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  try {
    return record_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(e.what());
  }
}

std::string serialize_record(const SampleRecord& record) {
  return to_json(record).dump(-1, ' ', false,
                              nlohmann::json::error_handler_t::replace);
}

std::vector<SampleRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");

  std::vector<SampleRecord> records;
  std::unordered_map<std::string, size_t> first_line;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    SampleRecord record;
    try {
      record = parse_record_line(line);
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
    auto [it, inserted] = first_line.emplace(record.id, line_no);
    if (!inserted) {
      throw FormatError(path.string() + ": duplicate id '" + record.id +
                        "' on lines " + std::to_string(it->second) + " and " +
                        std::to_string(line_no));
    }
    records.push_back(std::move(record));
  }
  if (in.bad()) throw IoError("error reading manifest '" + path.string() + "'");
  return records;
}

void write_manifest(const std::vector<SampleRecord>& records,
                    const std::filesystem::path& path) {
  std::unordered_map<std::string, size_t> seen;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto violations = validate(records[i]);
    if (!violations.empty()) {
      throw ValidationError("record '" + records[i].id + "': " + violations[0]);
    }
    auto [it, inserted] = seen.emplace(records[i].id, i);
    if (!inserted) {
      throw ValidationError("duplicate id '" + records[i].id +
                            "' at positions " + std::to_string(it->second) +
                            " and " + std::to_string(i));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  for (const auto& r : records) out << serialize_record(r) << '\n';
  out.flush();
  if (!out) throw IoError("error writing manifest '" + path.string() + "'");
}

}  // namespace capypipe

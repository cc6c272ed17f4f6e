#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "capypipe/config.hpp"
#include "capypipe/errors.hpp"
#include "capypipe/manifest.hpp"
#include "fixtures.hpp"

using namespace capypipe;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SampleRecord random_record(std::mt19937_64& rng, size_t i) {
  std::uniform_real_distribution<double> real(0.0, 1000.0);
  SampleRecord r;
  switch (rng() % 4) {
    case 0:
      r = fixtures::asr("r" + std::to_string(i), oracle::random_text(rng, 5), "hyp");
      r.media[0].duration = real(rng);
      break;
    case 1:
      r = fixtures::s2tt("r" + std::to_string(i), "你好 世界", oracle::random_text(rng, 3));
      r.language = rng() % 2 ? Language::ZH_ENG : Language::ENG_ZH;
      break;
    case 2:
      r = fixtures::caption("r" + std::to_string(i), oracle::random_text(rng, 7),
                            1 + static_cast<int>(rng() % 4000), 1 + static_cast<int>(rng() % 4000));
      break;
    default:
      r.id = "r" + std::to_string(i);
      r.scenario = rng() % 2 ? Scenario::QA : Scenario::CrossModal;
      r.language = static_cast<Language>(rng() % 4);
      r.text = "q\t\"quoted\" \\ " + oracle::random_text(rng, 2);
      r.source = "src" + std::to_string(rng() % 3);
      {
        MediaRef v;
        v.kind = MediaKind::Video;
        v.path = "clip.mp4";
        v.duration = real(rng);
        v.extra["codec"] = "h264";
        r.media.push_back(v);
      }
  }
  if (rng() % 3 == 0) {
    FilterVerdict v;
    v.kept = rng() % 2;
    v.stage = "filter-asr";
    v.metric_name = "wer";
    v.metric_value = real(rng) / 1000.0;
    r.verdict = v;
  }
  if (rng() % 2) {
    r.extra["annotator"] = "a" + std::to_string(rng() % 10);
    r.extra["tags"] = Json::array({1, "two", nullptr});
  }
  return r;
}

}  // namespace

TEST(Validate, ValidRecordsHaveNoViolations) {
  EXPECT_TRUE(validate(fixtures::asr("a", "x", "y")).empty());
  EXPECT_TRUE(validate(fixtures::s2tt("b", "x", "y")).empty());
  EXPECT_TRUE(validate(fixtures::caption("c", "x")).empty());
}

TEST(Validate, EveryInvariantHasAFailingFixture) {
  SampleRecord r = fixtures::asr("", "x", "y");
  EXPECT_EQ(validate(r), std::vector<std::string>{"id must be non-empty"});

  r = fixtures::asr("a", "x", "y");
  r.media.push_back(r.media[0]);
  EXPECT_EQ(validate(r), std::vector<std::string>{"ASR requires exactly one audio ref"});
  r.media.clear();
  EXPECT_EQ(validate(r), std::vector<std::string>{"ASR requires exactly one audio ref"});

  r = fixtures::s2tt("s", "x", "y");
  r.language = Language::ZH;
  ASSERT_EQ(validate(r).size(), 1u);
  EXPECT_NE(validate(r)[0].find("ZH_ENG or ENG_ZH"), std::string::npos);
  EXPECT_NE(validate(r)[0].find("got ZH"), std::string::npos);

  r = fixtures::caption("c", "x", 0, 10);
  ASSERT_EQ(validate(r).size(), 1u);
  EXPECT_NE(validate(r)[0].find("width and height"), std::string::npos);

  r = fixtures::asr("a", "x", "y");
  r.media[0].duration = -1.0;
  ASSERT_EQ(validate(r).size(), 1u);
  r.media[0].duration = 1.0;
  r.media[0].sample_rate = 0;
  ASSERT_EQ(validate(r).size(), 1u);

  r = fixtures::caption("c", "x");
  r.verdict = FilterVerdict{false, "", std::nullopt, std::nullopt, std::nullopt};
  EXPECT_EQ(validate(r),
            std::vector<std::string>{"verdict kept=false requires stage and metric_name"});
}

TEST(Manifest, EmptyListWritesEmptyFile) {
  fixtures::TempDir dir("m-empty");
  write_manifest({}, dir / "e.jsonl");
  EXPECT_EQ(std::filesystem::file_size(dir / "e.jsonl"), 0u);
  EXPECT_TRUE(read_manifest(dir / "e.jsonl").empty());
}

TEST(Manifest, RoundTripProperty) {
  fixtures::TempDir dir("m-rt");
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<SampleRecord> records;
    for (size_t i = 0; i < 100; ++i) records.push_back(random_record(rng, i));
    write_manifest(records, dir / "a.jsonl");
    const auto back = read_manifest(dir / "a.jsonl");
    ASSERT_EQ(back, records);
    write_manifest(back, dir / "b.jsonl");
    ASSERT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  }
}

TEST(Manifest, PreservesUnknownFieldsAndOrder) {
  fixtures::TempDir dir("m-extra");
  const std::string line =
      R"({"id":"a","scenario":"QA","language":"ENG","media":[{"kind":"image","path":"p.ppm","width":3,"height":4,"exif":{"iso":100}}],"text":"t","source":"s","zeta":1,"alpha":[true]})";
  std::ofstream(dir / "in.jsonl") << line << "\n\n";
  const auto records = read_manifest(dir / "in.jsonl");
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].extra.dump(), R"({"zeta":1,"alpha":[true]})");
  EXPECT_EQ(serialize_record(records[0]), line);
}

TEST(Manifest, MalformedLineNamesLineNumber) {
  fixtures::TempDir dir("m-bad");
  std::ofstream(dir / "bad.jsonl")
      << R"({"id":"a","scenario":"QA","language":"ENG","text":"x"})" << "\n"
      << R"({"id":"b","scenario":"QA","language":"ENG"})" << "\n";
  try {
    read_manifest(dir / "bad.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("text"), std::string::npos) << e.what();
  }
  std::ofstream(dir / "json.jsonl") << "{not json\n";
  EXPECT_THROW(read_manifest(dir / "json.jsonl"), FormatError);
  std::ofstream(dir / "enum.jsonl")
      << R"({"id":"a","scenario":"TTS","language":"ENG","text":"x"})" << "\n";
  EXPECT_THROW(read_manifest(dir / "enum.jsonl"), FormatError);
}

TEST(Manifest, DuplicateIdNamesBothLines) {
  fixtures::TempDir dir("m-dup");
  std::ofstream out(dir / "dup.jsonl");
  for (const char* id : {"x", "y", "z", "w", "y"}) {
    out << R"({"id":")" << id << R"(","scenario":"QA","language":"ENG","text":"t"})" << "\n";
  }
  out.close();
  try {
    read_manifest(dir / "dup.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate id 'y' on lines 2 and 5"), std::string::npos)
        << e.what();
  }
}

TEST(Manifest, WriteRejectsInvalidAndReportsIo) {
  fixtures::TempDir dir("m-w");
  SampleRecord r = fixtures::caption("c", "x");
  r.verdict = FilterVerdict{false, "", std::nullopt, std::nullopt, std::nullopt};
  EXPECT_THROW(write_manifest({r}, dir / "a.jsonl"), ValidationError);
  EXPECT_THROW(write_manifest({fixtures::caption("c", "x"), fixtures::caption("c", "y")},
                              dir / "a.jsonl"),
               ValidationError);
  EXPECT_THROW(write_manifest({}, dir / "no" / "such" / "dir.jsonl"), IoError);
  EXPECT_THROW(read_manifest(dir / "missing.jsonl"), IoError);
}

TEST(Config, DefaultsAndValidation) {
  const PipelineConfig c;
  EXPECT_DOUBLE_EQ(c.wer_threshold, 0.3);
  EXPECT_DOUBLE_EQ(c.s2tt_similarity_threshold, 0.5);
  EXPECT_DOUBLE_EQ(c.cluster_jaccard_threshold, 0.8);
  EXPECT_EQ(c.max_slices, 9);
  EXPECT_EQ(c.cell_size, 448);
  EXPECT_DOUBLE_EQ(c.video_fps, 1.0);
  EXPECT_EQ(c.video_frame_cap, 128);
  EXPECT_TRUE(validate(c).empty());

  PipelineConfig bad;
  bad.wer_threshold = 0.0;
  bad.max_slices = 10;
  bad.video_frame_cap = 0;
  EXPECT_EQ(validate(bad).size(), 3u);
}

TEST(Config, JsonOverlayRejectsUnknownKeys) {
  const PipelineConfig c =
      config_from_json(Json::parse(R"({"wer_threshold":0.25,"dedup_normalization":"none"})"));
  EXPECT_DOUBLE_EQ(c.wer_threshold, 0.25);
  EXPECT_EQ(c.dedup_normalization, Normalization::None);
  EXPECT_EQ(c.max_slices, 9);
  EXPECT_THROW(config_from_json(Json::parse(R"({"wer_treshold":0.2})")), ValidationError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"max_slices":"nine"})")), ValidationError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"max_slices":12})")), ValidationError);
  EXPECT_EQ(config_from_json(to_json(c)).wer_threshold, 0.25);
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "capypipe/audio.hpp"
#include "capypipe/cli.hpp"
#include "capypipe/image.hpp"
#include "capypipe/manifest.hpp"
#include "fixtures.hpp"

using namespace capypipe;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, HelpListsSubcommandsAndDefaults) {
  const CliRun top = run({"--help"});
  EXPECT_EQ(top.code, kExitOk);
  for (const char* cmd : {"plan-tiles", "budget", "audio-profile", "video-schedule", "metrics",
                          "filter", "stats"}) {
    EXPECT_NE(top.out.find(cmd), std::string::npos) << cmd;
  }
  const CliRun filter = run({"filter", "--help"});
  EXPECT_EQ(filter.code, kExitOk);
  EXPECT_NE(filter.out.find("0.3"), std::string::npos);
  EXPECT_NE(filter.out.find("--jobs"), std::string::npos);
  EXPECT_NE(filter.out.find("--config"), std::string::npos);
}

TEST(Cli, UnknownFlagIsValidationExit) {
  const CliRun r = run({"stats", "--manifest", "x.jsonl", "--bogus"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run({}).code, kExitValidation);
}

TEST(Cli, MissingFileIsIoExit) {
  const CliRun r = run({"stats", "--manifest", "/nonexistent/m.jsonl"});
  EXPECT_EQ(r.code, kExitIo);
  EXPECT_NE(r.err.find("/nonexistent/m.jsonl"), std::string::npos);
}

TEST(Cli, PlanTiles) {
  const CliRun r = run({"plan-tiles", "--width", "1344", "--height", "1344"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["rows"], 3);
  EXPECT_EQ(j["cols"], 3);
  EXPECT_EQ(j["thumbnail"], true);
  EXPECT_EQ(j["tokens"], 2729);
  EXPECT_EQ(run({"plan-tiles", "--width", "0", "--height", "5"}).code, kExitValidation);
  EXPECT_EQ(run({"plan-tiles", "--width", "10", "--height", "5", "--max-slices", "12"}).code,
            kExitValidation);
}

TEST(Cli, PlanTilesWritesTiles) {
  fixtures::TempDir dir("cli-tiles");
  PixelImage img(1000, 500, 60);
  write_ppm(img, dir / "in.ppm");
  const CliRun r = run({"plan-tiles", "--ppm", (dir / "in.ppm").string(), "--tiles-dir",
                     (dir / "tiles").string(), "--max-slices", "4"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json j = Json::parse(r.out);
  const size_t cells = j["rows"].get<size_t>() * j["cols"].get<size_t>();
  EXPECT_EQ(j["files"].size(), cells + 1);
  EXPECT_EQ(read_ppm(dir / "tiles" / "thumbnail.ppm").width, 448);
}

TEST(Cli, VideoSchedule) {
  const CliRun r = run({"video-schedule", "--duration", "300"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json j = Json::parse(r.out);
  ASSERT_EQ(j.size(), 128u);
  EXPECT_DOUBLE_EQ(j.front().get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j.back().get<double>(), 299.5);
  EXPECT_EQ(Json::parse(run({"video-schedule", "--duration", "3", "--fps", "2"}).out).size(), 6u);
}

TEST(Cli, AudioProfileAndMel) {
  fixtures::TempDir dir("cli-audio");
  write_wav(dir / "a.wav", std::vector<float>(48000, 0.1f), 48000);
  const CliRun r = run({"audio-profile", "--wav", (dir / "a.wav").string(), "--mel-out",
                     (dir / "a.mel").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["n_tokens"], 25);
  EXPECT_EQ(j["mel_frames"], 100);
  EXPECT_EQ(read_mel(dir / "a.mel").n_frames, 100);

  std::ofstream(dir / "bad.wav") << "garbage";
  EXPECT_EQ(run({"audio-profile", "--wav", (dir / "bad.wav").string()}).code, kExitValidation);
}

TEST(Cli, MetricsFromTsv) {
  fixtures::TempDir dir("cli-metrics");
  std::ofstream(dir / "ref.tsv") << "u1\tthe cat sat down\nu2\thello to the world\n";
  std::ofstream(dir / "hyp.tsv") << "u2\thello to the world\nu1\tthe bat sat down\n";
  const CliRun r = run({"metrics", "wer", "--ref", (dir / "ref.tsv").string(), "--hyp",
                     (dir / "hyp.tsv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<Json> rows;
  while (std::getline(lines, line)) rows.push_back(Json::parse(line));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]["id"], "u1");
  EXPECT_EQ(rows[0]["substitutions"], 1);
  EXPECT_DOUBLE_EQ(rows[2]["rate"].get<double>(), 1.0 / 8.0);

  const CliRun bleu = run({"metrics", "bleu", "--ref", (dir / "ref.tsv").string(), "--hyp",
                        (dir / "ref.tsv").string()});
  ASSERT_EQ(bleu.code, kExitOk) << bleu.err;
  EXPECT_NE(bleu.out.find(R"("bleu":1.0)"), std::string::npos) << bleu.out;

  EXPECT_EQ(run({"metrics", "rouge", "--ref", "a", "--hyp", "b"}).code, kExitValidation);
  std::ofstream(dir / "short.tsv") << "u1\tx\n";
  EXPECT_EQ(run({"metrics", "cer", "--ref", (dir / "ref.tsv").string(), "--hyp",
                 (dir / "short.tsv").string()})
                .code,
            kExitValidation);
}

TEST(Cli, BudgetPerRecord) {
  fixtures::TempDir dir("cli-budget");
  SampleRecord img = fixtures::caption("img", "two words", 1344, 1344);
  SampleRecord a = fixtures::asr("aud", "one", "one");
  a.media[0].duration = 10.0;
  write_manifest({img, a}, dir / "m.jsonl");
  const CliRun r = run({"budget", "--manifest", (dir / "m.jsonl").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(Json::parse(line)["total"], 2729 + 2);
  std::getline(lines, line);
  EXPECT_EQ(Json::parse(line)["total"], 250 + 1);

  const CliRun r4 = run({"budget", "--manifest", (dir / "m.jsonl").string(), "--max-slices", "4"});
  ASSERT_EQ(r4.code, kExitOk) << r4.err;
  EXPECT_EQ(Json::parse(r4.out.substr(0, r4.out.find('\n')))["total"], 5 * 272 + 4 + 2);
}

TEST(Cli, FilterWritesKeptDroppedAndReports) {
  fixtures::TempDir dir("cli-filter");
  write_manifest(fixtures::synthetic_manifest(300, 1), dir / "in.jsonl");
  const CliRun r = run({"filter", "--manifest", (dir / "in.jsonl").string(), "--out",
                     (dir / "kept.jsonl").string(), "--report", (dir / "reports").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto kept = read_manifest(dir / "kept.jsonl");
  const auto dropped = read_manifest(dir / "kept.dropped.jsonl");
  EXPECT_EQ(kept.size() + dropped.size(), 300u);
  EXPECT_TRUE(std::filesystem::exists(dir / "reports" / "1-dedup-exact.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "reports" / "4-filter-s2tt.json"));
  for (const auto& d : dropped) {
    ASSERT_TRUE(d.verdict);
    EXPECT_FALSE(d.verdict->kept);
  }
}

TEST(Cli, ConfigPrecedence) {
  fixtures::TempDir dir("cli-config");
  const auto [ref, hyp] = std::pair<std::string, std::string>{"a b c d e f g h i j",
                                                              "a b c d e f g h x y"};
  write_manifest({fixtures::asr("r", ref, hyp)}, dir / "in.jsonl");
  std::ofstream(dir / "strict.json") << R"({"wer_threshold": 0.1})";
  auto kept_count = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"filter", "--manifest", (dir / "in.jsonl").string(),
                                     "--out", (dir / "k.jsonl").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const CliRun r = run(args);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    return read_manifest(dir / "k.jsonl").size();
  };
  EXPECT_EQ(kept_count({}), 1u);  // WER 0.2 under the 0.3 default
  EXPECT_EQ(kept_count({"--config", (dir / "strict.json").string()}), 0u);
  EXPECT_EQ(kept_count({"--config", (dir / "strict.json").string(), "--wer-threshold", "0.25"}),
            1u);
  ::setenv("CAPYPIPE_CONFIG", (dir / "strict.json").string().c_str(), 1);
  EXPECT_EQ(kept_count({}), 0u);
  ::unsetenv("CAPYPIPE_CONFIG");

  std::ofstream(dir / "typo.json") << R"({"wer_treshold": 0.1})";
  EXPECT_EQ(run({"filter", "--manifest", (dir / "in.jsonl").string(), "--out",
                 (dir / "k.jsonl").string(), "--config", (dir / "typo.json").string()})
                .code,
            kExitValidation);
}

TEST(Cli, StatsFormats) {
  fixtures::TempDir dir("cli-stats");
  write_manifest({fixtures::caption("a", "x"), fixtures::caption("b", "y")}, dir / "m.jsonl");
  const CliRun j = run({"stats", "--manifest", (dir / "m.jsonl").string()});
  ASSERT_EQ(j.code, kExitOk) << j.err;
  EXPECT_EQ(Json::parse(j.out)["count"], 2);
  const CliRun t = run({"stats", "--manifest", (dir / "m.jsonl").string(), "--format", "table"});
  ASSERT_EQ(t.code, kExitOk);
  EXPECT_NE(t.out.find("Caption"), std::string::npos);
  EXPECT_EQ(run({"stats", "--manifest", (dir / "m.jsonl").string(), "--format", "xml"}).code,
            kExitValidation);
}

TEST(Cli, OutputIsDeterministic) {
  fixtures::TempDir dir("cli-det");
  write_manifest(fixtures::synthetic_manifest(200, 3), dir / "m.jsonl");
  const CliRun a = run({"budget", "--manifest", (dir / "m.jsonl").string(), "--jobs", "1"});
  const CliRun b = run({"budget", "--manifest", (dir / "m.jsonl").string(), "--jobs", "8"});
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(dir / "m.jsonl").empty(), false);
}

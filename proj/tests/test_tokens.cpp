#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "capypipe/errors.hpp"
#include "capypipe/tokens.hpp"
#include "capypipe/video.hpp"
#include "fixtures.hpp"

using namespace capypipe;

TEST(Compress, HalvesEachAxisByMeanPooling) {
  for (int d : {1, 8, 64}) {
    EmbeddingGrid g(32, 32, d);
    for (size_t i = 0; i < g.values.size(); ++i) g.values[i] = static_cast<float>(i % 97);
    const EmbeddingGrid c = compress_tokens(g);
    ASSERT_EQ(c.rows, 16);
    ASSERT_EQ(c.cols, 16);
    ASSERT_EQ(c.dim, d);
    for (int r = 0; r < 16; ++r)
      for (int col = 0; col < 16; ++col)
        for (int k = 0; k < d; ++k) {
          const double mean = (g.at(2 * r, 2 * col, k) + g.at(2 * r, 2 * col + 1, k) +
                               g.at(2 * r + 1, 2 * col, k) + g.at(2 * r + 1, 2 * col + 1, k)) /
                              4.0;
          ASSERT_NEAR(c.at(r, col, k), mean, 1e-5);
        }
  }
}

TEST(Compress, OddDimensionsRejected) {
  EXPECT_THROW(compress_tokens(EmbeddingGrid(3, 4, 1)), DomainError);
  EXPECT_THROW(compress_tokens(EmbeddingGrid(4, 5, 1)), DomainError);
}

TEST(Flatten, RoundTripsGridShape) {
  for (int r = 1; r <= 6; ++r)
    for (int c = 1; c <= 6; ++c) {
      const auto seq = flatten_with_row_breaks(r, c);
      EXPECT_EQ(seq.size(), static_cast<size_t>(r * (c + 1)));
      EXPECT_EQ(unflatten(seq), std::make_pair(r, c));
    }
}

TEST(Flatten, RejectsMalformedSequences) {
  using K = TokenKind;
  EXPECT_THROW(unflatten({}), DomainError);
  EXPECT_THROW(unflatten({K::ImageUnit}), DomainError);
  EXPECT_THROW(unflatten({K::ImageUnit, K::RowBreak, K::ImageUnit, K::ImageUnit, K::RowBreak}),
               DomainError);
  EXPECT_THROW(unflatten({K::RowBreak}), DomainError);
}

TEST(ImageBudget, UnitCounts) {
  EXPECT_EQ(image_budget(plan_tiles(1344, 1344)).total(), 10 * 272 + 9);
  EXPECT_EQ(image_budget(plan_tiles(896, 896, 4)).total(), 5 * 272 + 4);
  EXPECT_EQ(image_budget(plan_tiles(300, 300)).total(), 272);
  const TokenLayout l = image_budget(plan_tiles(1344, 1344));
  EXPECT_EQ(l.count(TokenKind::ImageUnit), 2560);
  EXPECT_EQ(l.count(TokenKind::RowBreak), 160);
  EXPECT_EQ(l.count(TokenKind::Separator), 9);
}

TEST(ImageBudget, MatchesExplicitSequenceForSmallGrids) {
  for (int rows = 1; rows <= 3; ++rows)
    for (int cols = 1; cols <= 3; ++cols)
      for (bool thumb : {false, true}) {
        TilePlan plan;
        plan.grid_rows = rows;
        plan.grid_cols = cols;
        plan.resized_width = cols * plan.cell_size;
        plan.resized_height = rows * plan.cell_size;
        plan.thumbnail = thumb;
        // Build the placeholder stream unit by unit.
        std::vector<TokenKind> seq;
        const int units = rows * cols + (thumb ? 1 : 0);
        for (int u = 0; u < units; ++u) {
          if (u) seq.push_back(TokenKind::Separator);
          const auto unit = flatten_with_row_breaks(16, 16);
          seq.insert(seq.end(), unit.begin(), unit.end());
        }
        const TokenLayout l = image_budget(plan);
        ASSERT_EQ(l.total(), static_cast<long>(seq.size()));
        ASSERT_EQ(l.total(), units * 272L + (units - 1));
        for (TokenKind k : {TokenKind::ImageUnit, TokenKind::RowBreak, TokenKind::Separator}) {
          ASSERT_EQ(l.count(k), std::count(seq.begin(), seq.end(), k));
        }
      }
}

TEST(Flatten, RowBreakPositionsClosedForm) {
  const auto seq = flatten_with_row_breaks(16, 16);
  ASSERT_EQ(seq.size(), 272u);
  for (size_t i = 0; i < seq.size(); ++i) {
    // 1-based positions 17, 34, ... hold the row breaks.
    EXPECT_EQ(seq[i] == TokenKind::RowBreak, (i + 1) % 17 == 0) << i;
  }
  for (int r = 1; r <= 32; ++r)
    for (int c = 1; c <= 32; ++c) ASSERT_EQ(unflatten(flatten_with_row_breaks(r, c)), std::make_pair(r, c));
}

TEST(Compress, CheckerboardAveragesToZeroAndUpsamplePreservesMeans) {
  EmbeddingGrid g(32, 32, 3);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      for (int k = 0; k < 3; ++k) g.at(r, c, k) = (r + c) % 2 ? 1.0f : -1.0f;
  for (float v : compress_tokens(g).values) EXPECT_EQ(v, 0.0f);

  std::mt19937 rng(4);
  std::uniform_int_distribution<int> small(-8, 8);
  for (auto& v : g.values) v = static_cast<float>(small(rng)) / 4.0f;
  const EmbeddingGrid c = compress_tokens(g);
  EmbeddingGrid up(32, 32, 3);
  for (int r = 0; r < 32; ++r)
    for (int col = 0; col < 32; ++col)
      for (int k = 0; k < 3; ++k) up.at(r, col, k) = c.at(r / 2, col / 2, k);
  EXPECT_EQ(compress_tokens(up).values, c.values);
}

TEST(VideoBudget, FramesTimesUnitSize) {
  EXPECT_EQ(video_budget(10.0).total(), 10 * 272 + 9);
  EXPECT_EQ(video_budget(300.0).total(), 128 * 272 + 127);
  EXPECT_EQ(video_budget(0.0).total(), 0);
  EXPECT_EQ(video_budget(0.4).total(), 272);
  EXPECT_THROW(video_budget(-1.0), DomainError);
}

TEST(AudioBudget, TwentyFivePerSecond) {
  EXPECT_EQ(audio_budget(1.0), 25);
  EXPECT_EQ(audio_budget(10.0), 250);
  EXPECT_EQ(audio_budget(2.37), 59);
  EXPECT_EQ(audio_budget(0.0), 0);
  EXPECT_EQ(audio_frames(0.29), 29);
  EXPECT_THROW(audio_budget(-0.1), DomainError);
}

TEST(AudioBudget, WholeSecondsWithinThreeOfTwentyFivePerSecond) {
  for (int t = 1; t <= 600; ++t) {
    const long b = audio_budget(t);
    EXPECT_GE(b, 25L * t - 3);
    EXPECT_LE(b, 25L * t);
  }
}

TEST(AudioBudget, MonotoneInDuration) {
  long prev = 0;
  for (int ms = 0; ms <= 30000; ms += 7) {
    const long t = audio_budget(ms / 1000.0);
    EXPECT_GE(t, prev);
    EXPECT_EQ(t, (ms / 10) / 4);
    prev = t;
  }
}

TEST(Layout, AssemblesMediaThenText) {
  SampleRecord r = fixtures::caption("c1", "a small red boat");
  MediaRef audio;
  audio.kind = MediaKind::Audio;
  audio.path = "x.wav";
  r.media.push_back(audio);
  AudioProfile ap;
  ap.n_tokens = 25;
  const TokenLayout l =
      assemble_layout(r, {MediaPlan{plan_tiles(1344, 896)}, MediaPlan{ap}});
  EXPECT_EQ(l.count(TokenKind::Audio), 25);
  EXPECT_EQ(l.count(TokenKind::Text), 4);
  EXPECT_EQ(l.segments().back().kind, TokenKind::Text);
  EXPECT_EQ(l.total(), image_budget(plan_tiles(1344, 896)).total() + 25 + 4);
}

TEST(Layout, MissingOrMismatchedPlanNamesMedia) {
  SampleRecord r = fixtures::caption("c2", "text");
  try {
    assemble_layout(r, {std::nullopt});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("c2.ppm"), std::string::npos);
  }
  EXPECT_THROW(assemble_layout(r, {MediaPlan{schedule(3.0)}}), ValidationError);
}

TEST(Layout, JsonShape) {
  TokenLayout l;
  l.append(TokenKind::Text, 3);
  l.append(TokenKind::Audio, 0);
  EXPECT_EQ(l.to_json().dump(),
            R"({"total":3,"segments":[{"kind":"text","count":3}]})");
  EXPECT_THROW(l.append(TokenKind::Text, -1), DomainError);
}

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "capypipe/config.hpp"
#include "capypipe/manifest.hpp"

namespace capypipe {

// Stage names as they appear in reports and verdicts.
inline constexpr const char* kStageDedup = "dedup-exact";
inline constexpr const char* kStageCluster = "cluster-prune";
inline constexpr const char* kStageAsr = "filter-asr";
inline constexpr const char* kStageS2tt = "filter-s2tt";

// Ten equal-width buckets over [0, 1]; values above 1 (WER can exceed 1)
// land in `overflow`. The last bucket is closed on the right.
struct MetricHistogram {
  static constexpr int kBuckets = 10;
  std::vector<size_t> counts = std::vector<size_t>(kBuckets, 0);
  size_t overflow = 0;

  void add(double value);
  size_t total() const;
};

struct FilterReport {
  std::string stage;
  std::string metric;  // empty for stages without a metric
  size_t input_count = 0;
  size_t kept = 0;
  size_t dropped = 0;
  size_t passthrough = 0;  // counted in `kept`, not evaluated by the stage
  std::map<std::string, size_t> drop_reasons;
  MetricHistogram histogram;

  Json to_json() const;
};

struct StageResult {
  std::vector<SampleRecord> kept;
  std::vector<SampleRecord> dropped;  // verdicts populated
  FilterReport report;
};

struct ClusterAssignment {
  std::string sample_id;
  long cluster_id = 0;
  bool representative = false;

  bool operator==(const ClusterAssignment&) const = default;
};

struct ClusterResult : StageResult {
  std::vector<ClusterAssignment> assignments;  // input order
};

struct MinHashParams {
  int permutations = 128;
  int bands = 0;  // rows per band = permutations / bands; 0 picks lsh_bands()
  std::uint64_t seed = 0x5EED;
};

// Fewest bands (longest rows) whose chance of missing a pair with Jaccard
// exactly `threshold` stays at or below 1e-6. Bands always divide
// `permutations`. 0.8 gives 32 bands of 4 rows.
int lsh_bands(double threshold, int permutations = 128);

// Keeps the first record of each normalized text.
StageResult dedup_exact(const std::vector<SampleRecord>& records,
                        Normalization mode = Normalization::Full);

// Groups records whose character-shingle Jaccard similarity reaches the
// threshold (transitively) and keeps the earliest member of each group.
// MinHash/LSH only proposes candidate pairs; every merge is confirmed with
// the exact Jaccard value.
ClusterResult cluster_prune(const std::vector<SampleRecord>& records,
                            double jaccard_threshold, int shingle_n = 3,
                            const MinHashParams& params = {}, int jobs = 1);

// Drops records whose WER (CER for Chinese) against the hypothesis is
// strictly greater than `threshold`.
StageResult filter_asr(const std::vector<SampleRecord>& records,
                       double threshold = 0.3, int jobs = 1);

// Drops records whose trigram cosine similarity between text and
// translation is below `threshold`.
StageResult filter_s2tt(const std::vector<SampleRecord>& records,
                        double threshold = 0.5, int jobs = 1);

struct PipelineResult {
  std::vector<SampleRecord> kept;
  std::vector<SampleRecord> dropped;  // input order
  std::vector<FilterReport> reports;  // stage order
};

// dedup → cluster → ASR filter (ASR records) → S2TT filter (S2TT records).
// Records of other scenarios pass through the metric stages.
PipelineResult run_pipeline(const std::vector<SampleRecord>& records,
                            const PipelineConfig& config, int jobs = 1);

struct StatsRow {
  Scenario scenario;
  Language language;
  std::string source;
  size_t count = 0;
};

// Counts per (scenario, language, source) in order of first appearance.
std::vector<StatsRow> stats(const std::vector<SampleRecord>& records);
Json to_json(const std::vector<StatsRow>& rows);
std::string format_stats_table(const std::vector<StatsRow>& rows);

}  // namespace capypipe

#include "capypipe/curation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "capypipe/errors.hpp"
#include "capypipe/metrics.hpp"
#include "capypipe/parallel.hpp"
#include "capypipe/text.hpp"

namespace capypipe {

void MetricHistogram::add(double value) {
  if (value > 1.0) {
    ++overflow;
    return;
  }
  const int bucket =
      std::clamp(static_cast<int>(std::floor(value * kBuckets)), 0, kBuckets - 1);
  ++counts[static_cast<size_t>(bucket)];
}

size_t MetricHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), overflow);
}

Json FilterReport::to_json() const {
  Json j = Json::object();
  j["stage"] = stage;
  if (!metric.empty()) j["metric"] = metric;
  j["input_count"] = input_count;
  j["kept"] = kept;
  j["dropped"] = dropped;
  j["passthrough"] = passthrough;
  Json reasons = Json::object();
  for (const auto& [reason, count] : drop_reasons) reasons[reason] = count;
  j["drop_reasons"] = std::move(reasons);
  if (!metric.empty()) {
    Json buckets = Json::array();
    for (int b = 0; b < MetricHistogram::kBuckets; ++b) {
      buckets.push_back(Json{
          {"lo", b / static_cast<double>(MetricHistogram::kBuckets)},
          {"hi", (b + 1) / static_cast<double>(MetricHistogram::kBuckets)},
          {"count", histogram.counts[static_cast<size_t>(b)]}});
    }
    j["histogram"] = Json{{"buckets", std::move(buckets)},
                          {"overflow", histogram.overflow}};
  }
  return j;
}

namespace {

FilterVerdict drop_verdict(const char* stage, std::string metric,
                           std::optional<double> value, std::string reason) {
  FilterVerdict v;
  v.kept = false;
  v.stage = stage;
  v.metric_name = std::move(metric);
  v.metric_value = value;
  v.reason = std::move(reason);
  return v;
}

// Per-record outcome of a metric stage; computed in parallel, applied in
// input order.
struct Decision {
  bool evaluated = false;
  bool keep = true;
  std::string metric;
  std::optional<double> value;
  std::string reason;
};

template <typename Evaluate>
StageResult apply_metric_stage(const std::vector<SampleRecord>& records,
                               const char* stage, const std::string& metric_label,
                               Evaluate&& evaluate, int jobs) {
  std::vector<Decision> decisions(records.size());
  parallel_for(records.size(), jobs,
               [&](size_t i) { decisions[i] = evaluate(records[i]); });

  StageResult result;
  FilterReport& report = result.report;
  report.stage = stage;
  report.metric = metric_label;
  report.input_count = records.size();
  for (size_t i = 0; i < records.size(); ++i) {
    const Decision& d = decisions[i];
    SampleRecord record = records[i];
    if (!d.evaluated) {
      ++report.passthrough;
      ++report.kept;
      result.kept.push_back(std::move(record));
      continue;
    }
    if (d.value) report.histogram.add(*d.value);
    if (d.keep) {
      FilterVerdict v;
      v.kept = true;
      v.stage = stage;
      v.metric_name = d.metric;
      v.metric_value = d.value;
      record.verdict = v;
      ++report.kept;
      result.kept.push_back(std::move(record));
    } else {
      record.verdict = drop_verdict(stage, d.metric, d.value, d.reason);
      ++report.dropped;
      ++report.drop_reasons[d.reason];
      result.dropped.push_back(std::move(record));
    }
  }
  return result;
}

Decision evaluate_asr(const SampleRecord& r, double threshold) {
  Decision d;
  d.evaluated = true;
  if (!r.hypothesis) {
    d.keep = false;
    d.metric = "hypothesis";
    d.reason = "no-hypothesis";
    return d;
  }
  const bool chinese = r.language == Language::ZH;
  d.metric = chinese ? "cer" : "wer";
  try {
    const EditSummary s = chinese ? cer(r.text, *r.hypothesis)
                                  : wer(r.text, *r.hypothesis);
    d.value = s.rate;
  } catch (const DomainError&) {
    d.keep = false;
    d.reason = "empty-reference";
    return d;
  }
  if (*d.value > threshold) {
    d.keep = false;
    d.reason = chinese ? "cer-above-threshold" : "wer-above-threshold";
  }
  return d;
}

constexpr int kS2ttNgram = 3;

Decision evaluate_s2tt(const SampleRecord& r, double threshold) {
  Decision d;
  d.evaluated = true;
  if (!r.translation) {
    d.keep = false;
    d.metric = "translation";
    d.reason = "no-translation";
    return d;
  }
  d.metric = "ngram_cosine";
  try {
    d.value = ngram_cosine(r.text, *r.translation, kS2ttNgram);
  } catch (const DomainError&) {
    d.keep = false;
    d.reason = "empty-text";
    return d;
  }
  if (*d.value < threshold) {
    d.keep = false;
    d.reason = "similarity-below-threshold";
  }
  return d;
}

StageResult filter_asr_where(const std::vector<SampleRecord>& records,
                             double threshold, int jobs, bool only_asr) {
  return apply_metric_stage(
      records, kStageAsr, "error_rate",
      [&](const SampleRecord& r) {
        if (only_asr && r.scenario != Scenario::ASR) return Decision{};
        return evaluate_asr(r, threshold);
      },
      jobs);
}

StageResult filter_s2tt_where(const std::vector<SampleRecord>& records,
                              double threshold, int jobs, bool only_s2tt) {
  return apply_metric_stage(
      records, kStageS2tt, "ngram_cosine",
      [&](const SampleRecord& r) {
        if (only_s2tt && r.scenario != Scenario::S2TT) return Decision{};
        return evaluate_s2tt(r, threshold);
      },
      jobs);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::u32string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char32_t c : s) {
    for (int b = 0; b < 4; ++b) {
      h ^= (static_cast<std::uint64_t>(c) >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

struct ShingleSet {
  std::u32string normalized;
  std::vector<std::u32string> shingles;  // sorted, unique
};

ShingleSet make_shingles(const std::string& text, size_t n) {
  ShingleSet s;
  s.normalized = utf8_to_u32(normalize_text(text));
  for (size_t i = 0; i + n <= s.normalized.size(); ++i) {
    s.shingles.push_back(s.normalized.substr(i, n));
  }
  std::sort(s.shingles.begin(), s.shingles.end());
  s.shingles.erase(std::unique(s.shingles.begin(), s.shingles.end()),
                   s.shingles.end());
  return s;
}

// Same value as jaccard_shingles on the raw texts; pairs of empty shingle
// sets count as similar only when their normalized texts are identical.
double exact_jaccard(const ShingleSet& a, const ShingleSet& b) {
  if (a.shingles.empty() && b.shingles.empty()) {
    return a.normalized == b.normalized ? 1.0 : 0.0;
  }
  size_t common = 0;
  auto ia = a.shingles.begin();
  auto ib = b.shingles.begin();
  while (ia != a.shingles.end() && ib != b.shingles.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  const size_t unite = a.shingles.size() + b.shingles.size() - common;
  return static_cast<double>(common) / static_cast<double>(unite);
}

class DisjointSets {
 public:
  explicit DisjointSets(size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), size_t{0});
  }
  size_t find(size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // The smaller index becomes the root, so roots are the earliest members.
  void unite(size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<size_t> parent_;
};

}  // namespace

int lsh_bands(double threshold, int permutations) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw DomainError("jaccard threshold must be in (0, 1]");
  }
  if (permutations < 1) throw DomainError("permutations must be >= 1");
  constexpr double kMaxMiss = 1e-6;
  int best = permutations;  // one row per band: the most permissive split
  for (int rows = 2; rows <= permutations; ++rows) {
    if (permutations % rows != 0) continue;
    const int bands = permutations / rows;
    const double hit = std::pow(threshold, rows);
    if (std::pow(1.0 - hit, bands) <= kMaxMiss) best = bands;
  }
  return best;
}

StageResult dedup_exact(const std::vector<SampleRecord>& records,
                        Normalization mode) {
  StageResult result;
  FilterReport& report = result.report;
  report.stage = kStageDedup;
  report.input_count = records.size();
  std::unordered_map<std::string, std::string> first_id;
  for (const auto& r : records) {
    auto [it, inserted] = first_id.emplace(normalize_text(r.text, mode), r.id);
    if (inserted) {
      result.kept.push_back(r);
      ++report.kept;
      continue;
    }
    SampleRecord dup = r;
    dup.verdict = drop_verdict(kStageDedup, "normalized_text_match", 1.0,
                               "exact-duplicate");
    dup.extra["duplicate_of"] = it->second;
    result.dropped.push_back(std::move(dup));
    ++report.dropped;
    ++report.drop_reasons["exact-duplicate"];
  }
  return result;
}

ClusterResult cluster_prune(const std::vector<SampleRecord>& records,
                            double jaccard_threshold, int shingle_n,
                            const MinHashParams& params, int jobs) {
  if (!(jaccard_threshold > 0.0 && jaccard_threshold <= 1.0)) {
    throw DomainError("jaccard threshold must be in (0, 1]");
  }
  if (shingle_n < 1) throw DomainError("shingle size must be >= 1");
  if (params.permutations < 1 || params.bands < 0 ||
      (params.bands > 0 && params.permutations % params.bands != 0)) {
    throw DomainError("MinHash bands must evenly divide permutations");
  }
  const size_t n = records.size();
  const auto perms = static_cast<size_t>(params.permutations);
  const auto bands = static_cast<size_t>(
      params.bands > 0 ? params.bands
                       : lsh_bands(jaccard_threshold, params.permutations));
  const size_t rows = perms / bands;

  std::vector<std::uint64_t> perm_seeds(perms);
  std::mt19937_64 rng(params.seed);
  for (auto& s : perm_seeds) s = rng();

  std::vector<ShingleSet> sets(n);
  std::vector<std::uint64_t> signatures(n * perms);
  parallel_for(n, jobs, [&](size_t i) {
    sets[i] = make_shingles(records[i].text, static_cast<size_t>(shingle_n));
    std::uint64_t* sig = &signatures[i * perms];
    std::fill(sig, sig + perms, ~std::uint64_t{0});
    for (const auto& sh : sets[i].shingles) {
      const std::uint64_t base = fnv1a(sh);
      for (size_t p = 0; p < perms; ++p) {
        sig[p] = std::min(sig[p], splitmix64(base ^ perm_seeds[p]));
      }
    }
  });

  std::vector<std::uint64_t> candidates;
  for (size_t b = 0; b < bands; ++b) {
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
    for (size_t i = 0; i < n; ++i) {
      std::uint64_t key = splitmix64(b);
      for (size_t r = 0; r < rows; ++r) {
        key = splitmix64(key ^ signatures[i * perms + b * rows + r]);
      }
      buckets[key].push_back(static_cast<std::uint32_t>(i));
    }
    for (const auto& [key, members] : buckets) {
      for (size_t x = 0; x < members.size(); ++x) {
        for (size_t y = x + 1; y < members.size(); ++y) {
          candidates.push_back((static_cast<std::uint64_t>(members[x]) << 32) |
                               members[y]);
        }
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  std::vector<char> similar(candidates.size(), 0);
  parallel_for(candidates.size(), jobs, [&](size_t k) {
    const size_t a = candidates[k] >> 32;
    const size_t b = candidates[k] & 0xFFFFFFFFULL;
    similar[k] = exact_jaccard(sets[a], sets[b]) >= jaccard_threshold;
  });

  DisjointSets groups(n);
  for (size_t k = 0; k < candidates.size(); ++k) {
    if (similar[k]) groups.unite(candidates[k] >> 32, candidates[k] & 0xFFFFFFFFULL);
  }

  ClusterResult result;
  FilterReport& report = result.report;
  report.stage = kStageCluster;
  report.metric = "jaccard";
  report.input_count = n;
  std::unordered_map<size_t, long> cluster_ids;
  result.assignments.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t root = groups.find(i);
    auto [it, inserted] =
        cluster_ids.emplace(root, static_cast<long>(cluster_ids.size()));
    const bool representative = root == i;
    result.assignments.push_back({records[i].id, it->second, representative});
    if (representative) {
      result.kept.push_back(records[i]);
      ++report.kept;
      continue;
    }
    const double sim = exact_jaccard(sets[i], sets[root]);
    report.histogram.add(sim);
    SampleRecord dup = records[i];
    dup.verdict = drop_verdict(kStageCluster, "jaccard", sim, "near-duplicate");
    dup.extra["cluster_representative"] = records[root].id;
    result.dropped.push_back(std::move(dup));
    ++report.dropped;
    ++report.drop_reasons["near-duplicate"];
  }
  return result;
}

StageResult filter_asr(const std::vector<SampleRecord>& records,
                       double threshold, int jobs) {
  return filter_asr_where(records, threshold, jobs, false);
}

StageResult filter_s2tt(const std::vector<SampleRecord>& records,
                        double threshold, int jobs) {
  return filter_s2tt_where(records, threshold, jobs, false);
}

PipelineResult run_pipeline(const std::vector<SampleRecord>& records,
                            const PipelineConfig& config, int jobs) {
  if (auto v = validate(config); !v.empty()) {
    throw ValidationError("invalid config: " + v.front());
  }
  std::unordered_map<std::string, size_t> position;
  for (size_t i = 0; i < records.size(); ++i) position.emplace(records[i].id, i);

  PipelineResult out;
  auto absorb = [&out](StageResult&& stage) {
    out.reports.push_back(std::move(stage.report));
    for (auto& r : stage.dropped) out.dropped.push_back(std::move(r));
    return std::move(stage.kept);
  };

  auto kept = absorb(dedup_exact(records, config.dedup_normalization));
  kept = absorb(cluster_prune(kept, config.cluster_jaccard_threshold,
                              config.cluster_shingle_n, MinHashParams{}, jobs));
  kept = absorb(filter_asr_where(kept, config.wer_threshold, jobs, true));
  kept = absorb(
      filter_s2tt_where(kept, config.s2tt_similarity_threshold, jobs, true));
  out.kept = std::move(kept);

  std::stable_sort(out.dropped.begin(), out.dropped.end(),
                   [&](const SampleRecord& a, const SampleRecord& b) {
                     return position.at(a.id) < position.at(b.id);
                   });
  return out;
}

std::vector<StatsRow> stats(const std::vector<SampleRecord>& records) {
  std::vector<StatsRow> rows;
  std::map<std::tuple<int, int, std::string>, size_t> index;
  for (const auto& r : records) {
    auto key = std::make_tuple(static_cast<int>(r.scenario),
                               static_cast<int>(r.language), r.source);
    auto [it, inserted] = index.emplace(key, rows.size());
    if (inserted) rows.push_back({r.scenario, r.language, r.source, 0});
    ++rows[it->second].count;
  }
  return rows;
}

Json to_json(const std::vector<StatsRow>& rows) {
  Json out = Json::array();
  for (const auto& row : rows) {
    out.push_back(Json{{"scenario", to_string(row.scenario)},
                       {"language", to_string(row.language)},
                       {"source", row.source},
                       {"count", row.count},
                       {"count_k", static_cast<double>(row.count) / 1000.0}});
  }
  return out;
}

std::string format_stats_table(const std::vector<StatsRow>& rows) {
  std::vector<std::array<std::string, 4>> cells;
  cells.push_back({"Data Scenario", "Dataset", "Questions (K)", "Language"});
  for (const auto& row : rows) {
    std::ostringstream k;
    k.precision(3);
    k << std::fixed << static_cast<double>(row.count) / 1000.0;
    cells.push_back({std::string(to_string(row.scenario)), row.source, k.str(),
                     std::string(to_string(row.language))});
  }
  std::array<size_t, 4> width{};
  for (const auto& line : cells) {
    for (size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t c = 0; c < 4; ++c) {
      if (c > 0) out << " | ";
      out << cells[i][c];
      if (c + 1 < 4) out << std::string(width[c] - cells[i][c].size(), ' ');
    }
    out << '\n';
    if (i == 0) {
      for (size_t c = 0; c < 4; ++c) {
        if (c > 0) out << "-+-";
        out << std::string(width[c], '-');
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace capypipe

#include "capypipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "capypipe/errors.hpp"
#include "capypipe/text.hpp"

namespace capypipe {

template <typename T>
EditSummary align_sequences(const std::vector<T>& reference,
                            const std::vector<T>& hypothesis) {
  if (reference.empty()) {
    throw DomainError("error rate undefined for an empty reference");
  }
  const size_t m = reference.size();
  const size_t n = hypothesis.size();
  const size_t width = n + 1;
  std::vector<size_t> cost((m + 1) * width);
  for (size_t i = 0; i <= m; ++i) cost[i * width] = i;
  for (size_t j = 0; j <= n; ++j) cost[j] = j;
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      const size_t diag = cost[(i - 1) * width + j - 1] +
                          (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      const size_t up = cost[(i - 1) * width + j] + 1;
      const size_t left = cost[i * width + j - 1] + 1;
      cost[i * width + j] = std::min({diag, up, left});
    }
  }

  EditSummary summary;
  summary.ref_len = m;
  size_t i = m;
  size_t j = n;
  while (i > 0 || j > 0) {
    const size_t here = cost[i * width + j];
    if (i > 0 && j > 0) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      if (cost[(i - 1) * width + j - 1] + (same ? 0 : 1) == here) {
        if (!same) ++summary.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && cost[(i - 1) * width + j] + 1 == here) {
      ++summary.deletions;
      --i;
      continue;
    }
    ++summary.insertions;
    --j;
  }
  summary.rate =
      static_cast<double>(summary.errors()) / static_cast<double>(m);
  return summary;
}

template EditSummary align_sequences<std::string>(
    const std::vector<std::string>&, const std::vector<std::string>&);
template EditSummary align_sequences<char32_t>(const std::vector<char32_t>&,
                                               const std::vector<char32_t>&);
template EditSummary align_sequences<int>(const std::vector<int>&,
                                          const std::vector<int>&);

EditSummary wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = split_words(normalize_text(reference));
  const auto hyp = split_words(normalize_text(hypothesis));
  return align_sequences(ref, hyp);
}

EditSummary cer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = chars_without_space(normalize_text(reference));
  const auto hyp = chars_without_space(normalize_text(hypothesis));
  return align_sequences(std::vector<char32_t>(ref.begin(), ref.end()),
                         std::vector<char32_t>(hyp.begin(), hyp.end()));
}

namespace {

// Private-use code points never produced by normalize_text on real text.
constexpr char32_t kBeginMarker = 0xE000;
constexpr char32_t kEndMarker = 0xE001;

std::map<std::u32string, size_t> ngram_counts(const std::u32string& s,
                                              size_t n) {
  std::map<std::u32string, size_t> counts;
  if (s.size() < n) return counts;
  for (size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
  return counts;
}

}  // namespace

double ngram_cosine(std::string_view a, std::string_view b, int n) {
  if (n < 1) throw DomainError("n-gram order must be >= 1");
  const auto order = static_cast<size_t>(n);
  auto pad = [](std::string_view s) {
    std::u32string out;
    out.push_back(kBeginMarker);
    out += utf8_to_u32(normalize_text(s));
    out.push_back(kEndMarker);
    return out;
  };
  const std::u32string pa = pad(a);
  const std::u32string pb = pad(b);
  if (pa.size() < order && pb.size() < order) {
    throw DomainError("both strings are shorter than the n-gram order");
  }
  const auto ca = ngram_counts(pa, order);
  const auto cb = ngram_counts(pb, order);
  if (ca.empty() || cb.empty()) return 0.0;

  // Integer accumulation keeps identical inputs at exactly 1.0.
  unsigned long long dot = 0;
  unsigned long long norm_a = 0;
  unsigned long long norm_b = 0;
  for (const auto& [gram, count] : ca) {
    norm_a += count * count;
    auto it = cb.find(gram);
    if (it != cb.end()) dot += count * it->second;
  }
  for (const auto& [gram, count] : cb) norm_b += count * count;
  const double denom =
      std::sqrt(static_cast<double>(norm_a) * static_cast<double>(norm_b));
  return std::min(1.0, static_cast<double>(dot) / denom);
}

double jaccard_shingles(std::string_view a, std::string_view b, int n) {
  if (n < 1) throw DomainError("shingle size must be >= 1");
  const auto order = static_cast<size_t>(n);
  const std::u32string sa = utf8_to_u32(normalize_text(a));
  const std::u32string sb = utf8_to_u32(normalize_text(b));
  std::set<std::u32string> set_a;
  std::set<std::u32string> set_b;
  for (size_t i = 0; i + order <= sa.size(); ++i) set_a.insert(sa.substr(i, order));
  for (size_t i = 0; i + order <= sb.size(); ++i) set_b.insert(sb.substr(i, order));
  if (set_a.empty() && set_b.empty()) {
    if (sa == sb) return 1.0;
    throw DomainError("both shingle sets are empty for distinct inputs");
  }
  size_t common = 0;
  for (const auto& g : set_a) common += set_b.count(g);
  const size_t unite = set_a.size() + set_b.size() - common;
  return static_cast<double>(common) / static_cast<double>(unite);
}

void BleuStats::add(const TokenList& reference, const TokenList& hypothesis) {
  hyp_len += hypothesis.size();
  ref_len += reference.size();
  for (size_t k = 0; k < matches.size(); ++k) {
    const size_t order = k + 1;
    if (hypothesis.size() < order) continue;
    std::map<std::vector<std::string>, size_t> ref_counts;
    for (size_t i = 0; i + order <= reference.size(); ++i) {
      ++ref_counts[TokenList(reference.begin() + i,
                             reference.begin() + i + order)];
    }
    std::map<std::vector<std::string>, size_t> hyp_counts;
    for (size_t i = 0; i + order <= hypothesis.size(); ++i) {
      ++hyp_counts[TokenList(hypothesis.begin() + i,
                             hypothesis.begin() + i + order)];
    }
    for (const auto& [gram, count] : hyp_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matches[k] += std::min(count, it->second);
    }
    totals[k] += hypothesis.size() - order + 1;
  }
}

double BleuStats::score() const {
  if (hyp_len == 0) return 0.0;
  double log_precision = 0.0;
  for (size_t k = 0; k < matches.size(); ++k) {
    if (matches[k] == 0 || totals[k] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matches[k]) /
                              static_cast<double>(totals[k]));
  }
  log_precision /= static_cast<double>(matches.size());
  const double brevity = std::min(
      0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return std::exp(brevity + log_precision);
}

double bleu(const std::vector<TokenList>& references,
            const std::vector<TokenList>& hypotheses, int max_n) {
  if (references.size() != hypotheses.size()) {
    throw DomainError("reference and hypothesis corpora differ in length");
  }
  if (references.empty()) throw DomainError("BLEU undefined for an empty corpus");
  if (max_n < 1) throw DomainError("max n-gram order must be >= 1");
  BleuStats stats(max_n);
  for (size_t i = 0; i < references.size(); ++i) {
    stats.add(references[i], hypotheses[i]);
  }
  return stats.score();
}

}  // namespace capypipe

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace capypipe {

// Decomposition of a minimum-cost alignment between a reference and a
// hypothesis sequence. rate = (S + I + D) / ref_len.
struct EditSummary {
  size_t substitutions = 0;
  size_t insertions = 0;
  size_t deletions = 0;
  size_t ref_len = 0;
  double rate = 0.0;

  size_t errors() const { return substitutions + insertions + deletions; }
  bool operator==(const EditSummary&) const = default;
};

// Levenshtein alignment with unit costs. On the backtrace, ties are broken
// substitution > deletion > insertion. Throws DomainError if `reference`
// is empty.
template <typename T>
EditSummary align_sequences(const std::vector<T>& reference,
                            const std::vector<T>& hypothesis);

// Word error rate over whitespace tokens of the normalized texts.
EditSummary wer(std::string_view reference, std::string_view hypothesis);

// Character error rate over code points of the normalized texts, whitespace
// removed.
EditSummary cer(std::string_view reference, std::string_view hypothesis);

// Cosine similarity of character n-gram count vectors. Each string is padded
// with one begin and one end marker before n-grams are taken.
double ngram_cosine(std::string_view a, std::string_view b, int n);

// |A ∩ B| / |A ∪ B| over character n-gram sets (no padding).
double jaccard_shingles(std::string_view a, std::string_view b, int n);

using TokenList = std::vector<std::string>;

// Clipped n-gram statistics for corpus BLEU. Index k holds (k+1)-grams.
struct BleuStats {
  std::vector<size_t> matches;
  std::vector<size_t> totals;
  size_t hyp_len = 0;
  size_t ref_len = 0;

  explicit BleuStats(int max_n = 4)
      : matches(static_cast<size_t>(max_n), 0),
        totals(static_cast<size_t>(max_n), 0) {}
  void add(const TokenList& reference, const TokenList& hypothesis);
  double score() const;
};

// Corpus BLEU with a single reference per hypothesis, no smoothing.
double bleu(const std::vector<TokenList>& references,
            const std::vector<TokenList>& hypotheses, int max_n = 4);

}  // namespace capypipe

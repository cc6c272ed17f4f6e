#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "capypipe/audio.hpp"
#include "capypipe/image.hpp"
#include "capypipe/manifest.hpp"
#include "capypipe/video.hpp"

namespace capypipe {

enum class TokenKind { Text, ImageUnit, VideoFrame, Audio, RowBreak, Separator };

std::string_view to_string(TokenKind kind);

struct Segment {
  TokenKind kind;
  long count;

  bool operator==(const Segment&) const = default;
};

// Run-length placeholder sequence for one sample.
class TokenLayout {
 public:
  TokenLayout() = default;

  // Appends a run; zero-length runs are dropped, adjacent runs of the same
  // kind stay separate so the layout mirrors how it was built.
  void append(TokenKind kind, long count);
  void append(const TokenLayout& other);

  const std::vector<Segment>& segments() const { return segments_; }
  long total() const { return total_; }
  long count(TokenKind kind) const;

  // Explicit token-by-token sequence.
  std::vector<TokenKind> expand() const;

  Json to_json() const;

  bool operator==(const TokenLayout&) const = default;

 private:
  std::vector<Segment> segments_;
  long total_ = 0;
};

// Geometry of one vision-encoder unit after 2×2 compression.
struct VisualUnitSpec {
  static constexpr int kVitGrid = 32;
  static constexpr int kVitTokens = kVitGrid * kVitGrid;        // 1024
  static constexpr int kCompressedGrid = kVitGrid / 2;          // 16
  static constexpr int kCompressedTokens = kVitTokens / 4;      // 256
  static constexpr int kRowBreaks = kCompressedGrid;            // 16
  static constexpr int kTokensPerUnit = kCompressedTokens + kRowBreaks;  // 272
};

// Averages each 2×2 block per channel. Throws DomainError on odd dims.
EmbeddingGrid compress_tokens(const EmbeddingGrid& grid);

// rows × (cols visual tokens then one RowBreak), row-major.
std::vector<TokenKind> flatten_with_row_breaks(int rows, int cols,
                                               TokenKind visual = TokenKind::ImageUnit);

// Recovers (rows, cols) from a flattened sequence. Throws DomainError if
// the sequence is not a well-formed row-break layout.
std::pair<int, int> unflatten(const std::vector<TokenKind>& sequence);

TokenLayout image_budget(const TilePlan& plan);

// Frame count min(floor(duration*fps), cap), at least one for duration > 0.
long video_frame_count(double duration, double fps, int cap);
TokenLayout video_budget(double duration, double fps = 1.0, int cap = 128);

// Encoder frames at 100 Hz, halved by the encoder and again by pooling.
long audio_frames(double duration);
long audio_budget(double duration);

// Whitespace-token estimate used for text segments.
long text_token_estimate(std::string_view text);

using MediaPlan = std::variant<TilePlan, AudioProfile, FrameSchedule>;

// Packs media placeholders in record order followed by the text segment.
// `plans` is aligned with record.media; a missing or mismatched entry
// throws ValidationError naming the media path.
TokenLayout assemble_layout(const SampleRecord& record,
                            const std::vector<std::optional<MediaPlan>>& plans);

}  // namespace capypipe

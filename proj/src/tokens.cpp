#include "capypipe/tokens.hpp"

#include <cmath>

#include "capypipe/errors.hpp"
#include "capypipe/text.hpp"

namespace capypipe {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Text: return "text";
    case TokenKind::ImageUnit: return "image_unit";
    case TokenKind::VideoFrame: return "video_frame";
    case TokenKind::Audio: return "audio";
    case TokenKind::RowBreak: return "row_break";
    case TokenKind::Separator: return "separator";
  }
  return "?";
}

void TokenLayout::append(TokenKind kind, long count) {
  if (count < 0) throw DomainError("segment count must be non-negative");
  if (count == 0) return;
  segments_.push_back({kind, count});
  total_ += count;
}

void TokenLayout::append(const TokenLayout& other) {
  for (const auto& s : other.segments_) append(s.kind, s.count);
}

long TokenLayout::count(TokenKind kind) const {
  long n = 0;
  for (const auto& s : segments_) {
    if (s.kind == kind) n += s.count;
  }
  return n;
}

std::vector<TokenKind> TokenLayout::expand() const {
  std::vector<TokenKind> seq;
  seq.reserve(static_cast<size_t>(total_));
  for (const auto& s : segments_) seq.insert(seq.end(), static_cast<size_t>(s.count), s.kind);
  return seq;
}

Json TokenLayout::to_json() const {
  Json segs = Json::array();
  for (const auto& s : segments_) {
    segs.push_back(Json{{"kind", to_string(s.kind)}, {"count", s.count}});
  }
  return Json{{"total", total_}, {"segments", std::move(segs)}};
}

EmbeddingGrid compress_tokens(const EmbeddingGrid& grid) {
  if (grid.rows % 2 != 0 || grid.cols % 2 != 0) {
    throw DomainError("compress_tokens requires even grid dimensions, got " +
                      std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  }
  EmbeddingGrid out(grid.rows / 2, grid.cols / 2, grid.dim);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      for (int k = 0; k < grid.dim; ++k) {
        const double sum = static_cast<double>(grid.at(2 * r, 2 * c, k)) +
                           grid.at(2 * r, 2 * c + 1, k) +
                           grid.at(2 * r + 1, 2 * c, k) +
                           grid.at(2 * r + 1, 2 * c + 1, k);
        out.at(r, c, k) = static_cast<float>(sum / 4.0);
      }
    }
  }
  return out;
}

std::vector<TokenKind> flatten_with_row_breaks(int rows, int cols,
                                               TokenKind visual) {
  if (rows < 1 || cols < 1) throw DomainError("grid must be at least 1x1");
  std::vector<TokenKind> seq;
  seq.reserve(static_cast<size_t>(rows) * (cols + 1));
  for (int r = 0; r < rows; ++r) {
    seq.insert(seq.end(), static_cast<size_t>(cols), visual);
    seq.push_back(TokenKind::RowBreak);
  }
  return seq;
}

std::pair<int, int> unflatten(const std::vector<TokenKind>& sequence) {
  if (sequence.empty() || sequence.back() != TokenKind::RowBreak) {
    throw DomainError("sequence must end with a row break");
  }
  int rows = 0;
  int cols = -1;
  int run = 0;
  for (TokenKind t : sequence) {
    if (t == TokenKind::RowBreak) {
      if (run == 0) throw DomainError("empty row in flattened sequence");
      if (cols >= 0 && run != cols) throw DomainError("ragged rows in flattened sequence");
      cols = run;
      run = 0;
      ++rows;
    } else {
      ++run;
    }
  }
  return {rows, cols};
}

namespace {

void append_visual_units(TokenLayout& layout, long units, TokenKind visual) {
  for (long u = 0; u < units; ++u) {
    if (u > 0) layout.append(TokenKind::Separator, 1);
    layout.append(visual, VisualUnitSpec::kCompressedTokens);
    layout.append(TokenKind::RowBreak, VisualUnitSpec::kRowBreaks);
  }
}

}  // namespace

TokenLayout image_budget(const TilePlan& plan) {
  if (plan.grid_rows < 1 || plan.grid_cols < 1) {
    throw DomainError("tile plan grid must be at least 1x1");
  }
  TokenLayout layout;
  append_visual_units(layout, plan.cells() + (plan.thumbnail ? 1 : 0),
                      TokenKind::ImageUnit);
  return layout;
}

long video_frame_count(double duration, double fps, int cap) {
  if (!(duration >= 0.0)) throw DomainError("duration must be >= 0");
  if (!(fps > 0.0)) throw DomainError("fps must be > 0");
  if (cap < 1) throw DomainError("frame cap must be >= 1");
  if (duration == 0.0) return 0;
  const long raw = std::max(1L, raw_frame_count(duration, fps));
  return std::min<long>(raw, cap);
}

TokenLayout video_budget(double duration, double fps, int cap) {
  TokenLayout layout;
  append_visual_units(layout, video_frame_count(duration, fps, cap),
                      TokenKind::VideoFrame);
  return layout;
}

long audio_frames(double duration) {
  if (!(duration >= 0.0)) throw DomainError("duration must be >= 0");
  return raw_frame_count(duration, 100.0);
}

long audio_budget(double duration) {
  const long frames = audio_frames(duration);
  return (frames / 2) / 2;
}

long text_token_estimate(std::string_view text) {
  return static_cast<long>(split_words(text).size());
}

TokenLayout assemble_layout(const SampleRecord& record,
                            const std::vector<std::optional<MediaPlan>>& plans) {
  TokenLayout layout;
  for (size_t i = 0; i < record.media.size(); ++i) {
    const MediaRef& media = record.media[i];
    const std::string where = "record '" + record.id + "' media[" +
                              std::to_string(i) + "] '" + media.path + "'";
    if (i >= plans.size() || !plans[i]) {
      throw ValidationError("no plan for " + where);
    }
    const MediaPlan& plan = *plans[i];
    switch (media.kind) {
      case MediaKind::Image:
        if (const auto* p = std::get_if<TilePlan>(&plan)) {
          layout.append(image_budget(*p));
          continue;
        }
        break;
      case MediaKind::Audio:
        if (const auto* p = std::get_if<AudioProfile>(&plan)) {
          layout.append(TokenKind::Audio, p->n_tokens);
          continue;
        }
        break;
      case MediaKind::Video:
        if (const auto* p = std::get_if<FrameSchedule>(&plan)) {
          TokenLayout frames;
          append_visual_units(frames, static_cast<long>(p->size()),
                              TokenKind::VideoFrame);
          layout.append(frames);
          continue;
        }
        break;
    }
    throw ValidationError("plan kind does not match " + where);
  }
  layout.append(TokenKind::Text, text_token_estimate(record.text));
  return layout;
}

}  // namespace capypipe

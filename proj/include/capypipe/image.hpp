#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace capypipe {

// Grid chosen for one image. Cells are `cell_size` squares; the resize
// canvas is grid_cols*cell_size wide and grid_rows*cell_size tall.
struct TilePlan {
  int grid_rows = 1;
  int grid_cols = 1;
  int cell_size = 448;
  int resized_width = 448;
  int resized_height = 448;
  bool thumbnail = false;
  double score = 0.0;

  int cells() const { return grid_rows * grid_cols; }
  bool operator==(const TilePlan&) const = default;
};

// Ideal slice count ceil(w*h / cell²) clipped to max_slices.
int ideal_slice_count(int width, int height, int max_slices, int cell_size);

// Log-aspect-ratio agreement between the image and an m×n grid; 0 is a
// perfect match, more negative is worse.
double grid_score(int width, int height, int rows, int cols);

// Selects the sub-image grid. Candidates are all factorizations of
// N*-1, N*, N*+1 (clipped to [1, max_slices]); highest score wins, ties go
// to fewer cells then fewer rows. Throws DomainError on bad arguments.
TilePlan plan_tiles(int width, int height, int max_slices = 9,
                    int cell_size = 448);

struct ResizeGeometry {
  int scaled_width = 0;
  int scaled_height = 0;
  int pad_x = 0;
  int pad_y = 0;

  bool operator==(const ResizeGeometry&) const = default;
};

// Aspect-preserving fit of the image into the plan's canvas, centered.
ResizeGeometry resize_geometry(int width, int height, const TilePlan& plan);

struct PixelImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major RGB

  PixelImage() = default;
  PixelImage(int w, int h, std::uint8_t fill = 0);

  static constexpr int kChannels = 3;
  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * kChannels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * kChannels + c];
  }
  const std::uint8_t* pixel(int x, int y) const {
    return &data[(static_cast<size_t>(y) * width + x) * kChannels];
  }
  bool operator==(const PixelImage&) const = default;
};

// Half-pixel-center bilinear resampling with border clamping.
PixelImage bilinear_resize(const PixelImage& image, int out_w, int out_h);

constexpr std::uint8_t kPadGray = 128;

// Output of slicing: grid cells in row-major order plus the optional
// whole-image thumbnail, each cell_size × cell_size.
struct SlicedImage {
  TilePlan plan;
  ResizeGeometry geometry;
  std::vector<PixelImage> cells;
  std::optional<PixelImage> thumbnail;
};

SlicedImage slice_image(const PixelImage& image, const TilePlan& plan);

PixelImage read_ppm(const std::filesystem::path& path);
void write_ppm(const PixelImage& image, const std::filesystem::path& path);

// Dense rows × cols × dim field of reals, row-major with dim innermost.
struct EmbeddingGrid {
  int rows = 0;
  int cols = 0;
  int dim = 0;
  std::vector<float> values;

  EmbeddingGrid() = default;
  EmbeddingGrid(int r, int c, int d, float fill = 0.0f);

  float& at(int r, int c, int k) {
    return values[(static_cast<size_t>(r) * cols + c) * dim + k];
  }
  float at(int r, int c, int k) const {
    return values[(static_cast<size_t>(r) * cols + c) * dim + k];
  }
  bool operator==(const EmbeddingGrid&) const = default;
};

// Align-corners bilinear resize of a position-embedding table.
EmbeddingGrid interpolate_pos_embed(const EmbeddingGrid& grid, int out_rows,
                                    int out_cols);

// Binary layout: 4-byte magic, rows/cols/dim as u32 LE, then f32 LE values.
void write_grid(const EmbeddingGrid& grid, const std::filesystem::path& path,
                std::string_view magic = "EGRD");
EmbeddingGrid read_grid(const std::filesystem::path& path,
                        std::string_view magic = "EGRD");

}  // namespace capypipe

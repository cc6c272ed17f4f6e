#include "capypipe/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "capypipe/errors.hpp"

namespace capypipe {

namespace {

__extension__ typedef __int128 Int128;

// Deviation of grid aspect n/m from image aspect w/h as the ratio
// max(p,q)/min(p,q) with p = w*m, q = h*n. Kept as an exact fraction so
// candidate comparison never depends on log rounding.
struct AspectDeviation {
  std::int64_t num;
  std::int64_t den;

  AspectDeviation(int width, int height, int rows, int cols) {
    const std::int64_t p = static_cast<std::int64_t>(width) * rows;
    const std::int64_t q = static_cast<std::int64_t>(height) * cols;
    num = std::max(p, q);
    den = std::min(p, q);
  }
  bool operator<(const AspectDeviation& o) const {
    return static_cast<Int128>(num) * o.den <
           static_cast<Int128>(o.num) * den;
  }
  bool operator==(const AspectDeviation& o) const {
    return static_cast<Int128>(num) * o.den ==
           static_cast<Int128>(o.num) * den;
  }
};

TilePlan make_plan(int width, int height, int rows, int cols, int cell_size) {
  TilePlan plan;
  plan.grid_rows = rows;
  plan.grid_cols = cols;
  plan.cell_size = cell_size;
  plan.resized_width = cols * cell_size;
  plan.resized_height = rows * cell_size;
  plan.thumbnail = rows * cols > 1;
  plan.score = grid_score(width, height, rows, cols);
  return plan;
}

void check_plan(const TilePlan& plan) {
  if (plan.grid_rows < 1 || plan.grid_cols < 1 || plan.cell_size < 1 ||
      plan.resized_width != plan.grid_cols * plan.cell_size ||
      plan.resized_height != plan.grid_rows * plan.cell_size) {
    throw DomainError("inconsistent tile plan");
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xFF),
                                 static_cast<char>((v >> 8) & 0xFF),
                                 static_cast<char>((v >> 16) & 0xFF),
                                 static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

int ideal_slice_count(int width, int height, int max_slices, int cell_size) {
  const std::int64_t area = static_cast<std::int64_t>(width) * height;
  const std::int64_t cell = static_cast<std::int64_t>(cell_size) * cell_size;
  const std::int64_t ideal = (area + cell - 1) / cell;
  return static_cast<int>(std::min<std::int64_t>(ideal, max_slices));
}

double grid_score(int width, int height, int rows, int cols) {
  const double ratio = (static_cast<double>(width) * rows) /
                       (static_cast<double>(height) * cols);
  return -std::abs(std::log(ratio));
}

TilePlan plan_tiles(int width, int height, int max_slices, int cell_size) {
  if (width <= 0 || height <= 0) {
    throw DomainError("image dimensions must be positive");
  }
  if (max_slices < 1 || max_slices > 9) {
    throw DomainError("max_slices must be in 1..9");
  }
  if (cell_size <= 0) throw DomainError("cell_size must be positive");

  const int ideal = ideal_slice_count(width, height, max_slices, cell_size);
  if (ideal <= 1) return make_plan(width, height, 1, 1, cell_size);

  int best_rows = 0;
  int best_cols = 0;
  std::optional<AspectDeviation> best;
  // Ascending cell count then ascending rows, so a strict improvement test
  // implements the tie-break.
  for (int count = std::max(1, ideal - 1);
       count <= std::min(max_slices, ideal + 1); ++count) {
    for (int rows = 1; rows <= count; ++rows) {
      if (count % rows != 0) continue;
      const int cols = count / rows;
      const AspectDeviation dev(width, height, rows, cols);
      if (!best || dev < *best) {
        best = dev;
        best_rows = rows;
        best_cols = cols;
      }
    }
  }
  return make_plan(width, height, best_rows, best_cols, cell_size);
}

ResizeGeometry resize_geometry(int width, int height, const TilePlan& plan) {
  if (width <= 0 || height <= 0) {
    throw DomainError("image dimensions must be positive");
  }
  check_plan(plan);
  const double sx = static_cast<double>(plan.resized_width) / width;
  const double sy = static_cast<double>(plan.resized_height) / height;
  ResizeGeometry g;
  if (sx <= sy) {
    g.scaled_width = plan.resized_width;
    g.scaled_height = std::clamp(static_cast<int>(std::lround(sx * height)), 1,
                                 plan.resized_height);
  } else {
    g.scaled_height = plan.resized_height;
    g.scaled_width = std::clamp(static_cast<int>(std::lround(sy * width)), 1,
                                plan.resized_width);
  }
  g.pad_x = (plan.resized_width - g.scaled_width) / 2;
  g.pad_y = (plan.resized_height - g.scaled_height) / 2;
  return g;
}

PixelImage::PixelImage(int w, int h, std::uint8_t fill)
    : width(w),
      height(h),
      data(static_cast<size_t>(w) * h * kChannels, fill) {}

PixelImage bilinear_resize(const PixelImage& image, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) {
    throw DomainError("output dimensions must be positive");
  }
  if (image.width <= 0 || image.height <= 0) {
    throw DomainError("input image is empty");
  }
  if (image.data.size() !=
      static_cast<size_t>(image.width) * image.height * PixelImage::kChannels) {
    throw DomainError("pixel buffer size does not match dimensions");
  }
  if (out_w == image.width && out_h == image.height) return image;

  struct Tap {
    int lo;
    int hi;
    double frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int d = 0; d < out; ++d) {
      double s = (d + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const int lo = static_cast<int>(std::floor(s));
      t[static_cast<size_t>(d)] = {lo, std::min(lo + 1, in - 1), s - lo};
    }
    return t;
  };
  const auto xt = taps(image.width, out_w);
  const auto yt = taps(image.height, out_h);

  PixelImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const Tap& ty = yt[static_cast<size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      const Tap& tx = xt[static_cast<size_t>(x)];
      for (int c = 0; c < PixelImage::kChannels; ++c) {
        const double top = image.at(tx.lo, ty.lo, c) * (1.0 - tx.frac) +
                           image.at(tx.hi, ty.lo, c) * tx.frac;
        const double bottom = image.at(tx.lo, ty.hi, c) * (1.0 - tx.frac) +
                              image.at(tx.hi, ty.hi, c) * tx.frac;
        out.at(x, y, c) = to_byte(top * (1.0 - ty.frac) + bottom * ty.frac);
      }
    }
  }
  return out;
}

SlicedImage slice_image(const PixelImage& image, const TilePlan& plan) {
  SlicedImage result;
  result.plan = plan;
  result.geometry = resize_geometry(image.width, image.height, plan);
  const ResizeGeometry& g = result.geometry;

  const PixelImage scaled =
      bilinear_resize(image, g.scaled_width, g.scaled_height);
  PixelImage canvas(plan.resized_width, plan.resized_height, kPadGray);
  for (int y = 0; y < scaled.height; ++y) {
    std::memcpy(&canvas.at(g.pad_x, g.pad_y + y, 0), scaled.pixel(0, y),
                static_cast<size_t>(scaled.width) * PixelImage::kChannels);
  }

  const int cell = plan.cell_size;
  for (int r = 0; r < plan.grid_rows; ++r) {
    for (int c = 0; c < plan.grid_cols; ++c) {
      PixelImage tile(cell, cell);
      for (int y = 0; y < cell; ++y) {
        std::memcpy(&tile.at(0, y, 0), &canvas.at(c * cell, r * cell + y, 0),
                    static_cast<size_t>(cell) * PixelImage::kChannels);
      }
      result.cells.push_back(std::move(tile));
    }
  }

  if (plan.thumbnail) {
    TilePlan single;
    single.cell_size = cell;
    single.resized_width = cell;
    single.resized_height = cell;
    const ResizeGeometry tg = resize_geometry(image.width, image.height, single);
    const PixelImage small =
        bilinear_resize(image, tg.scaled_width, tg.scaled_height);
    PixelImage thumb(cell, cell, kPadGray);
    for (int y = 0; y < small.height; ++y) {
      std::memcpy(&thumb.at(tg.pad_x, tg.pad_y + y, 0), small.pixel(0, y),
                  static_cast<size_t>(small.width) * PixelImage::kChannels);
    }
    result.thumbnail = std::move(thumb);
  }
  return result;
}

PixelImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");

  auto next_token = [&]() {
    std::string token;
    int ch;
    while ((ch = in.get()) != EOF) {
      if (ch == '#') {
        while ((ch = in.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!token.empty()) break;
        continue;
      }
      token.push_back(static_cast<char>(ch));
    }
    return token;
  };

  if (next_token() != "P6") {
    throw FormatError("'" + path.string() + "' is not a binary PPM (P6)");
  }
  int w = 0;
  int h = 0;
  int maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw FormatError("'" + path.string() + "': malformed PPM header");
  }
  if (w <= 0 || h <= 0) {
    throw FormatError("'" + path.string() + "': non-positive PPM dimensions");
  }
  if (maxval != 255) {
    throw FormatError("'" + path.string() + "': only maxval 255 is supported");
  }
  PixelImage image(w, h);
  in.read(reinterpret_cast<char*>(image.data.data()),
          static_cast<std::streamsize>(image.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.data.size())) {
    throw FormatError("'" + path.string() + "': truncated PPM pixel data");
  }
  return image;
}

void write_ppm(const PixelImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image '" + path.string() + "'");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
  if (!out) throw IoError("error writing image '" + path.string() + "'");
}

EmbeddingGrid::EmbeddingGrid(int r, int c, int d, float fill)
    : rows(r),
      cols(c),
      dim(d),
      values(static_cast<size_t>(r) * c * d, fill) {}

EmbeddingGrid interpolate_pos_embed(const EmbeddingGrid& grid, int out_rows,
                                    int out_cols) {
  if (out_rows < 1 || out_cols < 1) {
    throw DomainError("output grid must be at least 1x1");
  }
  if (out_rows == grid.rows && out_cols == grid.cols) return grid;
  if ((grid.rows < 2 && out_rows != grid.rows) ||
      (grid.cols < 2 && out_cols != grid.cols)) {
    throw DomainError(
        "cannot interpolate along an axis with a single source position");
  }

  struct Tap {
    int lo;
    int hi;
    double frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<size_t>(out));
    for (int d = 0; d < out; ++d) {
      if (in == out) {
        t[static_cast<size_t>(d)] = {d, d, 0.0};
        continue;
      }
      const double s = out == 1 ? 0.0
                                : static_cast<double>(d) * (in - 1) / (out - 1);
      const int lo = std::min(static_cast<int>(std::floor(s)), in - 1);
      t[static_cast<size_t>(d)] = {lo, std::min(lo + 1, in - 1), s - lo};
    }
    return t;
  };
  const auto rt = taps(grid.rows, out_rows);
  const auto ct = taps(grid.cols, out_cols);

  EmbeddingGrid out(out_rows, out_cols, grid.dim);
  for (int r = 0; r < out_rows; ++r) {
    const Tap& tr = rt[static_cast<size_t>(r)];
    for (int c = 0; c < out_cols; ++c) {
      const Tap& tc = ct[static_cast<size_t>(c)];
      for (int k = 0; k < grid.dim; ++k) {
        const double top = grid.at(tr.lo, tc.lo, k) * (1.0 - tc.frac) +
                           grid.at(tr.lo, tc.hi, k) * tc.frac;
        const double bottom = grid.at(tr.hi, tc.lo, k) * (1.0 - tc.frac) +
                              grid.at(tr.hi, tc.hi, k) * tc.frac;
        out.at(r, c, k) =
            static_cast<float>(top * (1.0 - tr.frac) + bottom * tr.frac);
      }
    }
  }
  return out;
}

void write_grid(const EmbeddingGrid& grid, const std::filesystem::path& path,
                std::string_view magic) {
  if (magic.size() != 4) throw DomainError("grid magic must be 4 bytes");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write grid '" + path.string() + "'");
  out.write(magic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(grid.rows));
  put_u32(out, static_cast<std::uint32_t>(grid.cols));
  put_u32(out, static_cast<std::uint32_t>(grid.dim));
  for (float v : grid.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  if (!out) throw IoError("error writing grid '" + path.string() + "'");
}

EmbeddingGrid read_grid(const std::filesystem::path& path,
                        std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open grid '" + path.string() + "'");
  std::array<char, 4> head{};
  in.read(head.data(), 4);
  if (!in || std::string_view(head.data(), 4) != magic) {
    throw FormatError("'" + path.string() + "': bad magic, expected " +
                      std::string(magic));
  }
  const auto rows = get_u32(in);
  const auto cols = get_u32(in);
  const auto dim = get_u32(in);
  if (!in) throw FormatError("'" + path.string() + "': truncated header");
  const std::uint64_t count =
      static_cast<std::uint64_t>(rows) * cols * dim;
  if (count > (std::uint64_t{1} << 32)) {
    throw FormatError("'" + path.string() + "': implausible grid size");
  }
  EmbeddingGrid grid(static_cast<int>(rows), static_cast<int>(cols),
                     static_cast<int>(dim));
  for (float& v : grid.values) {
    const std::uint32_t bits = get_u32(in);
    std::memcpy(&v, &bits, 4);
  }
  if (!in) throw FormatError("'" + path.string() + "': truncated values");
  return grid;
}

}  // namespace capypipe

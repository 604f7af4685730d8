#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "irisswap/error.hpp"

namespace irisswap {

inline constexpr int kDefaultFrameWidth = 320;
inline constexpr int kDefaultFrameHeight = 240;
inline constexpr int kMinPipelineFrameSide = 32;

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

inline double distance(PixelPoint a, PixelPoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// 8-bit grayscale frame, row-major.
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height), pixels_(checked_count(width, height), fill) {}

  GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_count(width, height))
      throw Error(ErrorCode::DimensionMismatch, "pixel count does not match width x height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  /// Pipeline stages refuse frames smaller than 32x32.
  void require_pipeline_frame() const {
    if (width_ < kMinPipelineFrameSide || height_ < kMinPipelineFrameSide)
      throw Error(ErrorCode::DegenerateFrame,
                  "frame " + std::to_string(width_) + "x" + std::to_string(height_) + " below 32x32");
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static std::size_t checked_count(int width, int height) {
    if (width < 0 || height < 0) throw Error(ErrorCode::DimensionMismatch, "negative image dimension");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

namespace detail {

// Reads one whitespace/comment-delimited header token from a PGM stream.
inline std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

inline int pgm_int(std::istream& in, const char* field) {
  std::string tok = pgm_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char ch) { return ch >= '0' && ch <= '9'; }) ||
      tok.size() > 9)
    throw Error(ErrorCode::MalformedHeader, std::string("bad ") + field + " '" + tok + "'");
  return std::stoi(tok);
}

}  // namespace detail

inline GrayImage read_pgm(std::istream& in, const std::string& name = "<stream>") {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5')
    throw Error(ErrorCode::MalformedHeader, name + ": not a binary PGM (P5)");
  int w = detail::pgm_int(in, "width");
  int h = detail::pgm_int(in, "height");
  int maxval = detail::pgm_int(in, "maxval");
  // pgm_token consumed exactly one whitespace byte after maxval
  if (maxval != 255) throw Error(ErrorCode::UnsupportedMaxval, name + ": maxval " + std::to_string(maxval));
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (static_cast<std::size_t>(in.gcount()) != px.size())
    throw Error(ErrorCode::TruncatedPayload, name + ": expected " + std::to_string(px.size()) + " bytes, got " +
                                                 std::to_string(in.gcount()));
  return GrayImage(w, h, std::move(px));
}

inline GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return read_pgm(in, path.string());
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  auto px = img.pixels();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  write_pgm(out, img);
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

/// Bilinear blend of the four pixels around p. Exact at integer coordinates.
/// Coordinates outside [0, w-1] x [0, h-1] are an error, never clamped.
inline double bilinear_sample(const GrayImage& img, PixelPoint p) {
  const int w = img.width();
  const int h = img.height();
  if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= w - 1 && p.y <= h - 1))
    throw Error(ErrorCode::OutOfBounds, "sample (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
  int x0 = std::min(static_cast<int>(p.x), std::max(w - 2, 0));
  int y0 = std::min(static_cast<int>(p.y), std::max(h - 2, 0));
  const double fx = p.x - x0;
  const double fy = p.y - y0;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
  const double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

namespace detail {

// bilinear_sample without the bounds check; caller guarantees p is inside.
inline double bilinear_unchecked(const GrayImage& img, double x, double y) noexcept {
  const int w = img.width();
  const int x0 = std::min(static_cast<int>(x), w - 2);
  const int y0 = std::min(static_cast<int>(y), img.height() - 2);
  const double fx = x - x0;
  const double fy = y - y0;
  const std::uint8_t* row0 = img.pixels().data() + std::size_t(y0) * w + x0;
  const std::uint8_t* row1 = row0 + w;
  const double top = row0[0] + (row0[1] - row0[0]) * fx;
  const double bot = row1[0] + (row1[1] - row1[0]) * fx;
  return top + (bot - top) * fy;
}

}  // namespace detail

inline bool in_sample_bounds(const GrayImage& img, PixelPoint p) noexcept {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= img.width() - 1 && p.y <= img.height() - 1;
}

inline std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace irisswap

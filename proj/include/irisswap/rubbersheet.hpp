#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <vector>

#include "irisswap/detail/binary_io.hpp"
#include "irisswap/error.hpp"
#include "irisswap/imaging.hpp"
#include "irisswap/segmentation.hpp"

namespace irisswap {

inline constexpr int kDefaultRadialRes = 64;
inline constexpr int kDefaultAngularRes = 512;

/// Normalized iris texture: row i is normalized radius i/(radial_res-1)
/// (0 = pupil boundary, 1 = limbus), column j is angle 2*pi*j/angular_res.
class PolarTexture {
 public:
  PolarTexture() = default;
  PolarTexture(int radial_res, int angular_res)
      : radial_res_(radial_res),
        angular_res_(angular_res),
        intensities_(std::size_t(radial_res) * angular_res, 0.0f),
        valid_(std::size_t(radial_res) * angular_res, 1) {
    if (radial_res < 2 || angular_res < 2)
      throw Error(ErrorCode::TextureTooSmall, "polar texture needs at least 2x2 cells");
  }

  int radial_res() const noexcept { return radial_res_; }
  int angular_res() const noexcept { return angular_res_; }

  float value(int r, int a) const { return intensities_[idx(r, a)]; }
  float& value(int r, int a) { return intensities_[idx(r, a)]; }
  bool valid(int r, int a) const { return valid_[idx(r, a)] != 0; }
  void set_valid(int r, int a, bool v) { valid_[idx(r, a)] = v ? 1 : 0; }

  std::size_t valid_count() const noexcept {
    std::size_t n = 0;
    for (auto v : valid_) n += v;
    return n;
  }

  friend bool operator==(const PolarTexture&, const PolarTexture&) = default;

 private:
  std::size_t idx(int r, int a) const noexcept { return std::size_t(r) * angular_res_ + a; }

  int radial_res_ = 0;
  int angular_res_ = 0;
  std::vector<float> intensities_;
  std::vector<std::uint8_t> valid_;
};

namespace detail {

// Distance from the pupil center to the limbus along direction (ux, uy).
inline double limbus_distance_along_ray(const IrisGeometry& g, double ux, double uy) {
  const double ox = g.pupil.center.x - g.limbus.center.x;
  const double oy = g.pupil.center.y - g.limbus.center.y;
  const double b = ux * ox + uy * oy;
  const double c = ox * ox + oy * oy - g.limbus.radius * g.limbus.radius;
  return -b + std::sqrt(std::max(0.0, b * b - c));
}

// Bilinear texture lookup with angular wraparound; nullopt when any of the
// contributing cells is invalid.
inline std::optional<double> sample_texture(const PolarTexture& tex, double row, double col) {
  const int R = tex.radial_res();
  const int A = tex.angular_res();
  row = std::clamp(row, 0.0, double(R - 1));
  col = std::fmod(col, double(A));
  if (col < 0) col += A;
  int r0 = std::min(static_cast<int>(row), R - 2);
  int c0 = static_cast<int>(col);
  if (c0 >= A) c0 = A - 1;
  const int r1 = r0 + 1;
  const int c1 = (c0 + 1) % A;
  const double fr = row - r0;
  const double fc = col - c0;
  if ((fr < 1.0 && (!tex.valid(r0, c0) || (fc > 0 && !tex.valid(r0, c1)))) ||
      (fr > 0.0 && (!tex.valid(r1, c0) || (fc > 0 && !tex.valid(r1, c1)))))
    return std::nullopt;
  const double top = tex.value(r0, c0) * (1.0 - fc) + tex.value(r0, c1) * fc;
  const double bot = tex.value(r1, c0) * (1.0 - fc) + tex.value(r1, c1) * fc;
  return top * (1.0 - fr) + bot * fr;
}

}  // namespace detail

/// Annulus pixel -> (normalized radius, angle) under the inverse map: the
/// radius is measured along the ray from the pupil center,
/// rhat = (d - d_pupil) / (d_limbus - d_pupil).
struct PolarCoordinate {
  double rhat;
  double theta;  // [0, 2*pi)
};

inline PolarCoordinate polar_coordinate(const IrisGeometry& g, double x, double y) {
  const double dx = x - g.pupil.center.x;
  const double dy = y - g.pupil.center.y;
  const double d = std::hypot(dx, dy);
  double theta = std::atan2(dy, dx);
  if (theta < 0) theta += 2.0 * std::numbers::pi;
  if (d == 0.0) return {0.0, 0.0};
  const double d_l = detail::limbus_distance_along_ray(g, dx / d, dy / d);
  const double span = d_l - g.pupil.radius;
  return {span > 0 ? (d - g.pupil.radius) / span : 0.0, theta};
}

/// Homogeneous rubber sheet: the sample for (rhat, theta) is
/// (1-rhat)*P(theta) + rhat*L(theta). Cells whose sample falls outside the
/// frame are marked invalid.
inline PolarTexture unwrap(const GrayImage& img, const IrisGeometry& geom, int radial_res = kDefaultRadialRes,
                           int angular_res = kDefaultAngularRes) {
  validate_geometry(geom);
  if (geom.frame_width != img.width() || geom.frame_height != img.height())
    throw Error(ErrorCode::InvalidGeometry, "geometry frame size does not match image");
  PolarTexture tex(radial_res, angular_res);
  for (int a = 0; a < angular_res; ++a) {
    const double th = 2.0 * std::numbers::pi * a / angular_res;
    const PixelPoint p = geom.pupil.point_at(th);
    const PixelPoint l = geom.limbus.point_at(th);
    for (int r = 0; r < radial_res; ++r) {
      const double rh = double(r) / (radial_res - 1);
      const PixelPoint s{(1.0 - rh) * p.x + rh * l.x, (1.0 - rh) * p.y + rh * l.y};
      if (in_sample_bounds(img, s)) {
        tex.value(r, a) = static_cast<float>(bilinear_sample(img, s));
      } else {
        tex.value(r, a) = 0.0f;
        tex.set_valid(r, a, false);
      }
    }
  }
  return tex;
}

struct TextureStats {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

inline TextureStats texture_stats(const PolarTexture& tex) {
  TextureStats s;
  double sum = 0.0, sq = 0.0;
  s.min = 1e300;
  s.max = -1e300;
  for (int r = 0; r < tex.radial_res(); ++r) {
    for (int a = 0; a < tex.angular_res(); ++a) {
      if (!tex.valid(r, a)) continue;
      const double v = tex.value(r, a);
      sum += v;
      sq += v * v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      ++s.count;
    }
  }
  if (s.count == 0) return TextureStats{};
  s.mean = sum / s.count;
  s.stddev = std::sqrt(std::max(0.0, sq / s.count - s.mean * s.mean));
  return s;
}

/// Affine remap of the valid cells to the target mean and standard deviation,
/// clamped to [0, 255].
inline PolarTexture match_intensity(const PolarTexture& victim, double target_mean, double target_std) {
  const TextureStats s = texture_stats(victim);
  if (s.count < 2 || s.stddev <= 1e-9)
    throw Error(ErrorCode::DegenerateTexture, "texture has no intensity variance");
  const double gain = target_std / s.stddev;
  PolarTexture out = victim;
  for (int r = 0; r < out.radial_res(); ++r)
    for (int a = 0; a < out.angular_res(); ++a)
      if (out.valid(r, a))
        out.value(r, a) = static_cast<float>(std::clamp(target_mean + (victim.value(r, a) - s.mean) * gain, 0.0, 255.0));
  return out;
}

struct SwapOptions {
  bool match_intensity = false;
};

struct SwapResult {
  GrayImage image;
  std::size_t annulus_pixels = 0;
  std::size_t fallback_pixels = 0;  // left as the attacker's original (invalid victim cells)

  double fill_ratio() const noexcept {
    return annulus_pixels ? double(annulus_pixels - fallback_pixels) / annulus_pixels : 1.0;
  }
};

/// Inverse rubber sheet: every attacker pixel inside the annulus mask takes
/// the victim texture value at its (rhat, theta); everything else is copied
/// through untouched.
inline SwapResult swap_iris_detailed(const GrayImage& attacker, const IrisGeometry& geom, const PolarTexture& victim,
                                     const SwapOptions& opts = {}) {
  validate_geometry(geom);
  if (geom.frame_width != attacker.width() || geom.frame_height != attacker.height())
    throw Error(ErrorCode::InvalidGeometry, "geometry frame size does not match image");

  std::optional<PolarTexture> matched;
  if (opts.match_intensity) {
    const TextureStats own = texture_stats(unwrap(attacker, geom, victim.radial_res(), victim.angular_res()));
    matched = match_intensity(victim, own.mean, own.stddev);
  }
  const PolarTexture& tex = matched ? *matched : victim;

  SwapResult out{attacker};
  const double R1 = tex.radial_res() - 1;
  const double A = tex.angular_res();
  const int x_lo = std::max(0, static_cast<int>(std::floor(geom.limbus.center.x - geom.limbus.radius)));
  const int x_hi = std::min(attacker.width() - 1, static_cast<int>(std::ceil(geom.limbus.center.x + geom.limbus.radius)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(geom.limbus.center.y - geom.limbus.radius)));
  const int y_hi = std::min(attacker.height() - 1, static_cast<int>(std::ceil(geom.limbus.center.y + geom.limbus.radius)));
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      if (!geom.limbus.contains(x, y) || geom.pupil.contains(x, y)) continue;
      ++out.annulus_pixels;
      const PolarCoordinate pc = polar_coordinate(geom, x, y);
      const auto v = detail::sample_texture(tex, pc.rhat * R1, pc.theta / (2.0 * std::numbers::pi) * A);
      if (!v) {
        ++out.fallback_pixels;
        continue;
      }
      out.image.at(x, y) = to_pixel(*v);
    }
  }
  return out;
}

inline GrayImage swap_iris(const GrayImage& attacker, const IrisGeometry& geom, const PolarTexture& victim,
                           const SwapOptions& opts = {}) {
  return swap_iris_detailed(attacker, geom, victim, opts).image;
}

// Texture file: "IRPT" | u32 version | u32 radial_res | u32 angular_res |
// float32 intensities (row-major) | validity bits packed LSB-first.
inline constexpr std::uint32_t kTextureMagic = 0x54505249;  // "IRPT" little-endian

inline std::vector<std::uint8_t> encode_texture_file(const PolarTexture& tex) {
  std::vector<std::uint8_t> out;
  detail::put_u32(out, kTextureMagic);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(tex.radial_res()));
  detail::put_u32(out, static_cast<std::uint32_t>(tex.angular_res()));
  for (int r = 0; r < tex.radial_res(); ++r)
    for (int a = 0; a < tex.angular_res(); ++a) detail::put_f32(out, tex.value(r, a));
  std::uint8_t byte = 0;
  int bit = 0;
  for (int r = 0; r < tex.radial_res(); ++r) {
    for (int a = 0; a < tex.angular_res(); ++a) {
      if (tex.valid(r, a)) byte |= std::uint8_t(1u << bit);
      if (++bit == 8) {
        out.push_back(byte);
        byte = 0;
        bit = 0;
      }
    }
  }
  if (bit) out.push_back(byte);
  return out;
}

inline PolarTexture decode_texture_file(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "texture");
  if (in.u32() != kTextureMagic) throw Error(ErrorCode::MalformedFile, "texture: bad magic");
  if (in.u32() != 1) throw Error(ErrorCode::MalformedFile, "texture: unsupported version");
  const auto R = in.u32();
  const auto A = in.u32();
  if (R < 2 || A < 2 || R > 4096 || A > 65536) throw Error(ErrorCode::MalformedFile, "texture: bad dimensions");
  PolarTexture tex(static_cast<int>(R), static_cast<int>(A));
  for (std::uint32_t r = 0; r < R; ++r)
    for (std::uint32_t a = 0; a < A; ++a) tex.value(r, a) = in.f32();
  std::uint8_t byte = 0;
  int bit = 8;
  for (std::uint32_t r = 0; r < R; ++r) {
    for (std::uint32_t a = 0; a < A; ++a) {
      if (bit == 8) {
        byte = in.u8();
        bit = 0;
      }
      tex.set_valid(r, a, (byte >> bit++) & 1u);
    }
  }
  return tex;
}

inline void save_texture(const PolarTexture& tex, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_texture_file(tex));
}

inline PolarTexture load_texture(const std::filesystem::path& path) {
  return decode_texture_file(detail::read_file_bytes(path));
}

}  // namespace irisswap

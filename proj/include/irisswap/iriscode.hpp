#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <vector>

#include "irisswap/detail/binary_io.hpp"
#include "irisswap/error.hpp"
#include "irisswap/rubbersheet.hpp"

namespace irisswap {

inline constexpr double kDefaultAuthThreshold = 0.37;
inline constexpr int kDefaultMaxShift = 8;
inline constexpr double kMinUsableFraction = 0.25;

struct GaborParams {
  int bands = 8;
  int angular_positions = 128;
  double wavelength = 18.0;   // in angular texture samples
  double sigma_ratio = 0.5;   // angular envelope sigma / wavelength
  double min_magnitude = 1e-3;  // fraction of the texture's dynamic range
};

/// Packed bit vector (LSB-first within 64-bit words).
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t n) : size_(n), words_((n + 63) / 64, 0) {}

  std::size_t size() const noexcept { return size_; }
  bool get(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool v) noexcept {
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    if (v)
      words_[i >> 6] |= m;
    else
      words_[i >> 6] &= ~m;
  }
  std::size_t popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += std::popcount(w);
    return n;
  }
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Two phase bits per (band, angular position). Bit 2*(band*positions + k)
/// is Re >= 0, the following bit is Im >= 0.
struct IrisTemplate {
  int bands = 0;
  int angular_positions = 0;
  BitVector code;
  BitVector mask;  // true = usable

  std::size_t bit_count() const noexcept { return 2u * std::size_t(bands) * angular_positions; }
  double usable_fraction() const noexcept {
    return bit_count() ? double(mask.popcount()) / bit_count() : 0.0;
  }

  friend bool operator==(const IrisTemplate&, const IrisTemplate&) = default;
};

namespace detail {

struct GaborKernel {
  int half_rows = 0;
  int half_cols = 0;
  std::vector<double> re;  // (2*half_rows+1) x (2*half_cols+1)
  std::vector<double> im;
};

// Complex Gabor oriented along the angular axis, envelope normalized to unit
// sum, real part made exactly zero-mean over its support.
inline GaborKernel make_gabor(const GaborParams& p, int radial_res) {
  GaborKernel k;
  const double sigma_c = p.sigma_ratio * p.wavelength;
  const double sigma_r = std::max(1.0, 0.25 * double(radial_res) / p.bands);  // quarter band height
  k.half_cols = static_cast<int>(std::ceil(3.0 * sigma_c));
  k.half_rows = static_cast<int>(std::ceil(2.0 * sigma_r));
  const int nr = 2 * k.half_rows + 1;
  const int nc = 2 * k.half_cols + 1;
  std::vector<double> env(std::size_t(nr) * nc);
  k.re.resize(env.size());
  k.im.resize(env.size());
  double env_sum = 0.0;
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nc; ++j) {
      const double dr = i - k.half_rows;
      const double dc = j - k.half_cols;
      const double e = std::exp(-0.5 * (dr * dr / (sigma_r * sigma_r) + dc * dc / (sigma_c * sigma_c)));
      env[std::size_t(i) * nc + j] = e;
      env_sum += e;
    }
  }
  double re_sum = 0.0;
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nc; ++j) {
      const std::size_t q = std::size_t(i) * nc + j;
      const double ph = 2.0 * std::numbers::pi * (j - k.half_cols) / p.wavelength;
      env[q] /= env_sum;
      k.re[q] = env[q] * std::cos(ph);
      k.im[q] = env[q] * std::sin(ph);
      re_sum += k.re[q];
    }
  }
  for (std::size_t q = 0; q < env.size(); ++q) k.re[q] -= re_sum * env[q];
  return k;
}

}  // namespace detail

/// Quadrant-phase iris code from a normalized texture. Rows outside the
/// texture are excluded from the filter support (no radial wrap); angles wrap.
inline IrisTemplate encode(const PolarTexture& tex, const GaborParams& params = {}) {
  const int R = tex.radial_res();
  const int A = tex.angular_res();
  if (params.bands < 1 || params.angular_positions < 1 || params.wavelength <= 0.0)
    throw Error(ErrorCode::TextureTooSmall, "invalid Gabor parameters");
  const auto kernel = detail::make_gabor(params, R);
  if (A < 2 * kernel.half_cols + 1 || R < params.bands || A < params.angular_positions)
    throw Error(ErrorCode::TextureTooSmall, "texture " + std::to_string(R) + "x" + std::to_string(A) +
                                                " smaller than the filter footprint");

  const TextureStats stats = texture_stats(tex);
  const double min_mag = std::max(1e-9, params.min_magnitude * (stats.max - stats.min));
  const int nc = 2 * kernel.half_cols + 1;

  IrisTemplate t;
  t.bands = params.bands;
  t.angular_positions = params.angular_positions;
  t.code = BitVector(t.bit_count());
  t.mask = BitVector(t.bit_count());
  for (int b = 0; b < params.bands; ++b) {
    const int row_c = static_cast<int>(std::floor((b + 0.5) * R / params.bands));
    for (int k = 0; k < params.angular_positions; ++k) {
      const int col_c = static_cast<int>(std::floor(double(k) * A / params.angular_positions));
      double re = 0.0, im = 0.0;
      bool usable = true;
      for (int i = -kernel.half_rows; i <= kernel.half_rows && usable; ++i) {
        const int r = row_c + i;
        if (r < 0 || r >= R) continue;
        for (int j = -kernel.half_cols; j <= kernel.half_cols; ++j) {
          const int a = ((col_c + j) % A + A) % A;
          if (!tex.valid(r, a)) {
            usable = false;
            break;
          }
          const std::size_t q = std::size_t(i + kernel.half_rows) * nc + (j + kernel.half_cols);
          re += kernel.re[q] * tex.value(r, a);
          im += kernel.im[q] * tex.value(r, a);
        }
      }
      const std::size_t bit = 2u * (std::size_t(b) * params.angular_positions + k);
      t.code.set(bit, re >= 0.0);
      t.code.set(bit + 1, im >= 0.0);
      const bool ok = usable && std::hypot(re, im) > min_mag;
      t.mask.set(bit, ok);
      t.mask.set(bit + 1, ok);
    }
  }
  return t;
}

/// Rotates every band by `shift` angular positions (positive = towards higher
/// angles), i.e. the code of a texture whose columns were rolled by `shift`.
inline BitVector rotate_bits(const BitVector& bits, int bands, int positions, int shift) {
  BitVector out(bits.size());
  for (int b = 0; b < bands; ++b) {
    for (int k = 0; k < positions; ++k) {
      const int dst = ((k + shift) % positions + positions) % positions;
      const std::size_t s = 2u * (std::size_t(b) * positions + k);
      const std::size_t d = 2u * (std::size_t(b) * positions + dst);
      out.set(d, bits.get(s));
      out.set(d + 1, bits.get(s + 1));
    }
  }
  return out;
}

/// Minimum fractional Hamming distance over shifts of b in [-max_shift, max_shift],
/// counting only bits usable in both templates.
inline double hamming_distance(const IrisTemplate& a, const IrisTemplate& b, int max_shift = kDefaultMaxShift) {
  if (a.bands != b.bands || a.angular_positions != b.angular_positions)
    throw Error(ErrorCode::GeometryMismatch, "templates have different band/position layouts");
  const std::size_t total = a.bit_count();
  if (a.usable_fraction() < kMinUsableFraction || b.usable_fraction() < kMinUsableFraction)
    throw Error(ErrorCode::InsufficientMask, "template has fewer than 25% usable bits");
  max_shift = std::max(0, max_shift);
  double best = 2.0;
  const auto& aw = a.code.words();
  const auto& am = a.mask.words();
  for (int s = -max_shift; s <= max_shift; ++s) {
    const BitVector bc = rotate_bits(b.code, b.bands, b.angular_positions, s);
    const BitVector bm = rotate_bits(b.mask, b.bands, b.angular_positions, s);
    std::size_t diff = 0, joint = 0;
    for (std::size_t w = 0; w < aw.size(); ++w) {
      const std::uint64_t m = am[w] & bm.words()[w];
      joint += std::popcount(m);
      diff += std::popcount((aw[w] ^ bc.words()[w]) & m);
    }
    if (double(joint) < kMinUsableFraction * total) continue;
    best = std::min(best, double(diff) / double(joint));
  }
  if (best > 1.0) throw Error(ErrorCode::InsufficientMask, "no shift leaves 25% jointly usable bits");
  return best;
}

enum class AuthDecision { Accept, Reject };

struct AuthResult {
  AuthDecision decision = AuthDecision::Reject;
  double hd = 1.0;
  bool accepted() const noexcept { return decision == AuthDecision::Accept; }
};

inline AuthDecision decide(double hd, double threshold = kDefaultAuthThreshold) {
  return hd < threshold ? AuthDecision::Accept : AuthDecision::Reject;
}

inline AuthResult authenticate(const IrisTemplate& probe, const IrisTemplate& enrolled,
                               double threshold = kDefaultAuthThreshold, int max_shift = kDefaultMaxShift) {
  const double hd = hamming_distance(probe, enrolled, max_shift);
  return {decide(hd, threshold), hd};
}

// Template file: "IRTC" | u32 version | u32 bands | u32 positions |
// code bits then mask bits, each packed LSB-first into ceil(n/8) bytes.
inline constexpr std::uint32_t kTemplateMagic = 0x43545249;  // "IRTC"

inline std::vector<std::uint8_t> encode_template_file(const IrisTemplate& t) {
  std::vector<std::uint8_t> out;
  detail::put_u32(out, kTemplateMagic);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(t.bands));
  detail::put_u32(out, static_cast<std::uint32_t>(t.angular_positions));
  for (const BitVector* bits : {&t.code, &t.mask}) {
    for (std::size_t i = 0; i < bits->size(); i += 8) {
      std::uint8_t byte = 0;
      for (std::size_t j = 0; j < 8 && i + j < bits->size(); ++j)
        if (bits->get(i + j)) byte |= std::uint8_t(1u << j);
      out.push_back(byte);
    }
  }
  return out;
}

inline IrisTemplate decode_template_file(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "template");
  if (in.u32() != kTemplateMagic) throw Error(ErrorCode::MalformedFile, "template: bad magic");
  if (in.u32() != 1) throw Error(ErrorCode::MalformedFile, "template: unsupported version");
  IrisTemplate t;
  t.bands = static_cast<int>(in.u32());
  t.angular_positions = static_cast<int>(in.u32());
  if (t.bands < 1 || t.angular_positions < 1 || t.bands > 1024 || t.angular_positions > 65536)
    throw Error(ErrorCode::MalformedFile, "template: bad dimensions");
  t.code = BitVector(t.bit_count());
  t.mask = BitVector(t.bit_count());
  for (BitVector* bits : {&t.code, &t.mask}) {
    for (std::size_t i = 0; i < bits->size(); i += 8) {
      const std::uint8_t byte = in.u8();
      for (std::size_t j = 0; j < 8 && i + j < bits->size(); ++j) bits->set(i + j, (byte >> j) & 1u);
    }
  }
  if (in.remaining() != 0) throw Error(ErrorCode::MalformedFile, "template: trailing bytes");
  return t;
}

inline void save_template(const IrisTemplate& t, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_template_file(t));
}

inline IrisTemplate load_template(const std::filesystem::path& path) {
  return decode_template_file(detail::read_file_bytes(path));
}

}  // namespace irisswap

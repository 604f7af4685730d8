#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "irisswap/error.hpp"
#include "irisswap/imaging.hpp"

namespace irisswap {

struct Circle {
  PixelPoint center;
  double radius = 0.0;

  bool contains(double x, double y) const noexcept {
    return std::hypot(x - center.x, y - center.y) < radius;
  }
  PixelPoint point_at(double theta) const noexcept {
    return {center.x + radius * std::cos(theta), center.y + radius * std::sin(theta)};
  }
};

/// Pupil and limbus boundary circles of one frame.
struct IrisGeometry {
  Circle pupil;
  Circle limbus;
  int frame_width = kDefaultFrameWidth;
  int frame_height = kDefaultFrameHeight;
};

inline void validate_geometry(const IrisGeometry& g) {
  auto finite = [](const Circle& c) {
    return std::isfinite(c.center.x) && std::isfinite(c.center.y) && std::isfinite(c.radius);
  };
  if (!finite(g.pupil) || !finite(g.limbus)) throw Error(ErrorCode::InvalidGeometry, "non-finite circle");
  if (g.pupil.radius <= 0.0) throw Error(ErrorCode::InvalidGeometry, "pupil radius must be positive");
  if (g.pupil.radius >= g.limbus.radius) throw Error(ErrorCode::InvalidGeometry, "pupil radius >= limbus radius");
  if (distance(g.pupil.center, g.limbus.center) > 0.5 * g.limbus.radius)
    throw Error(ErrorCode::InvalidGeometry, "pupil and limbus centers too far apart");
  if (g.frame_width <= 0 || g.frame_height <= 0) throw Error(ErrorCode::InvalidGeometry, "empty frame");
}

/// Row-major iris-class mask (true = iris).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height) : width_(width), height_(height), bits_(std::size_t(width) * height, 0) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool at(int x, int y) const { return bits_[std::size_t(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[std::size_t(y) * width_ + x] = v ? 1 : 0; }

  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct SegmentationParams {
  double pupil_threshold = 60.0;  // intensity units out of 255
  int min_pupil_area = 100;
  double rmin_factor = 1.8;
  double rmax_factor = 3.5;
  double min_limbus_contrast = 4.0;  // smoothed intensity step per pixel of radius
  int center_search = 3;
  int coarse_angles = 64;
  int fine_angles = 128;
};

namespace detail {

struct Component {
  std::size_t area = 0;
  double sum_x = 0.0;
  double sum_y = 0.0;
};

// Largest 8-connected component of pixels darker than the threshold.
inline std::optional<Component> largest_dark_component(const GrayImage& img, double threshold) {
  const int w = img.width();
  const int h = img.height();
  std::vector<std::uint8_t> seen(std::size_t(w) * h, 0);
  std::vector<int> stack;
  std::optional<Component> best;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t i0 = std::size_t(y0) * w + x0;
      if (seen[i0] || img.at(x0, y0) >= threshold) continue;
      Component comp;
      seen[i0] = 1;
      stack.assign(1, static_cast<int>(i0));
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int x = idx % w;
        const int y = idx / w;
        comp.area += 1;
        comp.sum_x += x;
        comp.sum_y += y;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t ni = std::size_t(ny) * w + nx;
            if (seen[ni] || img.at(nx, ny) >= threshold) continue;
            seen[ni] = 1;
            stack.push_back(static_cast<int>(ni));
          }
        }
      }
      if (!best || comp.area > best->area) best = comp;
    }
  }
  return best;
}

// Algebraic (Kasa) least-squares circle fit.
inline std::optional<Circle> fit_circle(const std::vector<PixelPoint>& pts) {
  if (pts.size() < 3) return std::nullopt;
  double mx = 0, my = 0;
  for (auto p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= pts.size();
  my /= pts.size();
  double suu = 0, svv = 0, suv = 0, suuu = 0, svvv = 0, suvv = 0, svuu = 0;
  for (auto p : pts) {
    const double u = p.x - mx;
    const double v = p.y - my;
    suu += u * u;
    svv += v * v;
    suv += u * v;
    suuu += u * u * u;
    svvv += v * v * v;
    suvv += u * v * v;
    svuu += v * u * u;
  }
  const double det = suu * svv - suv * suv;
  if (std::abs(det) < 1e-12) return std::nullopt;
  const double b1 = 0.5 * (suuu + suvv);
  const double b2 = 0.5 * (svvv + svuu);
  const double uc = (b1 * svv - b2 * suv) / det;
  const double vc = (suu * b2 - suv * b1) / det;
  const double r2 = uc * uc + vc * vc + (suu + svv) / pts.size();
  return Circle{{uc + mx, vc + my}, std::sqrt(r2)};
}

// Sub-sample offset of a peak from three neighbouring values.
inline double parabolic_offset(double left, double mid, double right) {
  const double denom = left - 2.0 * mid + right;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace detail

/// Pupil = largest connected region darker than cfg.pupil_threshold, seeded
/// at its centroid with an equal-area radius, then refined by fitting a
/// circle to the strongest dark-to-bright step along 64 rays.
inline Circle detect_pupil(const GrayImage& img, const SegmentationParams& cfg = {}) {
  img.require_pipeline_frame();
  auto comp = detail::largest_dark_component(img, cfg.pupil_threshold);
  if (!comp || comp->area < static_cast<std::size_t>(cfg.min_pupil_area))
    throw Error(ErrorCode::NoPupilFound,
                "largest dark component has " + std::to_string(comp ? comp->area : 0) + " px");

  const PixelPoint centroid{comp->sum_x / comp->area, comp->sum_y / comp->area};
  const double r0 = std::sqrt(comp->area / std::numbers::pi);
  const Circle coarse{centroid, r0};

  constexpr int kRays = 64;
  constexpr double kStep = 0.25;
  const double r_lo = 0.5 * r0;
  const double r_hi = 1.5 * r0 + 3.0;
  const int n_steps = static_cast<int>((r_hi - r_lo) / kStep) + 1;
  std::vector<double> profile(n_steps);
  std::vector<PixelPoint> edges;
  edges.reserve(kRays);
  for (int k = 0; k < kRays; ++k) {
    const double th = 2.0 * std::numbers::pi * k / kRays;
    const double c = std::cos(th), s = std::sin(th);
    bool ok = true;
    for (int i = 0; i < n_steps && ok; ++i) {
      const double r = r_lo + i * kStep;
      const PixelPoint p{centroid.x + r * c, centroid.y + r * s};
      if (!in_sample_bounds(img, p)) {
        ok = false;
        break;
      }
      profile[i] = bilinear_sample(img, p);
    }
    if (!ok) continue;
    // derivative over one pixel span, centred between samples i and i+4
    int best = -1;
    double best_d = 0.0;
    std::vector<double> deriv(n_steps - 4);
    for (int i = 0; i + 4 < n_steps; ++i) {
      deriv[i] = profile[i + 4] - profile[i];
      if (deriv[i] > best_d) {
        best_d = deriv[i];
        best = i;
      }
    }
    if (best < 0) continue;
    double off = 0.0;
    if (best > 0 && best + 1 < static_cast<int>(deriv.size()))
      off = detail::parabolic_offset(deriv[best - 1], deriv[best], deriv[best + 1]);
    const double r_edge = r_lo + (best + 2 + off) * kStep;
    edges.push_back({centroid.x + r_edge * c, centroid.y + r_edge * s});
  }

  auto fitted = detail::fit_circle(edges);
  if (fitted) {
    // one trimming pass against outlier rays
    std::vector<PixelPoint> kept;
    for (auto p : edges)
      if (std::abs(distance(p, fitted->center) - fitted->radius) < 1.5) kept.push_back(p);
    if (kept.size() >= edges.size() / 2)
      if (auto refit = detail::fit_circle(kept)) fitted = refit;
  }
  if (!fitted || fitted->radius < 0.5 * r0 || fitted->radius > 1.5 * r0 ||
      distance(fitted->center, centroid) > 0.5 * r0)
    return coarse;
  return *fitted;
}

namespace detail {

struct LimbusCandidate {
  PixelPoint center;
  double radius = 0.0;
  double contrast = -1e300;
};

// Mean intensity on circles of radius r_first + i*dr about c, for the angle
// table given. Entries with fewer than half the samples inside the frame are NaN.
inline void circle_means(const GrayImage& img, PixelPoint c, double r_first, double dr, int n_radii,
                         const std::vector<std::array<double, 2>>& dirs, std::vector<double>& out) {
  out.assign(n_radii, std::numeric_limits<double>::quiet_NaN());
  const double r_last = r_first + (n_radii - 1) * dr;
  const bool inside = c.x - r_last >= 0.0 && c.y - r_last >= 0.0 && c.x + r_last <= img.width() - 1 &&
                      c.y + r_last <= img.height() - 1;
  for (int i = 0; i < n_radii; ++i) {
    const double r = r_first + i * dr;
    double sum = 0.0;
    if (inside) {
      for (const auto& d : dirs) sum += bilinear_unchecked(img, c.x + r * d[0], c.y + r * d[1]);
      out[i] = sum / dirs.size();
      continue;
    }
    int n = 0;
    for (const auto& d : dirs) {
      const PixelPoint p{c.x + r * d[0], c.y + r * d[1]};
      if (!in_sample_bounds(img, p)) continue;
      sum += bilinear_sample(img, p);
      ++n;
    }
    if (2 * n >= static_cast<int>(dirs.size())) out[i] = sum / n;
  }
}

inline std::vector<std::array<double, 2>> direction_table(int n) {
  std::vector<std::array<double, 2>> dirs(n);
  for (int k = 0; k < n; ++k) {
    const double th = 2.0 * std::numbers::pi * (k + 0.5) / n;
    dirs[k] = {std::cos(th), std::sin(th)};
  }
  return dirs;
}

// Best smoothed radial step for one center. The derivative between radius
// i and i+1 is smoothed by a 3-tap boxcar; the returned radius sits on the
// peak with parabolic sub-step interpolation.
inline LimbusCandidate best_radius(const std::vector<double>& means, PixelPoint c, double r_first, double dr) {
  LimbusCandidate best;
  best.center = c;
  const int n = static_cast<int>(means.size());
  if (n < 5) return best;
  std::vector<double> d(n - 1, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i + 1 < n; ++i) d[i] = (means[i + 1] - means[i]) / dr;
  std::vector<double> s(d.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i + 1 < d.size(); ++i) s[i] = (d[i - 1] + d[i] + d[i + 1]) / 3.0;
  int bi = -1;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (std::isnan(s[i])) continue;
    if (bi < 0 || s[i] > s[bi]) bi = static_cast<int>(i);
  }
  if (bi < 0) return best;
  double off = 0.0;
  if (bi > 1 && bi + 2 < static_cast<int>(s.size()) && !std::isnan(s[bi - 1]) && !std::isnan(s[bi + 1]))
    off = parabolic_offset(s[bi - 1], s[bi], s[bi + 1]);
  best.radius = r_first + (bi + 0.5 + off) * dr;
  best.contrast = s[bi];
  return best;
}

}  // namespace detail

/// Limbus = circle maximizing the smoothed radial derivative of the mean
/// circle intensity (the strongest dark-to-bright transition), searched over
/// centers within cfg.center_search px of the pupil center and radii in
/// [rmin_factor, rmax_factor] x pupil radius. A coarse integer-grid pass is
/// followed by a half-pixel center refinement with more angles.
inline Circle detect_limbus(const GrayImage& img, const Circle& pupil, const SegmentationParams& cfg = {}) {
  img.require_pipeline_frame();
  if (!(pupil.radius > 0.0)) throw Error(ErrorCode::InvalidGeometry, "pupil radius must be positive");
  const double r_min = cfg.rmin_factor * pupil.radius;
  const double r_max = cfg.rmax_factor * pupil.radius;
  const int n_radii = static_cast<int>(std::floor(r_max - r_min)) + 1;
  if (n_radii < 6) throw Error(ErrorCode::NoLimbusFound, "limbus search band too narrow");

  const auto coarse_dirs = detail::direction_table(cfg.coarse_angles);
  const auto fine_dirs = detail::direction_table(cfg.fine_angles);
  std::vector<double> means;

  detail::LimbusCandidate best;
  for (int dy = -cfg.center_search; dy <= cfg.center_search; ++dy) {
    for (int dx = -cfg.center_search; dx <= cfg.center_search; ++dx) {
      const PixelPoint c{pupil.center.x + dx, pupil.center.y + dy};
      detail::circle_means(img, c, r_min, 1.0, n_radii, coarse_dirs, means);
      auto cand = detail::best_radius(means, c, r_min, 1.0);
      if (cand.contrast > best.contrast) best = cand;
    }
  }
  if (best.contrast < cfg.min_limbus_contrast)
    throw Error(ErrorCode::NoLimbusFound, "max radial contrast " + std::to_string(best.contrast));

  // refine around the coarse optimum
  const double rf_lo = std::max(r_min, best.radius - 4.0);
  const int rf_n = static_cast<int>((std::min(r_max, best.radius + 4.0) - rf_lo) / 0.5) + 1;
  detail::LimbusCandidate fine;
  for (int j = -2; j <= 2; ++j) {
    for (int i = -2; i <= 2; ++i) {
      const PixelPoint c{best.center.x + 0.5 * i, best.center.y + 0.5 * j};
      detail::circle_means(img, c, rf_lo, 0.5, rf_n, fine_dirs, means);
      auto cand = detail::best_radius(means, c, rf_lo, 0.5);
      if (cand.contrast > fine.contrast) fine = cand;
    }
  }
  if (fine.radius > 0.0 && fine.contrast >= cfg.min_limbus_contrast) best = fine;
  return Circle{best.center, best.radius};
}

/// Both boundaries of one frame.
inline IrisGeometry segment(const GrayImage& img, const SegmentationParams& cfg = {}) {
  const Circle pupil = detect_pupil(img, cfg);
  const Circle limbus = detect_limbus(img, pupil, cfg);
  IrisGeometry g{pupil, limbus, img.width(), img.height()};
  validate_geometry(g);
  return g;
}

/// True inside the limbus and outside the pupil (pixel-center test).
inline BinaryMask geometry_to_mask(const IrisGeometry& geom) {
  BinaryMask mask(geom.frame_width, geom.frame_height);
  for (int y = 0; y < geom.frame_height; ++y)
    for (int x = 0; x < geom.frame_width; ++x)
      mask.set(x, y, geom.limbus.contains(x, y) && !geom.pupil.contains(x, y));
  return mask;
}

/// 2|A∩B| / (|A|+|B|), 1.0 when both masks are empty.
inline double dice_score(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height())
    throw Error(ErrorCode::DimensionMismatch, "dice_score: mask sizes differ");
  std::size_t a = 0, b = 0, both = 0;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      const bool p = pred.at(x, y);
      const bool t = truth.at(x, y);
      a += p;
      b += t;
      both += p && t;
    }
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

// Masks travel as PGM: 0 = background, 255 = iris.
inline GrayImage mask_to_image(const BinaryMask& mask) {
  GrayImage img(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) img.at(x, y) = mask.at(x, y) ? 255 : 0;
  return img;
}

inline BinaryMask image_to_mask(const GrayImage& img) {
  BinaryMask mask(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) mask.set(x, y, img.at(x, y) >= 128);
  return mask;
}

}  // namespace irisswap

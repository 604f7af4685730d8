#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "irisswap/detail/rng.hpp"
#include "irisswap/error.hpp"
#include "irisswap/gaze.hpp"
#include "irisswap/imaging.hpp"
#include "irisswap/rubbersheet.hpp"
#include "irisswap/segmentation.hpp"

namespace irisswap {

enum class AttackMode { Offline, Online };

inline const char* to_string(AttackMode m) { return m == AttackMode::Offline ? "offline" : "online"; }

inline AttackMode parse_mode(const std::string& s) {
  if (s == "offline") return AttackMode::Offline;
  if (s == "online") return AttackMode::Online;
  throw Error(ErrorCode::ConfigError, "mode must be offline or online, got '" + s + "'");
}

struct SubjectProfile {
  std::uint64_t seed = 0;
  int texture_octaves = 3;
  double streak_density = 0.5;   // weight of the radial streak layer
  double radial_trend = 1.0;     // darker near the pupil, lighter near the limbus
  double pupil_radius = 26.0;    // px, before pupillometry noise
  double pupil_noise = 0.05;     // relative std of pupil radius over time
  double limbus_radius = 66.0;   // px
  double gain = 6.0;             // px per degree
  double jitter = 0.15;          // fixation jitter sigma, degrees
  double sclera_level = 200.0;
  double pupil_level = 30.0;
  double pixel_noise = 2.0;
};

/// Deterministic per-seed subject: pupil base radius in [24, 28] px, limbus
/// in [63, 67] px; everything else keeps the documented defaults.
inline SubjectProfile make_profile(std::uint64_t seed) {
  SubjectProfile p;
  p.seed = seed;
  detail::Rng rng(detail::derive_seed(seed, {0x70726f66}));
  p.pupil_radius = detail::uniform(rng, 24.0, 28.0);
  p.limbus_radius = detail::uniform(rng, 63.0, 67.0);
  p.streak_density = detail::uniform(rng, 0.35, 0.65);
  return p;
}

// --- texture ---------------------------------------------------------------

namespace detail {

// Smooth periodic-in-angle value noise on a (rows x cols) lattice.
class ValueNoise {
 public:
  ValueNoise(Rng& rng, int lattice_rows, int lattice_cols) : rows_(lattice_rows), cols_(lattice_cols), v_(rows_ * cols_) {
    for (auto& x : v_) x = uniform(rng, -1.0, 1.0);
  }

  // u in [0, 1] (radius), w in [0, 1) (angle, periodic)
  double operator()(double u, double w) const {
    const double y = u * (rows_ - 1);
    const double x = w * cols_;
    const int y0 = std::min(static_cast<int>(y), rows_ - 2);
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = smooth(y - y0);
    const double fx = smooth(x - x0);
    auto at = [&](int r, int c) { return v_[r * cols_ + ((c % cols_) + cols_) % cols_]; };
    const double top = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx;
    const double bot = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx;
    return top * (1 - fy) + bot * fy;
  }

 private:
  static double smooth(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }
  int rows_, cols_;
  std::vector<double> v_;
};

}  // namespace detail

inline constexpr double kTextureLow = 75.0;
inline constexpr double kTextureHigh = 180.0;

/// Multi-octave value noise plus radially elongated streaks and a radial
/// brightness trend, rescaled to [75, 180]. Fully valid, deterministic in
/// seed. The finest octave stays coarse enough to survive rendering at the
/// pupil boundary.
inline PolarTexture generate_subject_texture(std::uint64_t seed, int radial_res = kDefaultRadialRes,
                                             int angular_res = kDefaultAngularRes,
                                             const SubjectProfile* profile = nullptr) {
  const int octaves = profile ? profile->texture_octaves : 3;
  const double streak = profile ? profile->streak_density : 0.5;
  const double trend = profile ? profile->radial_trend : 1.0;
  detail::Rng rng(detail::derive_seed(seed, {0x74657874}));
  std::vector<detail::ValueNoise> layers;
  std::vector<double> weights;
  for (int o = 0; o < octaves; ++o) {
    const int lr = 5 << o;   // radial lattice 5, 10, 20
    const int lc = 12 << o;  // angular lattice 12, 24, 48
    layers.emplace_back(rng, lr + 1, lc);
    weights.push_back(std::pow(0.75, o));
  }
  detail::ValueNoise streaks(rng, 4, 40);

  PolarTexture tex(radial_res, angular_res);
  double lo = 1e300, hi = -1e300;
  std::vector<double> raw(std::size_t(radial_res) * angular_res);
  for (int r = 0; r < radial_res; ++r) {
    const double u = double(r) / (radial_res - 1);
    for (int a = 0; a < angular_res; ++a) {
      const double w = double(a) / angular_res;
      double v = 0.0;
      for (std::size_t o = 0; o < layers.size(); ++o) v += weights[o] * layers[o](u, w);
      v += streak * streaks(u, w) + trend * (2.0 * u - 1.0);
      raw[std::size_t(r) * angular_res + a] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = 0; r < radial_res; ++r)
    for (int a = 0; a < angular_res; ++a)
      tex.value(r, a) = static_cast<float>(kTextureLow + (raw[std::size_t(r) * angular_res + a] - lo) / span *
                                                             (kTextureHigh - kTextureLow));
  return tex;
}

// --- challenge schedule ----------------------------------------------------

struct ScheduleLayout {
  std::vector<std::array<double, 2>> calibration{{0, 0}, {-10, 8}, {10, 8}, {10, -8}, {-10, -8}};
  std::vector<std::array<double, 2>> validation{{-5, 4}, {5, 4}, {5, -4}, {-5, -4}};
  double offline_dwell = 4.0;
  double online_dwell_min = 4.0;
  double online_dwell_max = 6.0;
};

/// 5 calibration then 4 validation targets back to back from t = 0. Offline
/// dwell is fixed; online dwell is uniform per target.
inline TargetSchedule make_challenge_schedule(AttackMode mode, std::uint64_t seed, const ScheduleLayout& layout = {}) {
  detail::Rng rng(detail::derive_seed(seed, {0x73636864}));
  TargetSchedule s;
  s.calibration_count = layout.calibration.size();
  double t = 0.0;
  auto add = [&](const std::array<double, 2>& hv) {
    const double dwell = mode == AttackMode::Offline ? layout.offline_dwell
                                                     : detail::uniform(rng, layout.online_dwell_min, layout.online_dwell_max);
    s.targets.push_back({hv[0], hv[1], t, t + dwell});
    t += dwell;
  };
  for (const auto& c : layout.calibration) add(c);
  for (const auto& v : layout.validation) add(v);
  return s;
}

// --- scanpath --------------------------------------------------------------

struct SaccadeModel {
  double duration_slope_ms = 2.2;      // ms per degree
  double duration_intercept_ms = 21.0;
  double peak_velocity_max = 500.0;    // deg/s
  double peak_velocity_scale = 15.0;   // deg
  double latency_min = 0.150;          // s
  double latency_max = 0.250;

  double duration_s(double amplitude) const { return (duration_slope_ms * amplitude + duration_intercept_ms) * 1e-3; }
  double peak_velocity(double amplitude) const {
    return peak_velocity_max * (1.0 - std::exp(-amplitude / peak_velocity_scale));
  }
};

namespace detail {

// integral over [0,1] of sin^p(pi u)
inline double sin_power_integral(double p) {
  return std::exp(std::lgamma((p + 1) / 2) - std::lgamma(p / 2 + 1)) / std::sqrt(std::numbers::pi);
}

/// One main-sequence saccade. Velocity follows peak * sin^p(pi*u) over the
/// model duration with p chosen so the area equals the amplitude; when the
/// model peak is too low for the duration the profile is flat (p = 0).
class SaccadeProfile {
 public:
  SaccadeProfile(double amplitude, const SaccadeModel& m) : amplitude_(amplitude), duration_(m.duration_s(amplitude)) {
    const double needed = amplitude / (m.peak_velocity(amplitude) * duration_);
    if (needed >= 1.0) {
      power_ = 0.0;
    } else {
      double lo = 0.0, hi = 1.0;
      while (sin_power_integral(hi) > needed) hi *= 2.0;
      for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (sin_power_integral(mid) > needed ? lo : hi) = mid;
      }
      power_ = 0.5 * (lo + hi);
    }
    peak_ = amplitude / (duration_ * sin_power_integral(power_));
    constexpr int kTable = 2048;
    cdf_.resize(kTable + 1);
    cdf_[0] = 0.0;
    double acc = 0.0;
    for (int i = 1; i <= kTable; ++i) {
      const double u0 = double(i - 1) / kTable, u1 = double(i) / kTable, um = 0.5 * (u0 + u1);
      auto f = [&](double u) { return std::pow(std::max(0.0, std::sin(std::numbers::pi * u)), power_); };
      acc += (f(u0) + 4 * f(um) + f(u1)) / (6.0 * kTable);
      cdf_[i] = acc;
    }
    for (auto& c : cdf_) c /= acc;
  }

  double duration() const { return duration_; }
  double peak_velocity() const { return peak_; }

  // fraction of the amplitude covered after tau seconds
  double progress(double tau) const {
    if (tau <= 0) return 0.0;
    if (tau >= duration_) return 1.0;
    const double x = tau / duration_ * (cdf_.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(x), cdf_.size() - 2);
    const double f = x - i;
    return cdf_[i] * (1 - f) + cdf_[i + 1] * f;
  }

 private:
  double amplitude_;
  double duration_;
  double power_ = 0.0;
  double peak_ = 0.0;
  std::vector<double> cdf_;
};

}  // namespace detail

/// Dense ground-truth gaze at a uniform rate.
struct Scanpath {
  double rate = 30.0;
  std::vector<double> t;
  std::vector<double> h;
  std::vector<double> v;

  std::size_t size() const noexcept { return t.size(); }
};

struct ScanpathOptions {
  double rate = 30.0;
  double start_h = 0.0;
  double start_v = 0.0;
  SaccadeModel saccades{};
  std::optional<double> jitter;  // overrides profile.jitter
};

/// Per target: reaction latency, one main-sequence saccade from the current
/// fixation point to the target, then fixation with i.i.d. Gaussian jitter.
inline Scanpath generate_scanpath(const TargetSchedule& schedule, const SubjectProfile& profile, std::uint64_t seed,
                                  const ScanpathOptions& opts = {}) {
  validate_schedule(schedule);
  detail::Rng rng(detail::derive_seed(seed, {0x7363616e}));
  const double jitter = opts.jitter.value_or(profile.jitter);

  struct Move {
    double start;
    double from_h, from_v, to_h, to_v;
    std::optional<detail::SaccadeProfile> profile;
  };
  std::vector<Move> moves;
  double cur_h = opts.start_h, cur_v = opts.start_v;
  for (const auto& tg : schedule.targets) {
    const double latency = detail::uniform(rng, opts.saccades.latency_min, opts.saccades.latency_max);
    const double amp = std::hypot(tg.h - cur_h, tg.v - cur_v);
    Move m{tg.onset + latency, cur_h, cur_v, tg.h, tg.v, std::nullopt};
    if (amp > 1e-9) m.profile.emplace(amp, opts.saccades);
    moves.push_back(std::move(m));
    cur_h = tg.h;
    cur_v = tg.v;
  }

  Scanpath sp;
  sp.rate = opts.rate;
  const double t0 = schedule.start();
  const auto n = static_cast<std::size_t>(std::llround((schedule.end() - t0) * opts.rate));
  sp.t.resize(n);
  sp.h.resize(n);
  sp.v.resize(n);
  std::size_t mi = 0;
  double fix_h = opts.start_h, fix_v = opts.start_v;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + double(i) / opts.rate;
    while (mi < moves.size() && moves[mi].start <= t) {
      const Move& m = moves[mi];
      const double end = m.start + (m.profile ? m.profile->duration() : 0.0);
      if (t < end) break;
      fix_h = m.to_h;
      fix_v = m.to_v;
      ++mi;
    }
    double h = fix_h, v = fix_v;
    if (mi < moves.size() && moves[mi].start <= t && moves[mi].profile) {
      const Move& m = moves[mi];
      const double f = m.profile->progress(t - m.start);
      h = m.from_h + f * (m.to_h - m.from_h);
      v = m.from_v + f * (m.to_v - m.from_v);
    }
    sp.t[i] = t;
    sp.h[i] = h + (jitter > 0 ? detail::gaussian(rng, 0.0, jitter) : 0.0);
    sp.v[i] = v + (jitter > 0 ? detail::gaussian(rng, 0.0, jitter) : 0.0);
  }
  return sp;
}

/// Relative pupil radius per frame: AR(1) with stationary std `amplitude`.
inline std::vector<double> pupil_scale_series(std::size_t n, double amplitude, std::uint64_t seed) {
  detail::Rng rng(detail::derive_seed(seed, {0x70757069}));
  constexpr double kRho = 0.95;
  const double innov = std::sqrt(1.0 - kRho * kRho);
  std::vector<double> out(n);
  double z = detail::gaussian(rng, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(1.0 + amplitude * z, 0.7, 1.3);
    z = kRho * z + innov * detail::gaussian(rng, 0.0, 1.0);
  }
  return out;
}

// --- rendering ---------------------------------------------------------------

namespace detail {

// 2^16 standard-normal draws, fixed for the process; pixel noise indexes it
// with a cheap generator. Identical across runs and threads.
inline const std::vector<float>& gaussian_table() {
  static const std::vector<float> table = [] {
    std::vector<float> t(1u << 16);
    Rng rng(0x6e6f697365ULL);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& x : t) x = static_cast<float>(nd(rng));
    return t;
  }();
  return table;
}

}  // namespace detail

struct RenderLevels {
  double sclera = 200.0;
  double pupil = 30.0;
  double pixel_noise = 2.0;
};

/// Renders an eye for an arbitrary geometry (the limbus may leave the
/// frame): sclera everywhere, textured annulus via the inverse rubber sheet,
/// dark pupil, boundary pixels blended by approximate area coverage, then
/// additive Gaussian pixel noise.
inline GrayImage render_eye(const IrisGeometry& geom, const PolarTexture& texture, const RenderLevels& levels,
                            std::uint64_t noise_seed) {
  validate_geometry(geom);
  GrayImage img(geom.frame_width, geom.frame_height);
  const auto& table = detail::gaussian_table();
  std::uint64_t state = detail::mix64(noise_seed);
  const double R1 = texture.radial_res() - 1;
  const double A = texture.angular_res();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dl = std::hypot(x - geom.limbus.center.x, y - geom.limbus.center.y);
      const double dp = std::hypot(x - geom.pupil.center.x, y - geom.pupil.center.y);
      const double cov_l = std::clamp(geom.limbus.radius - dl + 0.5, 0.0, 1.0);
      const double cov_p = std::clamp(geom.pupil.radius - dp + 0.5, 0.0, 1.0);
      double value = levels.sclera;
      if (cov_l > 0.0 && cov_p < 1.0) {
        const PolarCoordinate pc = polar_coordinate(geom, x, y);
        const auto tv = detail::sample_texture(texture, std::clamp(pc.rhat, 0.0, 1.0) * R1,
                                               pc.theta / (2.0 * std::numbers::pi) * A);
        const double iris = tv.value_or(levels.sclera);
        value = cov_p * levels.pupil + (1.0 - cov_p) * (cov_l * iris + (1.0 - cov_l) * levels.sclera);
      } else if (cov_p >= 1.0) {
        value = levels.pupil;
      }
      if (levels.pixel_noise > 0.0) {
        state = detail::mix64(state);
        value += levels.pixel_noise * table[state >> 48];
      }
      img.at(x, y) = to_pixel(value);
    }
  }
  return img;
}

struct RenderedFrame {
  GrayImage image;
  IrisGeometry geometry;
  BinaryMask mask;
};

/// Concentric eye for gaze (h, v): pupil center = frame center + gain*(h, -v),
/// pupil radius = base * pupil_scale. The whole limbus must stay in frame.
inline RenderedFrame render_frame(double h, double v, const SubjectProfile& profile, const PolarTexture& texture,
                                  std::uint64_t noise_seed, double pupil_scale = 1.0, int width = kDefaultFrameWidth,
                                  int height = kDefaultFrameHeight) {
  const PixelPoint c{width / 2.0 + profile.gain * h, height / 2.0 - profile.gain * v};
  const double rl = profile.limbus_radius;
  if (c.x - rl < 0 || c.y - rl < 0 || c.x + rl > width - 1 || c.y + rl > height - 1)
    throw Error(ErrorCode::GazeOutOfFrame, "gaze (" + std::to_string(h) + ", " + std::to_string(v) +
                                               ") puts the limbus outside the frame");
  IrisGeometry g{{c, profile.pupil_radius * pupil_scale}, {c, rl}, width, height};
  RenderedFrame f{render_eye(g, texture, {profile.sclera_level, profile.pupil_level, profile.pixel_noise}, noise_seed),
                  g, geometry_to_mask(g)};
  return f;
}

// --- online frame drops -----------------------------------------------------

struct FrameDropModel {
  double k_mean = 8.9;
  double k_std = 2.6;
  double min_rate = 3.0;
  std::optional<int> forced_k;  // skip the draw (still clamped)
};

struct FrameDropPlan {
  int k = 1;
  std::vector<std::size_t> kept;
  double output_rate(double camera_rate) const { return camera_rate / k; }
};

/// Offline keeps every frame. Online keeps every k-th frame, k drawn once per
/// run from Normal(k_mean, k_std), rounded and clamped so that
/// camera_rate / k stays within [min_rate, camera_rate].
inline FrameDropPlan simulate_frame_drops(std::size_t n_frames, double camera_rate, AttackMode mode, std::uint64_t seed,
                                          const FrameDropModel& model = {}) {
  FrameDropPlan plan;
  if (mode == AttackMode::Online) {
    int k;
    if (model.forced_k) {
      k = *model.forced_k;
    } else {
      detail::Rng rng(detail::derive_seed(seed, {0x64726f70}));
      k = static_cast<int>(std::lround(detail::gaussian(rng, model.k_mean, model.k_std)));
    }
    const int k_max = std::max(1, static_cast<int>(std::floor(camera_rate / model.min_rate + 1e-9)));
    plan.k = std::clamp(k, 1, k_max);
  }
  for (std::size_t i = 0; i < n_frames; i += plan.k) plan.kept.push_back(i);
  return plan;
}

// --- static (eye-patch) gaze --------------------------------------------------

/// Gaze from a stationary artificial eye: one fixed direction plus tracker
/// noise, no saccades.
inline GazeTrace generate_static_trace(double duration, double rate, std::uint64_t seed, double noise_deg = 0.02) {
  detail::Rng rng(detail::derive_seed(seed, {0x73746174}));
  const double h0 = detail::uniform(rng, -5.0, 5.0);
  const double v0 = detail::uniform(rng, -4.0, 4.0);
  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  GazeTrace trace(n);
  for (std::size_t i = 0; i < n; ++i)
    trace[i] = {double(i) / rate, h0 + detail::gaussian(rng, 0.0, noise_deg), v0 + detail::gaussian(rng, 0.0, noise_deg),
                1.0};
  return trace;
}

}  // namespace irisswap

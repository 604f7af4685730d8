#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irisswap/detail/binary_io.hpp"
#include "irisswap/error.hpp"
#include "irisswap/imaging.hpp"

namespace irisswap {

inline constexpr double kOnsetTrimSeconds = 0.5;
inline constexpr double kMaxDesignCondition = 1e10;

struct GazeSample {
  double t = 0.0;           // seconds
  double h = 0.0;           // degrees
  double v = 0.0;           // degrees
  double confidence = 1.0;  // [0, 1]
};

using GazeTrace = std::vector<GazeSample>;

inline void require_increasing_time(const GazeTrace& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (!(trace[i].t > trace[i - 1].t))
      throw Error(ErrorCode::NonMonotonicTime, "timestamps not strictly increasing at sample " + std::to_string(i));
}

struct Target {
  double h = 0.0;
  double v = 0.0;
  double onset = 0.0;
  double offset = 0.0;
};

/// Calibration targets first, then validation targets, chronological.
struct TargetSchedule {
  std::vector<Target> targets;
  std::size_t calibration_count = 5;

  std::size_t validation_count() const noexcept {
    return targets.size() > calibration_count ? targets.size() - calibration_count : 0;
  }
  double start() const { return targets.empty() ? 0.0 : targets.front().onset; }
  double end() const { return targets.empty() ? 0.0 : targets.back().offset; }
};

inline void validate_schedule(const TargetSchedule& s) {
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    const auto& t = s.targets[i];
    if (!(t.offset > t.onset)) throw Error(ErrorCode::ConfigError, "target " + std::to_string(i) + " has empty interval");
    if (i > 0 && t.onset < s.targets[i - 1].offset)
      throw Error(ErrorCode::ConfigError, "target " + std::to_string(i) + " overlaps its predecessor");
  }
}

struct CalibrationPoint {
  PixelPoint pupil;
  double h = 0.0;
  double v = 0.0;
};

/// h and v as second-order polynomials in the pupil center. Features are
/// taken about a fixed center and scale so the design matrix stays well
/// conditioned; terms are [1, u, w, u^2, u*w, w^2] with u=(x-cx)/s, w=(y-cy)/s.
struct CalibrationModel {
  std::array<double, 6> h_coef{};
  std::array<double, 6> v_coef{};
  double center_x = 0.0;
  double center_y = 0.0;
  double scale = 1.0;
  double residual_rms = 0.0;  // degrees, over the fitting points
};

namespace detail {

inline std::array<double, 6> poly_terms(const CalibrationModel& m, PixelPoint p) {
  const double u = (p.x - m.center_x) / m.scale;
  const double w = (p.y - m.center_y) / m.scale;
  return {1.0, u, w, u * u, u * w, w * w};
}

}  // namespace detail

inline std::pair<double, double> evaluate(const CalibrationModel& m, PixelPoint pupil) {
  const auto f = detail::poly_terms(m, pupil);
  double h = 0.0, v = 0.0;
  for (int i = 0; i < 6; ++i) {
    h += m.h_coef[i] * f[i];
    v += m.v_coef[i] * f[i];
  }
  return {h, v};
}

/// Least-squares fit through the normal equations. Collinear pupil positions
/// and designs whose normal matrix has condition number above 1e10 raise
/// DegenerateDesign; fewer than six points raise TooFewPoints.
inline CalibrationModel fit_calibration(const std::vector<CalibrationPoint>& points) {
  if (points.size() >= 2) {
    // collinearity: smallest eigenvalue of the 2x2 scatter matrix
    double mx = 0, my = 0;
    for (const auto& p : points) {
      mx += p.pupil.x;
      my += p.pupil.y;
    }
    mx /= points.size();
    my /= points.size();
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& p : points) {
      sxx += (p.pupil.x - mx) * (p.pupil.x - mx);
      syy += (p.pupil.y - my) * (p.pupil.y - my);
      sxy += (p.pupil.x - mx) * (p.pupil.y - my);
    }
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double lmin = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    if (tr <= 0.0 || lmin <= 1e-12 * tr) throw Error(ErrorCode::DegenerateDesign, "calibration points are collinear");
  }
  if (points.size() < 6) throw Error(ErrorCode::TooFewPoints, "need at least 6 calibration points");

  CalibrationModel m;
  double mx = 0, my = 0;
  for (const auto& p : points) {
    mx += p.pupil.x;
    my += p.pupil.y;
  }
  m.center_x = mx / points.size();
  m.center_y = my / points.size();
  double spread = 0.0;
  for (const auto& p : points)
    spread = std::max({spread, std::abs(p.pupil.x - m.center_x), std::abs(p.pupil.y - m.center_y)});
  m.scale = spread > 0 ? spread : 1.0;

  Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> ath = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> atv = Eigen::Matrix<double, 6, 1>::Zero();
  for (const auto& p : points) {
    const auto f = detail::poly_terms(m, p.pupil);
    const Eigen::Map<const Eigen::Matrix<double, 6, 1>> row(f.data());
    ata += row * row.transpose();
    ath += row * p.h;
    atv += row * p.v;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(ata, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmin > 0.0) || lmax / lmin > kMaxDesignCondition)
    throw Error(ErrorCode::DegenerateDesign, "normal matrix condition number exceeds 1e10");

  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(ata);
  const Eigen::Matrix<double, 6, 1> ch = ldlt.solve(ath);
  const Eigen::Matrix<double, 6, 1> cv = ldlt.solve(atv);
  for (int i = 0; i < 6; ++i) {
    m.h_coef[i] = ch(i);
    m.v_coef[i] = cv(i);
  }
  double ss = 0.0;
  for (const auto& p : points) {
    const auto [h, v] = evaluate(m, p.pupil);
    ss += (h - p.h) * (h - p.h) + (v - p.v) * (v - p.v);
  }
  m.residual_rms = std::sqrt(ss / points.size());
  return m;
}

inline GazeSample estimate_gaze(const CalibrationModel& model, PixelPoint pupil, double t, double confidence = 1.0) {
  const auto [h, v] = evaluate(model, pupil);
  return {t, h, v, confidence};
}

namespace detail {

// Samples inside [onset + trim, offset) of a target with positive confidence.
template <class Fn>
void for_each_in_window(const GazeTrace& trace, const Target& target, double trim, Fn&& fn) {
  for (const auto& s : trace)
    if (s.confidence > 0.0 && s.t >= target.onset + trim && s.t < target.offset) fn(s);
}

}  // namespace detail

/// Mean angular offset between gaze and the validation targets.
inline double accuracy(const GazeTrace& trace, const TargetSchedule& schedule, double trim = kOnsetTrimSeconds) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = schedule.calibration_count; i < schedule.targets.size(); ++i) {
    const Target& tg = schedule.targets[i];
    detail::for_each_in_window(trace, tg, trim, [&](const GazeSample& s) {
      sum += std::hypot(s.h - tg.h, s.v - tg.v);
      ++n;
    });
  }
  if (n == 0) throw Error(ErrorCode::NoValidationSamples, "no gaze samples inside validation windows");
  return sum / n;
}

/// RMS of successive-sample angular distances per validation window,
/// averaged over the windows that hold at least two samples.
inline double precision(const GazeTrace& trace, const TargetSchedule& schedule, double trim = kOnsetTrimSeconds) {
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t i = schedule.calibration_count; i < schedule.targets.size(); ++i) {
    std::optional<GazeSample> prev;
    double ss = 0.0;
    std::size_t n = 0;
    detail::for_each_in_window(trace, schedule.targets[i], trim, [&](const GazeSample& s) {
      if (prev) {
        const double d = std::hypot(s.h - prev->h, s.v - prev->v);
        ss += d * d;
        ++n;
      }
      prev = s;
    });
    if (n == 0) continue;
    total += std::sqrt(ss / n);
    ++windows;
  }
  if (windows == 0) throw Error(ErrorCode::NoValidationSamples, "no validation window has two samples");
  return total / windows;
}

/// Pairs each detected pupil inside a trimmed calibration window with that
/// window's target angle.
struct TimedPupil {
  double t = 0.0;
  std::optional<PixelPoint> pupil;
};

inline std::vector<CalibrationPoint> calibration_points(const std::vector<TimedPupil>& pupils,
                                                        const TargetSchedule& schedule,
                                                        double trim = kOnsetTrimSeconds) {
  std::vector<CalibrationPoint> pts;
  for (std::size_t i = 0; i < std::min(schedule.calibration_count, schedule.targets.size()); ++i) {
    const Target& tg = schedule.targets[i];
    for (const auto& p : pupils)
      if (p.pupil && p.t >= tg.onset + trim && p.t < tg.offset) pts.push_back({*p.pupil, tg.h, tg.v});
  }
  return pts;
}

/// Calibrates on the calibration windows and maps every detected pupil to
/// gaze. Frames with no pupil produce no sample.
inline GazeTrace gaze_trace(const std::vector<TimedPupil>& pupils, const TargetSchedule& schedule,
                            CalibrationModel* fitted = nullptr, double trim = kOnsetTrimSeconds) {
  const CalibrationModel model = fit_calibration(calibration_points(pupils, schedule, trim));
  if (fitted) *fitted = model;
  GazeTrace trace;
  trace.reserve(pupils.size());
  for (const auto& p : pupils)
    if (p.pupil) trace.push_back(estimate_gaze(model, *p.pupil, p.t, 1.0));
  return trace;
}

// --- CSV I/O --------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(const std::string& text, const std::string& expected_header,
                                                           const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedFile, what + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header) throw Error(ErrorCode::MalformedFile, what + ": expected header '" + expected_header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedFile, what + ": bad number '" + s + "'");
  }
}

// shortest text that parses back to the same double
inline std::string fmt_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

inline std::string gaze_trace_to_csv(const GazeTrace& trace) {
  std::string out = "t,h_deg,v_deg,confidence\n";
  for (const auto& s : trace)
    out += detail::fmt_double(s.t) + "," + detail::fmt_double(s.h) + "," + detail::fmt_double(s.v) + "," +
           detail::fmt_double(s.confidence) + "\n";
  return out;
}

inline GazeTrace gaze_trace_from_csv(const std::string& text) {
  GazeTrace trace;
  for (const auto& row : detail::read_csv_rows(text, "t,h_deg,v_deg,confidence", "gaze trace")) {
    if (row.size() != 4) throw Error(ErrorCode::MalformedFile, "gaze trace: expected 4 columns");
    trace.push_back({detail::parse_double(row[0], "gaze trace"), detail::parse_double(row[1], "gaze trace"),
                     detail::parse_double(row[2], "gaze trace"), detail::parse_double(row[3], "gaze trace")});
  }
  return trace;
}

inline std::string schedule_to_csv(const TargetSchedule& s) {
  std::string out = "h_deg,v_deg,onset_s,offset_s\n";
  for (const auto& t : s.targets)
    out += detail::fmt_double(t.h) + "," + detail::fmt_double(t.v) + "," + detail::fmt_double(t.onset) + "," +
           detail::fmt_double(t.offset) + "\n";
  return out;
}

/// The first `calibration_count` rows are calibration targets.
inline TargetSchedule schedule_from_csv(const std::string& text, std::size_t calibration_count = 5) {
  TargetSchedule s;
  s.calibration_count = calibration_count;
  for (const auto& row : detail::read_csv_rows(text, "h_deg,v_deg,onset_s,offset_s", "schedule")) {
    if (row.size() != 4) throw Error(ErrorCode::MalformedFile, "schedule: expected 4 columns");
    s.targets.push_back({detail::parse_double(row[0], "schedule"), detail::parse_double(row[1], "schedule"),
                         detail::parse_double(row[2], "schedule"), detail::parse_double(row[3], "schedule")});
  }
  validate_schedule(s);
  return s;
}

}  // namespace irisswap

#include <algorithm>
#include <cmath>
#include <random>

#include "irisswap/gaze.hpp"
#include "irisswap/pipeline.hpp"
#include "irisswap/segmentation.hpp"
#include "test_util.hpp"

using namespace irisswap;

namespace {

// Pupil position for gaze (h, v) under an arbitrary affine camera map.
PixelPoint affine_pupil(double h, double v) { return {151.0 + 5.7 * h + 0.8 * v, 118.0 - 0.4 * h - 6.3 * v}; }

std::vector<CalibrationPoint> grid_points(int n_side, double noise_deg, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, noise_deg > 0 ? noise_deg : 1.0);
  std::vector<CalibrationPoint> pts;
  for (int i = 0; i < n_side; ++i)
    for (int j = 0; j < n_side; ++j) {
      const double h = -10.0 + 20.0 * i / (n_side - 1);
      const double v = -8.0 + 16.0 * j / (n_side - 1);
      const double nh = noise_deg > 0 ? nd(rng) : 0.0;
      const double nv = noise_deg > 0 ? nd(rng) : 0.0;
      pts.push_back({affine_pupil(h, v), h + nh, v + nv});
    }
  return pts;
}

// One validation target (2, 1) over [0, 3) s, no calibration targets.
TargetSchedule one_target() {
  TargetSchedule s;
  s.calibration_count = 0;
  s.targets = {{2.0, 1.0, 0.0, 3.0}};
  return s;
}

GazeTrace constant_trace(double h, double v) {
  GazeTrace g;
  for (int i = 0; i < 90; ++i) g.push_back({i / 30.0, h, v, 1.0});
  return g;
}

std::vector<TimedPupil> detect_all(const FrameSource& src) {
  std::vector<TimedPupil> out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    TimedPupil tp{src.timestamp(i), std::nullopt};
    try {
      tp.pupil = detect_pupil(src.frame(i)).center;
    } catch (const Error&) {
    }
    out.push_back(tp);
  }
  return out;
}

}  // namespace

TEST(Calibration, AffineMapIsExact) {
  const auto pts = grid_points(4, 0.0, 1);
  const CalibrationModel m = fit_calibration(pts);
  EXPECT_LT(m.residual_rms, 1e-9);
  for (double h : {-7.3, 0.4, 8.8})
    for (double v : {-6.1, 2.2, 7.5}) {
      const auto [eh, ev] = evaluate(m, affine_pupil(h, v));
      EXPECT_NEAR(eh, h, 1e-8);
      EXPECT_NEAR(ev, v, 1e-8);
    }
}

TEST(Calibration, QuadraticMapIsExact) {
  std::vector<CalibrationPoint> pts;
  auto h_of = [](double x, double y) { return 0.3 + 0.1 * x - 0.02 * y + 1e-3 * x * x - 2e-3 * x * y + 5e-4 * y * y; };
  auto v_of = [](double x, double y) { return -1.0 + 0.05 * y + 2e-4 * x * y; };
  for (double x : {100.0, 140.0, 180.0, 220.0})
    for (double y : {80.0, 120.0, 160.0}) pts.push_back({{x, y}, h_of(x, y), v_of(x, y)});
  const CalibrationModel m = fit_calibration(pts);
  EXPECT_LT(m.residual_rms, 1e-9);
  const auto [h, v] = evaluate(m, {163.0, 97.0});
  EXPECT_NEAR(h, h_of(163.0, 97.0), 1e-8);
  EXPECT_NEAR(v, v_of(163.0, 97.0), 1e-8);
}

TEST(Calibration, CollinearPointsAreDegenerate) {
  std::vector<CalibrationPoint> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({{100.0 + 10 * i, 50.0 + 5 * i}, double(i), 0.0});
  EXPECT_THROW_CODE(fit_calibration(pts), DegenerateDesign);
  for (int i = 5; i < 12; ++i) pts.push_back({{100.0 + 10 * i, 50.0 + 5 * i}, double(i), 0.0});
  EXPECT_THROW_CODE(fit_calibration(pts), DegenerateDesign);
}

TEST(Calibration, TooFewPoints) {
  std::vector<CalibrationPoint> pts{{{0, 0}, 0, 0}, {{10, 0}, 1, 0}, {{0, 10}, 0, 1}, {{10, 10}, 1, 1}};
  EXPECT_THROW_CODE(fit_calibration(pts), TooFewPoints);
  EXPECT_THROW_CODE(fit_calibration({}), TooFewPoints);
}

TEST(Calibration, RepeatedPositionsAreDegenerate) {
  // 4 distinct pupil positions cannot determine 6 coefficients
  std::vector<CalibrationPoint> pts;
  for (int r = 0; r < 5; ++r)
    for (PixelPoint p : {PixelPoint{0, 0}, PixelPoint{10, 0}, PixelPoint{0, 10}, PixelPoint{10, 10}})
      pts.push_back({p, p.x / 10, p.y / 10});
  EXPECT_THROW_CODE(fit_calibration(pts), DegenerateDesign);
}

TEST(Calibration, NoisyFitGeneralizes) {
  // sigma 0.1 deg on 25 points: held-out error well inside 0.3 deg
  const CalibrationModel m = fit_calibration(grid_points(5, 0.1, 7));
  double worst = 0.0;
  for (double h = -9.0; h <= 9.0; h += 1.5)
    for (double v = -7.0; v <= 7.0; v += 1.5) {
      const auto [eh, ev] = evaluate(m, affine_pupil(h, v));
      worst = std::max(worst, std::hypot(eh - h, ev - v));
    }
  EXPECT_LE(worst, 0.3);
  EXPECT_GT(m.residual_rms, 0.05);
}

TEST(EstimateGaze, AtCalibrationPoint) {
  const auto pts = grid_points(3, 0.0, 1);
  const CalibrationModel m = fit_calibration(pts);
  for (const auto& p : pts) {
    const GazeSample s = estimate_gaze(m, p.pupil, 1.5, 0.7);
    EXPECT_NEAR(s.h, p.h, 1e-9);
    EXPECT_NEAR(s.v, p.v, 1e-9);
    EXPECT_EQ(s.t, 1.5);
    EXPECT_EQ(s.confidence, 0.7);
  }
}

TEST(EstimateGaze, ZeroPolynomial) {
  CalibrationModel m;
  const GazeSample s = estimate_gaze(m, {123.0, 45.0}, 0.0);
  EXPECT_EQ(s.h, 0.0);
  EXPECT_EQ(s.v, 0.0);
}

TEST(Accuracy, OnTargetIsZero) { EXPECT_DOUBLE_EQ(accuracy(constant_trace(2.0, 1.0), one_target()), 0.0); }

TEST(Accuracy, ConstantOffset) { EXPECT_NEAR(accuracy(constant_trace(3.0, 1.0), one_target()), 1.0, 1e-12); }

TEST(Accuracy, OffsetTable) {
  struct Row {
    double h, v, expected;
  };
  for (const Row& r : {Row{2.0, 1.0, 0.0}, Row{1.0, 1.0, 1.0}, Row{2.0, -1.0, 2.0}, Row{5.0, 5.0, 5.0}})
    EXPECT_NEAR(accuracy(constant_trace(r.h, r.v), one_target()), r.expected, 1e-12);
}

TEST(Accuracy, TrimAndConfidenceFilter) {
  GazeTrace g = constant_trace(2.0, 1.0);
  // wild samples inside the onset trim or with zero confidence are ignored
  for (auto& s : g)
    if (s.t < 0.5) s.h = 50.0;
  g[40].h = 50.0;
  g[40].confidence = 0.0;
  EXPECT_DOUBLE_EQ(accuracy(g, one_target()), 0.0);
  EXPECT_GT(accuracy(g, one_target(), 0.0), 1.0);
}

TEST(Accuracy, CalibrationTargetsExcluded) {
  TargetSchedule s = one_target();
  s.targets.insert(s.targets.begin(), Target{-9.0, 9.0, -3.0, 0.0});
  s.calibration_count = 1;
  GazeTrace g;
  for (int i = -90; i < 90; ++i) g.push_back({i / 30.0, 2.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(accuracy(g, s), 0.0);
}

TEST(Accuracy, NoValidationSamples) {
  GazeTrace g{{5.0, 0, 0, 1}, {6.0, 0, 0, 1}};
  EXPECT_THROW_CODE(accuracy(g, one_target()), NoValidationSamples);
  EXPECT_THROW_CODE(accuracy({}, one_target()), NoValidationSamples);
}

TEST(Precision, ConstantIsZero) { EXPECT_DOUBLE_EQ(precision(constant_trace(0.3, -0.2), one_target()), 0.0); }

TEST(Precision, AlternatingOneDegree) {
  GazeTrace g = constant_trace(2.0, 1.0);
  for (std::size_t i = 0; i < g.size(); i += 2) g[i].h = 3.0;
  EXPECT_NEAR(precision(g, one_target()), 1.0, 1e-12);
}

TEST(Precision, AveragedAcrossTargets) {
  TargetSchedule s;
  s.calibration_count = 0;
  s.targets = {{0, 0, 0.0, 3.0}, {0, 0, 3.0, 6.0}};
  GazeTrace g;
  for (int i = 0; i < 180; ++i) {
    const bool second = i >= 90;
    g.push_back({i / 30.0, (i % 2) * (second ? 3.0 : 1.0), 0.0, 1.0});
  }
  EXPECT_NEAR(precision(g, s), 2.0, 1e-12);
}

TEST(Precision, NeedsTwoSamples) {
  GazeTrace g{{1.0, 0, 0, 1}};
  EXPECT_THROW_CODE(precision(g, one_target()), NoValidationSamples);
}

TEST(Metrics, AccuracyOrderInvariantPrecisionNot) {
  std::mt19937 rng(3);
  std::normal_distribution<double> nd(0.0, 0.3);
  GazeTrace g;
  for (int i = 0; i < 90; ++i) g.push_back({i / 30.0, 2.0 + 0.02 * i + nd(rng), 1.0 + nd(rng), 1.0});
  const double acc = accuracy(g, one_target());
  const double prec = precision(g, one_target());

  // reorder the samples within the window, keeping each sample's timestamp
  GazeTrace sorted = g;
  std::sort(sorted.begin() + 20, sorted.end(), [](const GazeSample& a, const GazeSample& b) { return a.h < b.h; });
  EXPECT_NEAR(accuracy(sorted, one_target()), acc, 1e-12);
  EXPECT_GT(std::abs(precision(sorted, one_target()) - prec), 0.1);

  GazeTrace reversed(g.rbegin(), g.rend());
  EXPECT_NEAR(accuracy(reversed, one_target()), acc, 1e-12);
}

TEST(GazeTrace, SkipsFramesWithoutPupil) {
  TargetSchedule s;
  s.calibration_count = 5;
  const double hv[5][2] = {{0, 0}, {-10, 8}, {10, 8}, {10, -8}, {-10, -8}};
  for (int i = 0; i < 5; ++i) s.targets.push_back({hv[i][0], hv[i][1], 2.0 * i, 2.0 * i + 2.0});
  s.targets.push_back({5, 4, 10.0, 12.0});
  std::vector<TimedPupil> pupils;
  for (int i = 0; i < 360; ++i) {
    const double t = i / 30.0;
    const std::size_t k = std::min<std::size_t>(5, i / 60);
    // small fixation jitter so five targets still span six coefficients
    TimedPupil tp{t, affine_pupil(s.targets[k].h + 0.1 * std::sin(i), s.targets[k].v + 0.1 * std::cos(1.7 * i))};
    if (i % 7 == 0) tp.pupil.reset();
    pupils.push_back(tp);
  }
  CalibrationModel m;
  const GazeTrace g = gaze_trace(pupils, s, &m);
  EXPECT_EQ(g.size(), 360u - 52u);
  EXPECT_NEAR(m.residual_rms, 0.1, 0.02);
  EXPECT_LE(accuracy(g, s), 0.1 * std::sqrt(2.0) + 1e-9);
}

TEST(GazeCsv, RoundTrip) {
  GazeTrace g{{0.0, 1.25, -3.5, 1.0}, {1.0 / 30.0, 1e-7, 12.345678901, 0.5}};
  const GazeTrace back = gaze_trace_from_csv(gaze_trace_to_csv(g));
  ASSERT_EQ(back.size(), g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(back[i].t, g[i].t);
    EXPECT_EQ(back[i].h, g[i].h);
    EXPECT_EQ(back[i].v, g[i].v);
    EXPECT_EQ(back[i].confidence, g[i].confidence);
  }
  EXPECT_EQ(gaze_trace_to_csv(back), gaze_trace_to_csv(g));
  EXPECT_EQ(gaze_trace_to_csv({}).substr(0, 25), "t,h_deg,v_deg,confidence\n");
}

TEST(GazeCsv, Malformed) {
  EXPECT_THROW_CODE(gaze_trace_from_csv("t,h,v\n0,0,0\n"), MalformedFile);
  EXPECT_THROW_CODE(gaze_trace_from_csv("t,h_deg,v_deg,confidence\n0,0,x,1\n"), MalformedFile);
  EXPECT_THROW_CODE(gaze_trace_from_csv("t,h_deg,v_deg,confidence\n0,0,1\n"), MalformedFile);
}

TEST(ScheduleCsv, RoundTrip) {
  const TargetSchedule s = make_challenge_schedule(AttackMode::Online, 11);
  const TargetSchedule back = schedule_from_csv(schedule_to_csv(s));
  ASSERT_EQ(back.targets.size(), s.targets.size());
  EXPECT_EQ(back.calibration_count, 5u);
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    EXPECT_EQ(back.targets[i].onset, s.targets[i].onset);
    EXPECT_EQ(back.targets[i].offset, s.targets[i].offset);
    EXPECT_EQ(back.targets[i].h, s.targets[i].h);
  }
  EXPECT_THROW_CODE(schedule_from_csv("h_deg,v_deg,onset_s,offset_s\n0,0,2,1\n"), ConfigError);
  EXPECT_THROW_CODE(schedule_from_csv("h_deg,v_deg,onset_s,offset_s\n0,0,0,2\n1,1,1,3\n"), ConfigError);
}

TEST(EndToEnd, SyntheticGazeMatchesTruth) {
  const SyntheticRecording rec(3, AttackMode::Offline, 2024);
  const auto pupils = detect_all(rec);
  const GazeTrace g = gaze_trace(pupils, rec.schedule());
  const GazeTrace truth = rec.truth_gaze();
  ASSERT_GT(g.size(), rec.size() * 9 / 10);
  double sum = 0.0;
  std::size_t j = 0;
  for (const auto& s : g) {
    while (truth[j].t < s.t) ++j;
    sum += std::hypot(s.h - truth[j].h, s.v - truth[j].v);
  }
  EXPECT_LE(sum / g.size(), 0.5);
}

TEST(EndToEnd, UnswappedAccuracyOverTwentySubjects) {
  double sum = 0.0;
  for (int id = 0; id < 20; ++id) {
    const SyntheticRecording rec(id, AttackMode::Offline, 99);
    sum += accuracy(gaze_trace(detect_all(rec), rec.schedule()), rec.schedule());
  }
  EXPECT_LE(sum / 20, 1.0);
}

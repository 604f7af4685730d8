#include <cmath>
#include <fstream>
#include <iterator>

#include "irisswap/iriscode.hpp"
#include "irisswap/pipeline.hpp"
#include "irisswap/synth.hpp"
#include "test_util.hpp"

using namespace irisswap;

namespace {

std::vector<double> speeds(const Scanpath& sp) {
  std::vector<double> out;
  for (std::size_t i = 1; i < sp.size(); ++i)
    out.push_back(std::hypot(sp.h[i] - sp.h[i - 1], sp.v[i] - sp.v[i - 1]) / (sp.t[i] - sp.t[i - 1]));
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Profile, DeterministicAndInRange) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const SubjectProfile p = make_profile(s);
    EXPECT_GE(p.pupil_radius, 24.0);
    EXPECT_LE(p.pupil_radius, 28.0);
    EXPECT_GE(p.limbus_radius, 63.0);
    EXPECT_LE(p.limbus_radius, 67.0);
    EXPECT_EQ(p.gain, 6.0);
    EXPECT_EQ(p.jitter, 0.15);
    EXPECT_EQ(make_profile(s).pupil_radius, p.pupil_radius);
  }
}

TEST(Texture, SameSeedIsBitIdentical) {
  EXPECT_EQ(generate_subject_texture(42), generate_subject_texture(42));
  EXPECT_FALSE(generate_subject_texture(42) == generate_subject_texture(43));
}

TEST(Texture, DynamicRangeAndValidity) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const PolarTexture t = generate_subject_texture(s);
    const TextureStats st = texture_stats(t);
    EXPECT_GE(st.max - st.min, 80.0);
    EXPECT_EQ(t.valid_count(), std::size_t(t.radial_res()) * t.angular_res());
  }
}

TEST(Texture, DistinctSeedsAreImpostors) {
  double sum = 0.0;
  int below = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const double hd = hamming_distance(encode(generate_subject_texture(1000 + 2 * s)),
                                       encode(generate_subject_texture(1001 + 2 * s)));
    sum += hd;
    below += hd < 0.4;
  }
  EXPECT_GE(sum / 100, 0.4);
  EXPECT_LE(below, 5);
}

TEST(Schedule, Layout) {
  const TargetSchedule off = make_challenge_schedule(AttackMode::Offline, 1);
  ASSERT_EQ(off.targets.size(), 9u);
  EXPECT_EQ(off.calibration_count, 5u);
  EXPECT_DOUBLE_EQ(off.end(), 36.0);
  for (const auto& t : off.targets) EXPECT_DOUBLE_EQ(t.offset - t.onset, 4.0);
  EXPECT_EQ(off.targets[1].h, -10.0);
  EXPECT_EQ(off.targets[1].v, 8.0);
  EXPECT_EQ(off.targets[5].h, -5.0);
  EXPECT_EQ(off.targets[5].v, 4.0);

  const TargetSchedule on = make_challenge_schedule(AttackMode::Online, 1);
  for (std::size_t i = 0; i < on.targets.size(); ++i) {
    const double d = on.targets[i].offset - on.targets[i].onset;
    EXPECT_GE(d, 4.0);
    EXPECT_LE(d, 6.0);
    if (i > 0) {
      EXPECT_DOUBLE_EQ(on.targets[i].onset, on.targets[i - 1].offset);
    }
  }
}

TEST(Scanpath, TargetAtCurrentGazeIsPureJitter) {
  TargetSchedule s;
  s.calibration_count = 0;
  s.targets = {{0.0, 0.0, 0.0, 20.0}};
  const SubjectProfile p = make_profile(5);
  const Scanpath sp = generate_scanpath(s, p, 9);
  double mh = 0.0;
  for (double h : sp.h) mh += h;
  EXPECT_NEAR(mh / sp.size(), 0.0, 0.05);
  for (double v : speeds(sp)) EXPECT_LE(v, 6.0 * p.jitter * sp.rate);
}

TEST(Scanpath, TenDegreeSaccadePeak) {
  TargetSchedule s;
  s.calibration_count = 0;
  s.targets = {{10.0, 0.0, 0.0, 1.0}};
  ScanpathOptions o;
  o.rate = 500.0;
  o.jitter = 0.0;
  const Scanpath sp = generate_scanpath(s, make_profile(1), 3, o);
  const auto sv = speeds(sp);
  const double peak = *std::max_element(sv.begin(), sv.end());
  const double model = 500.0 * (1.0 - std::exp(-10.0 / 15.0));
  EXPECT_GE(peak, 200.0);
  EXPECT_LE(peak, 350.0);
  EXPECT_NEAR(peak, model, 10.0);
  // lands on target, and the movement lasts the main-sequence duration
  EXPECT_NEAR(sp.h.back(), 10.0, 1e-12);
  std::size_t moving = 0;
  for (double v : sv) moving += v > 1.0;
  EXPECT_NEAR(moving / o.rate, (2.2 * 10 + 21) * 1e-3, 3.0 / o.rate);
}

TEST(Scanpath, SaccadeProfileAreaAndSymmetry) {
  for (double amp : {1.0, 5.0, 10.0, 20.0}) {
    const detail::SaccadeProfile prof(amp, SaccadeModel{});
    EXPECT_NEAR(prof.duration(), (2.2 * amp + 21) * 1e-3, 1e-12);
    EXPECT_EQ(prof.progress(0.0), 0.0);
    EXPECT_EQ(prof.progress(prof.duration()), 1.0);
    EXPECT_NEAR(prof.progress(0.5 * prof.duration()), 0.5, 1e-5);
    EXPECT_NEAR(prof.progress(0.3 * prof.duration()) + prof.progress(0.7 * prof.duration()), 1.0, 1e-5);
  }
}

TEST(Scanpath, DurationEqualsScheduleSpan) {
  for (auto mode : {AttackMode::Offline, AttackMode::Online}) {
    const TargetSchedule s = make_challenge_schedule(mode, 17);
    const Scanpath sp = generate_scanpath(s, make_profile(17), 17);
    EXPECT_EQ(sp.size(), std::size_t(std::llround(s.end() * 30.0)));
    EXPECT_DOUBLE_EQ(sp.t.front(), 0.0);
    EXPECT_LE(std::abs(sp.t.back() + 1.0 / 30.0 - s.end()), 0.5 / 30.0);
  }
}

TEST(Scanpath, VelocitiesPhysiological) {
  std::size_t n = 0, fast = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto mode = s % 2 ? AttackMode::Online : AttackMode::Offline;
    const Scanpath sp = generate_scanpath(make_challenge_schedule(mode, s), make_profile(s), s);
    for (double v : speeds(sp)) {
      ++n;
      fast += v > 700.0;
    }
  }
  EXPECT_LT(double(fast) / n, 0.01);
}

TEST(Scanpath, Deterministic) {
  const TargetSchedule s = make_challenge_schedule(AttackMode::Online, 4);
  const Scanpath a = generate_scanpath(s, make_profile(4), 4);
  const Scanpath b = generate_scanpath(s, make_profile(4), 4);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.v, b.v);
}

TEST(Render, GazeToPupilCenter) {
  const SubjectProfile p = make_profile(2);
  const PolarTexture tex = generate_subject_texture(2);
  struct Row {
    double h, v, x, y;
  };
  for (const Row& r : {Row{0, 0, 160, 120}, Row{5, 0, 190, 120}, Row{0, 5, 160, 90}, Row{-10, -8, 100, 168}}) {
    const RenderedFrame f = render_frame(r.h, r.v, p, tex, 1);
    EXPECT_DOUBLE_EQ(f.geometry.pupil.center.x, r.x);
    EXPECT_DOUBLE_EQ(f.geometry.pupil.center.y, r.y);
    EXPECT_EQ(f.geometry.limbus.center, f.geometry.pupil.center);
  }
  EXPECT_DOUBLE_EQ(render_frame(0, 0, p, tex, 1, 1.1).geometry.pupil.radius, p.pupil_radius * 1.1);
}

TEST(Render, Levels) {
  SubjectProfile p = make_profile(2);
  p.pixel_noise = 0.0;
  const RenderedFrame f = render_frame(0, 0, p, generate_subject_texture(2), 1);
  EXPECT_EQ(f.image.width(), 320);
  EXPECT_EQ(f.image.height(), 240);
  EXPECT_EQ(f.image.at(160, 120), 30);
  EXPECT_EQ(f.image.at(5, 5), 200);
}

TEST(Render, MaskMatchesGeometry) {
  const SubjectProfile p = make_profile(8);
  const RenderedFrame f = render_frame(3.0, -2.0, p, generate_subject_texture(8), 5, 0.93);
  EXPECT_EQ(f.mask, geometry_to_mask(f.geometry));
  EXPECT_DOUBLE_EQ(dice_score(f.mask, geometry_to_mask(f.geometry)), 1.0);
}

TEST(Render, UnwrapRecoversTexture) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const SubjectProfile p = make_profile(s);
    const PolarTexture tex = generate_subject_texture(s, kDefaultRadialRes, kDefaultAngularRes, &p);
    const RenderedFrame f = render_frame(1.0 * s, -0.5 * s, p, tex, s);
    const PolarTexture back = unwrap(f.image, f.geometry);
    double sum = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < tex.radial_res(); ++r)
      for (int a = 0; a < tex.angular_res(); ++a)
        if (back.valid(r, a)) {
          sum += std::abs(back.value(r, a) - tex.value(r, a));
          ++n;
        }
    ASSERT_GT(n, 0u);
    EXPECT_LE(sum / n, 3.0) << "seed " << s;
  }
}

TEST(Render, NoiseSeedDeterminism) {
  const SubjectProfile p = make_profile(1);
  const PolarTexture tex = generate_subject_texture(1);
  EXPECT_EQ(render_frame(0, 0, p, tex, 77).image, render_frame(0, 0, p, tex, 77).image);
  EXPECT_FALSE(render_frame(0, 0, p, tex, 77).image == render_frame(0, 0, p, tex, 78).image);
}

TEST(Render, GazeOutOfFrame) {
  const SubjectProfile p = make_profile(1);
  const PolarTexture tex = generate_subject_texture(1);
  EXPECT_THROW_CODE(render_frame(20.0, 0.0, p, tex, 1), GazeOutOfFrame);
  EXPECT_THROW_CODE(render_frame(0.0, -12.0, p, tex, 1), GazeOutOfFrame);
  EXPECT_NO_THROW(render_frame(10.0, 8.0, p, tex, 1));
}

TEST(FrameDrops, OfflineIsIdentity) {
  const FrameDropPlan plan = simulate_frame_drops(1080, 30.0, AttackMode::Offline, 5);
  EXPECT_EQ(plan.k, 1);
  ASSERT_EQ(plan.kept.size(), 1080u);
  for (std::size_t i = 0; i < plan.kept.size(); ++i) EXPECT_EQ(plan.kept[i], i);
  EXPECT_DOUBLE_EQ(plan.output_rate(30.0), 30.0);
}

TEST(FrameDrops, ForcedTenGivesThreeHertz) {
  FrameDropModel m;
  m.forced_k = 10;
  const FrameDropPlan plan = simulate_frame_drops(95, 30.0, AttackMode::Online, 5, m);
  EXPECT_EQ(plan.k, 10);
  EXPECT_DOUBLE_EQ(plan.output_rate(30.0), 3.0);
  EXPECT_EQ(plan.kept, (std::vector<std::size_t>{0, 10, 20, 30, 40, 50, 60, 70, 80, 90}));
}

TEST(FrameDrops, ClampTable) {
  struct Row {
    int forced, expected;
  };
  for (const Row& r : {Row{15, 10}, Row{10, 10}, Row{9, 9}, Row{1, 1}, Row{0, 1}, Row{-3, 1}}) {
    FrameDropModel m;
    m.forced_k = r.forced;
    EXPECT_EQ(simulate_frame_drops(100, 30.0, AttackMode::Online, 0, m).k, r.expected) << r.forced;
  }
}

TEST(FrameDrops, DrawStatistics) {
  // with the floor disabled the rounded draws keep the configured moments
  FrameDropModel loose;
  loose.min_rate = 1e-3;
  double sum = 0.0, ss = 0.0;
  const int n = 4000;
  for (int s = 0; s < n; ++s) {
    const int k = simulate_frame_drops(10, 30.0, AttackMode::Online, s, loose).k;
    sum += k;
    ss += double(k) * k;
    const int clamped = simulate_frame_drops(10, 30.0, AttackMode::Online, s).k;
    EXPECT_GE(clamped, 1);
    EXPECT_LE(clamped, 10);
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 8.9, 0.15);
  EXPECT_NEAR(std::sqrt(ss / n - mean * mean), 2.6, 0.15);
}

TEST(StaticTrace, FixedDirectionWithNoise) {
  const GazeTrace g = generate_static_trace(10.0, 30.0, 3, 0.02);
  ASSERT_EQ(g.size(), 300u);
  double mh = 0, mv = 0;
  for (const auto& s : g) {
    mh += s.h / g.size();
    mv += s.v / g.size();
  }
  EXPECT_LE(std::abs(mh), 5.0);
  EXPECT_LE(std::abs(mv), 4.0);
  for (const auto& s : g) EXPECT_LT(std::hypot(s.h - mh, s.v - mv), 0.15);
  const GazeTrace still = generate_static_trace(1.0, 30.0, 3, 0.0);
  EXPECT_EQ(still.front().h, still.back().h);
}

TEST(Mode, ParseAndPrint) {
  EXPECT_EQ(parse_mode("offline"), AttackMode::Offline);
  EXPECT_EQ(parse_mode("online"), AttackMode::Online);
  EXPECT_STREQ(to_string(AttackMode::Online), "online");
  EXPECT_THROW_CODE(parse_mode("live"), ConfigError);
}

TEST(Dataset, LayoutAndRoundTrip) {
  testutil::TempDir tmp;
  const SyntheticRecording rec(6, AttackMode::Online, 31);
  const auto dir = write_recording(rec, tmp.path());
  EXPECT_EQ(dir, tmp / "subject_6");
  for (const char* f : {"timestamps.csv", "truth_gaze.csv", "truth_geometry.csv", "schedule.csv", "manifest.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_TRUE(std::filesystem::exists(dir / "frames" / "frame_00000.pgm"));

  const DirectoryRecording back(dir);
  EXPECT_EQ(back.subject_id(), 6);
  ASSERT_EQ(back.size(), rec.size());
  EXPECT_EQ(back.camera_rate(), 30.0);
  EXPECT_EQ(back.schedule().targets.size(), rec.schedule().targets.size());
  EXPECT_EQ(back.timestamp(100), rec.timestamp(100));
  EXPECT_EQ(back.frame(123), rec.frame(123));

  const GazeTrace truth = gaze_trace_from_csv(slurp(dir / "truth_gaze.csv"));
  ASSERT_EQ(truth.size(), rec.size());
  EXPECT_EQ(truth[50].h, rec.scanpath().h[50]);
}

TEST(Dataset, ByteIdenticalAcrossRuns) {
  testutil::TempDir a, b;
  const auto da = write_recording(SyntheticRecording(2, AttackMode::Offline, 8), a.path());
  const auto db = write_recording(SyntheticRecording(2, AttackMode::Offline, 8), b.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(da)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), da);
    ASSERT_TRUE(std::filesystem::exists(db / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(db / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, SyntheticRecording(2, AttackMode::Offline, 8).size() + 5);

  // a different base seed changes the data
  const SyntheticRecording other(2, AttackMode::Offline, 9);
  EXPECT_FALSE(other.frame(0) == SyntheticRecording(2, AttackMode::Offline, 8).frame(0));
}

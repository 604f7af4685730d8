#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "irisswap/detail/binary_io.hpp"
#include "irisswap/detail/rng.hpp"
#include "irisswap/error.hpp"
#include "irisswap/gaze.hpp"
#include "irisswap/imaging.hpp"
#include "irisswap/rubbersheet.hpp"
#include "irisswap/segmentation.hpp"
#include "irisswap/synth.hpp"

namespace irisswap {

// --- recordings -------------------------------------------------------------------

/// A subject's challenge recording as the attack pipeline sees it.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int subject_id() const = 0;
  virtual std::size_t size() const = 0;
  virtual double camera_rate() const = 0;
  virtual double timestamp(std::size_t i) const = 0;
  virtual GrayImage frame(std::size_t i) const = 0;
  virtual const TargetSchedule& schedule() const = 0;
};

struct SynthParams {
  double camera_rate = 30.0;
  int width = kDefaultFrameWidth;
  int height = kDefaultFrameHeight;
  int radial_res = kDefaultRadialRes;
  int angular_res = kDefaultAngularRes;
};

namespace detail {
inline constexpr std::uint64_t kIdentityTag = 0x6964656e;
inline constexpr std::uint64_t kRecordingTag = 0x7265636f;
inline constexpr std::uint64_t kNoiseTag = 0x6e6f6973;
}  // namespace detail

/// Iris identity (profile + texture) depends on the subject id only; the
/// schedule, scanpath, pupil size and sensor noise also depend on the mode.
/// Frames are rendered on demand.
class SyntheticRecording : public FrameSource {
 public:
  SyntheticRecording(int id, AttackMode mode, std::uint64_t base_seed, const SynthParams& params = {})
      : id_(id), mode_(mode), params_(params) {
    const std::uint64_t ident = detail::derive_seed(base_seed, {detail::kIdentityTag, std::uint64_t(id)});
    rec_seed_ = detail::derive_seed(base_seed, {detail::kRecordingTag, std::uint64_t(id), std::uint64_t(mode)});
    profile_ = make_profile(ident);
    texture_ = generate_subject_texture(ident, params.radial_res, params.angular_res, &profile_);
    schedule_ = make_challenge_schedule(mode, rec_seed_);
    ScanpathOptions so;
    so.rate = params.camera_rate;
    path_ = generate_scanpath(schedule_, profile_, rec_seed_, so);
    scale_ = pupil_scale_series(path_.size(), profile_.pupil_noise, rec_seed_);
  }

  int subject_id() const override { return id_; }
  AttackMode mode() const noexcept { return mode_; }
  std::size_t size() const override { return path_.size(); }
  double camera_rate() const override { return params_.camera_rate; }
  double timestamp(std::size_t i) const override { return path_.t.at(i); }
  const TargetSchedule& schedule() const override { return schedule_; }
  const SubjectProfile& profile() const noexcept { return profile_; }
  const PolarTexture& texture() const noexcept { return texture_; }
  const Scanpath& scanpath() const noexcept { return path_; }
  std::uint64_t seed() const noexcept { return rec_seed_; }

  RenderedFrame render(std::size_t i) const {
    return render_frame(path_.h.at(i), path_.v.at(i), profile_, texture_,
                        detail::derive_seed(rec_seed_, {detail::kNoiseTag, i}), scale_.at(i), params_.width,
                        params_.height);
  }
  GrayImage frame(std::size_t i) const override { return render(i).image; }

  GazeTrace truth_gaze() const {
    GazeTrace g(size());
    for (std::size_t i = 0; i < size(); ++i) g[i] = {path_.t[i], path_.h[i], path_.v[i], 1.0};
    return g;
  }

 private:
  int id_;
  AttackMode mode_;
  SynthParams params_;
  std::uint64_t rec_seed_ = 0;
  SubjectProfile profile_;
  PolarTexture texture_;
  TargetSchedule schedule_;
  Scanpath path_;
  std::vector<double> scale_;
};

// Dataset layout:
//   subject_<id>/frames/frame_<nnnnn>.pgm
//   subject_<id>/timestamps.csv       frame,t
//   subject_<id>/truth_gaze.csv       t,h_deg,v_deg,confidence
//   subject_<id>/truth_geometry.csv   frame,pupil_x,pupil_y,pupil_r,limbus_x,limbus_y,limbus_r
//   subject_<id>/schedule.csv         h_deg,v_deg,onset_s,offset_s
//   subject_<id>/manifest.json

inline std::string frame_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.pgm", i);
  return buf;
}

inline std::filesystem::path subject_dir(const std::filesystem::path& root, int id) {
  return root / ("subject_" + std::to_string(id));
}

inline std::filesystem::path write_recording(const SyntheticRecording& rec, const std::filesystem::path& root) {
  const auto dir = subject_dir(root, rec.subject_id());
  std::error_code ec;
  std::filesystem::create_directories(dir / "frames", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (dir / "frames").string());
  std::string ts = "frame,t\n", geo = "frame,pupil_x,pupil_y,pupil_r,limbus_x,limbus_y,limbus_r\n";
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const RenderedFrame f = rec.render(i);
    save_pgm(f.image, dir / "frames" / frame_file_name(i));
    ts += std::to_string(i) + "," + detail::fmt_double(rec.timestamp(i)) + "\n";
    const auto& g = f.geometry;
    geo += std::to_string(i) + "," + detail::fmt_double(g.pupil.center.x) + "," + detail::fmt_double(g.pupil.center.y) +
           "," + detail::fmt_double(g.pupil.radius) + "," + detail::fmt_double(g.limbus.center.x) + "," +
           detail::fmt_double(g.limbus.center.y) + "," + detail::fmt_double(g.limbus.radius) + "\n";
  }
  detail::write_text_file(dir / "timestamps.csv", ts);
  detail::write_text_file(dir / "truth_geometry.csv", geo);
  detail::write_text_file(dir / "truth_gaze.csv", gaze_trace_to_csv(rec.truth_gaze()));
  detail::write_text_file(dir / "schedule.csv", schedule_to_csv(rec.schedule()));
  nlohmann::ordered_json m;
  m["subject"] = rec.subject_id();
  m["mode"] = to_string(rec.mode());
  m["seed"] = rec.seed();
  m["camera_rate"] = rec.camera_rate();
  m["frames"] = rec.size();
  m["width"] = rec.render(0).image.width();
  m["height"] = rec.render(0).image.height();
  m["calibration_targets"] = rec.schedule().calibration_count;
  detail::write_text_file(dir / "manifest.json", m.dump(2) + "\n");
  return dir;
}

/// A recording written by write_recording (or captured elsewhere in the same
/// layout). Frames are read lazily, so a corrupt frame only fails its index.
class DirectoryRecording : public FrameSource {
 public:
  explicit DirectoryRecording(const std::filesystem::path& dir) : dir_(dir) {
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(detail::read_text_file(dir / "manifest.json"));
      id_ = m.at("subject").get<int>();
      rate_ = m.at("camera_rate").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedFile, (dir / "manifest.json").string() + ": " + e.what());
    }
    const std::size_t cal = m.value("calibration_targets", std::size_t{5});
    schedule_ = schedule_from_csv(detail::read_text_file(dir / "schedule.csv"), cal);
    for (const auto& row : detail::read_csv_rows(detail::read_text_file(dir / "timestamps.csv"), "frame,t", "timestamps")) {
      if (row.size() != 2) throw Error(ErrorCode::MalformedFile, "timestamps: expected 2 columns");
      if (detail::parse_double(row[0], "timestamps") != double(times_.size()))
        throw Error(ErrorCode::MalformedFile, "timestamps: frame numbers must run 0, 1, 2, ...");
      times_.push_back(detail::parse_double(row[1], "timestamps"));
    }
  }

  int subject_id() const override { return id_; }
  std::size_t size() const override { return times_.size(); }
  double camera_rate() const override { return rate_; }
  double timestamp(std::size_t i) const override { return times_.at(i); }
  GrayImage frame(std::size_t i) const override { return load_pgm(dir_ / "frames" / frame_file_name(i)); }
  const TargetSchedule& schedule() const override { return schedule_; }

 private:
  std::filesystem::path dir_;
  int id_ = 0;
  double rate_ = 30.0;
  TargetSchedule schedule_;
  std::vector<double> times_;
};

/// Victim enrollment texture: rubber sheet of one segmented victim frame.
inline PolarTexture victim_texture(const FrameSource& victim, std::size_t frame_index = 0,
                                   const SegmentationParams& seg = {}, int radial_res = kDefaultRadialRes,
                                   int angular_res = kDefaultAngularRes) {
  const GrayImage img = victim.frame(frame_index);
  return unwrap(img, segment(img, seg), radial_res, angular_res);
}

// --- attack --------------------------------------------------------------------------

enum class SaveFrames { Sampled, All, None };

inline SaveFrames parse_save_frames(const std::string& s) {
  if (s == "sampled") return SaveFrames::Sampled;
  if (s == "all") return SaveFrames::All;
  if (s == "none") return SaveFrames::None;
  throw Error(ErrorCode::ConfigError, "save_frames must be sampled, all or none, got '" + s + "'");
}

struct AttackOptions {
  AttackMode mode = AttackMode::Offline;
  std::uint64_t seed = 0;
  FrameDropModel drops{};
  SegmentationParams segmentation{};
  SwapOptions swap{};
  std::size_t sample_frames = 10;  // spoofed frames kept in memory for authentication
  std::optional<std::filesystem::path> output_dir;
  SaveFrames save = SaveFrames::Sampled;
};

struct SkippedFrame {
  std::size_t index = 0;
  std::string reason;
};

struct AttackRun {
  int subject = 0;
  AttackMode mode = AttackMode::Offline;
  std::size_t total_frames = 0;
  FrameDropPlan drops;
  std::vector<SkippedFrame> skipped;
  std::vector<std::size_t> sampled;         // frame indices, ascending
  std::vector<GrayImage> sampled_frames;    // spoofed, parallel to `sampled`
  std::vector<std::size_t> real_frames;     // frame index of each real_gaze sample
  std::vector<std::size_t> spoof_frames;    // frame index of each spoof_gaze sample
  GazeTrace real_gaze;                      // unswapped, every frame
  GazeTrace spoof_gaze;                     // swapped, kept frames only
  CalibrationModel real_calibration;
  CalibrationModel spoof_calibration;
  double real_accuracy = 0.0;
  double spoof_accuracy = 0.0;
  double real_precision = 0.0;
  double spoof_precision = 0.0;
  std::size_t fallback_pixels = 0;

  double output_rate(double camera_rate) const { return drops.output_rate(camera_rate); }
};

namespace detail {

inline std::vector<std::size_t> sample_indices(const std::vector<std::size_t>& pool, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> v = pool;
  Rng rng(seed);
  k = std::min(k, v.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(v[i], v[i + rng() % (v.size() - i)]);
  v.resize(k);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

/// Per processed frame: segment -> swap -> detect pupil on the spoofed frame.
/// The unswapped pupil is detected on every frame; the spoofed path only runs
/// on the frames kept by the drop plan (all of them offline). A frame whose
/// load, segmentation or swap fails is recorded in `skipped` and contributes
/// no sample; calibration or metric failures abort the run.
inline AttackRun run_attack(const FrameSource& src, const PolarTexture& victim, const AttackOptions& opt) {
  AttackRun run;
  run.subject = src.subject_id();
  run.mode = opt.mode;
  run.total_frames = src.size();
  const std::uint64_t s = detail::derive_seed(opt.seed, {std::uint64_t(run.subject), std::uint64_t(opt.mode)});
  run.drops = simulate_frame_drops(src.size(), src.camera_rate(), opt.mode, detail::derive_seed(s, {0x64726f70}), opt.drops);
  run.sampled = detail::sample_indices(run.drops.kept, opt.sample_frames, detail::derive_seed(s, {0x73616d70}));

  std::filesystem::path out;
  if (opt.output_dir && opt.save != SaveFrames::None) {
    out = *opt.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out.string());
  }

  std::vector<TimedPupil> real, spoof;
  real.reserve(src.size());
  spoof.reserve(run.drops.kept.size());
  std::size_t next_kept = 0, next_sample = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const bool kept = next_kept < run.drops.kept.size() && run.drops.kept[next_kept] == i;
    if (kept) ++next_kept;
    GrayImage img;
    try {
      img = src.frame(i);
      img.require_pipeline_frame();
    } catch (const Error& e) {
      run.skipped.push_back({i, e.what()});
      continue;
    }
    const double t = src.timestamp(i);
    TimedPupil rp{t, std::nullopt};
    try {
      rp.pupil = detect_pupil(img, opt.segmentation).center;
    } catch (const Error&) {
    }
    real.push_back(rp);
    run.real_frames.push_back(i);
    if (!kept) continue;

    SwapResult sw;
    try {
      sw = swap_iris_detailed(img, segment(img, opt.segmentation), victim, opt.swap);
    } catch (const Error& e) {
      run.skipped.push_back({i, e.what()});
      continue;
    }
    run.fallback_pixels += sw.fallback_pixels;
    TimedPupil sp{t, std::nullopt};
    try {
      sp.pupil = detect_pupil(sw.image, opt.segmentation).center;
    } catch (const Error&) {
    }
    spoof.push_back(sp);
    run.spoof_frames.push_back(i);

    const bool sampled = next_sample < run.sampled.size() && run.sampled[next_sample] == i;
    if (sampled) ++next_sample;
    if (!out.empty() && (opt.save == SaveFrames::All || sampled)) save_pgm(sw.image, out / frame_file_name(i));
    if (sampled) run.sampled_frames.push_back(std::move(sw.image));
  }
  // sampled frames that were skipped are dropped from the sample list
  std::vector<std::size_t> got;
  for (std::size_t idx : run.sampled)
    if (std::none_of(run.skipped.begin(), run.skipped.end(), [&](const SkippedFrame& f) { return f.index == idx; }))
      got.push_back(idx);
  run.sampled = got;

  auto keep_detected = [](const std::vector<TimedPupil>& p, std::vector<std::size_t>& frames) {
    std::vector<std::size_t> f;
    for (std::size_t k = 0; k < p.size(); ++k)
      if (p[k].pupil) f.push_back(frames[k]);
    frames = std::move(f);
  };
  const TargetSchedule& sched = src.schedule();
  run.real_gaze = gaze_trace(real, sched, &run.real_calibration);
  run.spoof_gaze = gaze_trace(spoof, sched, &run.spoof_calibration);
  keep_detected(real, run.real_frames);
  keep_detected(spoof, run.spoof_frames);
  run.real_accuracy = accuracy(run.real_gaze, sched);
  run.spoof_accuracy = accuracy(run.spoof_gaze, sched);
  run.real_precision = precision(run.real_gaze, sched);
  run.spoof_precision = precision(run.spoof_gaze, sched);
  return run;
}

inline AttackRun run_offline_attack(const FrameSource& src, const PolarTexture& victim, AttackOptions opt) {
  opt.mode = AttackMode::Offline;
  return run_attack(src, victim, opt);
}

inline AttackRun run_online_attack(const FrameSource& src, const PolarTexture& victim, AttackOptions opt) {
  opt.mode = AttackMode::Online;
  return run_attack(src, victim, opt);
}

}  // namespace irisswap

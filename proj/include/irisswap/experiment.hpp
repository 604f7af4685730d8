#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "irisswap/config.hpp"
#include "irisswap/detail/parallel.hpp"
#include "irisswap/detail/rng.hpp"
#include "irisswap/error.hpp"
#include "irisswap/iriscode.hpp"
#include "irisswap/liveness.hpp"
#include "irisswap/pipeline.hpp"

namespace irisswap {

// --- splits -----------------------------------------------------------------------

/// 60/40 train-pool/test by subject (round to nearest, pool >= 2), then 30% of
/// the pool (round to nearest, >= 1) moved to validation. Each partition is
/// returned sorted.
inline SplitPlan split_subjects(std::vector<int> ids, std::uint64_t seed) {
  if (ids.size() < 5) throw Error(ErrorCode::TooFewSubjects, "need at least 5 subjects, got " + std::to_string(ids.size()));
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw Error(ErrorCode::TooFewSubjects, "duplicate subject id");
  detail::Rng rng(detail::derive_seed(seed, {0x73706c69}));
  detail::shuffle(ids, rng);
  const std::size_t n = ids.size();
  const std::size_t pool = std::clamp<std::size_t>(std::size_t(std::llround(0.6 * double(n))), 2, n - 1);
  const std::size_t val = std::clamp<std::size_t>(std::size_t(std::llround(0.3 * double(pool))), 1, pool - 1);
  SplitPlan p;
  p.seed = seed;
  p.validation.assign(ids.begin(), ids.begin() + val);
  p.train.assign(ids.begin() + val, ids.begin() + pool);
  p.test.assign(ids.begin() + pool, ids.end());
  for (auto* v : {&p.train, &p.validation, &p.test}) std::sort(v->begin(), v->end());
  return p;
}

// --- configuration ----------------------------------------------------------------

struct ExperimentConfig {
  std::uint64_t seed = 7;
  int subjects = 20;
  int victim_id = 0;
  std::vector<AttackMode> modes{AttackMode::Offline, AttackMode::Online};
  int splits = 10;
  unsigned threads = 1;
  std::filesystem::path output_dir = "irisswap_out";
  SaveFrames save = SaveFrames::Sampled;

  SynthParams synth{};
  SegmentationParams segmentation{};
  SwapOptions swap{};
  FrameDropModel drops{};
  GaborParams gabor{};
  std::size_t hd_frames = 10;
  double auth_threshold = kDefaultAuthThreshold;
  int max_shift = kDefaultMaxShift;

  double velocity_cap = kVelocityCap;
  double liveness_rate = kLivenessRate;
  Resample resample = Resample::Box;
  std::size_t window_length = kWindowLength;
  std::size_t window_step = kWindowStep;
  TrainHyper hyper{};
  double static_noise_deg = 0.02;

  Config source{};

  /// Attackers: the first `subjects` ids from 0 upward, skipping the victim.
  std::vector<int> attacker_ids() const {
    std::vector<int> ids;
    for (int id = 0; int(ids.size()) < subjects; ++id)
      if (id != victim_id) ids.push_back(id);
    return ids;
  }
};

/// Validates every value before any work starts.
inline ExperimentConfig make_experiment_config(const Config& c) {
  ExperimentConfig e;
  e.source = c;
  auto positive = [&](const char* key) {
    const long long v = c.integer(key);
    if (v < 1) throw Error(ErrorCode::ConfigError, std::string(key) + " must be >= 1");
    return v;
  };
  auto positive_real = [&](const char* key) {
    const double v = c.number(key);
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::ConfigError, std::string(key) + " must be > 0");
    return v;
  };
  e.seed = c.unsigned_integer("seed");
  e.subjects = int(positive("subjects"));
  if (e.subjects < 5) throw Error(ErrorCode::ConfigError, "subjects must be >= 5 for the split protocol");
  e.victim_id = int(c.integer("victim_id"));
  if (e.victim_id < 0) throw Error(ErrorCode::ConfigError, "victim_id must be >= 0");
  e.modes.clear();
  std::stringstream ms(c.get("modes"));
  for (std::string m; std::getline(ms, m, ',');) {
    const AttackMode mode = parse_mode(detail::trim(m));
    if (std::find(e.modes.begin(), e.modes.end(), mode) == e.modes.end()) e.modes.push_back(mode);
  }
  if (e.modes.empty()) throw Error(ErrorCode::ConfigError, "modes is empty");
  e.splits = int(positive("splits"));
  const long long th = c.integer("threads");
  if (th < 0) throw Error(ErrorCode::ConfigError, "threads must be >= 0");
  e.threads = unsigned(th);
  e.output_dir = c.get("output_dir");
  e.save = parse_save_frames(c.get("save_frames"));

  e.synth.camera_rate = positive_real("camera_rate");
  e.synth.width = int(positive("frame_width"));
  e.synth.height = int(positive("frame_height"));
  e.synth.radial_res = int(positive("radial_res"));
  e.synth.angular_res = int(positive("angular_res"));
  e.segmentation.pupil_threshold = positive_real("pupil_threshold");
  e.segmentation.min_limbus_contrast = positive_real("min_limbus_contrast");
  e.swap.match_intensity = c.boolean("match_intensity");
  e.drops.k_mean = c.number("online_k_mean");
  e.drops.k_std = c.number("online_k_std");
  if (e.drops.k_std < 0) throw Error(ErrorCode::ConfigError, "online_k_std must be >= 0");
  e.drops.min_rate = positive_real("online_min_rate");
  if (const long long k = c.integer("online_forced_k"); k > 0) e.drops.forced_k = int(k);
  e.gabor.bands = int(positive("gabor_bands"));
  e.gabor.angular_positions = int(positive("gabor_positions"));
  e.gabor.wavelength = positive_real("gabor_wavelength");
  e.hd_frames = std::size_t(positive("hd_frames"));
  e.auth_threshold = positive_real("auth_threshold");
  e.max_shift = int(c.integer("max_shift"));
  if (e.max_shift < 0) throw Error(ErrorCode::ConfigError, "max_shift must be >= 0");

  e.velocity_cap = positive_real("velocity_cap");
  e.liveness_rate = positive_real("liveness_rate");
  e.resample = parse_resample(c.get("resample"));
  e.window_length = std::size_t(positive("window_length"));
  e.window_step = std::size_t(positive("window_step"));
  e.hyper.hidden = int(positive("lstm_hidden"));
  e.hyper.learning_rate = positive_real("learning_rate");
  e.hyper.batch_size = std::size_t(positive("batch_size"));
  e.hyper.max_epochs = int(positive("max_epochs"));
  e.hyper.patience = int(positive("patience"));
  e.hyper.clip_norm = positive_real("clip_norm");
  e.static_noise_deg = c.number("static_noise_deg");
  if (e.static_noise_deg < 0) throw Error(ErrorCode::ConfigError, "static_noise_deg must be >= 0");
  return e;
}

// --- results ------------------------------------------------------------------------

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 when n < 2
  std::size_t n = 0;
};

inline Stat summarize(const std::vector<double>& xs) {
  Stat s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / double(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / double(xs.size() - 1));
  }
  return s;
}

struct SubjectResult {
  int id = 0;
  std::size_t frames = 0;
  std::size_t kept = 0;
  std::size_t skipped = 0;
  int drop_k = 1;
  double output_rate = 0.0;
  std::vector<std::size_t> hd_frames;
  std::vector<double> hd_values;
  double hd_mean = 0.0;
  bool authenticated = false;
  double real_accuracy = 0.0, spoof_accuracy = 0.0;
  double real_precision = 0.0, spoof_precision = 0.0;
  std::size_t real_windows = 0, spoof_windows = 0, static_windows = 0;
};

struct WindowPrediction {
  int subject = 0;
  Label label = Label::Real;
  std::size_t window_index = 0;
  double p_spoof = 0.0;
  Label predicted = Label::Real;
};

struct UserPrediction {
  int subject = 0;
  Label label = Label::Real;
  Label predicted = Label::Real;
};

struct SplitResult {
  int index = 0;
  SplitPlan plan;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<WindowPrediction> windows;
  std::vector<UserPrediction> users;
  AttackSuccess asr;
  double detection_rate = 0.0;  // spoof windows predicted spoof
};

struct ModeResult {
  AttackMode mode = AttackMode::Offline;
  std::vector<SubjectResult> subjects;
  std::vector<SplitResult> irisswap;      // real vs swapped gaze
  std::vector<SplitResult> static_spoof;  // real vs eye-patch gaze
  std::vector<VelocityWindow> windows;         // real + swapped
  std::vector<VelocityWindow> static_windows;  // static spoof only
};

struct ExperimentResult {
  std::vector<ModeResult> modes;
  std::string report_json;

  const ModeResult& mode(AttackMode m) const {
    for (const auto& r : modes)
      if (r.mode == m) return r;
    throw Error(ErrorCode::ConfigError, std::string("mode not run: ") + to_string(m));
  }
};

namespace detail {

inline std::vector<VelocityWindow> liveness_windows(const GazeTrace& g, Label label, int subject,
                                                    const ExperimentConfig& cfg) {
  VelocitySignal v = compute_velocity(g);
  v = preprocess(v, cfg.velocity_cap, cfg.liveness_rate, cfg.resample);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v.vh[i] >= 0.0 && v.vh[i] <= 1.0 && v.vv[i] >= 0.0 && v.vv[i] <= 1.0))
      throw Error(ErrorCode::NonFiniteInput, "preprocessed velocity outside [0, 1] for subject " + std::to_string(subject));
  return make_windows(v, cfg.window_length, cfg.window_step, label, subject);
}

inline SplitResult evaluate_split(int index, const SplitPlan& plan, const std::vector<VelocityWindow>& data,
                                  const ExperimentConfig& cfg, std::uint64_t seed) {
  SplitResult r;
  r.index = index;
  r.plan = plan;
  TrainResult tr;
  try {
    tr = train(data, plan, cfg.hyper, seed);
  } catch (const Error& e) {
    throw Error(e.code(), "split " + std::to_string(index) + ": " + e.detail());
  }
  r.best_epoch = tr.best_epoch;
  r.epochs_run = int(tr.history.size());
  const std::set<int> test(plan.test.begin(), plan.test.end());
  std::map<std::pair<int, int>, std::vector<Label>> votes;
  std::vector<Prediction> wp;
  std::size_t spoof = 0, caught = 0;
  for (const auto& w : data) {
    if (!test.count(w.subject)) continue;
    const double p = forward(tr.model, w);
    const Label d = classify(p);
    r.windows.push_back({w.subject, w.label, w.index, p, d});
    wp.push_back({w.label, d});
    votes[{w.subject, int(w.label)}].push_back(d);
    if (w.label == Label::Spoof) {
      ++spoof;
      caught += d == Label::Spoof;
    }
  }
  std::vector<Prediction> up;
  for (const auto& [key, ds] : votes) {
    const Label pred = majority_vote(ds);
    r.users.push_back({key.first, Label(key.second), pred});
    up.push_back({Label(key.second), pred});
  }
  try {
    r.asr = attack_success_rate(wp, up);
  } catch (const Error& e) {
    throw Error(e.code(), "split " + std::to_string(index) + ": " + e.detail());
  }
  r.detection_rate = spoof ? double(caught) / double(spoof) : 0.0;
  return r;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::ordered_json stat_json(const Stat& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"n", s.n}};
}

inline nlohmann::ordered_json splits_json(const std::vector<SplitResult>& splits) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  std::vector<double> aw, au, dr;
  for (const auto& s : splits) {
    arr.push_back({{"index", s.index},
                   {"seed", s.plan.seed},
                   {"train", s.plan.train},
                   {"validation", s.plan.validation},
                   {"test", s.plan.test},
                   {"best_epoch", s.best_epoch},
                   {"epochs_run", s.epochs_run},
                   {"asr_window", s.asr.window},
                   {"asr_user", s.asr.user},
                   {"spoof_windows", s.asr.spoof_windows},
                   {"spoof_users", s.asr.spoof_users},
                   {"detection_rate", s.detection_rate}});
    aw.push_back(s.asr.window);
    au.push_back(s.asr.user);
    dr.push_back(s.detection_rate);
  }
  return {{"splits", arr},
          {"asr_window", stat_json(summarize(aw))},
          {"asr_user", stat_json(summarize(au))},
          {"detection_rate", stat_json(summarize(dr))}};
}

}  // namespace detail

// --- dumps ----------------------------------------------------------------------------

inline std::string subjects_csv(const ModeResult& m) {
  std::string out =
      "subject,frames,kept,skipped,drop_k,output_rate,hd_mean,authenticated,real_accuracy,spoof_accuracy,"
      "real_precision,spoof_precision,real_windows,spoof_windows,static_windows\n";
  for (const auto& s : m.subjects)
    out += std::to_string(s.id) + "," + std::to_string(s.frames) + "," + std::to_string(s.kept) + "," +
           std::to_string(s.skipped) + "," + std::to_string(s.drop_k) + "," + detail::fmt17(s.output_rate) + "," +
           detail::fmt17(s.hd_mean) + "," + (s.authenticated ? "1" : "0") + "," + detail::fmt17(s.real_accuracy) +
           "," + detail::fmt17(s.spoof_accuracy) + "," + detail::fmt17(s.real_precision) + "," +
           detail::fmt17(s.spoof_precision) + "," + std::to_string(s.real_windows) + "," +
           std::to_string(s.spoof_windows) + "," + std::to_string(s.static_windows) + "\n";
  return out;
}

inline std::string hd_frames_csv(const ModeResult& m) {
  std::string out = "subject,frame,hd\n";
  for (const auto& s : m.subjects)
    for (std::size_t k = 0; k < s.hd_frames.size(); ++k)
      out += std::to_string(s.id) + "," + std::to_string(s.hd_frames[k]) + "," + detail::fmt17(s.hd_values[k]) + "\n";
  return out;
}

/// `model,split,subject,label,window_index,p_spoof,predicted`
inline std::string window_predictions_csv(const ModeResult& m) {
  std::string out = "model,split,subject,label,window_index,p_spoof,predicted\n";
  auto dump = [&](const char* model, const std::vector<SplitResult>& splits) {
    for (const auto& s : splits)
      for (const auto& w : s.windows)
        out += std::string(model) + "," + std::to_string(s.index) + "," + std::to_string(w.subject) + "," +
               to_string(w.label) + "," + std::to_string(w.window_index) + "," + detail::fmt17(w.p_spoof) + "," +
               to_string(w.predicted) + "\n";
  };
  dump("irisswap", m.irisswap);
  dump("static", m.static_spoof);
  return out;
}

/// `model,split,subject,label,predicted`
inline std::string user_predictions_csv(const ModeResult& m) {
  std::string out = "model,split,subject,label,predicted\n";
  auto dump = [&](const char* model, const std::vector<SplitResult>& splits) {
    for (const auto& s : splits)
      for (const auto& u : s.users)
        out += std::string(model) + "," + std::to_string(s.index) + "," + std::to_string(u.subject) + "," +
               to_string(u.label) + "," + to_string(u.predicted) + "\n";
  };
  dump("irisswap", m.irisswap);
  dump("static", m.static_spoof);
  return out;
}

// --- orchestration ---------------------------------------------------------------------

namespace detail {
inline constexpr std::uint64_t kSplitTag = 0x73706c74;
inline constexpr std::uint64_t kTrainTag = 0x74726e67;
inline constexpr std::uint64_t kStaticTag = 0x73746174;
}  // namespace detail

inline ModeResult run_mode(const ExperimentConfig& cfg, AttackMode mode) {
  ModeResult res;
  res.mode = mode;
  const std::vector<int> ids = cfg.attacker_ids();
  const std::filesystem::path mode_dir = cfg.output_dir / to_string(mode);

  const SyntheticRecording victim(cfg.victim_id, mode, cfg.seed, cfg.synth);
  PolarTexture vtex;
  try {
    vtex = victim_texture(victim, 0, cfg.segmentation, cfg.synth.radial_res, cfg.synth.angular_res);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(to_string(mode)) + " victim " + std::to_string(cfg.victim_id) + " frame 0: " +
                              e.detail());
  }
  if (cfg.save != SaveFrames::None) {
    std::error_code ec;
    std::filesystem::create_directories(mode_dir, ec);
    save_texture(vtex, mode_dir / "victim_texture.irpt");
  }

  // attacks, one slot per subject
  std::vector<AttackRun> runs(ids.size());
  detail::parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const SyntheticRecording rec(ids[k], mode, cfg.seed, cfg.synth);
    AttackOptions o;
    o.mode = mode;
    o.seed = cfg.seed;
    o.drops = cfg.drops;
    o.segmentation = cfg.segmentation;
    o.swap = cfg.swap;
    o.sample_frames = cfg.hd_frames;
    o.save = cfg.save;
    if (cfg.save != SaveFrames::None) o.output_dir = mode_dir / ("subject_" + std::to_string(ids[k]));
    try {
      runs[k] = run_attack(rec, vtex, o);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(to_string(mode)) + " subject " + std::to_string(ids[k]) + ": " + e.detail());
    }
  });

  // victim templates at every frame number the HD protocol needs
  std::vector<std::size_t> needed;
  for (const auto& r : runs)
    for (std::size_t f : r.sampled) needed.push_back(f % victim.size());
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  std::vector<IrisTemplate> vtemplates(needed.size());
  auto encode_frame = [&](const GrayImage& img) {
    return encode(unwrap(img, segment(img, cfg.segmentation), cfg.synth.radial_res, cfg.synth.angular_res), cfg.gabor);
  };
  detail::parallel_for(needed.size(), cfg.threads, [&](std::size_t k) {
    try {
      vtemplates[k] = encode_frame(victim.frame(needed[k]));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(to_string(mode)) + " victim frame " + std::to_string(needed[k]) + ": " + e.detail());
    }
  });
  auto victim_template = [&](std::size_t f) -> const IrisTemplate& {
    return vtemplates[std::lower_bound(needed.begin(), needed.end(), f % victim.size()) - needed.begin()];
  };

  res.subjects.resize(ids.size());
  std::vector<std::vector<VelocityWindow>> real_w(ids.size()), spoof_w(ids.size()), static_w(ids.size());
  detail::parallel_for(ids.size(), cfg.threads, [&](std::size_t k) {
    const AttackRun& r = runs[k];
    SubjectResult& s = res.subjects[k];
    s.id = ids[k];
    s.frames = r.total_frames;
    s.kept = r.drops.kept.size();
    s.skipped = r.skipped.size();
    s.drop_k = r.drops.k;
    s.output_rate = r.output_rate(cfg.synth.camera_rate);
    s.real_accuracy = r.real_accuracy;
    s.spoof_accuracy = r.spoof_accuracy;
    s.real_precision = r.real_precision;
    s.spoof_precision = r.spoof_precision;
    try {
      for (std::size_t j = 0; j < r.sampled.size(); ++j) {
        s.hd_frames.push_back(r.sampled[j]);
        s.hd_values.push_back(hamming_distance(encode_frame(r.sampled_frames[j]), victim_template(r.sampled[j]), cfg.max_shift));
      }
      if (s.hd_values.empty()) throw Error(ErrorCode::InsufficientMask, "no spoofed frame available for authentication");
      s.hd_mean = summarize(s.hd_values).mean;
      s.authenticated = decide(s.hd_mean, cfg.auth_threshold) == AuthDecision::Accept;

      real_w[k] = detail::liveness_windows(r.real_gaze, Label::Real, s.id, cfg);
      spoof_w[k] = detail::liveness_windows(r.spoof_gaze, Label::Spoof, s.id, cfg);
      const SyntheticRecording rec(s.id, mode, cfg.seed, cfg.synth);
      const GazeTrace st = generate_static_trace(rec.schedule().end(), cfg.synth.camera_rate,
                                                 detail::derive_seed(cfg.seed, {detail::kStaticTag, std::uint64_t(s.id),
                                                                                std::uint64_t(mode)}),
                                                 cfg.static_noise_deg);
      static_w[k] = detail::liveness_windows(st, Label::Spoof, s.id, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(to_string(mode)) + " subject " + std::to_string(s.id) + ": " + e.detail());
    }
    s.real_windows = real_w[k].size();
    s.spoof_windows = spoof_w[k].size();
    s.static_windows = static_w[k].size();
  });

  std::vector<VelocityWindow> swap_data, static_data;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    swap_data.insert(swap_data.end(), real_w[k].begin(), real_w[k].end());
    swap_data.insert(swap_data.end(), spoof_w[k].begin(), spoof_w[k].end());
    static_data.insert(static_data.end(), real_w[k].begin(), real_w[k].end());
    static_data.insert(static_data.end(), static_w[k].begin(), static_w[k].end());
    res.static_windows.insert(res.static_windows.end(), static_w[k].begin(), static_w[k].end());
  }

  std::vector<SplitPlan> plans(cfg.splits);
  for (int s = 0; s < cfg.splits; ++s) {
    plans[s] = split_subjects(ids, detail::derive_seed(cfg.seed, {detail::kSplitTag, std::uint64_t(mode), std::uint64_t(s)}));
    for (const auto* part : {&plans[s].train, &plans[s].validation, &plans[s].test})
      if (std::find(part->begin(), part->end(), cfg.victim_id) != part->end())
        throw Error(ErrorCode::ConfigError, "victim id appears in split " + std::to_string(s));
  }
  res.irisswap.resize(cfg.splits);
  res.static_spoof.resize(cfg.splits);
  detail::parallel_for(2 * std::size_t(cfg.splits), cfg.threads, [&](std::size_t job) {
    const int s = int(job / 2);
    const bool is_static = job % 2;
    const std::uint64_t seed =
        detail::derive_seed(cfg.seed, {detail::kTrainTag, std::uint64_t(mode), std::uint64_t(s), std::uint64_t(is_static)});
    try {
      if (is_static) res.static_spoof[s] = detail::evaluate_split(s, plans[s], static_data, cfg, seed);
      else res.irisswap[s] = detail::evaluate_split(s, plans[s], swap_data, cfg, seed);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(to_string(mode)) + (is_static ? " static-spoof " : " irisswap ") + e.detail());
    }
  });
  res.windows = std::move(swap_data);
  return res;
}

inline std::string build_report(const ExperimentConfig& cfg, const std::vector<ModeResult>& modes) {
  nlohmann::ordered_json j;
  j["schema"] = "irisswap-report/1";
  j["seed"] = cfg.seed;
  j["config_hash"] = cfg.source.hash_hex();
  nlohmann::ordered_json conf;
  for (const auto& [k, v] : cfg.source.values())
    if (find_config_key(k)->affects_results) conf[k] = v;
  j["config"] = conf;
  j["victim_id"] = cfg.victim_id;
  j["attackers"] = cfg.attacker_ids();
  nlohmann::ordered_json jm;
  for (const auto& m : modes) {
    nlohmann::ordered_json mj;
    nlohmann::ordered_json subj = nlohmann::ordered_json::array();
    std::vector<double> hd, ra, sa, rp, sp, kk, rate;
    std::size_t pass = 0;
    for (const auto& s : m.subjects) {
      subj.push_back({{"id", s.id},
                      {"frames", s.frames},
                      {"kept", s.kept},
                      {"skipped", s.skipped},
                      {"drop_k", s.drop_k},
                      {"output_rate", s.output_rate},
                      {"hd_frames", s.hd_frames},
                      {"hd_values", s.hd_values},
                      {"hd_mean", s.hd_mean},
                      {"authenticated", s.authenticated},
                      {"unswapped_accuracy", s.real_accuracy},
                      {"swapped_accuracy", s.spoof_accuracy},
                      {"unswapped_precision", s.real_precision},
                      {"swapped_precision", s.spoof_precision},
                      {"real_windows", s.real_windows},
                      {"spoof_windows", s.spoof_windows},
                      {"static_windows", s.static_windows}});
      hd.push_back(s.hd_mean);
      pass += s.authenticated;
      ra.push_back(s.real_accuracy);
      sa.push_back(s.spoof_accuracy);
      rp.push_back(s.real_precision);
      sp.push_back(s.spoof_precision);
      kk.push_back(s.drop_k);
      rate.push_back(s.output_rate);
    }
    mj["subjects"] = subj;
    mj["authentication"] = {{"threshold", cfg.auth_threshold},
                            {"hd", detail::stat_json(summarize(hd))},
                            {"authenticated", pass},
                            {"n", m.subjects.size()},
                            {"pass_fraction", m.subjects.empty() ? 0.0 : double(pass) / double(m.subjects.size())}};
    mj["gaze"] = {{"unswapped_accuracy", detail::stat_json(summarize(ra))},
                  {"swapped_accuracy", detail::stat_json(summarize(sa))},
                  {"unswapped_precision", detail::stat_json(summarize(rp))},
                  {"swapped_precision", detail::stat_json(summarize(sp))}};
    mj["sampling"] = {{"camera_rate", cfg.synth.camera_rate},
                      {"drop_k", detail::stat_json(summarize(kk))},
                      {"output_rate", detail::stat_json(summarize(rate))}};
    mj["liveness"] = detail::splits_json(m.irisswap);
    mj["static_spoof"] = detail::splits_json(m.static_spoof);
    jm[to_string(m.mode)] = mj;
  }
  j["modes"] = jm;
  return j.dump(2) + "\n";
}

/// Runs every configured mode, writes report.json, config.txt and the CSV
/// dumps into the output directory, and returns the in-memory results.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto ids = cfg.attacker_ids();
  if (std::find(ids.begin(), ids.end(), cfg.victim_id) != ids.end())
    throw Error(ErrorCode::ConfigError, "victim id is among the attackers");
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + cfg.output_dir.string());

  ExperimentResult out;
  for (AttackMode m : cfg.modes) out.modes.push_back(run_mode(cfg, m));
  out.report_json = build_report(cfg, out.modes);

  detail::write_text_file(cfg.output_dir / "report.json", out.report_json);
  detail::write_text_file(cfg.output_dir / "config.txt", cfg.source.canonical());
  for (const auto& m : out.modes) {
    const std::string p = to_string(m.mode);
    detail::write_text_file(cfg.output_dir / (p + "_subjects.csv"), subjects_csv(m));
    detail::write_text_file(cfg.output_dir / (p + "_hd_frames.csv"), hd_frames_csv(m));
    detail::write_text_file(cfg.output_dir / (p + "_window_predictions.csv"), window_predictions_csv(m));
    detail::write_text_file(cfg.output_dir / (p + "_user_predictions.csv"), user_predictions_csv(m));
    detail::write_text_file(cfg.output_dir / (p + "_windows.csv"), windows_to_csv(m.windows));
    detail::write_text_file(cfg.output_dir / (p + "_static_windows.csv"), windows_to_csv(m.static_windows));
  }
  return out;
}

}  // namespace irisswap

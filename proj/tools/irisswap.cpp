// irisswap command-line front end.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "irisswap/irisswap.hpp"

namespace fs = std::filesystem;
using namespace irisswap;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

Config load_config(const Globals& g) {
  Config c;
  std::string path = g.config_path;
  if (path.empty())
    if (const char* env = std::getenv("IRISSWAP_CONFIG")) path = env;
  if (!path.empty()) c = Config::load(path);
  for (const auto& kv : g.overrides) c.apply_override(kv);
  if (g.seed) c.set("seed", std::to_string(*g.seed));
  return c;
}

void print(const ojson& j) { std::cout << j.dump(2) << "\n"; }

ojson circle_json(const Circle& c) { return {{"x", c.center.x}, {"y", c.center.y}, {"r", c.radius}}; }

/// Template from a template file, a PGM frame, or a recording directory.
IrisTemplate load_probe(const fs::path& p, std::size_t frame, const ExperimentConfig& cfg) {
  auto from_image = [&](const GrayImage& img) {
    return encode(unwrap(img, segment(img, cfg.segmentation), cfg.synth.radial_res, cfg.synth.angular_res), cfg.gabor);
  };
  if (fs::is_directory(p)) return from_image(DirectoryRecording(p).frame(frame));
  if (p.extension() == ".pgm") return from_image(load_pgm(p));
  return load_template(p);
}

std::vector<TimedPupil> detect_all(const FrameSource& src, const SegmentationParams& seg) {
  std::vector<TimedPupil> out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    TimedPupil tp{src.timestamp(i), std::nullopt};
    try {
      tp.pupil = detect_pupil(src.frame(i), seg).center;
    } catch (const Error&) {
    }
    out.push_back(tp);
  }
  return out;
}

std::string text_stat(const nlohmann::json& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f +- %.3f (n=%d)", s.at("mean").get<double>(), s.at("std").get<double>(),
                s.at("n").get<int>());
  return buf;
}

int fail(ErrorCode code, const std::string& message) {
  ojson j{{"error", std::string(to_string(code))}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return code == ErrorCode::ConfigError || code == ErrorCode::UnknownSubcommand ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IrisSwap: iris texture swapping against eye-tracking authentication"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "config file (default: $IRISSWAP_CONFIG, else built-in defaults)");
  app.add_option("--set", g.overrides, "override a config key, key=value (repeatable)");
  app.add_option("--seed", g.seed, "shorthand for --set seed=N");

  // synth
  auto* synth = app.add_subcommand("synth", "render a synthetic subject recording");
  int synth_subject = 1;
  std::string synth_mode = "offline", synth_out = "recordings";
  synth->add_option("--subject", synth_subject, "subject id");
  synth->add_option("--mode", synth_mode, "offline or online schedule")->check(CLI::IsMember({"offline", "online"}));
  synth->add_option("--out", synth_out, "root directory; the recording goes to <out>/subject_<id>");

  // segment
  auto* seg = app.add_subcommand("segment", "locate pupil and limbus in a PGM frame");
  std::string seg_in, seg_mask, seg_tex, seg_tmpl;
  seg->add_option("image", seg_in, "input PGM")->required();
  seg->add_option("--mask", seg_mask, "write the annulus mask as PGM");
  seg->add_option("--texture", seg_tex, "write the rubber-sheet texture (.irpt)");
  seg->add_option("--template", seg_tmpl, "write the iris template (.irtc)");

  // swap
  auto* swap = app.add_subcommand("swap", "replace the iris of a frame with a victim texture");
  std::string swap_in, swap_victim, swap_out;
  swap->add_option("image", swap_in, "attacker PGM")->required();
  swap->add_option("--victim", swap_victim, "victim texture (.irpt)")->required();
  swap->add_option("--out", swap_out, "output PGM")->required();

  // gaze
  auto* gaze = app.add_subcommand("gaze", "calibrate and estimate gaze for a recording");
  std::string gaze_dir, gaze_out;
  gaze->add_option("recording", gaze_dir, "recording directory")->required();
  gaze->add_option("--out", gaze_out, "write the gaze trace CSV");

  // authenticate
  auto* auth = app.add_subcommand("authenticate", "compare two templates, frames or recordings");
  std::string auth_a, auth_b;
  std::size_t auth_frame = 0;
  auth->add_option("probe", auth_a, "template (.irtc), frame (.pgm) or recording directory")->required();
  auth->add_option("enrolled", auth_b, "template (.irtc), frame (.pgm) or recording directory")->required();
  auth->add_option("--frame", auth_frame, "frame index used for recording directories");

  // train-liveness
  auto* tl = app.add_subcommand("train-liveness", "train the LSTM liveness model on a windows CSV");
  std::string tl_in, tl_out;
  tl->add_option("windows", tl_in, "windows CSV (as written by experiment)")->required();
  tl->add_option("--out", tl_out, "write the trained model");

  // attack
  auto* attack = app.add_subcommand("attack", "run the swap attack over a recording");
  std::string at_dir, at_victim, at_out, at_mode = "offline";
  attack->add_option("recording", at_dir, "recording directory")->required();
  attack->add_option("--victim", at_victim, "victim texture (.irpt)")->required();
  attack->add_option("--mode", at_mode, "offline or online")->check(CLI::IsMember({"offline", "online"}));
  attack->add_option("--out", at_out, "output directory (default: <output_dir>/attack)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run the full synthetic experiment");

  // report
  auto* rep = app.add_subcommand("report", "summarize a report.json");
  std::string rep_in;
  rep->add_option("report", rep_in, "report.json (default: <output_dir>/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ExtrasError& e) {
    if (app.get_subcommands().empty()) return fail(ErrorCode::UnknownSubcommand, e.what());
    return fail(ErrorCode::ConfigError, e.what());
  } catch (const CLI::RequiredError& e) {
    if (app.get_subcommands().empty() && !app.remaining().empty())
      return fail(ErrorCode::UnknownSubcommand, "unknown subcommand: " + app.remaining().front());
    return fail(ErrorCode::ConfigError, e.what());
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCode::ConfigError, e.what());
  }

  try {
    const Config conf = load_config(g);
    const ExperimentConfig cfg = make_experiment_config(conf);

    if (*synth) {
      const SyntheticRecording rec(synth_subject, parse_mode(synth_mode), cfg.seed, cfg.synth);
      const fs::path dir = write_recording(rec, synth_out);
      print({{"recording", dir.string()}, {"frames", rec.size()}, {"camera_rate", rec.camera_rate()}});
    } else if (*seg) {
      const GrayImage img = load_pgm(seg_in);
      const IrisGeometry geom = segment(img, cfg.segmentation);
      if (!seg_mask.empty()) save_pgm(mask_to_image(geometry_to_mask(geom)), seg_mask);
      if (!seg_tex.empty() || !seg_tmpl.empty()) {
        const PolarTexture tex = unwrap(img, geom, cfg.synth.radial_res, cfg.synth.angular_res);
        if (!seg_tex.empty()) save_texture(tex, seg_tex);
        if (!seg_tmpl.empty()) save_template(encode(tex, cfg.gabor), seg_tmpl);
      }
      print({{"pupil", circle_json(geom.pupil)}, {"limbus", circle_json(geom.limbus)}});
    } else if (*swap) {
      const GrayImage img = load_pgm(swap_in);
      const SwapResult r = swap_iris_detailed(img, segment(img, cfg.segmentation), load_texture(swap_victim), cfg.swap);
      save_pgm(r.image, swap_out);
      print({{"output", swap_out}, {"annulus_pixels", r.annulus_pixels}, {"fallback_pixels", r.fallback_pixels}});
    } else if (*gaze) {
      const DirectoryRecording rec(gaze_dir);
      const std::vector<TimedPupil> pupils = detect_all(rec, cfg.segmentation);
      const GazeTrace trace = gaze_trace(pupils, rec.schedule());
      if (!gaze_out.empty()) detail::write_text_file(gaze_out, gaze_trace_to_csv(trace));
      print({{"samples", trace.size()},
             {"frames", rec.size()},
             {"accuracy_deg", accuracy(trace, rec.schedule())},
             {"precision_deg", precision(trace, rec.schedule())}});
    } else if (*auth) {
      const AuthResult r = authenticate(load_probe(auth_a, auth_frame, cfg), load_probe(auth_b, auth_frame, cfg),
                                        cfg.auth_threshold, cfg.max_shift);
      print({{"hd", r.hd}, {"threshold", cfg.auth_threshold}, {"decision", r.accepted() ? "accept" : "reject"}});
    } else if (*tl) {
      const std::vector<VelocityWindow> data = windows_from_csv(detail::read_text_file(tl_in), cfg.window_length);
      std::set<int> ids;
      for (const auto& w : data) ids.insert(w.subject);
      const SplitPlan plan = split_subjects({ids.begin(), ids.end()}, cfg.seed);
      const TrainResult tr = train(data, plan, cfg.hyper, cfg.seed);
      if (!tl_out.empty()) save_model(tr.model, tl_out);
      const std::set<int> test(plan.test.begin(), plan.test.end());
      std::vector<const VelocityWindow*> held;
      for (const auto& w : data)
        if (test.count(w.subject)) held.push_back(&w);
      print({{"train", plan.train},
             {"validation", plan.validation},
             {"test", plan.test},
             {"best_epoch", tr.best_epoch},
             {"epochs_run", tr.history.size()},
             {"test_accuracy", window_accuracy(tr.model, held)}});
    } else if (*attack) {
      const DirectoryRecording rec(at_dir);
      const fs::path out = at_out.empty() ? cfg.output_dir / "attack" : fs::path(at_out);
      AttackOptions o;
      o.mode = parse_mode(at_mode);
      o.seed = cfg.seed;
      o.drops = cfg.drops;
      o.segmentation = cfg.segmentation;
      o.swap = cfg.swap;
      o.sample_frames = cfg.hd_frames;
      o.save = cfg.save;
      o.output_dir = out / "frames";
      const AttackRun r = run_attack(rec, load_texture(at_victim), o);
      detail::write_text_file(out / "unswapped_gaze.csv", gaze_trace_to_csv(r.real_gaze));
      detail::write_text_file(out / "swapped_gaze.csv", gaze_trace_to_csv(r.spoof_gaze));
      ojson skipped = ojson::array();
      for (const auto& s : r.skipped) skipped.push_back({{"frame", s.index}, {"reason", s.reason}});
      const ojson j{{"subject", r.subject},
                    {"mode", to_string(r.mode)},
                    {"frames", r.total_frames},
                    {"kept", r.drops.kept.size()},
                    {"drop_k", r.drops.k},
                    {"output_rate", r.output_rate(rec.camera_rate())},
                    {"skipped", skipped},
                    {"unswapped_accuracy", r.real_accuracy},
                    {"swapped_accuracy", r.spoof_accuracy},
                    {"unswapped_precision", r.real_precision},
                    {"swapped_precision", r.spoof_precision}};
      detail::write_text_file(out / "attack.json", j.dump(2) + "\n");
      print(j);
    } else if (*exp) {
      const ExperimentResult r = run_experiment(cfg);
      const auto rj = nlohmann::json::parse(r.report_json);
      ojson s{{"output_dir", cfg.output_dir.string()}, {"config_hash", rj.at("config_hash")}};
      for (const auto& [m, mj] : rj.at("modes").items())
        s[m] = {{"auth_pass_fraction", mj.at("authentication").at("pass_fraction")},
                {"asr_window", mj.at("liveness").at("asr_window").at("mean")},
                {"asr_user", mj.at("liveness").at("asr_user").at("mean")},
                {"static_detection", mj.at("static_spoof").at("detection_rate").at("mean")}};
      print(s);
    } else if (*rep) {
      const fs::path p = rep_in.empty() ? cfg.output_dir / "report.json" : fs::path(rep_in);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(detail::read_text_file(p));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedFile, p.string() + ": " + e.what());
      }
      std::cout << "seed " << j.at("seed") << "  config " << j.at("config_hash").get<std::string>() << "\n";
      for (const auto& [m, mj] : j.at("modes").items()) {
        const auto& a = mj.at("authentication");
        const auto& gz = mj.at("gaze");
        std::cout << "\n[" << m << "]\n"
                  << "  authenticated     " << a.at("authenticated") << "/" << a.at("n") << "  HD "
                  << text_stat(a.at("hd")) << "\n"
                  << "  accuracy (deg)    unswapped " << text_stat(gz.at("unswapped_accuracy")) << "  swapped "
                  << text_stat(gz.at("swapped_accuracy")) << "\n"
                  << "  precision (deg)   unswapped " << text_stat(gz.at("unswapped_precision")) << "  swapped "
                  << text_stat(gz.at("swapped_precision")) << "\n"
                  << "  sampling rate Hz  " << text_stat(mj.at("sampling").at("output_rate")) << "\n"
                  << "  IrisSwap ASR      window " << text_stat(mj.at("liveness").at("asr_window")) << "  user "
                  << text_stat(mj.at("liveness").at("asr_user")) << "\n"
                  << "  static spoof      detection " << text_stat(mj.at("static_spoof").at("detection_rate"))
                  << "  ASR user " << text_stat(mj.at("static_spoof").at("asr_user")) << "\n";
      }
    }
  } catch (const Error& e) {
    return fail(e.code(), e.detail());
  } catch (const nlohmann::json::exception& e) {
    return fail(ErrorCode::MalformedFile, e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCode::IoFailure, e.what());
  }
  return 0;
}

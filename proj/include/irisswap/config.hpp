#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "irisswap/detail/binary_io.hpp"
#include "irisswap/detail/rng.hpp"
#include "irisswap/error.hpp"

namespace irisswap {

inline constexpr int kConfigVersion = 1;

struct ConfigKey {
  const char* key;
  const char* default_value;
  bool affects_results;  // part of the config hash
  const char* help;
};

// The single versioned defaults table. Bump kConfigVersion when a default changes.
inline constexpr ConfigKey kConfigKeys[] = {
    {"seed", "7", true, "base seed for every generator"},
    {"subjects", "20", true, "attacker subjects per mode"},
    {"victim_id", "0", true, "subject id used as the victim (attackers are the other ids)"},
    {"modes", "offline,online", true, "comma list of attack modes to run"},
    {"splits", "10", true, "random train/test splits for the liveness evaluation"},
    {"camera_rate", "30", true, "eye camera frame rate, Hz"},
    {"frame_width", "320", true, "frame width, px"},
    {"frame_height", "240", true, "frame height, px"},
    {"radial_res", "64", true, "rubber-sheet rows"},
    {"angular_res", "512", true, "rubber-sheet columns"},
    {"hd_frames", "10", true, "random spoofed frames compared with the victim per subject"},
    {"auth_threshold", "0.37", true, "accept when HD is below this"},
    {"max_shift", "8", true, "rotation search for HD, in code positions"},
    {"gabor_bands", "8", true, "radial bands in the iris code"},
    {"gabor_positions", "128", true, "angular positions in the iris code"},
    {"gabor_wavelength", "18", true, "Gabor wavelength in angular texture samples"},
    {"pupil_threshold", "60", true, "dark threshold for pupil candidates"},
    {"min_limbus_contrast", "4", true, "minimum radial contrast accepted as limbus"},
    {"match_intensity", "false", true, "remap victim texture to the attacker's iris mean/std"},
    {"online_k_mean", "8.9", true, "online decimation factor mean"},
    {"online_k_std", "2.6", true, "online decimation factor std"},
    {"online_min_rate", "3", true, "lowest online output rate, Hz"},
    {"online_forced_k", "0", true, "force the decimation factor (0 = draw it)"},
    {"velocity_cap", "800", true, "velocity cap, deg/s"},
    {"liveness_rate", "3", true, "resampling rate for liveness, Hz"},
    {"resample", "box", true, "velocity resampling: box (time-weighted mean per bin) or linear (point interpolation)"},
    {"window_length", "7", true, "liveness window length, samples"},
    {"window_step", "3", true, "liveness window step, samples"},
    {"lstm_hidden", "16", true, "LSTM hidden size"},
    {"learning_rate", "0.01", true, "Adam learning rate"},
    {"batch_size", "32", true, "minibatch size"},
    {"max_epochs", "300", true, "epoch limit"},
    {"patience", "25", true, "early-stopping patience, epochs"},
    {"clip_norm", "5", true, "gradient-norm clip"},
    {"static_noise_deg", "0.02", true, "tracker noise on the static (eye-patch) spoof gaze"},
    {"save_frames", "sampled", false, "spoofed frames to write: sampled, all or none"},
    {"threads", "1", false, "worker threads, 0 = all cores (results do not depend on it)"},
    {"output_dir", "irisswap_out", false, "experiment output directory"},
};

inline const ConfigKey* find_config_key(const std::string& key) {
  for (const auto& k : kConfigKeys)
    if (key == k.key) return &k;
  return nullptr;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// `key = value` lines, `#` comments. Every key must be in kConfigKeys.
class Config {
 public:
  Config() {
    for (const auto& k : kConfigKeys) values_[k.key] = k.default_value;
  }

  static Config from_text(const std::string& text, const std::string& source = "config") {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": expected key = value");
      c.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path))
      throw Error(ErrorCode::ConfigError, "config file not found: " + path.string());
    try {
      return from_text(detail::read_text_file(path), path.string());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      throw Error(ErrorCode::ConfigError, e.what());
    }
  }

  void set(const std::string& key, const std::string& value) {
    if (!find_config_key(key)) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// "key=value"
  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "override '" + kv + "' is not key=value");
    set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    return it->second;
  }

  double number(const std::string& key) const {
    const std::string& s = get(key);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw Error(ErrorCode::ConfigError, key + ": '" + s + "' is not a number");
    return v;
  }

  long long integer(const std::string& key) const {
    const std::string& s = get(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw Error(ErrorCode::ConfigError, key + ": '" + s + "' is not an integer");
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const std::string& s = get(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw Error(ErrorCode::ConfigError, key + ": '" + s + "' is not a non-negative integer");
    return v;
  }

  bool boolean(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error(ErrorCode::ConfigError, key + ": '" + s + "' is not a boolean");
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Sorted `key=value` lines of the result-affecting keys, prefixed by the
  /// table version.
  std::string canonical() const {
    std::string out = "config_version=" + std::to_string(kConfigVersion) + "\n";
    for (const auto& [k, v] : values_)
      if (find_config_key(k)->affects_results) out += k + "=" + v + "\n";
    return out;
  }

  std::uint64_t hash() const {
    const std::string c = canonical();
    return detail::fnv1a(c.data(), c.size());
  }

  std::string hash_hex() const {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
  }

  std::string to_text() const {
    std::string out;
    for (const auto& k : kConfigKeys) out += std::string("# ") + k.help + "\n" + k.key + " = " + get(k.key) + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace irisswap

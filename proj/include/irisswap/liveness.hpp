#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "irisswap/detail/binary_io.hpp"
#include "irisswap/detail/rng.hpp"
#include "irisswap/error.hpp"
#include "irisswap/gaze.hpp"

namespace irisswap {

inline constexpr double kVelocityCap = 800.0;  // deg/s
inline constexpr double kLivenessRate = 3.0;   // Hz
inline constexpr std::size_t kWindowLength = 7;
inline constexpr std::size_t kWindowStep = 3;
inline constexpr int kInputSize = 2;

// --- velocity ---------------------------------------------------------------

struct VelocitySignal {
  std::vector<double> t;
  std::vector<double> vh;
  std::vector<double> vv;

  std::size_t size() const noexcept { return t.size(); }
};

/// Forward difference, stamped at the leading sample.
inline VelocitySignal compute_velocity(const GazeTrace& trace) {
  if (trace.size() < 2) throw Error(ErrorCode::TooFewSamples, "velocity needs at least 2 samples");
  require_increasing_time(trace);
  VelocitySignal s;
  const std::size_t n = trace.size() - 1;
  s.t.resize(n);
  s.vh.resize(n);
  s.vv.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = trace[i + 1].t - trace[i].t;
    s.t[i] = trace[i].t;
    s.vh[i] = (trace[i + 1].h - trace[i].h) / dt;
    s.vv[i] = (trace[i + 1].v - trace[i].v) / dt;
  }
  return s;
}

/// Replaces |v| > cap by linear interpolation between the nearest surviving
/// neighbours in time; leading/trailing runs take the nearest survivor.
inline void cap_and_interpolate(const std::vector<double>& t, std::vector<double>& ch, double cap = kVelocityCap) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ch.size(); ++i)
    if (std::abs(ch[i]) <= cap) keep.push_back(i);
  if (keep.empty()) throw Error(ErrorCode::AllSamplesCapped, "every sample of a channel exceeds the velocity cap");
  std::size_t k = 0;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    if (std::abs(ch[i]) <= cap) continue;
    while (k < keep.size() && keep[k] < i) ++k;
    if (k == 0) {
      ch[i] = ch[keep.front()];
    } else if (k == keep.size()) {
      ch[i] = ch[keep.back()];
    } else {
      const std::size_t a = keep[k - 1], b = keep[k];
      const double f = (t[i] - t[a]) / (t[b] - t[a]);
      ch[i] = ch[a] + f * (ch[b] - ch[a]);
    }
  }
}

/// Uniform grid t0, t0 + 1/rate, ... up to the last timestamp.
inline std::vector<double> resample_grid(const std::vector<double>& t, double rate) {
  const double span = t.back() - t.front();
  const auto n = static_cast<std::size_t>(std::floor(span * rate + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = t.front() + double(i) / rate;
  return g;
}

inline std::vector<double> interpolate_at(const std::vector<double>& t, const std::vector<double>& y,
                                          const std::vector<double>& grid) {
  std::vector<double> out(grid.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    while (j + 1 < t.size() && t[j + 1] <= x) ++j;
    if (j + 1 >= t.size() || x <= t[j]) {
      out[i] = y[j];
    } else {
      const double f = (x - t[j]) / (t[j + 1] - t[j]);
      out[i] = y[j] + f * (y[j + 1] - y[j]);
    }
  }
  return out;
}

/// Area-weighted resampling of a piecewise-constant signal: sample i holds
/// over [t_i, t_{i+1}) (the last one for as long as the
/// interval before it), and each output is the time-weighted mean over
/// [g_k, g_k + 1/rate). Identity when the grid equals the input timestamps.
inline std::vector<double> box_resample(const std::vector<double>& t, const std::vector<double>& y,
                                        const std::vector<double>& grid, double rate) {
  const std::size_t n = t.size();
  auto end_of = [&](std::size_t i) { return i + 1 < n ? t[i + 1] : t[i] + (n > 1 ? t[i] - t[i - 1] : 1.0 / rate); };
  std::vector<double> out(grid.size());
  std::size_t j = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double a = grid[k], b = a + 1.0 / rate;
    while (j + 1 < n && end_of(j) <= a) ++j;
    double acc = 0.0, w = 0.0;
    for (std::size_t i = j; i < n && t[i] < b; ++i) {
      const double ov = std::min(b, end_of(i)) - std::max(a, t[i]);
      if (ov > 0) {
        acc += ov * y[i];
        w += ov;
      }
    }
    out[k] = w > 0 ? acc / w : y[j];
  }
  return out;
}

enum class Resample { Box, Linear };

inline Resample parse_resample(const std::string& s) {
  if (s == "box") return Resample::Box;
  if (s == "linear") return Resample::Linear;
  throw Error(ErrorCode::ConfigError, "resample must be box or linear, got '" + s + "'");
}

/// Zero range maps to all zeros.
inline void minmax_normalize(std::vector<double>& ch) {
  if (ch.empty()) return;
  const auto [lo, hi] = std::minmax_element(ch.begin(), ch.end());
  const double a = *lo, range = *hi - *lo;
  for (double& v : ch) v = range > 0 ? (v - a) / range : 0.0;
}

/// Cap + interpolate, resample to `target_rate`, per-channel min-max.
inline VelocitySignal preprocess(const VelocitySignal& sig, double cap = kVelocityCap, double target_rate = kLivenessRate,
                                 Resample method = Resample::Box) {
  if (sig.size() < 4) throw Error(ErrorCode::TooFewSamples, "preprocess needs at least 4 velocity samples");
  for (std::size_t i = 1; i < sig.size(); ++i)
    if (!(sig.t[i] > sig.t[i - 1])) throw Error(ErrorCode::NonMonotonicTime, "velocity timestamps not increasing");
  VelocitySignal s = sig;
  cap_and_interpolate(s.t, s.vh, cap);
  cap_and_interpolate(s.t, s.vv, cap);
  VelocitySignal out;
  out.t = resample_grid(s.t, target_rate);
  if (method == Resample::Box) {
    out.vh = box_resample(s.t, s.vh, out.t, target_rate);
    out.vv = box_resample(s.t, s.vv, out.t, target_rate);
  } else {
    out.vh = interpolate_at(s.t, s.vh, out.t);
    out.vv = interpolate_at(s.t, s.vv, out.t);
  }
  minmax_normalize(out.vh);
  minmax_normalize(out.vv);
  return out;
}

// --- windows ------------------------------------------------------------------

enum class Label { Real = 0, Spoof = 1 };

inline const char* to_string(Label l) { return l == Label::Real ? "real" : "spoof"; }

struct VelocityWindow {
  std::vector<std::array<double, 2>> samples;  // (vh, vv) per step
  Label label = Label::Real;
  int subject = 0;
  std::size_t index = 0;
};

inline std::size_t window_count(std::size_t n, std::size_t len = kWindowLength, std::size_t step = kWindowStep) {
  return n < len ? 0 : (n - len) / step + 1;
}

inline std::vector<VelocityWindow> make_windows(const VelocitySignal& sig, std::size_t len, std::size_t step, Label label,
                                                int subject) {
  if (len == 0 || step == 0) throw Error(ErrorCode::SignalTooShort, "window length and step must be positive");
  if (sig.size() < len)
    throw Error(ErrorCode::SignalTooShort,
                "signal of " + std::to_string(sig.size()) + " samples is shorter than window " + std::to_string(len));
  std::vector<VelocityWindow> out;
  const std::size_t count = window_count(sig.size(), len, step);
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    VelocityWindow win;
    win.label = label;
    win.subject = subject;
    win.index = w;
    win.samples.resize(len);
    for (std::size_t k = 0; k < len; ++k) win.samples[k] = {sig.vh[w * step + k], sig.vv[w * step + k]};
    out.push_back(std::move(win));
  }
  return out;
}

inline std::vector<VelocityWindow> make_windows(const VelocitySignal& sig, Label label, int subject) {
  return make_windows(sig, kWindowLength, kWindowStep, label, subject);
}

// --- LSTM -----------------------------------------------------------------------

/// Flat parameter layout (gate order i, f, g, o):
///   Wx[4H x 2] | Wh[4H x H] | b[4H] | w_out[H] | b_out
struct LstmModel {
  int hidden = 16;
  std::vector<double> params;

  LstmModel() : params(param_count(16), 0.0) {}
  explicit LstmModel(int h) : hidden(h), params(param_count(h), 0.0) {
    if (h < 1) throw Error(ErrorCode::ConfigError, "hidden size must be >= 1");
  }

  static std::size_t param_count(int h) {
    const std::size_t H = h;
    return 4 * H * kInputSize + 4 * H * H + 4 * H + H + 1;
  }
  std::size_t wx() const noexcept { return 0; }
  std::size_t wh() const noexcept { return 4 * std::size_t(hidden) * kInputSize; }
  std::size_t b() const noexcept { return wh() + 4 * std::size_t(hidden) * hidden; }
  std::size_t w_out() const noexcept { return b() + 4 * std::size_t(hidden); }
  std::size_t b_out() const noexcept { return w_out() + hidden; }

  bool is_forget_gate_param(std::size_t k) const noexcept {
    const std::size_t H = hidden;
    auto row_in_forget = [&](std::size_t row) { return row >= H && row < 2 * H; };
    if (k < wh()) return row_in_forget(k / kInputSize);
    if (k < b()) return row_in_forget((k - wh()) / H);
    if (k < w_out()) return row_in_forget(k - b());
    return false;
  }
};

/// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases except forget = +1.
inline LstmModel init_model(int hidden, std::uint64_t seed) {
  LstmModel m(hidden);
  detail::Rng rng(detail::derive_seed(seed, {0x696e6974}));
  const double a = 1.0 / std::sqrt(double(hidden));
  for (std::size_t k = 0; k < m.b(); ++k) m.params[k] = detail::uniform(rng, -a, a);
  for (int j = 0; j < hidden; ++j) m.params[m.w_out() + j] = detail::uniform(rng, -a, a);
  for (int j = 0; j < hidden; ++j) m.params[m.b() + hidden + j] = 1.0;
  return m;
}

namespace detail {

template <class S>
S sigmoid(S z) {
  using std::exp;
  return z >= 0 ? S(1) / (S(1) + exp(-z)) : exp(z) / (S(1) + exp(z));
}

// log(1 + e^z) - y z
template <class S>
S bce_with_logit(S z, double y) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return (z > 0 ? z : S(0)) - S(y) * z + log1p(exp(-abs(z)));
}

template <class S>
S forward_logit(int hidden, const S* p, const VelocityWindow& w) {
  using std::tanh;
  const std::size_t H = hidden;
  const S* Wx = p;
  const S* Wh = Wx + 4 * H * kInputSize;
  const S* b = Wh + 4 * H * H;
  const S* wo = b + 4 * H;
  std::vector<S> h(H, S(0)), c(H, S(0)), z(4 * H);
  for (const auto& x : w.samples) {
    for (std::size_t r = 0; r < 4 * H; ++r) {
      S acc = b[r] + Wx[r * 2] * S(x[0]) + Wx[r * 2 + 1] * S(x[1]);
      for (std::size_t j = 0; j < H; ++j) acc += Wh[r * H + j] * h[j];
      z[r] = acc;
    }
    for (std::size_t j = 0; j < H; ++j) {
      const S i = sigmoid(z[j]), f = sigmoid(z[H + j]), g = tanh(z[2 * H + j]), o = sigmoid(z[3 * H + j]);
      c[j] = f * c[j] + i * g;
      h[j] = o * tanh(c[j]);
    }
  }
  S logit = wo[H];
  for (std::size_t j = 0; j < H; ++j) logit += wo[j] * h[j];
  return logit;
}

inline void require_finite(const VelocityWindow& w) {
  for (const auto& x : w.samples)
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]))
      throw Error(ErrorCode::NonFiniteInput, "window " + std::to_string(w.index) + " of subject " +
                                                 std::to_string(w.subject) + " has a non-finite sample");
}

template <class S>
S batch_loss(int hidden, const S* p, const std::vector<const VelocityWindow*>& batch) {
  S total(0);
  for (const VelocityWindow* w : batch)
    total += bce_with_logit(forward_logit(hidden, p, *w), w->label == Label::Spoof ? 1.0 : 0.0);
  return total / S(batch.size());
}

}  // namespace detail

inline double forward_logit(const LstmModel& m, const VelocityWindow& w) {
  detail::require_finite(w);
  return detail::forward_logit(m.hidden, m.params.data(), w);
}

/// Probability that the window is a spoof.
inline double forward(const LstmModel& m, const VelocityWindow& w) { return detail::sigmoid(forward_logit(m, w)); }

inline double batch_loss(const LstmModel& m, const std::vector<const VelocityWindow*>& batch) {
  for (const auto* w : batch) detail::require_finite(*w);
  return detail::batch_loss(m.hidden, m.params.data(), batch);
}

struct GradientOptions {
  double forget_gate_scale = 1.0;  // != 1 only for mutation testing
};

/// Mean BCE over the batch and its gradient by backprop through time.
inline double analytic_gradient(const LstmModel& m, const std::vector<const VelocityWindow*>& batch,
                                std::vector<double>& grad, const GradientOptions& opt = {}) {
  const std::size_t H = m.hidden;
  const double* Wx = m.params.data() + m.wx();
  const double* Wh = m.params.data() + m.wh();
  const double* b = m.params.data() + m.b();
  const double* wo = m.params.data() + m.w_out();
  grad.assign(m.params.size(), 0.0);
  double* gWx = grad.data() + m.wx();
  double* gWh = grad.data() + m.wh();
  double* gb = grad.data() + m.b();
  double* gwo = grad.data() + m.w_out();
  double& gbo = grad[m.b_out()];
  if (batch.empty()) return 0.0;
  const double inv_n = 1.0 / double(batch.size());

  std::vector<double> z(4 * H), dz(4 * H), dh(H), dc(H), dh_prev(H);
  std::vector<double> gi, gf, gg, go, cs, tc, hs;  // per step, flattened [t*H + j]; hs/cs hold t+1 states
  double loss = 0.0;
  for (const VelocityWindow* w : batch) {
    detail::require_finite(*w);
    const std::size_t T = w->samples.size();
    gi.assign(T * H, 0);
    gf.assign(T * H, 0);
    gg.assign(T * H, 0);
    go.assign(T * H, 0);
    tc.assign(T * H, 0);
    cs.assign((T + 1) * H, 0);
    hs.assign((T + 1) * H, 0);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& x = w->samples[t];
      const double* hp = &hs[t * H];
      for (std::size_t r = 0; r < 4 * H; ++r) {
        double acc = b[r] + Wx[r * 2] * x[0] + Wx[r * 2 + 1] * x[1];
        for (std::size_t j = 0; j < H; ++j) acc += Wh[r * H + j] * hp[j];
        z[r] = acc;
      }
      for (std::size_t j = 0; j < H; ++j) {
        const std::size_t k = t * H + j;
        gi[k] = detail::sigmoid(z[j]);
        gf[k] = detail::sigmoid(z[H + j]);
        gg[k] = std::tanh(z[2 * H + j]);
        go[k] = detail::sigmoid(z[3 * H + j]);
        cs[k + H] = gf[k] * cs[k] + gi[k] * gg[k];
        tc[k] = std::tanh(cs[k + H]);
        hs[k + H] = go[k] * tc[k];
      }
    }
    double logit = wo[H];
    for (std::size_t j = 0; j < H; ++j) logit += wo[j] * hs[T * H + j];
    const double y = w->label == Label::Spoof ? 1.0 : 0.0;
    loss += detail::bce_with_logit(logit, y);

    const double dlogit = (detail::sigmoid(logit) - y) * inv_n;
    gbo += dlogit;
    for (std::size_t j = 0; j < H; ++j) {
      gwo[j] += dlogit * hs[T * H + j];
      dh[j] = dlogit * wo[j];
      dc[j] = 0.0;
    }
    for (std::size_t t = T; t-- > 0;) {
      for (std::size_t j = 0; j < H; ++j) {
        const std::size_t k = t * H + j;
        dc[j] += dh[j] * go[k] * (1.0 - tc[k] * tc[k]);
        const double d_o = dh[j] * tc[k];
        const double d_i = dc[j] * gg[k];
        const double d_g = dc[j] * gi[k];
        const double d_f = dc[j] * cs[k];
        dz[j] = d_i * gi[k] * (1.0 - gi[k]);
        dz[H + j] = d_f * gf[k] * (1.0 - gf[k]) * opt.forget_gate_scale;
        dz[2 * H + j] = d_g * (1.0 - gg[k] * gg[k]);
        dz[3 * H + j] = d_o * go[k] * (1.0 - go[k]);
        dc[j] *= gf[k];
      }
      const auto& x = w->samples[t];
      const double* hp = &hs[t * H];
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      for (std::size_t r = 0; r < 4 * H; ++r) {
        const double d = dz[r];
        gb[r] += d;
        gWx[r * 2] += d * x[0];
        gWx[r * 2 + 1] += d * x[1];
        for (std::size_t j = 0; j < H; ++j) {
          gWh[r * H + j] += d * hp[j];
          dh_prev[j] += Wh[r * H + j] * d;
        }
      }
      dh.swap(dh_prev);
    }
  }
  return loss * inv_n;
}

/// Central differences of the batch loss, evaluated in extended precision so
/// rounding stays far below the truncation error.
inline std::vector<double> numerical_gradient(const LstmModel& m, const std::vector<const VelocityWindow*>& batch,
                                              double epsilon = 1e-5) {
  std::vector<long double> p(m.params.begin(), m.params.end());
  std::vector<double> g(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const long double orig = p[k];
    p[k] = orig + epsilon;
    const long double up = detail::batch_loss<long double>(m.hidden, p.data(), batch);
    p[k] = orig - epsilon;
    const long double down = detail::batch_loss<long double>(m.hidden, p.data(), batch);
    p[k] = orig;
    g[k] = static_cast<double>((up - down) / (2.0L * epsilon));
  }
  return g;
}

inline double relative_gradient_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double a = analytic[k], n = numeric[k];
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}));
  }
  return worst;
}

/// Max relative error between BPTT and finite-difference gradients.
inline double gradient_check(const LstmModel& m, const std::vector<const VelocityWindow*>& batch, double epsilon = 1e-5,
                             const GradientOptions& opt = {}) {
  std::vector<double> ga;
  analytic_gradient(m, batch, ga, opt);
  return relative_gradient_error(ga, numerical_gradient(m, batch, epsilon));
}

// --- training -----------------------------------------------------------------

struct SplitPlan {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
  std::uint64_t seed = 0;
};

struct TrainHyper {
  int hidden = 16;
  double learning_rate = 1e-2;
  std::size_t batch_size = 32;
  int max_epochs = 300;
  int patience = 25;
  double clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  LstmModel model;
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

inline Label classify(double p_spoof, double threshold = 0.5) { return p_spoof >= threshold ? Label::Spoof : Label::Real; }

inline double window_accuracy(const LstmModel& m, const std::vector<const VelocityWindow*>& ws, double threshold = 0.5) {
  if (ws.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto* w : ws) ok += classify(forward(m, *w), threshold) == w->label;
  return double(ok) / double(ws.size());
}

namespace detail {

// Fisher-Yates with raw 64-bit draws: identical across standard libraries.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

inline void require_both_classes(const std::vector<const VelocityWindow*>& ws, const char* what) {
  bool real = false, spoof = false;
  for (const auto* w : ws) (w->label == Label::Real ? real : spoof) = true;
  if (!real || !spoof) throw Error(ErrorCode::SingleClassPartition, std::string(what) + " partition lacks a class");
}

}  // namespace detail

/// Adam on mean BCE with global-norm clipping; keeps the parameters of the
/// epoch with the lowest validation loss and stops after `patience` epochs
/// without improvement.
inline TrainResult train(const std::vector<VelocityWindow>& data, const SplitPlan& split, const TrainHyper& hp,
                         std::uint64_t seed) {
  const std::set<int> tr(split.train.begin(), split.train.end()), va(split.validation.begin(), split.validation.end());
  std::vector<const VelocityWindow*> train_set, val_set;
  for (const auto& w : data) {
    if (tr.count(w.subject)) train_set.push_back(&w);
    else if (va.count(w.subject)) val_set.push_back(&w);
  }
  detail::require_both_classes(train_set, "training");
  detail::require_both_classes(val_set, "validation");
  if (hp.batch_size == 0) throw Error(ErrorCode::ConfigError, "batch size must be positive");

  TrainResult res{init_model(hp.hidden, seed), {}, 0};
  LstmModel& m = res.model;
  LstmModel best = m;
  double best_val = std::numeric_limits<double>::infinity();
  detail::Rng rng(detail::derive_seed(seed, {0x74726169}));
  std::vector<double> mom(m.params.size(), 0.0), vel(m.params.size(), 0.0), grad;
  std::vector<const VelocityWindow*> batch;
  long step = 0;
  int stale = 0;
  for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    detail::shuffle(train_set, rng);
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < train_set.size(); s += hp.batch_size) {
      batch.assign(train_set.begin() + s, train_set.begin() + std::min(train_set.size(), s + hp.batch_size));
      loss_sum += analytic_gradient(m, batch, grad) * double(batch.size());
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);
      if (!std::isfinite(norm)) throw Error(ErrorCode::DivergedLoss, "non-finite gradient at epoch " + std::to_string(epoch));
      const double scale = norm > hp.clip_norm ? hp.clip_norm / norm : 1.0;
      ++step;
      const double c1 = 1.0 - std::pow(hp.beta1, double(step));
      const double c2 = 1.0 - std::pow(hp.beta2, double(step));
      for (std::size_t k = 0; k < grad.size(); ++k) {
        const double g = grad[k] * scale;
        mom[k] = hp.beta1 * mom[k] + (1.0 - hp.beta1) * g;
        vel[k] = hp.beta2 * vel[k] + (1.0 - hp.beta2) * g * g;
        m.params[k] -= hp.learning_rate * (mom[k] / c1) / (std::sqrt(vel[k] / c2) + hp.adam_eps);
      }
    }
    EpochStats st{epoch, loss_sum / double(train_set.size()), batch_loss(m, val_set), window_accuracy(m, val_set)};
    if (!std::isfinite(st.train_loss) || !std::isfinite(st.validation_loss))
      throw Error(ErrorCode::DivergedLoss, "non-finite loss at epoch " + std::to_string(epoch));
    res.history.push_back(st);
    if (st.validation_loss < best_val) {
      best_val = st.validation_loss;
      best = m;
      res.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= hp.patience) {
      break;
    }
  }
  res.model = std::move(best);
  return res;
}

// --- decisions and ASR ------------------------------------------------------------

/// Majority vote over hard window decisions; ties go to spoof.
inline Label majority_vote(const std::vector<Label>& decisions) {
  if (decisions.empty()) throw Error(ErrorCode::NoWindows, "no windows to vote on");
  std::size_t real = 0;
  for (Label l : decisions) real += l == Label::Real;
  return 2 * real > decisions.size() ? Label::Real : Label::Spoof;
}

inline Label predict_user(const LstmModel& m, const std::vector<VelocityWindow>& windows, double threshold = 0.5) {
  std::vector<Label> d;
  d.reserve(windows.size());
  for (const auto& w : windows) d.push_back(classify(forward(m, w), threshold));
  return majority_vote(d);
}

struct Prediction {
  Label truth = Label::Real;
  Label predicted = Label::Real;
};

struct AttackSuccess {
  double window = 0.0;
  double user = 0.0;
  std::size_t spoof_windows = 0;
  std::size_t spoof_users = 0;
};

/// ASR = spoofed samples predicted real / spoofed samples, at window and at
/// user level.
inline AttackSuccess attack_success_rate(const std::vector<Prediction>& windows, const std::vector<Prediction>& users) {
  AttackSuccess a;
  std::size_t win_real = 0, user_real = 0;
  for (const auto& p : windows)
    if (p.truth == Label::Spoof) {
      ++a.spoof_windows;
      win_real += p.predicted == Label::Real;
    }
  for (const auto& p : users)
    if (p.truth == Label::Spoof) {
      ++a.spoof_users;
      user_real += p.predicted == Label::Real;
    }
  if (a.spoof_windows == 0 || a.spoof_users == 0)
    throw Error(ErrorCode::NoSpoofedSamples, "ASR needs at least one spoofed window and one spoofed user");
  a.window = double(win_real) / double(a.spoof_windows);
  a.user = double(user_real) / double(a.spoof_users);
  return a;
}

// --- persistence ------------------------------------------------------------------

/// Plain-text model dump:
///   irisswap-lstm 1
///   hidden <H>
///   input 2
///   params <count>
///   <one %.17g value per line, flat layout above>
inline std::string model_to_text(const LstmModel& m) {
  std::string out = "irisswap-lstm 1\nhidden " + std::to_string(m.hidden) + "\ninput " + std::to_string(kInputSize) +
                    "\nparams " + std::to_string(m.params.size()) + "\n";
  char buf[40];
  for (double v : m.params) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out += buf;
  }
  return out;
}

inline LstmModel model_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string magic, key;
  int version = 0, hidden = 0, input = 0;
  std::size_t count = 0;
  auto expect = [&](const char* k) {
    if (!(in >> key) || key != k) throw Error(ErrorCode::MalformedFile, std::string("model file: expected '") + k + "'");
  };
  if (!(in >> magic >> version) || magic != "irisswap-lstm" || version != 1)
    throw Error(ErrorCode::MalformedFile, "model file: bad magic/version");
  expect("hidden");
  in >> hidden;
  expect("input");
  in >> input;
  expect("params");
  in >> count;
  if (!in || hidden < 1 || input != kInputSize) throw Error(ErrorCode::MalformedFile, "model file: bad dimensions");
  LstmModel m(hidden);
  if (count != m.params.size()) throw Error(ErrorCode::MalformedFile, "model file: parameter count mismatch");
  for (double& v : m.params) {
    std::string tok;
    if (!(in >> tok)) throw Error(ErrorCode::MalformedFile, "model file: truncated parameters");
    v = detail::parse_double(tok, "model parameter");
  }
  return m;
}

inline void save_model(const LstmModel& m, const std::filesystem::path& p) { detail::write_text_file(p, model_to_text(m)); }
inline LstmModel load_model(const std::filesystem::path& p) { return model_from_text(detail::read_text_file(p)); }

/// CSV `subject,label,window_index,ch,s0..s{len-1}`, one row per channel.
inline std::string windows_to_csv(const std::vector<VelocityWindow>& ws) {
  std::size_t len = ws.empty() ? kWindowLength : ws.front().samples.size();
  std::string out = "subject,label,window_index,ch";
  for (std::size_t k = 0; k < len; ++k) out += ",s" + std::to_string(k);
  out += "\n";
  char buf[40];
  for (const auto& w : ws) {
    if (w.samples.size() != len) throw Error(ErrorCode::DimensionMismatch, "windows of differing length");
    for (int ch = 0; ch < 2; ++ch) {
      out += std::to_string(w.subject) + "," + to_string(w.label) + "," + std::to_string(w.index) + "," +
             std::to_string(ch);
      for (const auto& s : w.samples) {
        std::snprintf(buf, sizeof buf, ",%.17g", s[ch]);
        out += buf;
      }
      out += "\n";
    }
  }
  return out;
}

inline std::vector<VelocityWindow> windows_from_csv(const std::string& text, std::size_t len = kWindowLength) {
  std::string header = "subject,label,window_index,ch";
  for (std::size_t k = 0; k < len; ++k) header += ",s" + std::to_string(k);
  const auto rows = detail::read_csv_rows(text, header, "window CSV");
  for (const auto& row : rows)
    if (row.size() != 4 + len) throw Error(ErrorCode::MalformedFile, "window CSV: wrong column count");
  if (rows.size() % 2) throw Error(ErrorCode::MalformedFile, "window CSV needs two channel rows per window");
  std::vector<VelocityWindow> out;
  for (std::size_t r = 0; r < rows.size(); r += 2) {
    const auto& a = rows[r];
    const auto& b = rows[r + 1];
    if (a[0] != b[0] || a[1] != b[1] || a[2] != b[2] || a[3] != "0" || b[3] != "1")
      throw Error(ErrorCode::MalformedFile, "window CSV rows " + std::to_string(r) + "/" + std::to_string(r + 1) +
                                                " are not a channel pair");
    VelocityWindow w;
    w.subject = static_cast<int>(detail::parse_double(a[0], "subject"));
    if (a[1] == "real") w.label = Label::Real;
    else if (a[1] == "spoof") w.label = Label::Spoof;
    else throw Error(ErrorCode::MalformedFile, "unknown label '" + a[1] + "'");
    w.index = static_cast<std::size_t>(detail::parse_double(a[2], "window_index"));
    w.samples.resize(len);
    for (std::size_t k = 0; k < len; ++k)
      w.samples[k] = {detail::parse_double(a[4 + k], "sample"), detail::parse_double(b[4 + k], "sample")};
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace irisswap

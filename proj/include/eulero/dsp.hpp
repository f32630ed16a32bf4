#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "eulero/fft.hpp"
#include "eulero/tensor.hpp"

namespace eulero {

struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = 24000;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  bool all_finite() const {
    for (float s : samples)
      if (!std::isfinite(s)) return false;
    return true;
  }
};

struct StftConfig {
  int n_fft = 512;
  int win_length = 512;
  int hop_length = 64;
  // window kind: Hann only

  int freq_bins() const { return n_fft / 2 + 1; }

  void validate() const {
    if (!(hop_length > 0 && hop_length <= win_length && win_length <= n_fft))
      throw std::invalid_argument("StftConfig: need hop <= win <= n_fft");
    if (!fft::is_pow2(static_cast<size_t>(n_fft)))
      throw std::invalid_argument("StftConfig: n_fft must be a power of two");
  }
};

// Complex STFT frames (C, F, T) plus the analysis configuration that made them.
struct Spectrogram {
  Tensor data;  // (C, F, T)
  StftConfig config;

  int channels() const { return data.dim(0); }
  int bins() const { return data.dim(1); }
  int frames() const { return data.dim(2); }
};

namespace dsp {

// Periodic Hann window.
inline std::vector<float> hann_window(int n) {
  std::vector<float> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5f * (1.f - std::cos(2.0 * 3.14159265358979323846 * i / n));
  return w;
}

// Frame count under centered analysis (reflect pad of win/2 each side):
// T = floor((len + 2*(win/2) - win) / hop) + 1 = floor(len / hop) + 1.
inline int frame_count(int64_t len, const StftConfig& cfg) {
  int pad = cfg.win_length / 2;
  return static_cast<int>((len + 2 * pad - cfg.win_length) / cfg.hop_length) + 1;
}

// Reflect index (no edge repetition), valid while len > 1.
inline int64_t reflect_index(int64_t i, int64_t len) {
  while (i < 0 || i >= len) {
    if (i < 0) i = -i;
    if (i >= len) i = 2 * len - 2 - i;
  }
  return i;
}

// Extract centered frame t of the signal (windowed, zero-padded to n_fft).
inline void extract_frame(const std::vector<float>& x, const StftConfig& cfg,
                          const std::vector<float>& win, int t,
                          std::vector<std::complex<double>>& frame) {
  const int64_t len = static_cast<int64_t>(x.size());
  const int pad = cfg.win_length / 2;
  frame.assign(cfg.n_fft, {0.0, 0.0});
  const int64_t start = static_cast<int64_t>(t) * cfg.hop_length - pad;
  for (int n = 0; n < cfg.win_length; ++n) {
    int64_t i = reflect_index(start + n, len);
    frame[n] = {static_cast<double>(x[i]) * win[n], 0.0};
  }
}

inline Spectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(audio.samples.size()) < cfg.win_length)
    throw std::invalid_argument("stft: audio shorter than win_length");
  if (!audio.all_finite()) throw std::invalid_argument("stft: non-finite samples");
  const int F = cfg.freq_bins();
  const int T = frame_count(audio.samples.size(), cfg);
  auto win = hann_window(cfg.win_length);
  Tensor out({1, F, T});
  std::vector<std::complex<double>> frame;
  for (int t = 0; t < T; ++t) {
    extract_frame(audio.samples, cfg, win, t, frame);
    fft::forward(frame);
    for (int k = 0; k < F; ++k)
      out[static_cast<int64_t>(k) * T + t] = cfloat(frame[k]);
  }
  return {std::move(out), cfg};
}

// Hermitian-extend a one-sided frame and inverse-transform to a real frame.
inline void frame_to_time(const cfloat* bins, int stride, int F, int n_fft,
                          std::vector<std::complex<double>>& full) {
  full.assign(n_fft, {0.0, 0.0});
  for (int k = 0; k < F; ++k) full[k] = std::complex<double>(bins[static_cast<int64_t>(k) * stride]);
  for (int k = 1; k < F - 1; ++k) full[n_fft - k] = std::conj(full[k]);
  fft::inverse(full);
}

// ISTFT via squared-window overlap-add normalization; exact inversion for any
// hop with nonvanishing window-power sum.
inline AudioBuffer istft(const Spectrogram& spec, int sample_rate = 24000,
                         int64_t length = -1) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.bins() != cfg.freq_bins())
    throw std::invalid_argument("istft: bin count does not match config");
  const int F = spec.bins();
  const int T = spec.frames();
  const int pad = cfg.win_length / 2;
  auto win = hann_window(cfg.win_length);
  const int64_t padded_len = static_cast<int64_t>(T - 1) * cfg.hop_length + cfg.win_length;
  std::vector<double> acc(padded_len, 0.0), den(padded_len, 0.0);
  std::vector<std::complex<double>> full;
  for (int t = 0; t < T; ++t) {
    frame_to_time(spec.data.data() + t, T, F, cfg.n_fft, full);
    const int64_t off = static_cast<int64_t>(t) * cfg.hop_length;
    for (int n = 0; n < cfg.win_length; ++n) {
      acc[off + n] += full[n].real() * win[n];
      den[off + n] += static_cast<double>(win[n]) * win[n];
    }
  }
  if (length < 0) length = static_cast<int64_t>(T - 1) * cfg.hop_length;
  if (length + pad > padded_len)
    throw std::invalid_argument("istft: requested length exceeds frame coverage");
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(length);
  bool any_valid = false;
  for (int64_t i = 0; i < length; ++i) {
    double d = den[i + pad];
    if (d > 1e-8) any_valid = true;
    out.samples[i] = static_cast<float>(acc[i + pad] / std::max(d, 1e-8));
  }
  if (length > 0 && !any_valid)
    throw std::runtime_error("istft: degenerate window sum (all-zero denominator)");
  return out;
}

// Stitch equal-length segments with complementary Hann cross-fades; fades sum
// to unity in every overlap region.
inline AudioBuffer overlap_add_segments(const std::vector<AudioBuffer>& segments, int64_t hop) {
  if (segments.empty()) throw std::invalid_argument("overlap_add_segments: empty list");
  const int64_t seg_len = static_cast<int64_t>(segments[0].samples.size());
  for (const auto& s : segments)
    if (static_cast<int64_t>(s.samples.size()) != seg_len)
      throw std::invalid_argument("overlap_add_segments: inconsistent segment lengths");
  if (hop <= 0 || hop > seg_len)
    throw std::invalid_argument("overlap_add_segments: need 0 < hop <= segment length");
  const int64_t ov = seg_len - hop;
  const int64_t n = static_cast<int64_t>(segments.size());
  AudioBuffer out;
  out.sample_rate = segments[0].sample_rate;
  out.samples.assign((n - 1) * hop + seg_len, 0.f);
  std::vector<double> fade_in(ov);
  for (int64_t j = 0; j < ov; ++j) {
    double s = std::sin(3.14159265358979323846 * (j + 0.5) / (2.0 * ov));
    fade_in[j] = s * s;
  }
  for (int64_t s = 0; s < n; ++s) {
    const int64_t off = s * hop;
    for (int64_t j = 0; j < seg_len; ++j) {
      double w = 1.0;
      if (s > 0 && j < ov) w *= fade_in[j];
      if (s + 1 < n && j >= hop) w *= 1.0 - fade_in[j - hop];
      out.samples[off + j] += static_cast<float>(w * segments[s].samples[j]);
    }
  }
  return out;
}

// Peak normalization to 0.95; silent input passes through with gain 1.
inline std::pair<AudioBuffer, float> normalize_waveform(const AudioBuffer& audio) {
  if (audio.samples.empty()) throw std::invalid_argument("normalize_waveform: empty input");
  float peak = 0.f;
  for (float s : audio.samples) peak = std::max(peak, std::abs(s));
  if (peak <= 0.f) return {audio, 1.f};
  float gain = 0.95f / peak;
  AudioBuffer out = audio;
  for (float& s : out.samples) s *= gain;
  return {out, gain};
}

struct MelFilterbank {
  std::vector<float> weights;  // n_mels x F, row-major, nonnegative
  int n_mels = 0;
  int n_bins = 0;
  float fmin = 0.f, fmax = 0.f;

  float at(int m, int k) const { return weights[static_cast<int64_t>(m) * n_bins + k]; }
};

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters on the mel scale spanning [0, sr/2]; no area normalization.
inline MelFilterbank mel_filterbank(int n_mels, const StftConfig& cfg, int sample_rate,
                                    float fmin = 0.f, float fmax = -1.f) {
  if (fmax < 0.f) fmax = sample_rate / 2.f;
  const int F = cfg.freq_bins();
  if (n_mels < 1) throw std::invalid_argument("mel_filterbank: n_mels >= 1 required");
  if (n_mels > F) throw std::invalid_argument("mel_filterbank: n_mels exceeds bin count");
  if (fmax > sample_rate / 2.f + 1e-6f)
    throw std::invalid_argument("mel_filterbank: fmax above Nyquist");
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = F;
  fb.fmin = fmin;
  fb.fmax = fmax;
  fb.weights.assign(static_cast<int64_t>(n_mels) * F, 0.f);
  const double mlo = hz_to_mel(fmin), mhi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mlo + (mhi - mlo) * i / (n_mels + 1));
  const double bin_hz = static_cast<double>(sample_rate) / cfg.n_fft;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
    bool nonzero = false;
    for (int k = 0; k < F; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < hi)
        w = f <= c ? (f - lo) / std::max(c - lo, 1e-9) : (hi - f) / std::max(hi - c, 1e-9);
      if (w > 0.0) nonzero = true;
      fb.weights[static_cast<int64_t>(m) * F + k] = static_cast<float>(w);
    }
    if (!nonzero) {
      // very narrow band: assign the closest bin so every row stays nonzero
      int k = static_cast<int>(std::round(c / bin_hz));
      k = std::min(std::max(k, 0), F - 1);
      fb.weights[static_cast<int64_t>(m) * F + k] = 1.f;
    }
  }
  return fb;
}

}  // namespace dsp
}  // namespace eulero

#pragma once

// Differentiable analysis/synthesis bridging waveform tensors and complex
// spectrogram tensors. Forward paths mirror dsp::stft / dsp::istft exactly;
// backward paths are the adjoint linear maps.

#include "eulero/autograd.hpp"
#include "eulero/dsp.hpp"

namespace eulero {
namespace ops {

// Waveform (rank-1, real part used) -> complex spectrogram (1, F, T).
inline ag::Var stft_op(const ag::Var& wave, const StftConfig& cfg) {
  cfg.validate();
  const Tensor& x = wave->value;
  if (x.rank() != 1) throw std::invalid_argument("stft_op: rank-1 waveform required");
  const int64_t len = x.size();
  if (len < cfg.win_length) throw std::invalid_argument("stft_op: input shorter than window");
  const int F = cfg.freq_bins();
  const int T = dsp::frame_count(len, cfg);
  const int pad = cfg.win_length / 2;
  auto win = dsp::hann_window(cfg.win_length);
  Tensor out({1, F, T});
  std::vector<std::complex<double>> frame(cfg.n_fft);
  for (int t = 0; t < T; ++t) {
    frame.assign(cfg.n_fft, {0.0, 0.0});
    const int64_t start = static_cast<int64_t>(t) * cfg.hop_length - pad;
    for (int n = 0; n < cfg.win_length; ++n) {
      int64_t i = dsp::reflect_index(start + n, len);
      frame[n] = {static_cast<double>(x[i].real()) * win[n], 0.0};
    }
    fft::forward(frame);
    for (int k = 0; k < F; ++k) out[static_cast<int64_t>(k) * T + t] = cfloat(frame[k]);
  }
  return ag::make_node(std::move(out), {wave}, [wave, cfg, len, F, T, pad, win](ag::Node& n) {
    Tensor gx(wave->value.shape());
    std::vector<std::complex<double>> g(cfg.n_fft);
    for (int t = 0; t < T; ++t) {
      g.assign(cfg.n_fft, {0.0, 0.0});
      for (int k = 0; k < F; ++k)
        g[k] = std::complex<double>(n.grad[static_cast<int64_t>(k) * T + t]);
      // adjoint of the one-sided DFT rows: h[m] = sum_k g_k e^{+i 2pi k m / N}
      fft::inverse(g);
      const int64_t start = static_cast<int64_t>(t) * cfg.hop_length - pad;
      for (int m = 0; m < cfg.win_length; ++m) {
        int64_t i = dsp::reflect_index(start + m, len);
        gx[i] += cfloat(real_t(cfg.n_fft * g[m].real() * win[m]), 0);
      }
    }
    ag::accumulate(wave, gx);
  });
}

// Complex spectrogram (1, F, T) -> waveform (rank-1 real), squared-window
// overlap-add normalization as in dsp::istft.
inline ag::Var istft_op(const ag::Var& spec, const StftConfig& cfg, int64_t length = -1) {
  cfg.validate();
  const Tensor& s = spec->value;
  if (s.rank() != 3 || s.dim(0) != 1 || s.dim(1) != cfg.freq_bins())
    throw std::invalid_argument("istft_op: (1, F, T) spectrogram required");
  const int F = s.dim(1), T = s.dim(2);
  const int pad = cfg.win_length / 2;
  auto win = dsp::hann_window(cfg.win_length);
  const int64_t padded_len = static_cast<int64_t>(T - 1) * cfg.hop_length + cfg.win_length;
  if (length < 0) length = static_cast<int64_t>(T - 1) * cfg.hop_length;
  if (length + pad > padded_len)
    throw std::invalid_argument("istft_op: requested length exceeds frame coverage");
  std::vector<double> acc(padded_len, 0.0);
  auto den = std::make_shared<std::vector<double>>(padded_len, 0.0);
  std::vector<std::complex<double>> full;
  for (int t = 0; t < T; ++t) {
    dsp::frame_to_time(s.data() + t, T, F, cfg.n_fft, full);
    const int64_t off = static_cast<int64_t>(t) * cfg.hop_length;
    for (int n = 0; n < cfg.win_length; ++n) {
      acc[off + n] += full[n].real() * win[n];
      (*den)[off + n] += static_cast<double>(win[n]) * win[n];
    }
  }
  Tensor out({static_cast<int>(length)});
  for (int64_t i = 0; i < length; ++i)
    out[i] = cfloat(real_t(acc[i + pad] / std::max((*den)[i + pad], 1e-8)), 0);
  return ag::make_node(std::move(out), {spec}, [spec, cfg, F, T, pad, win, den, length](ag::Node& n) {
    Tensor gs(spec->value.shape());
    std::vector<std::complex<double>> u(cfg.n_fft);
    for (int t = 0; t < T; ++t) {
      u.assign(cfg.n_fft, {0.0, 0.0});
      const int64_t off = static_cast<int64_t>(t) * cfg.hop_length;
      for (int m = 0; m < cfg.win_length; ++m) {
        int64_t i = off + m - pad;  // output coordinate covered by this tap
        if (i < 0 || i >= length) continue;
        double d = std::max((*den)[i + pad], 1e-8);
        u[m] = {static_cast<double>(n.grad[i].real()) * win[m] / d, 0.0};
      }
      fft::forward(u);
      // Hermitian fold-back: interior bins carry weight 2, edges weight 1
      for (int k = 0; k < F; ++k) {
        double a = (k == 0 || k == F - 1) ? 1.0 : 2.0;
        gs[static_cast<int64_t>(k) * T + t] +=
            cfloat(std::complex<double>(a / cfg.n_fft) * u[k]);
      }
    }
    ag::accumulate(spec, gs);
  });
}

}  // namespace ops
}  // namespace eulero

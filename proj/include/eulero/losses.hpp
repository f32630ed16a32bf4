#pragma once

#include "eulero/dsp_ops.hpp"

namespace eulero {
namespace losses {

struct LossWeights {
  double w_mel = 1.0;
  double w_cplx = 1.0;
  double w_mrs = 1.0;
  // fixed multipliers of the composite objective
  double mel_scale = 80.0;
  double cplx_scale = 80.0;
  double mrs_scale = 50.0;
  double quant_scale = 0.1;

  void validate() const {
    if (w_mel < 0 || w_cplx < 0 || w_mrs < 0)
      throw std::invalid_argument("LossWeights: negative multiplier");
  }
};

struct Resolution {
  int n_fft;
  int hop;
  int win;
  int n_mels;
};

struct MultiResConfig {
  std::vector<Resolution> resolutions{
      {512, 64, 512, 80}, {1024, 128, 1024, 80}, {2048, 256, 2048, 80}};
  int sample_rate = 24000;

  void validate() const {
    if (resolutions.empty()) throw std::invalid_argument("MultiResConfig: empty");
    for (const auto& r : resolutions)
      if (!(r.hop > 0 && r.hop < r.win && r.win <= r.n_fft && r.n_mels >= 1))
        throw std::invalid_argument("MultiResConfig: bad resolution");
  }
};

namespace detail {

inline void check_lengths(const ag::Var& pred, const Tensor& target) {
  if (pred->value.rank() != 1 || target.rank() != 1 ||
      pred->value.size() != target.size())
    throw std::invalid_argument("loss: waveform length mismatch");
}

inline Tensor mel_matrix(const Resolution& r, int sample_rate) {
  StftConfig cfg{r.n_fft, r.win, r.hop};
  auto fb = dsp::mel_filterbank(r.n_mels, cfg, sample_rate);
  Tensor w({fb.n_mels, fb.n_bins});
  for (int64_t i = 0; i < w.size(); ++i) w[i] = cfloat(fb.weights[i], 0);
  return w;
}

// mean |x| of a (real or complex) tensor node
inline ag::Var l1_mean(const ag::Var& x) { return ag::mean_all(ag::modulus(x)); }

}  // namespace detail

// Mean over resolutions of the mean absolute log-mel difference,
// log(1e-5 + mel(|STFT|)).
inline ag::Var mel_l1(const ag::Var& pred, const Tensor& target, const MultiResConfig& cfg) {
  cfg.validate();
  detail::check_lengths(pred, target);
  ag::Var tgt = ag::constant(target);
  ag::Var acc = ag::constant(Tensor::scalar(cfloat(0, 0)));
  for (const auto& r : cfg.resolutions) {
    StftConfig sc{r.n_fft, r.win, r.hop};
    ag::Var mel_w = ag::constant(detail::mel_matrix(r, cfg.sample_rate));
    auto logmel = [&](const ag::Var& wave) {
      ag::Var mag = ag::reshape(ag::modulus(ops::stft_op(wave, sc)),
                                {sc.freq_bins(), dsp::frame_count(wave->value.size(), sc)});
      ag::Var mel = ag::matmul(mel_w, mag);
      return ag::log_real(ag::add(mel, ag::constant(Tensor::full(mel->value.shape(),
                                                                 cfloat(real_t(1e-5), 0)))));
    };
    acc = ag::add(acc, detail::l1_mean(ag::sub(logmel(pred), logmel(tgt))));
  }
  return ag::smul(acc, real_t(1) / static_cast<real_t>(cfg.resolutions.size()));
}

// Sum over resolutions of spectral convergence plus complex L1; the
// convergence term is skipped when the target is (near) silent.
inline ag::Var mrs_loss(const ag::Var& pred, const Tensor& target, const MultiResConfig& cfg) {
  cfg.validate();
  detail::check_lengths(pred, target);
  ag::Var tgt = ag::constant(target);
  ag::Var acc = ag::constant(Tensor::scalar(cfloat(0, 0)));
  for (const auto& r : cfg.resolutions) {
    StftConfig sc{r.n_fft, r.win, r.hop};
    ag::Var sp = ops::stft_op(pred, sc);
    ag::Var st = ops::stft_op(tgt, sc);
    double tnorm = 0;
    for (int64_t i = 0; i < st->value.size(); ++i) tnorm += std::norm(st->value[i]);
    tnorm = std::sqrt(tnorm);
    if (tnorm >= 1e-8) {
      ag::Var d = ag::sub(ag::modulus(st), ag::modulus(sp));
      ag::Var num = ag::sqrt_real(ag::sum_all(ag::mul(d, d)));
      acc = ag::add(acc, ag::smul(num, real_t(1.0 / tnorm)));
    }
    acc = ag::add(acc, detail::l1_mean(ag::sub(st, sp)));
  }
  return acc;
}

// Mean complex L1 between predicted and target spectrograms at the analysis
// resolution.
inline ag::Var gen_loss(const ag::Var& pred_spec, const Tensor& target_spec) {
  if (!(pred_spec->value.shape() == target_spec.shape()))
    throw std::invalid_argument("gen_loss: spectrogram shape mismatch");
  return detail::l1_mean(ag::sub(pred_spec, ag::constant(target_spec)));
}

struct LossBreakdown {
  double mel = 0, gen = 0, mrs = 0, quant = 0, total = 0;
};

// Weighted composite objective: 80 w_mel L_mel + 80 w_cplx L_gen
// + 50 w_mrs L_mrs + 0.1 L_q, where L_q is the commitment penalty (already
// scaled by beta inside the quantizer).
inline std::pair<ag::Var, LossBreakdown> total_loss(
    const ag::Var& pred_wave, const ag::Var& pred_spec, const Tensor& target_wave,
    const Tensor& target_spec, const ag::Var& commit_loss, const LossWeights& w,
    const MultiResConfig& cfg) {
  w.validate();
  ag::Var lmel = mel_l1(pred_wave, target_wave, cfg);
  ag::Var lgen = gen_loss(pred_spec, target_spec);
  ag::Var lmrs = mrs_loss(pred_wave, target_wave, cfg);
  LossBreakdown b;
  b.mel = lmel->value[0].real();
  b.gen = lgen->value[0].real();
  b.mrs = lmrs->value[0].real();
  b.quant = commit_loss->value[0].real();
  ag::Var total = ag::add(
      ag::add(ag::smul(lmel, real_t(w.mel_scale * w.w_mel)),
              ag::smul(lgen, real_t(w.cplx_scale * w.w_cplx))),
      ag::add(ag::smul(lmrs, real_t(w.mrs_scale * w.w_mrs)),
              ag::smul(commit_loss, real_t(w.quant_scale))));
  b.total = total->value[0].real();
  if (!std::isfinite(b.total))
    throw std::runtime_error("total_loss: non-finite objective");
  return {total, b};
}

// Convenience evaluation overloads on plain audio.
inline double mel_l1(const AudioBuffer& pred, const AudioBuffer& target,
                     const MultiResConfig& cfg) {
  Tensor p({static_cast<int>(pred.samples.size())}), t({static_cast<int>(target.samples.size())});
  for (size_t i = 0; i < pred.samples.size(); ++i) p[i] = cfloat(pred.samples[i], 0);
  for (size_t i = 0; i < target.samples.size(); ++i) t[i] = cfloat(target.samples[i], 0);
  return mel_l1(ag::constant(std::move(p)), t, cfg)->value[0].real();
}

inline double mrs_loss(const AudioBuffer& pred, const AudioBuffer& target,
                       const MultiResConfig& cfg) {
  Tensor p({static_cast<int>(pred.samples.size())}), t({static_cast<int>(target.samples.size())});
  for (size_t i = 0; i < pred.samples.size(); ++i) p[i] = cfloat(pred.samples[i], 0);
  for (size_t i = 0; i < target.samples.size(); ++i) t[i] = cfloat(target.samples[i], 0);
  return mrs_loss(ag::constant(std::move(p)), t, cfg)->value[0].real();
}

}  // namespace losses
}  // namespace eulero

#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eulero/losses.hpp"
#include "eulero/model.hpp"
#include "eulero/serialize.hpp"

namespace eulero {
namespace trainer {

// ---- segment sampling -------------------------------------------------------

// Random crop of `seg_samples`; clips shorter than the segment are zero-padded
// at the end, but start positions are restricted so padding never exceeds 5%.
inline AudioBuffer sample_segment(const AudioBuffer& clip, int seg_samples, std::mt19937& rng) {
  const int64_t n = static_cast<int64_t>(clip.samples.size());
  const int64_t min_real = static_cast<int64_t>(std::ceil(0.95 * seg_samples));
  if (n < min_real)
    throw std::invalid_argument("sample_segment: clip shorter than 95% of a segment");
  const int64_t max_start = std::max<int64_t>(n - min_real, 0);
  std::uniform_int_distribution<int64_t> u(0, max_start);
  const int64_t start = u(rng);
  AudioBuffer out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(seg_samples, 0.f);
  const int64_t avail = std::min<int64_t>(seg_samples, n - start);
  for (int64_t i = 0; i < avail; ++i) out.samples[i] = clip.samples[start + i];
  return out;
}

// ---- learning-rate schedule -------------------------------------------------

struct ScheduleConfig {
  int64_t warmup_steps = 100;
  int64_t total_steps = 10000;
  double peak = 3e-4;
  double gamma = 1.0;  // temporal warping exponent on the decay progress
};

// Linear warmup to the peak, then warped cosine decay to peak/100.
inline double lr_schedule(int64_t step, const ScheduleConfig& cfg) {
  if (step <= 0) return 0.0;
  if (step < cfg.warmup_steps)
    return cfg.peak * static_cast<double>(step) / cfg.warmup_steps;
  if (step >= cfg.total_steps) return cfg.peak * 0.01;
  double tau = static_cast<double>(step - cfg.warmup_steps) /
               static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  double warped = std::pow(tau, cfg.gamma);
  return cfg.peak * (0.01 + 0.99 * 0.5 * (1.0 + std::cos(M_PI * warped)));
}

// ---- optimizer --------------------------------------------------------------

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 7e-4;
};

// AdamW over the real coordinate view: every complex parameter contributes its
// re and im coordinates as independent real variables; parameters flagged real
// only expose the re coordinate. Weight decay is decoupled.
struct AdamW {
  AdamWConfig cfg;
  struct Slot {
    std::vector<double> m, v;  // length 2N (or N for real parameters)
  };
  std::vector<Slot> slots;
  int64_t step_count = 0;

  void step(nn::ParamStore& ps, double lr) {
    if (slots.size() != ps.params.size()) slots.resize(ps.params.size());
    ++step_count;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
    for (size_t pi = 0; pi < ps.params.size(); ++pi) {
      auto& p = ps.params[pi];
      const int64_t n = p.var->value.size();
      const int coords = p.is_real ? 1 : 2;
      auto& slot = slots[pi];
      if (static_cast<int64_t>(slot.m.size()) != n * coords) {
        slot.m.assign(n * coords, 0.0);
        slot.v.assign(n * coords, 0.0);
      }
      const bool has_grad = p.var->grad.size() == n;
      for (int64_t i = 0; i < n; ++i) {
        cfloat val = p.var->value[i];
        cfloat grad = has_grad ? p.var->grad[i] : cfloat(0, 0);
        double x[2] = {static_cast<double>(val.real()), static_cast<double>(val.imag())};
        double g[2] = {static_cast<double>(grad.real()), static_cast<double>(grad.imag())};
        for (int c = 0; c < coords; ++c) {
          if (!std::isfinite(g[c]))
            throw std::runtime_error("optimizer: non-finite gradient in " + p.name);
          double& m = slot.m[i * coords + c];
          double& v = slot.v[i * coords + c];
          x[c] -= lr * cfg.weight_decay * x[c];  // decoupled decay
          m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[c];
          v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[c] * g[c];
          const double mhat = m / bc1, vhat = v / bc2;
          x[c] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        p.var->value[i] = cfloat(real_t(x[0]), p.is_real ? real_t(0) : real_t(x[1]));
      }
    }
  }
};

// Global L2 norm of all gradients over the real coordinate view.
inline double grad_norm(const nn::ParamStore& ps) {
  double acc = 0;
  for (const auto& p : ps.params) {
    if (p.var->grad.size() != p.var->value.size()) continue;
    for (int64_t i = 0; i < p.var->grad.size(); ++i) {
      cfloat g = p.var->grad[i];
      acc += static_cast<double>(g.real()) * g.real();
      if (!p.is_real) acc += static_cast<double>(g.imag()) * g.imag();
    }
  }
  return std::sqrt(acc);
}

// Scales gradients so the global norm is at most `max_norm`; returns the
// pre-clip norm.
inline double clip_gradients(nn::ParamStore& ps, double max_norm) {
  const double norm = grad_norm(ps);
  if (norm > max_norm && norm > 0) {
    const real_t scale = real_t(max_norm / norm);
    for (auto& p : ps.params)
      if (p.var->grad.size() > 0)
        for (auto& g : p.var->grad.raw()) g *= scale;
  }
  return norm;
}

// ---- training loop ----------------------------------------------------------

struct TrainConfig {
  int64_t total_steps = 2000;
  int batch_size = 16;
  double segment_seconds = 0.680;
  ScheduleConfig schedule;
  AdamWConfig adamw;
  losses::LossWeights weights;
  losses::MultiResConfig mel;
  double clip_norm = 10.0;
  int64_t checkpoint_every = 500;
  int64_t log_every = 10;
  int patience_epochs = 3;  // stop after this many epochs without improvement
  unsigned seed = 1234;
  std::string checkpoint_path;  // empty: no checkpoints written
};

struct StepRecord {
  int64_t step = 0;
  double lr = 0;
  double grad_norm = 0;
  losses::LossBreakdown loss;
};

struct TrainResult {
  std::vector<double> loss_curve;  // total loss per step
  int64_t steps_run = 0;
  bool aborted_non_finite = false;
  bool stopped_early = false;
};

struct Trainer {
  model::CodecModel& m;
  TrainConfig cfg;
  AdamW opt;
  std::mt19937 rng;
  std::function<void(const std::string&)> log_sink;

  Trainer(model::CodecModel& model, TrainConfig c)
      : m(model), cfg(std::move(c)), rng(cfg.seed) {
    opt.cfg = cfg.adamw;
    cfg.schedule.total_steps = cfg.total_steps;
    log_sink = [](const std::string& line) { std::cout << line << "\n"; };
  }

  int segment_samples() const {
    return static_cast<int>(std::lround(cfg.segment_seconds * m.cfg.sample_rate));
  }

  // One optimizer step over a freshly sampled batch. Losses are averaged by
  // scaling each item's loss by 1/batch before backward, so gradients
  // accumulate to the batch mean.
  StepRecord train_step(const std::vector<AudioBuffer>& dataset, int64_t step) {
    if (dataset.empty()) throw std::invalid_argument("train_step: empty dataset");
    m.training = true;
    m.params.zero_grad();
    StepRecord rec;
    rec.step = step;
    rec.lr = lr_schedule(step + 1, cfg.schedule);
    const int seg = segment_samples();
    const real_t inv_batch = real_t(1.0 / cfg.batch_size);
    const double decay =
        rvq::decay_for_step(m.cfg.quant, step, cfg.total_steps);

    for (int b = 0; b < cfg.batch_size; ++b) {
      std::uniform_int_distribution<size_t> pick(0, dataset.size() - 1);
      AudioBuffer raw = sample_segment(dataset[pick(rng)], seg, rng);
      AudioBuffer wave = dsp::normalize_waveform(raw).first;
      auto spec = dsp::stft(wave, m.cfg.stft);
      const int F = spec.bins(), T = spec.frames();
      Tensor target_wave({static_cast<int>(wave.samples.size())});
      for (size_t i = 0; i < wave.samples.size(); ++i)
        target_wave[i] = cfloat(real_t(wave.samples[i]), 0);

      ag::Var spec4d = ag::reshape(ag::constant(spec.data), {1, 1, F, T});
      ag::Var z = m.encode_spec(spec4d);

      if (!m.quantizer.seeded && step >= m.cfg.quant.seed_step) {
        m.quantizer.seed(z->value, rng);
        log_sink("event=codebook_seed step=" + std::to_string(step));
      }
      auto qr = m.quantizer.quantize(z);

      ag::Var dec = m.decode_latent(qr.quantized, 1, T);
      ag::Var pred_spec = ag::reshape(dec, {1, F, T});
      ag::Var pred_wave =
          ops::istft_op(pred_spec, m.cfg.stft, static_cast<int64_t>(wave.samples.size()));

      auto [total, breakdown] = losses::total_loss(pred_wave, pred_spec, target_wave,
                                                   spec.data, qr.commit_loss, cfg.weights,
                                                   cfg.mel);
      ag::backward(ag::smul(total, inv_batch));
      rec.loss.mel += breakdown.mel / cfg.batch_size;
      rec.loss.gen += breakdown.gen / cfg.batch_size;
      rec.loss.mrs += breakdown.mrs / cfg.batch_size;
      rec.loss.quant += breakdown.quant / cfg.batch_size;
      rec.loss.total += breakdown.total / cfg.batch_size;

      if (qr.active) m.quantizer.ema_update(decay);
    }
    if (m.quantizer.seeded) {
      int refreshed = m.quantizer.refresh_dead_codes(rng);
      if (refreshed > 0)
        log_sink("event=code_refresh step=" + std::to_string(step) +
                 " count=" + std::to_string(refreshed));
    }
    rec.grad_norm = clip_gradients(m.params, cfg.clip_norm);
    if (rec.grad_norm > cfg.clip_norm)
      log_sink("event=grad_clip step=" + std::to_string(step) +
               " norm=" + std::to_string(rec.grad_norm));
    opt.step(m.params, rec.lr);
    return rec;
  }

  TrainResult run(const std::vector<AudioBuffer>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    TrainResult result;
    int64_t dataset_samples = 0;
    for (const auto& c : dataset) dataset_samples += static_cast<int64_t>(c.samples.size());
    // one epoch: sampled segments cover the dataset duration once in expectation
    const int64_t steps_per_epoch = std::max<int64_t>(
        1, dataset_samples / (static_cast<int64_t>(cfg.batch_size) * segment_samples()));

    double best_epoch_loss = std::numeric_limits<double>::infinity();
    int epochs_without_improvement = 0;
    double epoch_acc = 0;
    int64_t epoch_count = 0;

    for (int64_t step = 0; step < cfg.total_steps; ++step) {
      StepRecord rec;
      try {
        rec = train_step(dataset, step);
      } catch (const std::exception& e) {
        log_sink(std::string("event=abort reason=") + e.what());
        result.aborted_non_finite = true;
        break;
      }
      result.loss_curve.push_back(rec.loss.total);
      result.steps_run = step + 1;
      epoch_acc += rec.loss.total;
      ++epoch_count;

      if (cfg.log_every > 0 && step % cfg.log_every == 0) {
        std::ostringstream os;
        os << "step=" << step << " lr=" << rec.lr << " total=" << rec.loss.total
           << " mel=" << rec.loss.mel << " gen=" << rec.loss.gen << " mrs=" << rec.loss.mrs
           << " quant=" << rec.loss.quant << " grad_norm=" << rec.grad_norm;
        log_sink(os.str());
      }
      if (!cfg.checkpoint_path.empty() &&
          ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.total_steps)) {
        save(cfg.checkpoint_path);
        log_sink("event=checkpoint step=" + std::to_string(step) + " path=" +
                 cfg.checkpoint_path);
      }
      if (epoch_count == steps_per_epoch) {
        const double epoch_loss = epoch_acc / epoch_count;
        if (epoch_loss < best_epoch_loss - 1e-12) {
          best_epoch_loss = epoch_loss;
          epochs_without_improvement = 0;
        } else if (++epochs_without_improvement >= cfg.patience_epochs) {
          log_sink("event=converged step=" + std::to_string(step));
          result.stopped_early = true;
          break;
        }
        epoch_acc = 0;
        epoch_count = 0;
      }
    }
    if (!cfg.checkpoint_path.empty() && !result.aborted_non_finite && result.steps_run > 0)
      save(cfg.checkpoint_path);
    return result;
  }

  void save(const std::string& path) const {
    auto doc = model::to_document(m.cfg);
    serialize::save_checkpoint(path, serialize::format_config(doc), m.params, &m.quantizer);
  }
};

}  // namespace trainer
}  // namespace eulero

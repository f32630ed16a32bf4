#pragma once

#include <numeric>
#include <random>

#include "eulero/autograd.hpp"

namespace eulero {
namespace rvq {

struct QuantizerConfig {
  int dim = 8;            // latent width D
  int codebook_size = 64; // K
  int stages = 4;         // S
  double beta = 0.05;              // commitment weight
  double decay_start = 0.98;       // EMA decay ramps linearly over training
  double decay_end = 0.999;
  double laplace_eps = 1e-5;
  double dead_threshold = 0.9;     // EMA count below this marks a code dead
  double refresh_prob = 0.015;     // per-step refresh chance for a dead code
  double refresh_noise = 0.001;
  int seed_step = 30;              // identity pass-through before this step

  int bits_per_code() const {
    int b = 0;
    while ((1 << b) < codebook_size) ++b;
    return b;
  }

  void validate() const {
    if (dim < 1 || codebook_size < 2 || stages < 1)
      throw std::invalid_argument("QuantizerConfig: invalid sizes");
    if (beta < 0 || laplace_eps <= 0) throw std::invalid_argument("QuantizerConfig: invalid weights");
  }
};

inline double decay_for_step(const QuantizerConfig& cfg, int64_t step, int64_t total_steps) {
  if (total_steps <= 1) return cfg.decay_end;
  double t = std::min(std::max(static_cast<double>(step) / (total_steps - 1), 0.0), 1.0);
  return cfg.decay_start + (cfg.decay_end - cfg.decay_start) * t;
}

struct Codebook {
  Tensor embed;               // (K, D)
  Tensor ema_weight;          // (K, D)
  std::vector<double> ema_count;  // (K)

  Codebook() = default;
  Codebook(int K, int D, std::mt19937& rng)
      : embed(Tensor::randn({K, D}, rng)), ema_weight(embed), ema_count(K, 1.0) {}

  int size() const { return embed.dim(0); }
  int dim() const { return embed.dim(1); }
};

// Index of the nearest centroid under the Hermitian squared distance
//   d_k(x) = |x|^2 + |e_k|^2 - 2 Re(x^H e_k)  (= |x - e_k|^2),
// ties resolved toward the smallest index.
inline int nearest_centroid(const cfloat* x, const Codebook& cb) {
  const int K = cb.size(), D = cb.dim();
  double xx = 0;
  for (int d = 0; d < D; ++d) xx += std::norm(x[d]);
  int best = 0;
  double best_d = 0;
  for (int k = 0; k < K; ++k) {
    const cfloat* e = cb.embed.data() + static_cast<int64_t>(k) * D;
    double ee = 0, re = 0;
    for (int d = 0; d < D; ++d) {
      ee += std::norm(e[d]);
      re += x[d].real() * e[d].real() + x[d].imag() * e[d].imag();  // Re(conj(x) e)
    }
    double dist = xx + ee - 2.0 * re;
    if (k == 0 || dist < best_d) {
      best = k;
      best_d = dist;
    }
  }
  return best;
}

struct QuantizeResult {
  ag::Var quantized;    // straight-through estimate, same shape as input
  ag::Var commit_loss;  // beta * mean |z - sg(zhat)|^2 (real scalar)
  std::vector<std::vector<int>> indices;  // (S, N); empty while passing through
  bool active = false;
};

struct CodebookStats {
  double utilization = 0;  // distinct codes used / K
  double perplexity = 0;   // exp(entropy) of the empirical code distribution
};

struct ResidualQuantizer {
  QuantizerConfig cfg;
  std::vector<Codebook> stages;
  bool seeded = false;
  // cached inputs of the latest quantize() call, per stage: EMA statistics and
  // dead-code refresh both consume these
  std::vector<Tensor> last_inputs;
  std::vector<std::vector<int>> last_indices;

  ResidualQuantizer() = default;
  ResidualQuantizer(QuantizerConfig c, std::mt19937& rng) : cfg(c) {
    cfg.validate();
    for (int s = 0; s < cfg.stages; ++s) stages.emplace_back(cfg.codebook_size, cfg.dim, rng);
  }

  // z: (N, D) latent rows. Greedy residual quantization with a straight-through
  // gradient; identity pass-through until the codebooks have been seeded.
  QuantizeResult quantize(const ag::Var& z) {
    const auto& s = z->value.shape();
    if (s.size() != 2 || s[1] != cfg.dim)
      throw std::invalid_argument("quantize: (N, D) latents required");
    const int N = s[0], D = s[1];
    if (!seeded) {
      QuantizeResult r;
      r.quantized = z;
      r.commit_loss = ag::constant(Tensor::scalar(cfloat(0, 0)));
      r.active = false;
      return r;
    }
    Tensor residual = z->value;
    Tensor zhat({N, D});
    last_inputs.assign(cfg.stages, Tensor());
    last_indices.assign(cfg.stages, std::vector<int>(N));
    for (int st = 0; st < cfg.stages; ++st) {
      last_inputs[st] = residual;
      const Codebook& cb = stages[st];
      for (int n = 0; n < N; ++n) {
        cfloat* r = residual.data() + static_cast<int64_t>(n) * D;
        int k = nearest_centroid(r, cb);
        last_indices[st][n] = k;
        const cfloat* e = cb.embed.data() + static_cast<int64_t>(k) * D;
        cfloat* q = zhat.data() + static_cast<int64_t>(n) * D;
        for (int d = 0; d < D; ++d) {
          q[d] += e[d];
          r[d] -= e[d];
        }
      }
    }
    Tensor delta(zhat.shape());
    for (int64_t i = 0; i < delta.size(); ++i) delta[i] = zhat[i] - z->value[i];
    QuantizeResult out;
    out.quantized = ag::add(z, ag::constant(std::move(delta)));
    ag::Var diff = ag::sub(z, ag::constant(zhat));
    out.commit_loss = ag::smul(ag::mean_all(ag::mul(diff, ag::conjugate(diff))), real_t(cfg.beta));
    out.indices = last_indices;
    out.active = true;
    return out;
  }

  // EMA codebook update from the cached assignments, with Laplace-smoothed
  // count normalization.
  void ema_update(double decay) {
    if (!seeded || last_indices.empty()) return;
    const int K = cfg.codebook_size, D = cfg.dim;
    for (int st = 0; st < cfg.stages; ++st) {
      const Tensor& x = last_inputs[st];
      const auto& idx = last_indices[st];
      const int N = static_cast<int>(idx.size());
      if (N == 0) continue;
      Codebook& cb = stages[st];
      std::vector<double> counts(K, 0.0);
      Tensor sums({K, D});
      for (int n = 0; n < N; ++n) {
        counts[idx[n]] += 1.0;
        const cfloat* row = x.data() + static_cast<int64_t>(n) * D;
        cfloat* acc = sums.data() + static_cast<int64_t>(idx[n]) * D;
        for (int d = 0; d < D; ++d) acc[d] += row[d];
      }
      double total = 0;
      for (int k = 0; k < K; ++k) {
        cb.ema_count[k] = decay * cb.ema_count[k] + (1.0 - decay) * counts[k];
        total += cb.ema_count[k];
        cfloat* w = cb.ema_weight.data() + static_cast<int64_t>(k) * D;
        const cfloat* sv = sums.data() + static_cast<int64_t>(k) * D;
        for (int d = 0; d < D; ++d)
          w[d] = real_t(decay) * w[d] + real_t(1.0 - decay) * sv[d];
      }
      for (int k = 0; k < K; ++k) {
        double smoothed = (cb.ema_count[k] + cfg.laplace_eps) /
                          (total + K * cfg.laplace_eps) * total;
        const cfloat* w = cb.ema_weight.data() + static_cast<int64_t>(k) * D;
        cfloat* e = cb.embed.data() + static_cast<int64_t>(k) * D;
        for (int d = 0; d < D; ++d) e[d] = w[d] / real_t(smoothed);
      }
    }
  }

  // Re-initialize dead codes (EMA count below threshold) from the cached stage
  // inputs, each with the configured probability. `force_prob` overrides the
  // probability for deterministic testing.
  int refresh_dead_codes(std::mt19937& rng, double force_prob = -1.0) {
    if (!seeded || last_inputs.empty()) return 0;
    const double p = force_prob >= 0 ? force_prob : cfg.refresh_prob;
    const int K = cfg.codebook_size, D = cfg.dim;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.refresh_noise);
    int refreshed = 0;
    for (int st = 0; st < cfg.stages; ++st) {
      const Tensor& pool = last_inputs[st];
      const int N = pool.dim(0);
      if (N == 0) continue;
      Codebook& cb = stages[st];
      for (int k = 0; k < K; ++k) {
        if (cb.ema_count[k] >= cfg.dead_threshold) continue;
        if (coin(rng) >= p) continue;
        int pick = static_cast<int>(rng() % static_cast<unsigned>(N));
        const cfloat* src = pool.data() + static_cast<int64_t>(pick) * D;
        cfloat* e = cb.embed.data() + static_cast<int64_t>(k) * D;
        cfloat* w = cb.ema_weight.data() + static_cast<int64_t>(k) * D;
        cb.ema_count[k] = cfg.dead_threshold + 1.0;
        for (int d = 0; d < D; ++d) {
          e[d] = src[d] + cfloat(real_t(noise(rng)), real_t(noise(rng)));
          w[d] = e[d] * real_t(cb.ema_count[k]);  // keep buffers consistent
        }
        ++refreshed;
      }
    }
    return refreshed;
  }

  // Seed each stage from collected latent rows, propagating greedy residuals
  // so later stages see realistic inputs.
  void seed(const Tensor& latents, std::mt19937& rng) {
    const auto& s = latents.shape();
    if (s.size() != 2 || s[1] != cfg.dim)
      throw std::invalid_argument("seed: (N, D) latents required");
    const int N = s[0], D = s[1], K = cfg.codebook_size;
    if (N < 1) throw std::invalid_argument("seed: empty latent buffer");
    std::normal_distribution<double> jitter(0.0, cfg.refresh_noise);
    Tensor residual = latents;
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    for (int st = 0; st < cfg.stages; ++st) {
      Codebook& cb = stages[st];
      // Distinct rows when the buffer is large enough; duplicated seeds would
      // leave permanently-tied codes that shadow each other.
      std::shuffle(order.begin(), order.end(), rng);
      for (int k = 0; k < K; ++k) {
        int pick = N >= K ? order[k] : static_cast<int>(rng() % static_cast<unsigned>(N));
        const cfloat* src = residual.data() + static_cast<int64_t>(pick) * D;
        cfloat* e = cb.embed.data() + static_cast<int64_t>(k) * D;
        for (int d = 0; d < D; ++d) {
          e[d] = src[d];
          if (N < K) e[d] += cfloat(real_t(jitter(rng)), real_t(jitter(rng)));
        }
        std::copy_n(e, D, cb.ema_weight.data() + static_cast<int64_t>(k) * D);
        cb.ema_count[k] = 1.0;
      }
      for (int n = 0; n < N; ++n) {
        cfloat* r = residual.data() + static_cast<int64_t>(n) * D;
        const cfloat* e = cb.embed.data() + static_cast<int64_t>(nearest_centroid(r, cb)) * D;
        for (int d = 0; d < D; ++d) r[d] -= e[d];
      }
    }
    seeded = true;
  }

  // Deterministic synthesis from token indices.
  Tensor decode(const std::vector<std::vector<int>>& indices) const {
    if (static_cast<int>(indices.size()) != cfg.stages)
      throw std::invalid_argument("decode: stage count mismatch");
    const int N = static_cast<int>(indices[0].size());
    const int D = cfg.dim;
    Tensor out({N, D});
    for (int st = 0; st < cfg.stages; ++st) {
      if (static_cast<int>(indices[st].size()) != N)
        throw std::invalid_argument("decode: ragged index matrix");
      for (int n = 0; n < N; ++n) {
        int k = indices[st][n];
        if (k < 0 || k >= cfg.codebook_size)
          throw std::out_of_range("decode: code index out of range");
        const cfloat* e = stages[st].embed.data() + static_cast<int64_t>(k) * D;
        cfloat* o = out.data() + static_cast<int64_t>(n) * D;
        for (int d = 0; d < D; ++d) o[d] += e[d];
      }
    }
    return out;
  }
};

inline CodebookStats codebook_stats(const std::vector<int>& indices, int K) {
  CodebookStats st;
  if (indices.empty() || K < 1) return st;
  std::vector<double> counts(K, 0.0);
  for (int k : indices) {
    if (k < 0 || k >= K) throw std::out_of_range("codebook_stats: index out of range");
    counts[k] += 1.0;
  }
  int used = 0;
  double ent = 0;
  for (int k = 0; k < K; ++k) {
    if (counts[k] == 0) continue;
    ++used;
    double p = counts[k] / indices.size();
    ent -= p * std::log(p);
  }
  st.utilization = static_cast<double>(used) / K;
  st.perplexity = std::exp(ent);
  return st;
}

// ---- latent projections -----------------------------------------------------

// Feature map (B, C, F, T) -> latent rows (B*T, D) via a shared linear map
// w_in of shape (C*F, D); time order is preserved within each batch item.
inline ag::Var to_latents(const ag::Var& fmap, const ag::Var& w_in) {
  const auto& s = fmap->value.shape();
  if (s.size() != 4) throw std::invalid_argument("to_latents: rank-4 feature map required");
  const int B = s[0], C = s[1], F = s[2], T = s[3];
  if (w_in->value.dim(0) != C * F)
    throw std::invalid_argument("to_latents: projection rows must equal C*F");
  ag::Var x = ag::reshape(fmap, {B, C * F, T});
  x = ag::permute(x, {0, 2, 1});            // (B, T, C*F)
  x = ag::reshape(x, {B * T, C * F});
  return ag::matmul(x, w_in);               // (B*T, D)
}

// Latent rows (B*T, D) -> feature map (B, C, F, T) via w_out of shape (D, C*F).
inline ag::Var from_latents(const ag::Var& latents, const ag::Var& w_out, int B, int C, int F,
                            int T) {
  if (latents->value.dim(0) != B * T)
    throw std::invalid_argument("from_latents: row count must equal B*T");
  if (w_out->value.dim(1) != C * F)
    throw std::invalid_argument("from_latents: projection cols must equal C*F");
  ag::Var x = ag::matmul(latents, w_out);   // (B*T, C*F)
  x = ag::reshape(x, {B, T, C * F});
  x = ag::permute(x, {0, 2, 1});
  return ag::reshape(x, {B, C, F, T});
}

}  // namespace rvq
}  // namespace eulero

#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "eulero/dsp.hpp"
#include "eulero/dsp_ops.hpp"
#include "eulero/layers.hpp"
#include "eulero/rvq.hpp"

namespace eulero {
namespace model {

using ag::Var;

// ---- configuration ----------------------------------------------------------

struct StageSpec {
  int c_out = 0;
  int kf = 3, kt = 3;  // kernel (freq, time)
  int sf = 1, st = 1;  // stride
  int pf = 0, pt = 0;  // padding
};

struct ModelConfig {
  std::string preset = "toy";
  int sample_rate = 24000;
  StftConfig stft{256, 256, 64};
  int stem_channels = 8;
  int stem_kf = 3, stem_kt = 7;
  std::vector<StageSpec> stages;
  std::vector<std::pair<int, int>> dilations{{1, 1}, {3, 3}, {3, 5}, {3, 7}, {1, 1}};
  double drop_path_p = 0.05;
  int heads = 4;
  int ff_expansion = 2;
  int latent_dim = 64;  // code dimension D
  int f_pad_multiple = 16;
  int time_stride_target = 8;  // 8 -> low-rate preset, 4 -> high-rate preset
  bool no_time_attention = false;
  // Analysis bins of peak-normalized audio reach magnitudes around the half
  // window sum; dividing on the way in (and multiplying back after the output
  // head) keeps activations and head weights O(1), which small-variance init
  // and Adam's unit-scale steps are tuned for.
  double spec_scale = 30.0;
  rvq::QuantizerConfig quant;

  int f_bins() const { return stft.freq_bins(); }
  int f_padded() const {
    int f = f_bins();
    return (f + f_pad_multiple - 1) / f_pad_multiple * f_pad_multiple;
  }
  int time_stride() const {
    int s = 1;
    for (const auto& st : stages) s *= st.st;
    return s;
  }
  int freq_stride() const {
    int s = 1;
    for (const auto& st : stages) s *= st.sf;
    return s;
  }
  int bottleneck_channels() const { return stages.back().c_out; }
  int bottleneck_f() const {
    int f = f_padded();
    for (const auto& st : stages) f = nn::conv_out_dim(f, st.kf, st.sf, st.pf, 1);
    return f;
  }

  void validate() const {
    stft.validate();
    quant.validate();
    if (stages.empty()) throw std::invalid_argument("ModelConfig: no stages");
    if (time_stride() != time_stride_target)
      throw std::invalid_argument("ModelConfig: stage time strides do not multiply to target");
    if (freq_stride() != f_pad_multiple)
      throw std::invalid_argument("ModelConfig: stage freq strides must cover the pad multiple");
    if (quant.dim != latent_dim)
      throw std::invalid_argument("ModelConfig: quantizer dim must match latent_dim");
    if (heads < 1 || ff_expansion < 1 || stem_channels < 1)
      throw std::invalid_argument("ModelConfig: invalid widths");
  }
};

// High-rate variant: halve the total temporal stride by making the last
// stage time-preserving (kernel 3, stride 1, pad 1); the per-stage split is a
// free choice since only the product is constrained.
inline void set_time_stride(ModelConfig& cfg, int target) {
  if (target != 8 && target != 4) throw std::invalid_argument("time stride must be 8 or 4");
  auto& last = cfg.stages.back();
  if (target == 4) {
    last.kt = 3;
    last.st = 1;
    last.pt = 1;
  } else {
    last.kt = 4;
    last.st = 2;
    last.pt = 1;
  }
  cfg.time_stride_target = target;
}

inline ModelConfig paper_config(int time_stride = 8) {
  ModelConfig c;
  c.preset = "paper";
  c.stft = StftConfig{512, 512, 64};
  c.stem_channels = 24;
  c.stages = {
      {48, 6, 6, 2, 2, 2, 2},
      {64, 6, 1, 2, 1, 2, 0},
      {96, 4, 4, 2, 2, 1, 1},
      {128, 4, 4, 2, 2, 1, 1},
  };
  c.latent_dim = 64;
  c.quant.dim = 64;
  c.quant.codebook_size = 2048;
  c.quant.stages = 12;
  set_time_stride(c, time_stride);
  return c;
}

inline ModelConfig toy_config(int time_stride = 8) {
  ModelConfig c;
  c.preset = "toy";
  c.stft = StftConfig{256, 256, 64};
  c.stem_channels = 8;
  c.stages = {
      {12, 6, 6, 2, 2, 2, 2},
      {16, 6, 1, 2, 1, 2, 0},
      {24, 4, 4, 2, 2, 1, 1},
      {32, 4, 4, 2, 2, 1, 1},
  };
  c.latent_dim = 64;
  c.quant.dim = 64;
  c.quant.codebook_size = 64;
  c.quant.stages = 4;
  set_time_stride(c, time_stride);
  return c;
}

// ---- encoder / decoder stages ----------------------------------------------

// Downsampling stage: main path (strided conv, whitening norm, modReLU,
// 3x3 conv, optional time-axial attention, 3x3 conv, 1x1 projection) summed
// with a pooled-and-projected skip branch under stochastic depth.
struct EncoderStage {
  StageSpec spec;
  nn::Conv2d down, conv_a, conv_b, proj, skip_proj;
  nn::BatchNorm norm;
  Var act_bias;
  nn::AxialAttention time_attn;
  bool use_attn = true;
  double drop_p = 0.0;

  EncoderStage() = default;
  EncoderStage(nn::ParamStore& ps, const std::string& prefix, int c_in, const StageSpec& s,
               int heads, bool with_attn, double drop_path_p, std::mt19937& rng)
      : spec(s), use_attn(with_attn), drop_p(drop_path_p) {
    nn::Conv2dSpec dn;
    dn.stride_f = s.sf;
    dn.stride_t = s.st;
    dn.pad_f = s.pf;
    dn.pad_t = s.pt;
    down = nn::Conv2d(ps, prefix + ".down", c_in, s.c_out, s.kf, s.kt, dn, rng);
    norm = nn::BatchNorm(ps, prefix + ".norm", s.c_out);
    act_bias = ps.add(prefix + ".act_bias", Tensor({s.c_out}), true);
    nn::Conv2dSpec p1;
    p1.pad_f = 1;
    p1.pad_t = 1;
    conv_a = nn::Conv2d(ps, prefix + ".conv_a", s.c_out, s.c_out, 3, 3, p1, rng);
    if (with_attn)
      time_attn = nn::AxialAttention(ps, prefix + ".time_attn", s.c_out, heads,
                                     nn::Axis::Time, rng);
    conv_b = nn::Conv2d(ps, prefix + ".conv_b", s.c_out, s.c_out, 3, 3, p1, rng);
    proj = nn::Conv2d(ps, prefix + ".proj", s.c_out, s.c_out, 1, 1, nn::Conv2dSpec{}, rng);
    skip_proj = nn::Conv2d(ps, prefix + ".skip", c_in, s.c_out, 1, 1, nn::Conv2dSpec{}, rng);
  }

  std::pair<int, int> out_dims(int F, int T) const {
    return {nn::conv_out_dim(F, spec.kf, spec.sf, spec.pf, 1),
            nn::conv_out_dim(T, spec.kt, spec.st, spec.pt, 1)};
  }

  Var forward(const Var& x, bool training, std::mt19937* rng) {
    const int F = x->value.dim(2), T = x->value.dim(3);
    auto [oF, oT] = out_dims(F, T);
    Var m = down.forward(x);
    m = norm.forward(m, training);
    m = nn::modrelu(m, act_bias);
    m = conv_a.forward(m);
    if (use_attn) m = ag::add(m, time_attn.forward(m));
    m = conv_b.forward(m);
    m = proj.forward(m);
    Var s = skip_proj.forward(nn::adaptive_avg_pool(x, oF, oT));
    return nn::drop_path(s, m, training ? drop_p : 0.0, training, rng);
  }
};

// Upsampling stage: the encoder stage mirrored around a transposed conv, with
// no pooling branch; output padding is chosen per call to hit the target dims.
struct DecoderStage {
  StageSpec spec;  // the encoder stage being inverted
  nn::Conv2d up, conv_a, conv_b, proj;
  nn::BatchNorm norm;
  Var act_bias;
  nn::AxialAttention time_attn;
  bool use_attn = true;

  DecoderStage() = default;
  DecoderStage(nn::ParamStore& ps, const std::string& prefix, int c_in, int c_out,
               const StageSpec& s, int heads, bool with_attn, std::mt19937& rng)
      : spec(s), use_attn(with_attn) {
    nn::Conv2dSpec upsp;
    upsp.stride_f = s.sf;
    upsp.stride_t = s.st;
    upsp.pad_f = s.pf;
    upsp.pad_t = s.pt;
    up = nn::Conv2d(ps, prefix + ".up", c_in, c_out, s.kf, s.kt, upsp, rng,
                    /*with_bias=*/true, /*transpose=*/true);
    norm = nn::BatchNorm(ps, prefix + ".norm", c_out);
    act_bias = ps.add(prefix + ".act_bias", Tensor({c_out}), true);
    nn::Conv2dSpec p1;
    p1.pad_f = 1;
    p1.pad_t = 1;
    conv_a = nn::Conv2d(ps, prefix + ".conv_a", c_out, c_out, 3, 3, p1, rng);
    if (with_attn)
      time_attn = nn::AxialAttention(ps, prefix + ".time_attn", c_out, heads,
                                     nn::Axis::Time, rng);
    conv_b = nn::Conv2d(ps, prefix + ".conv_b", c_out, c_out, 3, 3, p1, rng);
    proj = nn::Conv2d(ps, prefix + ".proj", c_out, c_out, 1, 1, nn::Conv2dSpec{}, rng);
  }

  Var forward(const Var& x, int target_f, int target_t, bool training) {
    const int F = x->value.dim(2), T = x->value.dim(3);
    int op_f = target_f - nn::conv_transpose_out_dim(F, spec.kf, spec.sf, spec.pf, 1, 0);
    int op_t = target_t - nn::conv_transpose_out_dim(T, spec.kt, spec.st, spec.pt, 1, 0);
    if (op_f < 0 || op_t < 0 || op_f >= spec.kf || op_t >= spec.kt)
      throw std::invalid_argument("decoder stage: target dims unreachable");
    Var m = up.forward(x, op_f, op_t);
    m = norm.forward(m, training);
    m = nn::modrelu(m, act_bias);
    m = conv_a.forward(m);
    if (use_attn) m = ag::add(m, time_attn.forward(m));
    m = conv_b.forward(m);
    return proj.forward(m);
  }
};

// Residual attention + pointwise feed-forward over the frequency axis.
struct FreqBlock {
  nn::AxialAttention attn;
  nn::Conv2d ff1, ff2;

  FreqBlock() = default;
  FreqBlock(nn::ParamStore& ps, const std::string& prefix, int C, int heads, int expansion,
            std::mt19937& rng) {
    attn = nn::AxialAttention(ps, prefix + ".freq_attn", C, heads, nn::Axis::Frequency, rng);
    ff1 = nn::Conv2d(ps, prefix + ".ff1", C, C * expansion, 1, 1, nn::Conv2dSpec{}, rng);
    ff2 = nn::Conv2d(ps, prefix + ".ff2", C * expansion, C, 1, 1, nn::Conv2dSpec{}, rng);
  }

  Var forward(const Var& x) const {
    Var h = ag::add(x, attn.forward(x));
    Var f = ff2.forward(ag::split_gelu(ff1.forward(h)));
    return ag::add(h, f);
  }
};

// ---- codec ------------------------------------------------------------------

struct EncodeOut {
  Var latents;       // (B*Tl, D)
  Spectrogram spec;  // analysis spectrogram of the input (1, F, T)
  int latent_frames = 0;
};

struct CodecModel {
  ModelConfig cfg;
  nn::ParamStore params;
  std::mt19937 rng;
  bool training = false;

  nn::DilatedResidualStack stack;
  nn::Conv2d stem;
  std::vector<EncoderStage> enc_stages;
  FreqBlock enc_freq;
  Var w_in, w_out;  // (C*F_b, D) and (D, C*F_b)
  rvq::ResidualQuantizer quantizer;
  FreqBlock dec_freq;
  std::vector<DecoderStage> dec_stages;
  nn::Conv2d head;

  explicit CodecModel(ModelConfig c, unsigned seed = 1234) : cfg(std::move(c)), rng(seed) {
    cfg.validate();
    stack = nn::DilatedResidualStack(params, "enc.stack", 1, cfg.dilations, rng);
    nn::Conv2dSpec stem_sp;
    stem_sp.pad_f = (cfg.stem_kf - 1) / 2;
    stem_sp.pad_t = (cfg.stem_kt - 1) / 2;
    stem = nn::Conv2d(params, "enc.stem", 1, cfg.stem_channels, cfg.stem_kf, cfg.stem_kt,
                      stem_sp, rng);
    int c_in = cfg.stem_channels;
    for (size_t i = 0; i < cfg.stages.size(); ++i) {
      enc_stages.emplace_back(params, "enc.stage" + std::to_string(i), c_in, cfg.stages[i],
                              cfg.heads, !cfg.no_time_attention, cfg.drop_path_p, rng);
      c_in = cfg.stages[i].c_out;
    }
    const int C = cfg.bottleneck_channels(), Fb = cfg.bottleneck_f(), D = cfg.latent_dim;
    enc_freq = FreqBlock(params, "enc.bottleneck", C, cfg.heads, cfg.ff_expansion, rng);
    w_in = params.add("enc.latent_proj", nn::complex_init({C * Fb, D}, C * Fb, rng));
    w_out = params.add("dec.latent_proj", nn::complex_init({D, C * Fb}, D, rng));
    quantizer = rvq::ResidualQuantizer(cfg.quant, rng);
    dec_freq = FreqBlock(params, "dec.bottleneck", C, cfg.heads, cfg.ff_expansion, rng);
    int c_cur = C;
    for (size_t i = cfg.stages.size(); i-- > 0;) {
      int c_out = i == 0 ? cfg.stem_channels : cfg.stages[i - 1].c_out;
      dec_stages.emplace_back(params, "dec.stage" + std::to_string(i), c_cur, c_out,
                              cfg.stages[i], cfg.heads, !cfg.no_time_attention, rng);
      c_cur = c_out;
    }
    head = nn::Conv2d(params, "dec.head", cfg.stem_channels, 1, cfg.stem_kf, cfg.stem_kt,
                      stem_sp, rng);
  }

  // Per-stage (F, T) output dims for a padded input, bottleneck last.
  std::vector<std::pair<int, int>> shape_chain(int T) const {
    std::vector<std::pair<int, int>> out;
    int F = cfg.f_padded();
    for (const auto& s : enc_stages) {
      auto d = s.out_dims(F, T);
      F = d.first;
      T = d.second;
      out.push_back(d);
    }
    return out;
  }

  // (B, 1, F, T) complex spectrogram -> latent rows (B*Tl, D).
  Var encode_spec(const Var& spec4d) {
    const auto& s = spec4d->value.shape();
    if (s.size() != 4 || s[1] != 1 || s[2] != cfg.f_bins())
      throw std::invalid_argument("encode: (B, 1, F, T) spectrogram required");
    Var x = ag::pad_axis(ag::smul(spec4d, real_t(1.0 / cfg.spec_scale)), 2, 0,
                         cfg.f_padded() - cfg.f_bins());
    x = stack.forward(x);
    x = stem.forward(x);
    for (auto& st : enc_stages) x = st.forward(x, training, &rng);
    x = enc_freq.forward(x);
    return rvq::to_latents(x, w_in);
  }

  // Latent rows (B*Tl, D) -> (B, 1, F, T) complex spectrogram; (F, T) are the
  // analysis dims the latents were encoded from.
  Var decode_latent(const Var& latents, int B, int T) {
    auto chain = shape_chain(T);
    const int Fb = chain.back().first, Tb = chain.back().second;
    Var x = rvq::from_latents(latents, w_out, B, cfg.bottleneck_channels(), Fb, Tb);
    x = dec_freq.forward(x);
    for (size_t i = 0; i < dec_stages.size(); ++i) {
      const size_t enc_idx = dec_stages.size() - 1 - i;  // stage being inverted
      int tf = enc_idx == 0 ? cfg.f_padded() : chain[enc_idx - 1].first;
      int tt = enc_idx == 0 ? T : chain[enc_idx - 1].second;
      x = dec_stages[i].forward(x, tf, tt, training);
    }
    x = head.forward(x);
    return ag::smul(ag::slice_axis(x, 2, 0, cfg.f_bins()), real_t(cfg.spec_scale));
  }

  // ---- waveform-level convenience (single clip) ----

  EncodeOut encode(const AudioBuffer& audio) {
    if (audio.sample_rate != cfg.sample_rate)
      throw std::invalid_argument("encode: sample rate mismatch");
    EncodeOut out;
    out.spec = dsp::stft(audio, cfg.stft);
    if (out.spec.frames() < cfg.time_stride_target)
      throw std::invalid_argument("encode: input too short for one latent frame");
    Var spec4d = ag::reshape(ag::constant(out.spec.data),
                             {1, 1, out.spec.bins(), out.spec.frames()});
    out.latents = encode_spec(spec4d);
    out.latent_frames = shape_chain(out.spec.frames()).back().second;
    return out;
  }

  AudioBuffer decode(const Var& latents, int T_frames, int64_t length) {
    Var spec4d = decode_latent(latents, 1, T_frames);
    const int F = cfg.f_bins();
    Spectrogram spec;
    spec.config = cfg.stft;
    spec.data = ag::reshape(spec4d, {1, F, T_frames})->value;
    AudioBuffer out = dsp::istft(spec, cfg.sample_rate, length);
    for (auto& v : out.samples)
      if (!std::isfinite(v)) v = 0.f;
    return out;
  }

  // ---- chunked coding for arbitrarily long clips ----
  // Attention cost and graph memory grow quadratically with the analysed
  // length, so clips longer than one coding window are processed in fixed
  // windows of kCodingFrames analysis frames. Decoding re-windows the token
  // sequence with overlap and stitches the waveforms with unity cross-fades.
  static constexpr int kCodingFrames = 256;

  int latent_window() const { return kCodingFrames / cfg.time_stride_target; }

  // Token matrix (stages, total latent frames) for a whole clip.
  std::vector<std::vector<int>> encode_tokens(const AudioBuffer& audio) {
    if (!quantizer.seeded)
      throw std::runtime_error("encode_tokens: quantizer has no trained codebooks");
    Spectrogram spec = dsp::stft(audio, cfg.stft);
    const int F = spec.bins(), T = spec.frames();
    if (T < cfg.time_stride_target)
      throw std::invalid_argument("encode: input too short for one latent frame");
    const int W = kCodingFrames;
    const int n_win = T <= W ? 1 : (T + W - 1) / W;
    std::vector<std::vector<int>> tokens(cfg.quant.stages);
    for (int w = 0; w < n_win; ++w) {
      const int t0 = w * W;
      const int Tw = n_win == 1 ? T : W;
      Tensor win({1, 1, F, Tw});  // zero-padded past the clip tail
      for (int f = 0; f < F; ++f)
        for (int t = 0; t < Tw && t0 + t < T; ++t)
          win[(static_cast<int64_t>(f) * Tw) + t] =
              spec.data[static_cast<int64_t>(f) * T + t0 + t];
      Var z = encode_spec(ag::constant(std::move(win)));
      auto qr = quantizer.quantize(z);
      for (int s = 0; s < cfg.quant.stages; ++s)
        tokens[s].insert(tokens[s].end(), qr.indices[s].begin(), qr.indices[s].end());
    }
    return tokens;
  }

  // Inverse of encode_tokens; trims the stitched waveform to `length` samples.
  AudioBuffer decode_tokens(const std::vector<std::vector<int>>& tokens, int64_t length) {
    if (tokens.empty() || tokens[0].empty())
      throw std::invalid_argument("decode_tokens: empty token matrix");
    const int S = static_cast<int>(tokens.size());
    const int Tl = static_cast<int>(tokens[0].size());
    const int stride = cfg.time_stride_target, hop = cfg.stft.hop_length;
    const int W = latent_window(), H = W * 3 / 4;

    if (Tl <= W) {
      // single window: recover the analysis frame count from the clip length
      const int T = static_cast<int>(length / hop) + 1;
      if (shape_chain(T).back().second != Tl)
        throw std::invalid_argument("decode_tokens: frame count does not match clip length");
      Tensor lat = quantizer.decode(tokens);
      return decode(ag::constant(lat), T, length);
    }

    const int n_seg = (Tl - W + H - 1) / H + 1;
    const int padded = (n_seg - 1) * H + W;
    auto idx = tokens;
    for (auto& row : idx) row.resize(padded, row.back());
    std::vector<AudioBuffer> segments;
    const int64_t seg_samples = static_cast<int64_t>(W) * stride * hop;
    for (int s = 0; s < n_seg; ++s) {
      std::vector<std::vector<int>> win(S, std::vector<int>(W));
      for (int st = 0; st < S; ++st)
        for (int t = 0; t < W; ++t) win[st][t] = idx[st][s * H + t];
      Tensor lat = quantizer.decode(win);
      segments.push_back(decode(ag::constant(lat), W * stride, seg_samples));
    }
    AudioBuffer out =
        dsp::overlap_add_segments(segments, static_cast<int64_t>(H) * stride * hop);
    out.samples.resize(length);
    out.sample_rate = cfg.sample_rate;
    return out;
  }

  // Latent frame count encode_tokens will emit for a clip of `samples` samples.
  int token_frames(int64_t samples) const {
    const int T = static_cast<int>(samples / cfg.stft.hop_length) + 1;
    if (T <= kCodingFrames) return shape_chain(T).back().second;
    const int n_win = (T + kCodingFrames - 1) / kCodingFrames;
    return n_win * latent_window();
  }

  int64_t parameter_count() const { return params.dof(); }
  int64_t parameter_elements() const { return params.element_count(); }
};

// ---- config document --------------------------------------------------------

inline std::map<std::string, std::string> to_document(const ModelConfig& c) {
  std::map<std::string, std::string> kv;
  kv["preset"] = c.preset;
  kv["sample_rate"] = std::to_string(c.sample_rate);
  kv["time_stride"] = std::to_string(c.time_stride_target);
  kv["latent_dim"] = std::to_string(c.latent_dim);
  kv["codebook_size"] = std::to_string(c.quant.codebook_size);
  kv["quant_stages"] = std::to_string(c.quant.stages);
  kv["no_time_attention"] = c.no_time_attention ? "1" : "0";
  kv["heads"] = std::to_string(c.heads);
  kv["ff_expansion"] = std::to_string(c.ff_expansion);
  kv["seed_step"] = std::to_string(c.quant.seed_step);
  kv["spec_scale"] = std::to_string(c.spec_scale);
  return kv;
}

inline ModelConfig config_from_document(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k, const std::string& dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
  };
  const std::string preset = get("preset", "toy");
  if (preset != "toy" && preset != "paper")
    throw std::invalid_argument("unknown preset: " + preset);
  int stride = std::stoi(get("time_stride", "8"));
  ModelConfig c = preset == "paper" ? paper_config(stride) : toy_config(stride);
  c.latent_dim = std::stoi(get("latent_dim", std::to_string(c.latent_dim)));
  c.quant.dim = c.latent_dim;
  c.quant.codebook_size = std::stoi(get("codebook_size", std::to_string(c.quant.codebook_size)));
  c.quant.stages = std::stoi(get("quant_stages", std::to_string(c.quant.stages)));
  c.no_time_attention = get("no_time_attention", "0") == "1";
  c.heads = std::stoi(get("heads", std::to_string(c.heads)));
  c.ff_expansion = std::stoi(get("ff_expansion", std::to_string(c.ff_expansion)));
  c.sample_rate = std::stoi(get("sample_rate", std::to_string(c.sample_rate)));
  c.quant.seed_step = std::stoi(get("seed_step", std::to_string(c.quant.seed_step)));
  c.spec_scale = std::stod(get("spec_scale", std::to_string(c.spec_scale)));
  c.validate();
  return c;
}

// ---- ablation autoencoders --------------------------------------------------

enum class AeKind { Split, Cplx, ExtraCplx };

inline int ae_default_hidden(AeKind kind) {
  switch (kind) {
    case AeKind::Split: return 36;
    case AeKind::Cplx: return 22;
    case AeKind::ExtraCplx: return 16;
  }
  throw std::invalid_argument("unknown autoencoder kind");
}

// Mirrored autoencoder with 3 conv-activation-normalization blocks per side,
// stride (2,2) per block. The split variant carries re/im as two real channels
// through real-weight convs with real ReLU and RMS norm; the complex variants
// use complex convs, 2x2-whitening batch norm, and modReLU.
struct Autoencoder {
  AeKind kind = AeKind::Cplx;
  int hidden = 22;
  nn::ParamStore params;
  std::mt19937 rng;
  bool training = false;

  std::vector<nn::Conv2d> enc_convs, dec_convs;
  std::vector<nn::BatchNorm> norms;          // complex variants: 5 (none after output)
  std::vector<Var> act_biases;               // complex variants: modReLU biases
  std::vector<Var> norm_scales;              // split variant: RMS norm scales

  Autoencoder(AeKind k, int h, unsigned seed = 77) : kind(k), hidden(h), rng(seed) {
    if (h < 1) throw std::invalid_argument("autoencoder: hidden must be positive");
    const bool split = kind == AeKind::Split;
    const int io = split ? 2 : 1;
    nn::Conv2dSpec sp;
    sp.stride_f = 2;
    sp.stride_t = 2;
    sp.pad_f = 1;
    sp.pad_t = 1;
    auto add_conv = [&](const std::string& name, int ci, int co, bool transpose) {
      nn::Conv2d c(params, name, ci, co, 4, 4, sp, rng, /*with_bias=*/true, transpose);
      if (split) {  // constrain weights to the real field
        for (auto& v : c.weight->value.raw()) v = cfloat(v.real() * real_t(std::sqrt(2.0)), 0);
        // re-register would duplicate; mark real by flag lookup below
        for (auto& p : params.params)
          if (p.var == c.weight || p.var == c.bias) p.is_real = true;
      }
      return c;
    };
    for (int i = 0; i < 3; ++i)
      enc_convs.push_back(add_conv("enc.conv" + std::to_string(i), i == 0 ? io : h, h, false));
    for (int i = 0; i < 3; ++i)
      dec_convs.push_back(add_conv("dec.conv" + std::to_string(i), h, i == 2 ? io : h, true));
    for (int i = 0; i < 5; ++i) {  // every block except the output conv
      if (split) {
        norm_scales.push_back(params.add("norm" + std::to_string(i) + ".scale",
                                         Tensor::full({h}, cfloat(1, 0)), true));
      } else {
        norms.emplace_back(params, "norm" + std::to_string(i), h);
        act_biases.push_back(params.add("act" + std::to_string(i) + ".bias", Tensor({h}), true));
      }
    }
  }

  // (B, 1, F, T) complex in and out; dims must survive three stride-2 halvings.
  Var forward(const Var& spec4d) {
    const auto& s = spec4d->value.shape();
    if (s.size() != 4 || s[1] != 1)
      throw std::invalid_argument("autoencoder: (B, 1, F, T) required");
    const int B = s[0], F = s[2], T = s[3];
    const bool split = kind == AeKind::Split;

    Var x = spec4d;
    if (split) {
      // re/im as two real channels; the input is a constant w.r.t. the model
      Tensor two({B, 2, F, T});
      const int64_t plane = static_cast<int64_t>(F) * T;
      for (int b = 0; b < B; ++b)
        for (int64_t i = 0; i < plane; ++i) {
          cfloat z = spec4d->value[b * plane + i];
          two[(static_cast<int64_t>(b) * 2) * plane + i] = cfloat(z.real(), 0);
          two[(static_cast<int64_t>(b) * 2 + 1) * plane + i] = cfloat(z.imag(), 0);
        }
      x = ag::constant(std::move(two));
    }

    std::vector<std::pair<int, int>> dims;  // pre-block dims for the mirror
    int cf = F, ct = T;
    for (int i = 0; i < 3; ++i) {
      dims.push_back({cf, ct});
      x = enc_convs[i].forward(x);
      cf = nn::conv_out_dim(cf, 4, 2, 1, 1);
      ct = nn::conv_out_dim(ct, 4, 2, 1, 1);
      x = activate(x, i);
    }
    for (int i = 0; i < 3; ++i) {
      auto [tf, tt] = dims[2 - i];
      int op_f = tf - nn::conv_transpose_out_dim(cf, 4, 2, 1, 1, 0);
      int op_t = tt - nn::conv_transpose_out_dim(ct, 4, 2, 1, 1, 0);
      x = dec_convs[i].forward(x, op_f, op_t);
      cf = tf;
      ct = tt;
      if (i < 2) x = activate(x, 3 + i);
    }

    if (split) {
      Var re = ag::reshape(ag::slice_axis(x, 1, 0, 1), {B, 1, F, T});
      Var im = ag::reshape(ag::slice_axis(x, 1, 1, 1), {B, 1, F, T});
      x = ag::make_complex(re, im);
    }
    return x;
  }

  int64_t parameter_count() const { return params.dof(); }

 private:
  Var activate(const Var& x, int slot) {
    if (kind == AeKind::Split)
      return nn::rmsnorm(ag::relu(x), norm_scales[slot]);
    Var h = nn::modrelu(x, act_biases[slot]);
    return norms[slot].forward(h, training);
  }
};

inline Autoencoder build_ablation_ae(AeKind kind, int hidden = -1, unsigned seed = 77) {
  return Autoencoder(kind, hidden < 0 ? ae_default_hidden(kind) : hidden, seed);
}

// Reconstruction objective for the ablation autoencoders: complex mean squared
// error plus 0.2 x spectral convergence (relative Frobenius error).
inline Var ae_loss(const Var& pred, const Tensor& target) {
  if (!(pred->value.shape() == target.shape()))
    throw std::invalid_argument("ae_loss: shape mismatch");
  Var d = ag::sub(pred, ag::constant(target));
  Var sq = ag::mul(d, ag::conjugate(d));  // |d|^2, real
  Var mse = ag::real_part(ag::mean_all(sq));
  double tnorm = 0;
  for (int64_t i = 0; i < target.size(); ++i) tnorm += std::norm(target[i]);
  tnorm = std::sqrt(tnorm);
  if (tnorm < 1e-12) return mse;
  Var fro = ag::sqrt_real(ag::real_part(ag::sum_all(sq)));
  return ag::add(mse, ag::smul(fro, real_t(0.2 / tnorm)));
}

}  // namespace model
}  // namespace eulero

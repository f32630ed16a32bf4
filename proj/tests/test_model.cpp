#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "eulero/model.hpp"

using namespace eulero;
using namespace eulero::model;

namespace {

AudioBuffer noise_clip(int n, unsigned seed, int sr = 24000) {
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(n);
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(0.0, 0.2);
  for (auto& s : a.samples) s = static_cast<float>(d(rng));
  return a;
}

}  // namespace

TEST_CASE("config: stage arithmetic matches hand-computed shape chains") {
  auto paper = paper_config();
  paper.validate();
  // 257 bins padded to 272; freq: 272 -> 136 -> 68 -> 34 -> 17
  REQUIRE(paper.f_bins() == 257);
  REQUIRE(paper.f_padded() == 272);
  REQUIRE(paper.bottleneck_f() == 17);
  REQUIRE(paper.bottleneck_channels() == 128);
  REQUIRE(paper.time_stride() == 8);
  REQUIRE(paper.freq_stride() == 16);

  auto toy = toy_config();
  toy.validate();
  // 129 bins padded to 144; freq: 144 -> 72 -> 36 -> 18 -> 9
  REQUIRE(toy.f_padded() == 144);
  REQUIRE(toy.bottleneck_f() == 9);
  REQUIRE(toy.bottleneck_channels() == 32);

  auto high = paper_config(4);
  high.validate();
  REQUIRE(high.time_stride() == 4);
  REQUIRE(high.bottleneck_f() == 17);  // frequency path unchanged

  auto bad = toy_config();
  bad.stages[0].st = 4;
  REQUIRE_THROWS(bad.validate());
}

TEST_CASE("encoder chain: 256 analysis frames become 32 latent frames (stride 8)") {
  CodecModel m(toy_config(), 1);
  auto chain = m.shape_chain(256);
  REQUIRE(chain.size() == 4);
  // time: 256 -> 128 -> 128 -> 64 -> 32
  REQUIRE(chain[0].second == 128);
  REQUIRE(chain[1].second == 128);
  REQUIRE(chain[2].second == 64);
  REQUIRE(chain[3].second == 32);
  // freq: 144 -> 72 -> 36 -> 18 -> 9
  REQUIRE(chain[0].first == 72);
  REQUIRE(chain[3].first == 9);

  CodecModel m4(toy_config(4), 1);
  REQUIRE(m4.shape_chain(256).back().second == 64);
}

TEST_CASE("latent frame count follows the stride product over random lengths") {
  CodecModel m(toy_config(), 2);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    int T = 16 + static_cast<int>(rng() % 400);
    auto chain = m.shape_chain(T);
    int t = T;
    for (const auto& s : m.cfg.stages) t = nn::conv_out_dim(t, s.kt, s.st, s.pt, 1);
    REQUIRE(chain.back().second == t);
    // each halving stage is floor division; the product bound holds
    REQUIRE(chain.back().second >= T / 8 - 1);
    REQUIRE(chain.back().second <= T / 8 + 1);
  }
}

TEST_CASE("codec: decode inverts encode shapes and lengths end to end") {
  CodecModel m(toy_config(), 4);
  m.training = false;
  auto clip = noise_clip(6400, 5);
  auto enc = m.encode(clip);
  const int T = enc.spec.frames();
  REQUIRE(enc.latents->value.dim(0) == enc.latent_frames);
  REQUIRE(enc.latents->value.dim(1) == m.cfg.latent_dim);

  ag::Var spec4d = m.decode_latent(enc.latents, 1, T);
  REQUIRE(spec4d->value.shape() == std::vector<int>({1, 1, m.cfg.f_bins(), T}));

  auto wave = m.decode(enc.latents, T, static_cast<int64_t>(clip.samples.size()));
  REQUIRE(wave.samples.size() == clip.samples.size());
  REQUIRE(wave.all_finite());
}

TEST_CASE("codec: inference is deterministic with drop-path disabled") {
  CodecModel m(toy_config(), 6);
  m.training = false;
  auto clip = noise_clip(4096, 7);
  auto a = m.encode(clip);
  auto b = m.encode(clip);
  for (int64_t i = 0; i < a.latents->value.size(); ++i)
    REQUIRE(a.latents->value[i] == b.latents->value[i]);
}

TEST_CASE("codec: zero latent decodes to a finite waveform") {
  CodecModel m(toy_config(), 8);
  auto chain = m.shape_chain(40);
  Tensor z({chain.back().second, m.cfg.latent_dim});
  auto wave = m.decode(ag::constant(z), 40, 64 * 39);
  REQUIRE(wave.all_finite());
}

TEST_CASE("codec: training forward/backward produces gradients everywhere") {
  auto cfg = toy_config();
  cfg.quant.dim = cfg.latent_dim = 16;  // keep the smoke test light
  CodecModel m(cfg, 9);
  m.training = true;
  auto clip = noise_clip(2048, 10);
  auto enc = m.encode(clip);
  ag::Var spec4d = m.decode_latent(enc.latents, 1, enc.spec.frames());
  ag::Var loss = ag::real_part(ag::mean_all(ag::mul(spec4d, ag::conjugate(spec4d))));
  ag::backward(loss);
  int with_grad = 0;
  for (const auto& p : m.params.params)
    if (p.var->grad.size() > 0) ++with_grad;
  REQUIRE(with_grad == static_cast<int>(m.params.params.size()));
}

TEST_CASE("parameter count: removing time-axial attention reduces it") {
  auto cfg = toy_config();
  CodecModel full(cfg, 11);
  cfg.no_time_attention = true;
  CodecModel ablated(cfg, 11);
  REQUIRE(ablated.parameter_elements() < full.parameter_elements());
  // 4 C^2 complex elements per attention, encoder + decoder stages
  int64_t expect = 0;
  for (const auto& s : cfg.stages) expect += 4LL * s.c_out * s.c_out;  // encoder
  int64_t dec_c[4] = {24, 16, 12, 8};  // decoder stage output widths
  for (int64_t c : dec_c) expect += 4LL * c * c;
  REQUIRE(full.parameter_elements() - ablated.parameter_elements() == expect);
}

TEST_CASE("parameter count: toy preset matches a per-layer closed-form sum") {
  auto cfg = toy_config();
  cfg.no_time_attention = true;  // keep the hand count tractable
  CodecModel m(cfg, 12);
  auto conv_n = [](int ci, int co, int kf, int kt) { return static_cast<int64_t>(co) * ci * kf * kt + co; };
  int64_t want = 0;
  want += 5 * (conv_n(1, 1, 3, 3) * 2 + 1 + 1);  // dilated stack blocks
  want += conv_n(1, 8, 3, 7);                    // stem
  int ci = 8;
  for (const auto& s : cfg.stages) {
    int co = s.c_out;
    want += conv_n(ci, co, s.kf, s.kt);      // downsample
    want += 5LL * co;                        // whitening norm (4 gammas + beta)
    want += co;                              // modReLU bias
    want += 2 * conv_n(co, co, 3, 3);        // conv_a, conv_b
    want += conv_n(co, co, 1, 1);            // projection
    want += conv_n(ci, co, 1, 1);            // pooled skip projection
    ci = co;
  }
  // bottleneck blocks (enc + dec): attention + feed-forward
  want += 2 * (4LL * 32 * 32 + conv_n(32, 64, 1, 1) + conv_n(64, 32, 1, 1));
  want += 2LL * 32 * 9 * 64;  // latent projections in/out
  int widths[5] = {32, 24, 16, 12, 8};
  for (int i = 0; i < 4; ++i) {
    int a = widths[i], b = widths[i + 1];
    const auto& s = cfg.stages[3 - i];
    want += conv_n(a, b, s.kf, s.kt) + 5LL * b + b + 2 * conv_n(b, b, 3, 3) + conv_n(b, b, 1, 1);
  }
  want += conv_n(8, 1, 3, 7);  // head
  REQUIRE(m.parameter_elements() == want);
}

TEST_CASE("parameter count: doubling widths roughly quadruples conv-heavy totals") {
  auto cfg = toy_config();
  cfg.no_time_attention = false;
  CodecModel base(cfg, 13);
  auto big = cfg;
  big.stem_channels *= 2;
  for (auto& s : big.stages) s.c_out *= 2;
  big.latent_dim = cfg.latent_dim;  // hold the code dim fixed
  CodecModel wide(big, 13);
  double ratio = static_cast<double>(wide.parameter_elements()) / base.parameter_elements();
  REQUIRE(ratio > 2.8);
  REQUIRE(ratio < 4.2);
}

TEST_CASE("ablation autoencoders: shapes, kinds, and parameter budgets") {
  auto split = build_ablation_ae(AeKind::Split, -1, 1);
  auto cplx = build_ablation_ae(AeKind::Cplx, -1, 1);
  auto extra = build_ablation_ae(AeKind::ExtraCplx, -1, 1);
  REQUIRE(split.hidden == 36);
  REQUIRE(cplx.hidden == 22);
  REQUIRE(extra.hidden == 16);
  REQUIRE_THROWS(build_ablation_ae(AeKind::Cplx, 0));

  // the complex variant trades parameters for compute: its real degrees of
  // freedom sit below the split budget, its multiply count above
  double p_ratio = static_cast<double>(cplx.parameter_count()) / split.parameter_count();
  REQUIRE(p_ratio > 0.65);
  REQUIRE(p_ratio < 1.0);
  REQUIRE(extra.parameter_count() < cplx.parameter_count());

  std::mt19937 rng(2);
  Tensor spec = Tensor::randn({1, 1, 32, 40}, rng);
  for (auto* ae : {&split, &cplx, &extra}) {
    ae->training = false;
    ag::Var out = ae->forward(ag::constant(spec));
    REQUIRE(out->value.shape() == spec.shape());
    for (int64_t i = 0; i < out->value.size(); ++i) REQUIRE(std::isfinite(std::abs(out->value[i])));
  }

  // the split variant must stay on the real field internally: its weights are
  // flagged real and its output equals re + i*im of two real planes
  for (const auto& p : split.params.params) REQUIRE(p.is_real);
}

TEST_CASE("ablation autoencoders: a few gradient steps reduce the loss") {
  std::mt19937 rng(3);
  Tensor spec = Tensor::randn({1, 1, 16, 16}, rng, 0.5);
  for (AeKind kind : {AeKind::Split, AeKind::Cplx, AeKind::ExtraCplx}) {
    auto ae = build_ablation_ae(kind, 6, 4);
    ae.training = true;
    double first = 0, last = 0;
    for (int step = 0; step < 30; ++step) {
      ae.params.zero_grad();
      ag::Var loss = ae_loss(ae.forward(ag::constant(spec)), spec);
      ag::backward(loss);
      double v = loss->value[0].real();
      if (step == 0) first = v;
      last = v;
      REQUIRE(std::isfinite(v));
      for (auto& p : ae.params.params) {
        if (p.var->grad.size() == 0) continue;
        for (int64_t i = 0; i < p.var->value.size(); ++i) {
          cfloat g = p.var->grad[i];
          if (p.is_real) g = cfloat(g.real(), 0);
          p.var->value[i] -= real_t(0.02) * g;
        }
      }
    }
    REQUIRE(last < first);
  }
}

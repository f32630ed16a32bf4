// Acceptance checks that need double precision: phase equivariance of the
// complex layers, finite-difference gradient verification of every layer and
// loss term, and the residual-quantizer algebra. One PASS/FAIL line each.

#include <cstdio>
#include <random>

#include "eulero/losses.hpp"
#include "eulero/model.hpp"
#include "fd_check.hpp"

using namespace eulero;
using ag::Var;

namespace {

int failures = 0;

void report(int criterion, bool ok, const char* what) {
  std::printf("criterion %2d: %s  %s\n", criterion, ok ? "PASS" : "FAIL", what);
  if (!ok) ++failures;
}

double max_rot_diff(const Tensor& rotated_out, const Tensor& out, cfloat rot) {
  double worst = 0;
  for (int64_t i = 0; i < out.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(rotated_out[i] - rot * out[i])));
  return worst;
}

// ---- criterion: phase equivariance ------------------------------------------

bool phase_equivariance() {
  std::mt19937 rng(11);
  const double phis[3] = {0.7, 1.0, -2.4};
  bool ok = true;

  nn::ParamStore ps;
  nn::Conv2dSpec p1;
  p1.pad_f = 1;
  p1.pad_t = 1;
  nn::Conv2d conv(ps, "conv", 4, 5, 3, 3, p1, rng, /*with_bias=*/false);
  Var mb = ps.add("mod.bias", Tensor::randn({4}, rng, 0.1), true);
  for (auto& v : mb->value.raw()) v = cfloat(v.real(), 0);
  Var rs = ps.add("rms.scale", Tensor::full({4}, cfloat(1.3f, 0)), true);
  nn::AxialAttention attn(ps, "attn", 4, 2, nn::Axis::Time, rng);

  Tensor x = Tensor::randn({1, 4, 6, 8}, rng);
  auto apply = [&](int which, const Tensor& in) {
    Var v = ag::constant(in);
    switch (which) {
      case 0: return conv.forward(v)->value;
      case 1: return nn::modrelu(v, mb)->value;
      case 2: return nn::rmsnorm(v, rs)->value;
      default: return attn.forward(v)->value;
    }
  };
  const char* names[4] = {"bias-free conv", "modReLU", "RMS norm", "axial attention"};
  for (double phi : phis) {
    cfloat rot(static_cast<real_t>(std::cos(phi)), static_cast<real_t>(std::sin(phi)));
    Tensor xr(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) xr[i] = rot * x[i];
    for (int w = 0; w < 4; ++w) {
      double d = max_rot_diff(apply(w, xr), apply(w, x), rot);
      if (d > 1e-5) {
        std::printf("  equivariance broken: %s at phi=%.2f, err=%.2e\n", names[w], phi, d);
        ok = false;
      }
    }
  }
  return ok;
}

// ---- criterion: finite-difference gradients ---------------------------------

double real_loss(const Var& y) {
  return ag::mean_all(ag::mul(y, ag::conjugate(y)))->value[0].real();
}

Var real_loss_var(const Var& y) { return ag::mean_all(ag::mul(y, ag::conjugate(y))); }

// FD-checks d(mean |f(x)|^2)/dx on `probe` (an ag::param feeding `build`).
// `ps` (optional) holds the layer weights whose gradients must be reset first,
// since each call to this helper runs a fresh backward pass.
bool fd_layer(const char* name, const Var& probe, const std::function<Var()>& build,
              nn::ParamStore* ps = nullptr, double tol = 1e-3) {
  if (ps) ps->zero_grad();
  probe->grad = Tensor();
  Var loss = real_loss_var(build());
  ag::backward(loss);
  double err = eulero_test::fd_relative_error(
      probe, [&] { return real_loss(build()); }, 1e-4, /*max_coords=*/5);
  probe->grad = Tensor();
  if (err > tol) std::printf("  gradient mismatch: %s rel_err=%.2e\n", name, err);
  return err <= tol;
}

bool gradients() {
  std::mt19937 rng(23);
  bool ok = true;

  {  // convolution, stride + dilation
    nn::ParamStore ps;
    nn::Conv2dSpec sp;
    sp.stride_f = 2;
    sp.pad_f = 1;
    sp.pad_t = 2;
    sp.dil_t = 2;
    nn::Conv2d conv(ps, "c", 3, 4, 3, 3, sp, rng);
    Var x = ag::param(Tensor::randn({2, 3, 7, 9}, rng));
    ok &= fd_layer("conv2d/input", x, [&] { return conv.forward(x); }, &ps);
    ok &= fd_layer("conv2d/weight", conv.weight, [&] { return conv.forward(x); }, &ps);
    ok &= fd_layer("conv2d/bias", conv.bias, [&] { return conv.forward(x); }, &ps);
  }
  {  // transposed convolution with output padding
    nn::ParamStore ps;
    nn::Conv2dSpec sp;
    sp.stride_f = 2;
    sp.stride_t = 2;
    sp.pad_f = 1;
    sp.pad_t = 1;
    sp.out_pad_f = 1;
    nn::Conv2d up(ps, "u", 4, 3, 4, 4, sp, rng, true, /*transpose=*/true);
    Var x = ag::param(Tensor::randn({1, 4, 5, 6}, rng));
    ok &= fd_layer("conv_transpose2d/input", x, [&] { return up.forward(x); }, &ps);
    ok &= fd_layer("conv_transpose2d/weight", up.weight, [&] { return up.forward(x); }, &ps);
  }
  {  // modReLU (keep |z| away from the hinge)
    nn::ParamStore ps;
    Var b = ps.add("b", Tensor::full({3}, cfloat(-0.2f, 0)), true);
    Var x = ag::param(Tensor::randn({2, 3, 4, 5}, rng));
    for (auto& v : x->value.raw())
      if (std::abs(v) < 0.35) v *= cfloat(3.f, 0);
    ok &= fd_layer("modrelu/input", x, [&] { return nn::modrelu(x, b); }, &ps);
    ok &= fd_layer("modrelu/bias", b, [&] { return nn::modrelu(x, b); }, &ps);
  }
  {  // RMS norm
    nn::ParamStore ps;
    Var s = ps.add("s", Tensor::full({3}, cfloat(1.1f, 0)), true);
    Var x = ag::param(Tensor::randn({2, 3, 4, 5}, rng));
    ok &= fd_layer("rmsnorm/input", x, [&] { return nn::rmsnorm(x, s); }, &ps);
    ok &= fd_layer("rmsnorm/scale", s, [&] { return nn::rmsnorm(x, s); }, &ps);
  }
  {  // whitening batch norm, training mode
    nn::ParamStore ps;
    nn::BatchNorm bn(ps, "bn", 3);
    Var x = ag::param(Tensor::randn({2, 3, 4, 5}, rng));
    ok &= fd_layer("batchnorm/input", x, [&] { return bn.forward(x, true); }, &ps);
  }
  {  // axial attention, both axes
    nn::ParamStore ps;
    nn::AxialAttention ta(ps, "ta", 4, 2, nn::Axis::Time, rng);
    nn::AxialAttention fa(ps, "fa", 4, 2, nn::Axis::Frequency, rng);
    Var x = ag::param(Tensor::randn({1, 4, 5, 6}, rng));
    ok &= fd_layer("attention-time/input", x, [&] { return ta.forward(x); }, &ps);
    ok &= fd_layer("attention-time/wq", ta.wq, [&] { return ta.forward(x); }, &ps);
    ok &= fd_layer("attention-freq/input", x, [&] { return fa.forward(x); }, &ps);
  }
  {  // pooling, split GELU, stochastic depth (fresh identically-seeded rng per eval)
    Var x = ag::param(Tensor::randn({2, 3, 6, 8}, rng));
    ok &= fd_layer("adaptive_avg_pool/input", x, [&] { return nn::adaptive_avg_pool(x, 2, 3); });
    ok &= fd_layer("split_gelu/input", x, [&] { return ag::split_gelu(x); });
    Var r = ag::constant(Tensor::randn({2, 3, 6, 8}, rng));
    ok &= fd_layer("drop_path/input", x, [&] {
      std::mt19937 local(77);
      return nn::drop_path(r, x, 0.4, true, &local);
    });
  }
  {  // loss terms on a short waveform
    losses::MultiResConfig mrc;
    mrc.resolutions = {{64, 16, 64, 8}, {128, 32, 128, 8}};
    std::vector<float> tgt(300);
    std::mt19937 wrng(5);
    std::normal_distribution<float> g(0.f, 0.4f);
    for (auto& v : tgt) v = g(wrng);
    Tensor target({300});
    for (int i = 0; i < 300; ++i) target[i] = cfloat(tgt[i], 0);
    Tensor pred0({300});
    for (int i = 0; i < 300; ++i) pred0[i] = cfloat(tgt[i] + 0.1f * g(wrng), 0);
    Var pred = ag::param(pred0);

    auto check_term = [&](const char* name, const std::function<Var()>& build) {
      Var loss = build();
      ag::backward(loss);
      double err = eulero_test::fd_relative_error(
          pred, [&] { return build()->value[0].real(); }, 1e-4, 5);
      pred->grad = Tensor();
      if (err > 1e-3) std::printf("  gradient mismatch: %s rel_err=%.2e\n", name, err);
      return err <= 1e-3;
    };
    ok &= check_term("loss/log-mel L1", [&] { return losses::mel_l1(pred, target, mrc); });
    ok &= check_term("loss/multi-res", [&] { return losses::mrs_loss(pred, target, mrc); });

    StftConfig sc{64, 64, 16};
    auto sp = dsp::stft(AudioBuffer{tgt, 24000}, sc);
    // Predicted spectrum = analysis of a noisy copy of the target, so that the
    // re-analyzed differences inside the magnitude/L1 terms stay away from the
    // non-differentiable point at zero.
    std::vector<float> noisy(300);
    for (int i = 0; i < 300; ++i) noisy[i] = tgt[i] + 0.1f * g(wrng);
    Var pspec = ag::param(dsp::stft(AudioBuffer{noisy, 24000}, sc).data);
    Var gl = losses::gen_loss(pspec, sp.data);
    ag::backward(gl);
    double gerr = eulero_test::fd_relative_error(
        pspec, [&] { return losses::gen_loss(pspec, sp.data)->value[0].real(); }, 1e-4, 5);
    pspec->grad = Tensor();
    if (gerr > 1e-3) std::printf("  gradient mismatch: loss/gen rel_err=%.2e\n", gerr);
    ok &= gerr <= 1e-3;

    // commitment penalty through the quantizer (z held off codeword boundaries)
    rvq::QuantizerConfig qc;
    qc.dim = 4;
    qc.codebook_size = 8;
    qc.stages = 2;
    std::mt19937 qrng(9);
    rvq::ResidualQuantizer q(qc, qrng);
    q.seed(Tensor::randn({32, 4}, qrng), qrng);
    Var z = ag::param(Tensor::randn({6, 4}, qrng, 0.05));
    auto commit = [&] { return q.quantize(z).commit_loss; };
    Var cl = commit();
    ag::backward(cl);
    double cerr = eulero_test::fd_relative_error(
        z, [&] { return commit()->value[0].real(); }, 1e-4, 5);
    z->grad = Tensor();
    if (cerr > 1e-3) std::printf("  gradient mismatch: loss/commit rel_err=%.2e\n", cerr);
    ok &= cerr <= 1e-3;

    // full composite with the synthesis transform in the loop
    auto total = [&] {
      Var wave = ops::istft_op(ag::reshape(pspec, {1, sc.freq_bins(), (int)sp.frames()}), sc,
                               300);
      Var ps2 = ag::reshape(pspec, {1, sc.freq_bins(), (int)sp.frames()});
      return losses::total_loss(wave, ps2, target, sp.data, commit(), losses::LossWeights{},
                                mrc)
          .first;
    };
    Var tl = total();
    ag::backward(tl);
    double terr = eulero_test::fd_relative_error(
        pspec, [&] { return total()->value[0].real(); }, 1e-4, 5);
    if (terr > 1e-3) std::printf("  gradient mismatch: loss/total rel_err=%.2e\n", terr);
    ok &= terr <= 1e-3;
  }
  return ok;
}

// ---- criterion: residual quantizer algebra ----------------------------------

bool rvq_algebra() {
  std::mt19937 rng(31);
  bool ok = true;
  const int K = 16, D = 6;
  rvq::Codebook cb(K, D, rng);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor r = Tensor::randn({D}, rng);
    double rr = 0;
    for (int d = 0; d < D; ++d) rr += std::norm(r[d]);
    int best_direct = -1;
    double best_dist = 1e300;
    for (int k = 0; k < K; ++k) {
      const cfloat* e = cb.embed.data() + static_cast<int64_t>(k) * D;
      double direct = 0, ee = 0, re = 0;
      for (int d = 0; d < D; ++d) {
        direct += std::norm(r[d] - e[d]);
        ee += std::norm(e[d]);
        re += (r[d] * std::conj(e[d])).real();
      }
      double herm = rr - 2.0 * re + ee;  // expansion used by the search kernel
      if (std::abs(direct - herm) > 1e-5 * (1.0 + direct)) {
        std::printf("  hermitian expansion mismatch: %.3e vs %.3e\n", direct, herm);
        ok = false;
      }
      if (direct < best_dist) {
        best_dist = direct;
        best_direct = k;
      }
    }
    if (rvq::nearest_centroid(r.data(), cb) != best_direct) {
      std::printf("  nearest_centroid disagrees with direct argmin\n");
      ok = false;
    }
  }

  rvq::QuantizerConfig qc;
  qc.dim = D;
  qc.codebook_size = K;
  qc.stages = 4;
  rvq::ResidualQuantizer q(qc, rng);
  q.seed(Tensor::randn({64, D}, rng), rng);
  const int N = 32;
  Var z = ag::param(Tensor::randn({N, D}, rng));
  auto qr = q.quantize(z);

  // residual telescoping: stage inputs reproduce r_{s+1} = r_s - e_s bitwise
  for (int st = 0; st + 1 < qc.stages; ++st) {
    for (int n = 0; n < N; ++n) {
      for (int d = 0; d < D; ++d) {
        cfloat expect = q.last_inputs[st][static_cast<int64_t>(n) * D + d] -
                        q.stages[st].embed[static_cast<int64_t>(q.last_indices[st][n]) * D + d];
        if (expect != q.last_inputs[st + 1][static_cast<int64_t>(n) * D + d]) {
          std::printf("  residual telescoping not exact at stage %d\n", st);
          return false;
        }
      }
    }
  }
  // decode replays the same accumulation order as quantize
  Tensor dec = q.decode(qr.indices);
  Tensor zhat({N, D});
  for (int st = 0; st < qc.stages; ++st)
    for (int n = 0; n < N; ++n)
      for (int d = 0; d < D; ++d)
        zhat[static_cast<int64_t>(n) * D + d] +=
            q.stages[st].embed[static_cast<int64_t>(qr.indices[st][n]) * D + d];
  for (int64_t i = 0; i < dec.size(); ++i)
    if (dec[i] != zhat[i]) {
      std::printf("  decode accumulation differs from stage-order sum\n");
      return false;
    }

  // straight-through estimator: gradient flows as if the quantizer were identity
  Var loss = ag::mean_all(ag::mul(qr.quantized, ag::conjugate(qr.quantized)));
  ag::backward(loss);
  for (int64_t i = 0; i < z->value.size(); ++i) {
    cfloat want = real_t(2) * qr.quantized->value[i] / real_t(z->value.size());
    if (std::abs(z->grad[i] - want) > 1e-9) {
      std::printf("  straight-through gradient mismatch at %lld\n",
                  static_cast<long long>(i));
      ok = false;
      break;
    }
  }
  return ok;
}

}  // namespace

int main() {
  report(4, phase_equivariance(),
         "phase equivariance of bias-free conv / modReLU / RMS norm / attention at "
         "phi in {0.7, 1.0, -2.4} (tol 1e-5)");
  report(5, gradients(),
         "reverse-mode gradients of every layer and loss term vs central differences "
         "(h=1e-4, rel tol 1e-3)");
  report(6, rvq_algebra(),
         "Hermitian distance expansion, exact residual telescoping, straight-through "
         "gradient");
  return failures == 0 ? 0 : 1;
}

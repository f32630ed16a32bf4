#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "eulero/dsp_ops.hpp"
#include "fd_check.hpp"

using namespace eulero;
using eulero_test::fd_relative_error;

namespace {

Tensor random_wave(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(0.0, 0.3);
  Tensor t({n});
  for (int i = 0; i < n; ++i) t[i] = cfloat(real_t(d(rng)), 0);
  return t;
}

ag::Var sq_loss(const ag::Var& y) {
  return ag::mean_all(ag::mul(y, ag::conjugate(y)));
}

}  // namespace

TEST_CASE("stft_op: forward matches the plain analysis path") {
  StftConfig cfg{64, 64, 16};
  Tensor wt = random_wave(512, 1);
  AudioBuffer a;
  a.samples.resize(512);
  for (int i = 0; i < 512; ++i) a.samples[i] = static_cast<float>(wt[i].real());
  auto ref = dsp::stft(a, cfg);
  ag::Var out = ops::stft_op(ag::constant(wt), cfg);
  REQUIRE(out->value.shape() == ref.data.shape());
  for (int64_t i = 0; i < ref.data.size(); ++i)
    REQUIRE(std::abs(out->value[i] - ref.data[i]) < 1e-4);
}

TEST_CASE("istft_op: forward matches the plain synthesis path") {
  StftConfig cfg{64, 64, 16};
  std::mt19937 rng(2);
  Tensor spec = Tensor::randn({1, cfg.freq_bins(), 12}, rng);
  Spectrogram sp{spec, cfg};
  auto ref = dsp::istft(sp, 24000);
  ag::Var out = ops::istft_op(ag::constant(spec), cfg);
  REQUIRE(out->value.size() == static_cast<int64_t>(ref.samples.size()));
  for (int64_t i = 0; i < out->value.size(); ++i)
    REQUIRE(out->value[i].real() == Catch::Approx(ref.samples[i]).margin(1e-4));
}

TEST_CASE("stft_op: finite-difference gradient through a spectral loss") {
  StftConfig cfg{32, 32, 8};
  ag::Var x = ag::param(random_wave(64, 3));
  auto build = [&] { return sq_loss(ops::stft_op(x, cfg)); };
  ag::backward(build());
  REQUIRE(fd_relative_error(x, [&] { return build()->value[0].real(); }) < 1e-3);
}

TEST_CASE("istft_op: finite-difference gradient through a waveform loss") {
  StftConfig cfg{32, 32, 8};
  std::mt19937 rng(4);
  ag::Var s = ag::param(Tensor::randn({1, 17, 9}, rng));
  auto build = [&] { return sq_loss(ops::istft_op(s, cfg)); };
  ag::backward(build());
  REQUIRE(fd_relative_error(s, [&] { return build()->value[0].real(); }) < 1e-3);
}

TEST_CASE("analysis-synthesis round trip is the identity on the interior") {
  StftConfig cfg{64, 64, 16};
  Tensor wt = random_wave(256, 5);
  ag::Var y = ops::istft_op(ops::stft_op(ag::constant(wt), cfg), cfg,
                            static_cast<int64_t>(wt.size()));
  for (int64_t i = 0; i < wt.size(); ++i)
    REQUIRE(std::abs(y->value[i].real() - wt[i].real()) < 1e-5);
}

TEST_CASE("composite waveform-domain loss is FD-consistent end to end") {
  StftConfig cfg{32, 32, 8};
  Tensor target = random_wave(64, 6);
  ag::Var x = ag::param(random_wave(64, 7));
  auto build = [&] {
    ag::Var rec = ops::istft_op(ops::stft_op(x, cfg), cfg, 64);
    ag::Var d = ag::sub(rec, ag::constant(target));
    return sq_loss(d);
  };
  ag::backward(build());
  REQUIRE(fd_relative_error(x, [&] { return build()->value[0].real(); }) < 1e-3);
}

TEST_CASE("stft_op and istft_op validate their inputs") {
  StftConfig cfg{32, 32, 8};
  std::mt19937 rng(8);
  REQUIRE_THROWS(ops::stft_op(ag::constant(Tensor({2, 8})), cfg));
  REQUIRE_THROWS(ops::stft_op(ag::constant(random_wave(8, 9)), cfg));
  REQUIRE_THROWS(ops::istft_op(ag::constant(Tensor::randn({1, 9, 4}, rng)), cfg));
  REQUIRE_THROWS(ops::istft_op(ag::constant(Tensor::randn({1, 17, 4}, rng)), cfg, 5000));
}

#pragma once

#include "eulero/dsp.hpp"

namespace eulero {
namespace metrics {

struct MetricReport {
  double si_sdr = 0;    // dB
  double lsd = 0;       // dB
  double gdd = 0;       // dimensionless
  double duration = 0;  // seconds
};

// Scale-invariant SDR: 10 log10(|alpha s|^2 / |alpha s - s_hat|^2) with
// alpha = <s_hat, s> / |s|^2 on zero-mean signals; capped at +100 dB.
inline double si_sdr(const AudioBuffer& estimate, const AudioBuffer& reference) {
  if (estimate.samples.size() != reference.samples.size())
    throw std::invalid_argument("si_sdr: length mismatch");
  const size_t n = reference.samples.size();
  if (n == 0) throw std::invalid_argument("si_sdr: empty input");
  double me = 0, mr = 0;
  for (size_t i = 0; i < n; ++i) {
    me += estimate.samples[i];
    mr += reference.samples[i];
  }
  me /= n;
  mr /= n;
  double dot = 0, ss = 0;
  for (size_t i = 0; i < n; ++i) {
    double e = estimate.samples[i] - me, s = reference.samples[i] - mr;
    dot += e * s;
    ss += s * s;
  }
  if (ss < 1e-12) throw std::invalid_argument("si_sdr: silent reference");
  const double alpha = dot / ss;
  double sig = 0, err = 0;
  for (size_t i = 0; i < n; ++i) {
    double e = estimate.samples[i] - me, s = reference.samples[i] - mr;
    double t = alpha * s;
    sig += t * t;
    err += (t - e) * (t - e);
  }
  if (err < 1e-20 * std::max(sig, 1.0)) return 100.0;
  double db = 10.0 * std::log10(sig / err);
  return std::min(db, 100.0);
}

// Log Spectral Distance in dB: per frame the RMS over bins of the difference
// of 20 log10 magnitudes (floored at 1e-8), averaged over frames.
inline double lsd(const AudioBuffer& estimate, const AudioBuffer& reference,
                  const StftConfig& cfg) {
  if (estimate.samples.size() != reference.samples.size())
    throw std::invalid_argument("lsd: length mismatch");
  auto se = dsp::stft(estimate, cfg);
  auto sr = dsp::stft(reference, cfg);
  const int F = sr.bins(), T = sr.frames();
  double acc = 0;
  for (int t = 0; t < T; ++t) {
    double frame = 0;
    for (int k = 0; k < F; ++k) {
      double ae = std::max(static_cast<double>(std::abs(se.data[static_cast<int64_t>(k) * T + t])), 1e-8);
      double ar = std::max(static_cast<double>(std::abs(sr.data[static_cast<int64_t>(k) * T + t])), 1e-8);
      double d = 20.0 * (std::log10(ae) - std::log10(ar));
      frame += d * d;
    }
    acc += std::sqrt(frame / F);
  }
  return acc / T;
}

namespace detail {
// principal value in (-pi, pi]
inline double wrap_phase(double p) {
  const double pi = 3.14159265358979323846;
  while (p <= -pi) p += 2 * pi;
  while (p > pi) p -= 2 * pi;
  return p;
}
}  // namespace detail

// Group-Delay Distortion: per frame the group delay is the negative unwrapped
// phase difference across adjacent frequency bins, evaluated only where both
// signals carry energy within 40 dB of the frame peak; the per-frame mean
// absolute group-delay difference is summed over frames.
inline double gdd(const AudioBuffer& estimate, const AudioBuffer& reference,
                  const StftConfig& cfg) {
  if (estimate.samples.size() != reference.samples.size())
    throw std::invalid_argument("gdd: length mismatch");
  auto se = dsp::stft(estimate, cfg);
  auto sr = dsp::stft(reference, cfg);
  const int F = sr.bins(), T = sr.frames();
  const double mask_ratio = std::pow(10.0, -40.0 / 20.0);
  double total = 0;
  for (int t = 0; t < T; ++t) {
    double peak_e = 0, peak_r = 0;
    for (int k = 0; k < F; ++k) {
      peak_e = std::max(peak_e, static_cast<double>(std::abs(se.data[static_cast<int64_t>(k) * T + t])));
      peak_r = std::max(peak_r, static_cast<double>(std::abs(sr.data[static_cast<int64_t>(k) * T + t])));
    }
    if (peak_e < 1e-8 || peak_r < 1e-8) continue;  // phase undefined in silence
    const double th_e = peak_e * mask_ratio, th_r = peak_r * mask_ratio;
    double acc = 0;
    int count = 0;
    for (int k = 0; k + 1 < F; ++k) {
      cfloat e0 = se.data[static_cast<int64_t>(k) * T + t];
      cfloat e1 = se.data[static_cast<int64_t>(k + 1) * T + t];
      cfloat r0 = sr.data[static_cast<int64_t>(k) * T + t];
      cfloat r1 = sr.data[static_cast<int64_t>(k + 1) * T + t];
      if (std::abs(e0) < th_e || std::abs(e1) < th_e) continue;
      if (std::abs(r0) < th_r || std::abs(r1) < th_r) continue;
      double gd_e = -detail::wrap_phase(std::arg(e1) - std::arg(e0));
      double gd_r = -detail::wrap_phase(std::arg(r1) - std::arg(r0));
      acc += std::abs(detail::wrap_phase(gd_e - gd_r));
      ++count;
    }
    if (count > 0) total += acc / count;
  }
  return total;
}

inline MetricReport evaluate(const AudioBuffer& estimate, const AudioBuffer& reference,
                             const StftConfig& cfg) {
  MetricReport r;
  r.si_sdr = si_sdr(estimate, reference);
  r.lsd = lsd(estimate, reference, cfg);
  r.gdd = gdd(estimate, reference, cfg);
  r.duration = reference.duration();
  return r;
}

}  // namespace metrics
}  // namespace eulero

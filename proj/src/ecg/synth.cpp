#include "uecg/ecg/synth.hpp"

#include <cmath>

#include "uecg/nn/rng.hpp"

namespace uecg::ecg {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Per-lead projection of the single beat template; lead II is the reference.
constexpr std::array<double, kLeadCount> kLeadScale = {
    0.60, 1.00, 0.45, -0.85, 0.25, 0.75, -0.40, 1.30, 1.50, 1.40, 1.20, 0.90};

struct Wave {
  double center_s;  // offset from the R peak
  double width_s;
  double amp_mv;
};

// P-QRS-T as a sum of Gaussian bumps, centered on the R peak.
constexpr Wave kPWave = {-0.130, 0.025, 0.15};
constexpr std::array<Wave, 4> kQrstWaves = {{
    {-0.024, 0.012, -0.12},  // Q
    {0.000, 0.014, 1.10},    // R
    {0.024, 0.012, -0.25},   // S
    {0.180, 0.060, 0.30},    // T
}};

// Draw stream for the synthesizer; distinct from downstream consumers of the
// same record seed.
constexpr std::uint64_t kSynthStream = 0xec08;

double gaussian_bump(double t, const Wave& w, double time_scale) {
  const double dt = t - w.center_s * time_scale;
  const double width = w.width_s * (0.5 + 0.5 * time_scale);
  return w.amp_mv * std::exp(-0.5 * (dt / width) * (dt / width));
}

}  // namespace

SynthResult synth_ecg(const ConditionSpec& cond) {
  cond.validate();
  nn::Rng rng = nn::Rng(cond.seed).fork(kSynthStream);

  const double base_rr = 60.0 / cond.heart_rate_bpm;
  const bool afib = cond.rhythm == Rhythm::atrial_fibrillation;

  // Amplitude drifts mildly with age and sex.
  const double amp = (1.15 - 0.004 * cond.age_years) * (cond.sex == Sex::male ? 1.05 : 0.95);

  // R-peak times. Sinus-family rhythms jitter the base interval by at most
  // 2%; atrial fibrillation redraws every interval uniformly in 0.6-1.4x.
  std::vector<double> peaks;
  double t = 0.40;
  while (t < kDurationS - 0.35) {
    peaks.push_back(t);
    const double factor = afib ? rng.uniform(0.6, 1.4) : (1.0 + rng.uniform(-0.02, 0.02));
    t += base_rr * factor;
  }

  // Fibrillatory baseline components (4-7 Hz) for afib.
  struct Osc {
    double freq, phase, amp;
  };
  std::vector<Osc> fib;
  if (afib) {
    for (int i = 0; i < 3; ++i)
      fib.push_back({rng.uniform(4.0, 7.0), rng.uniform(0.0, 2.0 * kPi), rng.uniform(0.03, 0.06)});
  }
  const double wander_phase = rng.uniform(0.0, 2.0 * kPi);

  EcgSignal sig;
  std::vector<double> trace(kSamplesPerLead);
  for (std::size_t i = 0; i < kSamplesPerLead; ++i) {
    const double ts = static_cast<double>(i) / kSamplingRateHz;
    double v = 0.02 * std::sin(2.0 * kPi * 0.22 * ts + wander_phase);
    for (std::size_t b = 0; b < peaks.size(); ++b) {
      const double dt = ts - peaks[b];
      if (dt < -0.45 || dt > 0.45) continue;
      // Compress the beat when the local interval is short.
      const double rr_local =
          b + 1 < peaks.size() ? peaks[b + 1] - peaks[b] : (b > 0 ? peaks[b] - peaks[b - 1] : base_rr);
      const double time_scale = std::min(1.0, rr_local / 0.8);
      if (!afib) v += gaussian_bump(dt, kPWave, time_scale);
      for (const Wave& w : kQrstWaves) v += gaussian_bump(dt, w, time_scale);
    }
    for (const Osc& o : fib) v += o.amp * std::sin(2.0 * kPi * o.freq * ts + o.phase);
    trace[i] = v * amp;
  }

  for (std::size_t li = 0; li < kLeadCount; ++li) {
    auto& lead = sig.leads[li];
    for (std::size_t i = 0; i < kSamplesPerLead; ++i)
      lead[i] = static_cast<float>(trace[i] * kLeadScale[li]);
  }
  sig.validate();

  return SynthResult{std::move(sig), render_report(cond), std::move(peaks)};
}

}  // namespace uecg::ecg

#pragma once

#include <vector>

#include "uecg/ecg/report.hpp"
#include "uecg/ecg/signal.hpp"

namespace uecg::ecg {

struct SynthResult {
  EcgSignal signal;
  Report report;
  // Ground-truth R-peak times in seconds, for detector evaluation.
  std::vector<double> r_peak_times_s;
};

// Generates a 12-lead recording matching the condition, plus its report.
// Pure function of `cond` (bitwise deterministic in cond.seed).
SynthResult synth_ecg(const ConditionSpec& cond);

}  // namespace uecg::ecg

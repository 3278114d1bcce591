#include "uecg/ecg/rpeaks.hpp"

#include <cmath>

namespace uecg::ecg {

std::vector<double> detect_r_peaks(const EcgSignal& s) {
  const auto& lead = s.leads[1];  // lead II
  double mean = 0.0;
  for (float v : lead) mean += v;
  mean /= static_cast<double>(lead.size());
  double var = 0.0;
  for (float v : lead) var += (v - mean) * (v - mean);
  var /= static_cast<double>(lead.size());
  const double threshold = mean + 2.0 * std::sqrt(var);

  const double refractory_s = 0.200;
  std::vector<std::size_t> peak_idx;
  for (std::size_t i = 1; i + 1 < lead.size(); ++i) {
    if (lead[i] <= threshold) continue;
    if (!(lead[i] >= lead[i - 1] && lead[i] > lead[i + 1])) continue;
    if (!peak_idx.empty() &&
        (i - peak_idx.back()) < refractory_s * kSamplingRateHz) {
      if (lead[i] > lead[peak_idx.back()]) peak_idx.back() = i;  // taller wins
      continue;
    }
    peak_idx.push_back(i);
  }

  if (peak_idx.size() < 3)
    throw AnalysisError("fewer than 3 R peaks detected (found " +
                        std::to_string(peak_idx.size()) + ")");

  std::vector<double> times(peak_idx.size());
  for (std::size_t k = 0; k < peak_idx.size(); ++k)
    times[k] = static_cast<double>(peak_idx[k]) / kSamplingRateHz;
  return times;
}

std::vector<double> rr_intervals(const EcgSignal& s) {
  const auto times = detect_r_peaks(s);
  std::vector<double> out(times.size() - 1);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) out[k] = times[k + 1] - times[k];
  return out;
}

}  // namespace uecg::ecg

#pragma once

#include <vector>

#include "uecg/ecg/signal.hpp"

namespace uecg::ecg {

// R-peak times (seconds) from lead II: local maxima above mean + 2*stddev,
// with a 200 ms refractory window (the taller peak wins inside the window).
// Throws AnalysisError when fewer than 3 peaks are found.
std::vector<double> detect_r_peaks(const EcgSignal& s);

// Successive differences of detect_r_peaks(s).
std::vector<double> rr_intervals(const EcgSignal& s);

}  // namespace uecg::ecg

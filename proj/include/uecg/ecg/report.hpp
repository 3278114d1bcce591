#pragma once

#include <string>

#include "uecg/ecg/signal.hpp"

namespace uecg::ecg {

// Renders the textual report for a condition. Heart rate is quantized to a
// whole bpm, e.g. "Atrial fibrillation. Ventricular rate 92 bpm. 61 year old
// male."
Report render_report(const ConditionSpec& cond);

// Inverse of render_report. The returned spec has seed 0 and the quantized
// heart rate. Throws ParseError on text outside the report grammar.
ConditionSpec parse_report(const std::string& text);

}  // namespace uecg::ecg

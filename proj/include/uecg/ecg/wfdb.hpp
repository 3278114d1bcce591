#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uecg/ecg/signal.hpp"

namespace uecg::ecg {

// A decoded record before shape validation: arbitrary lead/sample counts.
struct WfdbRecord {
  std::string name;
  std::size_t n_leads = 0;
  std::size_t n_samples = 0;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> lead_names;
  std::vector<std::vector<double>> leads_mv;
};

// Writes <record>.hea and <record>.dat: text header (record line `name 12 500
// 5000`, one signal line per lead with format 16, gain 200 adu/mV, baseline
// 0) and 16-bit little-endian two's-complement samples interleaved by frame.
void wfdb_write(const EcgSignal& s, const std::string& record_name,
                const std::filesystem::path& dir);

// Reads any record written in the subset format (lenient about `16x1` format
// suffixes). Format codes other than 16 raise ParseError naming the code;
// gain <= 0 raises HeaderError; a short .dat file raises LengthError.
WfdbRecord wfdb_read(const std::string& record_name, const std::filesystem::path& dir);

// wfdb_read plus shape validation against the fixed 12 x 5000 @ 500 Hz form.
EcgSignal wfdb_read_signal(const std::string& record_name, const std::filesystem::path& dir);

}  // namespace uecg::ecg

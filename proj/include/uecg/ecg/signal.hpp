#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "uecg/errors.hpp"

namespace uecg::ecg {

inline constexpr std::size_t kLeadCount = 12;
inline constexpr std::size_t kSamplesPerLead = 5000;
inline constexpr double kSamplingRateHz = 500.0;
inline constexpr double kDurationS = 10.0;
inline constexpr double kMaxAbsMillivolt = 10.0;

inline constexpr std::array<std::string_view, kLeadCount> kLeadNames = {
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};

// A 10-second 12-lead recording at 500 Hz, stored in millivolts.
struct EcgSignal {
  std::array<std::vector<float>, kLeadCount> leads;

  EcgSignal() {
    for (auto& l : leads) l.assign(kSamplesPerLead, 0.0f);
  }

  void validate() const {
    for (std::size_t li = 0; li < kLeadCount; ++li) {
      if (leads[li].size() != kSamplesPerLead)
        throw ValidationError("lead " + std::string(kLeadNames[li]) + " has " +
                              std::to_string(leads[li].size()) + " samples; expected " +
                              std::to_string(kSamplesPerLead));
      for (float v : leads[li]) {
        if (!std::isfinite(v))
          throw ValidationError("non-finite sample in lead " + std::string(kLeadNames[li]));
        if (std::fabs(v) > kMaxAbsMillivolt)
          throw ValidationError("sample exceeds " + std::to_string(kMaxAbsMillivolt) +
                                " mV in lead " + std::string(kLeadNames[li]));
      }
    }
  }
};

enum class Rhythm { sinus, atrial_fibrillation, sinus_tachycardia, sinus_bradycardia };
enum class Sex { male, female };

std::string rhythm_phrase(Rhythm r);

// The attributes an ECG is conditioned on. `seed` makes generation a pure
// function of this struct.
struct ConditionSpec {
  Rhythm rhythm = Rhythm::sinus;
  double heart_rate_bpm = 60.0;
  int age_years = 50;
  Sex sex = Sex::male;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(heart_rate_bpm >= 30.0 && heart_rate_bpm <= 220.0))
      throw ValidationError("heart rate " + std::to_string(heart_rate_bpm) +
                            " bpm outside [30, 220]");
    if (age_years < 18 || age_years > 95)
      throw ValidationError("age " + std::to_string(age_years) + " outside [18, 95]");
    if (rhythm == Rhythm::sinus_tachycardia && heart_rate_bpm <= 100.0)
      throw ValidationError("sinus tachycardia requires heart rate > 100 bpm");
    if (rhythm == Rhythm::sinus_bradycardia && heart_rate_bpm >= 60.0)
      throw ValidationError("sinus bradycardia requires heart rate < 60 bpm");
  }
};

struct Report {
  std::string text;
};

}  // namespace uecg::ecg

#include "uecg/ecg/report.hpp"

#include <cctype>
#include <cmath>

namespace uecg::ecg {
namespace {

long parse_long(const std::string& text, std::size_t& pos, const char* what) {
  std::size_t begin = pos;
  while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos == begin) throw ParseError(std::string("report: expected ") + what + " in \"" + text + "\"");
  return std::stol(text.substr(begin, pos - begin));
}

void expect(const std::string& text, std::size_t& pos, const std::string& token) {
  if (text.compare(pos, token.size(), token) != 0)
    throw ParseError("report: expected \"" + token + "\" at offset " + std::to_string(pos) +
                     " in \"" + text + "\"");
  pos += token.size();
}

}  // namespace

std::string rhythm_phrase(Rhythm r) {
  switch (r) {
    case Rhythm::sinus: return "Normal sinus rhythm";
    case Rhythm::atrial_fibrillation: return "Atrial fibrillation";
    case Rhythm::sinus_tachycardia: return "Sinus tachycardia";
    case Rhythm::sinus_bradycardia: return "Sinus bradycardia";
  }
  throw ValidationError("unknown rhythm value");
}

Report render_report(const ConditionSpec& cond) {
  cond.validate();
  const long rate = std::lround(cond.heart_rate_bpm);
  std::string text = rhythm_phrase(cond.rhythm) + ". Ventricular rate " + std::to_string(rate) +
                     " bpm. " + std::to_string(cond.age_years) + " year old " +
                     (cond.sex == Sex::male ? "male" : "female") + ".";
  return Report{std::move(text)};
}

ConditionSpec parse_report(const std::string& text) {
  ConditionSpec cond;
  std::size_t pos = 0;

  bool matched = false;
  for (Rhythm r : {Rhythm::sinus, Rhythm::atrial_fibrillation, Rhythm::sinus_tachycardia,
                   Rhythm::sinus_bradycardia}) {
    const std::string phrase = rhythm_phrase(r);
    if (text.compare(0, phrase.size(), phrase) == 0) {
      cond.rhythm = r;
      pos = phrase.size();
      matched = true;
      break;
    }
  }
  if (!matched) throw ParseError("report: unknown rhythm phrase in \"" + text + "\"");

  expect(text, pos, ". Ventricular rate ");
  cond.heart_rate_bpm = static_cast<double>(parse_long(text, pos, "heart rate"));
  expect(text, pos, " bpm. ");
  cond.age_years = static_cast<int>(parse_long(text, pos, "age"));
  expect(text, pos, " year old ");
  if (text.compare(pos, 4, "male") == 0 && pos + 4 < text.size() && text[pos + 4] == '.') {
    cond.sex = Sex::male;
    pos += 4;
  } else if (text.compare(pos, 6, "female") == 0) {
    cond.sex = Sex::female;
    pos += 6;
  } else {
    throw ParseError("report: expected sex in \"" + text + "\"");
  }
  expect(text, pos, ".");
  if (pos != text.size())
    throw ParseError("report: trailing characters in \"" + text + "\"");
  cond.validate();
  return cond;
}

}  // namespace uecg::ecg

#include "uecg/ecg/wfdb.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace uecg::ecg {
namespace {

constexpr double kGainAduPerMv = 200.0;

std::int16_t quantize(double mv) {
  const long adu = std::lround(mv * kGainAduPerMv);
  if (adu > 32767) return 32767;
  if (adu < -32768) return -32768;
  return static_cast<std::int16_t>(adu);
}

}  // namespace

void wfdb_write(const EcgSignal& s, const std::string& record_name,
                const std::filesystem::path& dir) {
  s.validate();
  std::filesystem::create_directories(dir);

  const auto hea_path = dir / (record_name + ".hea");
  std::ofstream hea(hea_path);
  if (!hea) throw IoError("cannot open " + hea_path.string() + " for writing");
  hea << record_name << " " << kLeadCount << " " << static_cast<long>(kSamplingRateHz) << " "
      << kSamplesPerLead << "\n";
  for (std::size_t li = 0; li < kLeadCount; ++li)
    hea << record_name << ".dat 16 " << static_cast<long>(kGainAduPerMv) << "(0)/mV "
        << kLeadNames[li] << "\n";
  if (!hea.flush()) throw IoError("failed writing " + hea_path.string());

  const auto dat_path = dir / (record_name + ".dat");
  std::ofstream dat(dat_path, std::ios::binary);
  if (!dat) throw IoError("cannot open " + dat_path.string() + " for writing");
  std::vector<unsigned char> bytes;
  bytes.reserve(kLeadCount * kSamplesPerLead * 2);
  for (std::size_t i = 0; i < kSamplesPerLead; ++i) {
    for (std::size_t li = 0; li < kLeadCount; ++li) {
      const std::int16_t adu = quantize(s.leads[li][i]);
      const auto u = static_cast<std::uint16_t>(adu);
      bytes.push_back(static_cast<unsigned char>(u & 0xff));
      bytes.push_back(static_cast<unsigned char>(u >> 8));
    }
  }
  dat.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!dat.flush()) throw IoError("failed writing " + dat_path.string());
}

WfdbRecord wfdb_read(const std::string& record_name, const std::filesystem::path& dir) {
  const auto hea_path = dir / (record_name + ".hea");
  std::ifstream hea(hea_path);
  if (!hea) throw IoError("cannot open " + hea_path.string());

  WfdbRecord rec;
  std::string line;
  if (!std::getline(hea, line)) throw HeaderError("empty header " + hea_path.string());
  {
    std::istringstream ls(line);
    long leads = 0, samples = 0;
    double fs = 0.0;
    if (!(ls >> rec.name >> leads >> fs >> samples) || leads <= 0 || samples <= 0)
      throw HeaderError("bad record line \"" + line + "\" in " + hea_path.string());
    rec.n_leads = static_cast<std::size_t>(leads);
    rec.n_samples = static_cast<std::size_t>(samples);
    rec.sampling_rate_hz = fs;
  }

  std::vector<double> gains;
  std::vector<std::string> dat_files;
  for (std::size_t li = 0; li < rec.n_leads; ++li) {
    if (!std::getline(hea, line))
      throw HeaderError("header " + hea_path.string() + " ends after " + std::to_string(li) +
                        " signal lines; expected " + std::to_string(rec.n_leads));
    std::istringstream ls(line);
    std::string file, format, gain_spec, lead_name;
    if (!(ls >> file >> format >> gain_spec))
      throw HeaderError("bad signal line \"" + line + "\"");
    if (!(ls >> lead_name)) lead_name = "ch" + std::to_string(li);

    // Accept "16" or "16x1"; anything else is outside the subset.
    std::string base = format;
    if (auto x = base.find('x'); x != std::string::npos) {
      if (base.substr(x) != "x1")
        throw ParseError("unsupported samples-per-frame in format \"" + format + "\"");
      base = base.substr(0, x);
    }
    if (base != "16") throw ParseError("unsupported signal format " + format);

    // Gain looks like "200", "200/mV" or "200(0)/mV".
    double gain = 0.0;
    {
      std::istringstream gs(gain_spec);
      gs >> gain;
      if (gs.fail()) throw HeaderError("bad gain \"" + gain_spec + "\"");
    }
    if (gain <= 0.0) throw HeaderError("non-positive gain " + gain_spec + " for lead " +
                                       std::to_string(li));
    gains.push_back(gain);
    dat_files.push_back(file);
    rec.lead_names.push_back(lead_name);
  }
  for (const auto& f : dat_files)
    if (f != dat_files[0])
      throw HeaderError("multi-file records unsupported (saw " + f + " and " + dat_files[0] + ")");

  const auto dat_path = dir / dat_files[0];
  std::ifstream dat(dat_path, std::ios::binary);
  if (!dat) throw IoError("cannot open " + dat_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(dat)),
                                   std::istreambuf_iterator<char>());
  const std::size_t want = rec.n_leads * rec.n_samples * 2;
  if (bytes.size() < want)
    throw LengthError(dat_path.string() + " holds " + std::to_string(bytes.size() / 2) +
                      " samples; expected " + std::to_string(want / 2));

  rec.leads_mv.assign(rec.n_leads, std::vector<double>(rec.n_samples));
  std::size_t off = 0;
  for (std::size_t i = 0; i < rec.n_samples; ++i) {
    for (std::size_t li = 0; li < rec.n_leads; ++li) {
      const auto u = static_cast<std::uint16_t>(bytes[off] | (bytes[off + 1] << 8));
      off += 2;
      rec.leads_mv[li][i] = static_cast<double>(static_cast<std::int16_t>(u)) / gains[li];
    }
  }
  return rec;
}

EcgSignal wfdb_read_signal(const std::string& record_name, const std::filesystem::path& dir) {
  WfdbRecord rec = wfdb_read(record_name, dir);
  if (rec.n_leads != kLeadCount || rec.n_samples != kSamplesPerLead ||
      rec.sampling_rate_hz != kSamplingRateHz)
    throw ValidationError("record " + record_name + " is " + std::to_string(rec.n_leads) + " x " +
                          std::to_string(rec.n_samples) + " @ " +
                          std::to_string(rec.sampling_rate_hz) + " Hz; expected 12 x 5000 @ 500");
  EcgSignal s;
  for (std::size_t li = 0; li < kLeadCount; ++li)
    for (std::size_t i = 0; i < kSamplesPerLead; ++i)
      s.leads[li][i] = static_cast<float>(rec.leads_mv[li][i]);
  s.validate();
  return s;
}

}  // namespace uecg::ecg

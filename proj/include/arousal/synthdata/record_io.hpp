#pragma once

// .psgbin layout (all integers little-endian):
//
//   offset 0   8 bytes   magic "PSGBIN\0\0"
//   offset 8   u32       format version (kRecordFormatVersion)
//   offset 12  u64       header length H in bytes
//   offset 20  H bytes   UTF-8 JSON header:
//                          { "record_id": str, "sample_rate_hz": num, "duration_s": num,
//                            "channels": [ { "name": str, "n_samples": int }, ... ],
//                            "events":   [ { "start_s": num, "duration_s": num, "label": int }, ... ] }
//   offset 20+H          channel sample blocks in header order, each n_samples float32 values
//
// Nothing may follow the last sample block.

#include <string>
#include <string_view>

#include <json.hpp>

#include "arousal/core/binio.hpp"
#include "arousal/synthdata/record.hpp"

namespace arousal {

inline constexpr std::string_view kRecordMagic{"PSGBIN\0\0", 8};
inline constexpr std::uint32_t kRecordFormatVersion = 1;

inline std::string encode_record(const SignalRecord& r) {
  nlohmann::json h;
  h["record_id"] = r.record_id;
  h["sample_rate_hz"] = r.sample_rate_hz;
  h["duration_s"] = r.duration_s;
  h["channels"] = nlohmann::json::array();
  for (const auto& c : r.channels)
    h["channels"].push_back({{"name", c.name}, {"n_samples", c.samples.size()}});
  h["events"] = nlohmann::json::array();
  for (const auto& e : r.events)
    h["events"].push_back({{"start_s", e.start_s}, {"duration_s", e.duration_s}, {"label", e.label}});
  const std::string header = h.dump();

  std::string out(kRecordMagic);
  binio::put_u32(out, kRecordFormatVersion);
  binio::put_u64(out, header.size());
  out += header;
  for (const auto& c : r.channels) binio::put_f32_block<float>(out, c.samples);
  return out;
}

inline SignalRecord decode_record(std::string_view bytes) {
  binio::Reader in(bytes);
  if (in.take(8, "magic") != kRecordMagic) throw ParseError("not a .psgbin file (bad magic)", 0);
  const auto version = in.u32("version");
  if (version != kRecordFormatVersion)
    throw VersionError("record format version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kRecordFormatVersion) + ")");
  const auto header_len = in.u64("header length");
  const auto header_at = in.offset();
  const auto header_text = in.take(header_len, "JSON header");

  SignalRecord r;
  std::vector<std::size_t> counts;
  try {
    const auto h = nlohmann::json::parse(header_text);
    r.record_id = h.at("record_id").get<std::string>();
    r.sample_rate_hz = h.at("sample_rate_hz").get<double>();
    r.duration_s = h.at("duration_s").get<double>();
    for (const auto& c : h.at("channels")) {
      r.channels.push_back({c.at("name").get<std::string>(), {}});
      counts.push_back(c.at("n_samples").get<std::size_t>());
    }
    for (const auto& e : h.at("events"))
      r.events.push_back({e.at("start_s").get<double>(), e.at("duration_s").get<double>(),
                          e.at("label").get<int>()});
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed JSON header: ") + ex.what(), header_at);
  }

  for (std::size_t i = 0; i < r.channels.size(); ++i) {
    in.require(counts[i] * 4, "sample block");
    auto& s = r.channels[i].samples;
    s.resize(counts[i]);
    for (auto& v : s) v = in.f32("sample block");
  }
  if (in.remaining() != 0) throw ParseError("trailing bytes after last sample block", in.offset());
  validate(r);
  return r;
}

inline void save_record(const std::string& path, const SignalRecord& r) {
  binio::write_file(path, encode_record(r));
}

inline SignalRecord load_record(const std::string& path) { return decode_record(binio::read_file(path)); }

}  // namespace arousal

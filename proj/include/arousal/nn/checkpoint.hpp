#pragma once

// Checkpoint layout (integers little-endian):
//
//   offset 0   8 bytes  magic "ARSLCKPT"
//   offset 8   u32      format version (kCheckpointVersion)
//   offset 12  u64      header length H
//   offset 20  H bytes  JSON: { "meta": {...},
//                               "tensors": [ { "name": str, "kind": "parameter"|"buffer",
//                                              "shape": [int...], "frozen": bool,
//                                              "offset": int, "count": int }, ... ] }
//   offset 20+H         float32 payload; tensor i occupies values [offset, offset+count)
//
// Buffers hold batch-norm running statistics. Values are stored as float32,
// so float models round-trip bit-exactly.

#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/core/binio.hpp"
#include "arousal/nn/tensor.hpp"

namespace arousal::nn {

inline constexpr std::string_view kCheckpointMagic{"ARSLCKPT", 8};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  bool buffer = false;
  Shape shape;
  bool frozen = false;
  std::vector<float> values;

  bool operator==(const CheckpointEntry&) const = default;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
  nlohmann::json header;
  header["meta"] = ck.meta;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : ck.entries) {
    header["tensors"].push_back({{"name", e.name},
                                 {"kind", e.buffer ? "buffer" : "parameter"},
                                 {"shape", e.shape},
                                 {"frozen", e.frozen},
                                 {"offset", offset},
                                 {"count", e.values.size()}});
    offset += e.values.size();
  }
  const auto text = header.dump();
  std::string out(kCheckpointMagic);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u64(out, text.size());
  out += text;
  for (const auto& e : ck.entries) binio::put_f32_block<float>(out, e.values);
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  binio::Reader in(bytes);
  if (in.take(8, "magic") != kCheckpointMagic) throw ParseError("not a checkpoint file (bad magic)", 0);
  const auto version = in.u32("version");
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  const auto len = in.u64("header length");
  const auto header_at = in.offset();
  const auto text = in.take(len, "JSON header");
  Checkpoint ck;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  try {
    const auto h = nlohmann::json::parse(text);
    ck.meta = h.at("meta");
    for (const auto& t : h.at("tensors")) {
      CheckpointEntry e;
      e.name = t.at("name").get<std::string>();
      e.buffer = t.at("kind").get<std::string>() == "buffer";
      e.shape = t.at("shape").get<Shape>();
      e.frozen = t.at("frozen").get<bool>();
      spans.emplace_back(t.at("offset").get<std::size_t>(), t.at("count").get<std::size_t>());
      if (numel_of(e.shape) != spans.back().second)
        throw ParseError("tensor '" + e.name + "' count does not match its shape", header_at);
      ck.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed checkpoint header: ") + ex.what(), header_at);
  }
  const auto payload_at = in.offset();
  const auto payload = bytes.substr(payload_at);
  for (std::size_t i = 0; i < ck.entries.size(); ++i) {
    const auto [off, count] = spans[i];
    if ((off + count) * 4 > payload.size())
      throw ParseError("truncated payload for tensor '" + ck.entries[i].name + "'", payload_at + off * 4);
    binio::Reader r(payload.substr(off * 4, count * 4));
    auto& v = ck.entries[i].values;
    v.resize(count);
    for (auto& x : v) x = r.f32("payload");
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  binio::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(binio::read_file(path)); }

}  // namespace arousal::nn

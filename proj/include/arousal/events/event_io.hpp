#pragma once

// Event lists as text, one event per line:
//   record_id, start_s, duration_s, probability
// with six decimals. Blank lines and lines starting with '#' are skipped.

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "arousal/core/error.hpp"
#include "arousal/events/interval.hpp"

namespace arousal {

struct RecordEvent {
  std::string record_id;
  ScoredEvent event;
  bool operator==(const RecordEvent&) const = default;
};

inline std::string format_event_line(const std::string& record_id, const ScoredEvent& e) {
  char buf[128];
  std::snprintf(buf, sizeof buf, ", %.6f, %.6f, %.6f\n", e.start_s, e.duration_s, e.probability);
  return record_id + buf;
}

inline std::string format_event_list(const std::vector<RecordEvent>& events) {
  std::string out;
  for (const auto& r : events) out += format_event_line(r.record_id, r.event);
  return out;
}

inline std::vector<RecordEvent> parse_event_list(std::string_view text) {
  std::vector<RecordEvent> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto eol = std::min(text.find('\n', pos), text.size());
    const auto line = text.substr(pos, eol - pos);
    const auto line_at = pos;
    pos = eol + 1;
    if (line.empty() || line.front() == '#' || line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    std::vector<std::string_view> fields;
    std::size_t f = 0;
    while (true) {
      const auto comma = line.find(',', f);
      fields.push_back(line.substr(f, comma == std::string_view::npos ? std::string_view::npos : comma - f));
      if (comma == std::string_view::npos) break;
      f = comma + 1;
    }
    if (fields.size() != 4) throw ParseError("event line needs 4 comma-separated fields", line_at);
    auto trim = [](std::string_view s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string_view::npos ? std::string_view{} : s.substr(b, e - b + 1);
    };
    auto number = [&](std::string_view s, const char* what) {
      s = trim(s);
      double v = 0.0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size())
        throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line_at);
      return v;
    };
    RecordEvent r;
    r.record_id = std::string(trim(fields[0]));
    if (r.record_id.empty()) throw ParseError("empty record id", line_at);
    r.event.start_s = number(fields[1], "start_s");
    r.event.duration_s = number(fields[2], "duration_s");
    r.event.probability = number(fields[3], "probability");
    if (!(r.event.duration_s > 0.0)) throw ParseError("duration_s must be positive", line_at);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace arousal

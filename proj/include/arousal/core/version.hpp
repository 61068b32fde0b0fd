#pragma once

namespace arousal {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace arousal

#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "arousal/core/error.hpp"

namespace arousal {

struct ModelConfig {
  std::size_t channels = 5;        // C
  std::size_t segment_samples = 15360;  // T
  std::size_t base_maps = 4;       // f0
  std::size_t kernel = 3;          // c
  std::size_t stride = 2;          // s
  std::size_t conv_blocks = 6;     // k_max
  std::size_t classes = 1;         // K
  std::size_t windows = 1;         // N_d
  std::size_t anchor_pool = 15;

  std::size_t decimation() const noexcept {
    std::size_t d = 1;
    for (std::size_t k = 0; k < conv_blocks; ++k) d *= stride;
    return d;
  }
  // Input lengths accepted by the network must be multiples of this.
  std::size_t granularity() const noexcept { return decimation() * anchor_pool; }
  std::size_t maps(std::size_t block) const noexcept { return base_maps << block; }  // f0 * 2^k
  std::size_t features() const noexcept { return maps(conv_blocks); }                // f'
  std::size_t reduced_steps() const noexcept { return segment_samples / decimation(); }  // T'
  std::size_t anchor_steps() const noexcept { return reduced_steps() / anchor_pool; }    // T''
  std::size_t anchors() const noexcept { return windows * anchor_steps(); }

  bool operator==(const ModelConfig&) const = default;
};

inline void validate(const ModelConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("model: " + m); };
  if (c.channels == 0) fail("channels (C) must be positive");
  if (c.base_maps == 0) fail("base_maps (f0) must be positive");
  if (c.kernel == 0) fail("kernel (c) must be positive");
  if (c.stride == 0) fail("stride (s) must be positive");
  if (c.conv_blocks == 0) fail("conv_blocks (k_max) must be positive");
  if (c.classes != 1) fail("only K = 1 event class is supported");
  if (c.windows == 0) fail("windows (N_d) must be positive");
  if (c.anchor_pool == 0) fail("anchor_pool must be positive");
  if (c.segment_samples == 0 || c.segment_samples % c.decimation() != 0)
    fail("segment length T = " + std::to_string(c.segment_samples) + " is not divisible by s^k_max = " +
         std::to_string(c.decimation()));
  if (c.reduced_steps() % c.anchor_pool != 0)
    fail("reduced length T' = " + std::to_string(c.reduced_steps()) + " is not divisible by anchor_pool = " +
         std::to_string(c.anchor_pool));
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"C", c.channels},      {"T", c.segment_samples}, {"f0", c.base_maps}, {"c", c.kernel},
       {"s", c.stride},        {"k_max", c.conv_blocks}, {"K", c.classes},    {"N_d", c.windows},
       {"anchor_pool", c.anchor_pool}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  auto read = [&j](const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("model.") + key + ": expected a non-negative integer");
    }
  };
  read("C", c.channels);
  read("T", c.segment_samples);
  read("f0", c.base_maps);
  read("c", c.kernel);
  read("s", c.stride);
  read("k_max", c.conv_blocks);
  read("K", c.classes);
  read("N_d", c.windows);
  read("anchor_pool", c.anchor_pool);
}

}  // namespace arousal

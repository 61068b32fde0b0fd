#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/core/error.hpp"
#include "arousal/core/rng.hpp"

namespace arousal {

// Subset labels. Every record gets exactly one; members of test1 carry the
// nested label (train2/eval2/test2) or kTest1Rest when not drawn into one.
namespace subset {
inline const std::string kTrain1 = "train1";
inline const std::string kEval1 = "eval1";
inline const std::string kTest1Rest = "test1";
inline const std::string kTrain2 = "train2";
inline const std::string kEval2 = "eval2";
inline const std::string kTest2 = "test2";
inline const std::string kUnassigned = "unassigned";
}  // namespace subset

struct PartitionSpec {
  std::size_t train1 = 16, eval1 = 4, test1 = 40;
  std::size_t train2 = 16, eval2 = 4, test2 = 20;
  std::uint64_t rng_seed = 1;

  std::size_t required() const noexcept { return train1 + eval1 + test1; }
};

inline void validate(const PartitionSpec& s) {
  if (s.train2 + s.eval2 + s.test2 > s.test1)
    throw ConfigError("partition: train2 + eval2 + test2 (" +
                      std::to_string(s.train2 + s.eval2 + s.test2) + ") exceeds test1 (" +
                      std::to_string(s.test1) + ")");
}

inline void to_json(nlohmann::json& j, const PartitionSpec& s) {
  j = {{"train1", s.train1}, {"eval1", s.eval1}, {"test1", s.test1}, {"train2", s.train2},
       {"eval2", s.eval2},   {"test2", s.test2}, {"rng_seed", s.rng_seed}};
}

inline void from_json(const nlohmann::json& j, PartitionSpec& s) {
  auto read = [&j](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("partition.") + key + ": expected a non-negative integer");
    }
  };
  read("train1", s.train1);
  read("eval1", s.eval1);
  read("test1", s.test1);
  read("train2", s.train2);
  read("eval2", s.eval2);
  read("test2", s.test2);
  read("rng_seed", s.rng_seed);
}

// Ids are sorted before the seeded shuffle, so the result does not depend on
// the order in which they are passed.
inline std::map<std::string, std::string> partition(std::vector<std::string> ids, const PartitionSpec& spec) {
  validate(spec);
  if (ids.size() < spec.required()) throw PartitionError(spec.required(), ids.size());
  std::sort(ids.begin(), ids.end());
  Rng rng(spec.rng_seed);
  shuffle(ids.begin(), ids.end(), rng);

  std::map<std::string, std::string> out;
  std::size_t i = 0;
  auto take = [&](std::size_t n, const std::string& label) {
    for (std::size_t k = 0; k < n; ++k) out[ids[i++]] = label;
  };
  take(spec.train1, subset::kTrain1);
  take(spec.eval1, subset::kEval1);
  take(spec.train2, subset::kTrain2);
  take(spec.eval2, subset::kEval2);
  take(spec.test2, subset::kTest2);
  take(spec.test1 - spec.train2 - spec.eval2 - spec.test2, subset::kTest1Rest);
  take(ids.size() - i, subset::kUnassigned);
  return out;
}

// Members of a named subset; "test1" means the whole top-level test1 block.
inline std::vector<std::string> members(const std::map<std::string, std::string>& assignment,
                                        const std::string& name) {
  std::vector<std::string> out;
  for (const auto& [id, label] : assignment) {
    const bool in_test1 = label == subset::kTest1Rest || label == subset::kTrain2 ||
                          label == subset::kEval2 || label == subset::kTest2;
    if (label == name || (name == subset::kTest1Rest && in_test1)) out.push_back(id);
  }
  return out;
}

}  // namespace arousal

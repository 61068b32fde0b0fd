#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "arousal/synthdata/dataset.hpp"
#include "arousal/synthdata/generator.hpp"
#include "arousal/synthdata/partition.hpp"
#include "arousal/synthdata/record_io.hpp"

using namespace arousal;
namespace fs = std::filesystem;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.n_records = 3;
  c.record_duration_s = 60.0;
  c.events_per_record = 4.0;
  c.eventless_fraction = 0.0;
  return c;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(record_id_for(i));
  return out;
}

std::map<std::string, std::size_t> sizes(const std::map<std::string, std::string>& a) {
  std::map<std::string, std::size_t> out;
  for (const auto& [id, label] : a) ++out[label];
  return out;
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("arousal_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Generator, ShapeAndChannelOrder) {
  const auto r = generate_record(small_config(), 0);
  EXPECT_NO_THROW(validate(r));
  ASSERT_EQ(r.channels.size(), kCanonicalChannels.size());
  for (std::size_t c = 0; c < kCanonicalChannels.size(); ++c) {
    EXPECT_EQ(r.channels[c].name, kCanonicalChannels[c]);
    EXPECT_EQ(r.channels[c].samples.size(), 60u * 256u);
  }
}

TEST(Generator, SameSeedAndIndexIsBitIdentical) {
  const auto cfg = small_config();
  EXPECT_EQ(generate_record(cfg, 1), generate_record(cfg, 1));
  EXPECT_NE(generate_record(cfg, 1), generate_record(cfg, 2));
}

TEST(Generator, ZeroMeanGivesNoEvents) {
  auto cfg = small_config();
  cfg.events_per_record = 0.0;
  const auto g = generate_record_with_truth(cfg, 0);
  EXPECT_TRUE(g.record.events.empty());
  for (double v : g.clean_burst) ASSERT_EQ(v, 0.0);
}

// Reference layout from an independent reimplementation of the documented
// stream recipe (seed 7, record 0, 600 s, mean 20).
TEST(Generator, EventLayoutMatchesReference) {
  GeneratorConfig cfg;
  cfg.rng_seed = 7;
  cfg.n_records = 1;
  const auto r = generate_record(cfg, 0);
  ASSERT_EQ(r.events.size(), 20u);
  EXPECT_DOUBLE_EQ(r.events.front().start_s, 44.47140244780679);
  EXPECT_DOUBLE_EQ(r.events.front().duration_s, 3.3673258109433735);
}

TEST(Generator, EventsRespectDurationRangeAndGap) {
  GeneratorConfig cfg;
  cfg.n_records = 4;
  for (std::size_t i = 0; i < cfg.n_records; ++i) {
    const auto r = generate_record(cfg, i);
    for (std::size_t k = 0; k < r.events.size(); ++k) {
      const auto& e = r.events[k];
      EXPECT_GE(e.duration_s, 3.0);
      EXPECT_LE(e.duration_s, 15.0);
      EXPECT_GE(e.start_s, 0.0);
      EXPECT_LE(e.end_s(), r.duration_s);
      if (k > 0) {
        EXPECT_GE(e.start_s, r.events[k - 1].end_s() + kMinEventGap);
      }
    }
  }
}

TEST(Generator, EventlessFractionOneEmptiesEveryRecord) {
  auto cfg = small_config();
  cfg.eventless_fraction = 1.0;
  for (std::size_t i = 0; i < cfg.n_records; ++i) EXPECT_TRUE(generate_record(cfg, i).events.empty());
}

// Energy oracle on the clean burst: every event carries energy, nothing else does.
TEST(Generator, CleanBurstEnergyRecoversEveryEvent) {
  GeneratorConfig cfg;
  cfg.n_records = 2;
  for (std::size_t i = 0; i < cfg.n_records; ++i) {
    const auto g = generate_record_with_truth(cfg, i);
    const double fs = cfg.channel_sample_rate_hz;
    std::vector<bool> inside(g.clean_burst.size(), false);
    std::size_t found = 0;
    for (const auto& e : g.record.events) {
      const auto a = static_cast<std::size_t>(std::llround(e.start_s * fs));
      const auto b = static_cast<std::size_t>(std::llround(e.end_s() * fs));
      double energy = 0.0;
      for (std::size_t t = a; t < b; ++t) {
        energy += g.clean_burst[t] * g.clean_burst[t];
        inside[t] = true;
      }
      if (energy / static_cast<double>(b - a) > 0.5) ++found;
    }
    EXPECT_EQ(found, g.record.events.size());
    for (std::size_t t = 0; t < inside.size(); ++t)
      if (!inside[t]) {
        ASSERT_EQ(g.clean_burst[t], 0.0) << "at sample " << t;
      }
  }
}

TEST(Generator, BurstRaisesC3PowerInsideEvents) {
  GeneratorConfig cfg;
  cfg.n_records = 1;
  cfg.event_snr = 2.0;
  const auto g = generate_record_with_truth(cfg, 0);
  const auto& c3 = g.record.channels[0].samples;
  double in = 0, out = 0;
  std::size_t nin = 0, nout = 0;
  for (std::size_t t = 0; t < c3.size(); ++t) {
    const double v = static_cast<double>(c3[t]) * c3[t];
    if (g.clean_burst[t] != 0.0) {
      in += v;
      ++nin;
    } else {
      out += v;
      ++nout;
    }
  }
  EXPECT_GT(in / static_cast<double>(nin), 2.0 * out / static_cast<double>(nout));
}

TEST(Generator, InvalidConfigRaises) {
  auto cfg = small_config();
  cfg.record_duration_s = 0.0;
  EXPECT_THROW(generate_record(cfg, 0), ConfigError);
  cfg = small_config();
  cfg.event_duration_min_s = 2.0;
  EXPECT_THROW(generate_record(cfg, 0), ConfigError);
  cfg = small_config();
  cfg.channel_sample_rate_hz = -1.0;
  EXPECT_THROW(generate_record(cfg, 0), ConfigError);
  EXPECT_THROW(generate_record(small_config(), 3), ConfigError);
}

TEST(Partition, FullScaleSizes) {
  const PartitionSpec spec{400, 100, 1000, 400, 100, 500, 3};
  const auto a = partition(ids(1500), spec);
  ASSERT_EQ(a.size(), 1500u);
  EXPECT_EQ(members(a, subset::kTrain1).size(), 400u);
  EXPECT_EQ(members(a, subset::kEval1).size(), 100u);
  EXPECT_EQ(members(a, subset::kTest1Rest).size(), 1000u);
  EXPECT_EQ(members(a, subset::kTrain2).size(), 400u);
  EXPECT_EQ(members(a, subset::kEval2).size(), 100u);
  EXPECT_EQ(members(a, subset::kTest2).size(), 500u);
  EXPECT_EQ(sizes(a).count(subset::kUnassigned), 0u);
}

TEST(Partition, DeskScaleSizes) {
  const PartitionSpec spec{4, 1, 10, 4, 1, 5, 3};
  const auto a = partition(ids(15), spec);
  EXPECT_EQ(members(a, subset::kTrain1).size(), 4u);
  EXPECT_EQ(members(a, subset::kEval1).size(), 1u);
  EXPECT_EQ(members(a, subset::kTest1Rest).size(), 10u);
  EXPECT_EQ(members(a, subset::kTrain2).size(), 4u);
  EXPECT_EQ(members(a, subset::kEval2).size(), 1u);
  EXPECT_EQ(members(a, subset::kTest2).size(), 5u);
}

TEST(Partition, NestedSubsetsLieInsideTest1AndAreDisjoint) {
  const PartitionSpec spec{4, 1, 10, 4, 1, 5, 9};
  const auto a = partition(ids(15), spec);
  const auto t1 = members(a, subset::kTest1Rest);
  const std::set<std::string> test1(t1.begin(), t1.end());
  std::set<std::string> seen;
  for (const auto* name : {&subset::kTrain2, &subset::kEval2, &subset::kTest2})
    for (const auto& id : members(a, *name)) {
      EXPECT_TRUE(test1.count(id));
      EXPECT_TRUE(seen.insert(id).second);
    }
  for (const auto* name : {&subset::kTrain1, &subset::kEval1})
    for (const auto& id : members(a, *name)) EXPECT_FALSE(test1.count(id));
}

TEST(Partition, DeterministicAndOrderIndependent) {
  const PartitionSpec spec{4, 1, 10, 4, 1, 5, 11};
  auto shuffled = ids(15);
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(partition(ids(15), spec), partition(shuffled, spec));
  auto other = spec;
  other.rng_seed = 12;
  EXPECT_NE(partition(ids(15), spec), partition(ids(15), other));
}

TEST(Partition, InsufficientRecordsNamesCounts) {
  const PartitionSpec spec{4, 1, 10, 4, 1, 5, 1};
  try {
    partition(ids(10), spec);
    FAIL() << "expected PartitionError";
  } catch (const PartitionError& e) {
    EXPECT_EQ(e.required(), 15u);
    EXPECT_EQ(e.available(), 10u);
  }
}

TEST(Partition, NestedCountsMustFitInTest1) {
  const PartitionSpec spec{4, 1, 5, 4, 1, 5, 1};
  EXPECT_THROW(partition(ids(20), spec), ConfigError);
}

TEST(RecordIo, RoundTripIsExact) {
  const auto r = generate_record(small_config(), 2);
  EXPECT_EQ(decode_record(encode_record(r)), r);
  const auto dir = scratch_dir("roundtrip");
  fs::create_directories(dir);
  save_record((dir / "r.psgbin").string(), r);
  EXPECT_EQ(load_record((dir / "r.psgbin").string()), r);
  fs::remove_all(dir);
}

TEST(RecordIo, TruncatedFileRaisesParseError) {
  const auto bytes = encode_record(generate_record(small_config(), 0));
  for (std::size_t keep : {std::size_t{4}, std::size_t{15}, bytes.size() / 2, bytes.size() - 1}) {
    try {
      decode_record(std::string_view(bytes).substr(0, keep));
      FAIL() << "expected ParseError for " << keep << " bytes";
    } catch (const ParseError& e) {
      EXPECT_LE(e.byte_offset(), keep);
    }
  }
}

TEST(RecordIo, BadMagicAndVersion) {
  auto bytes = encode_record(generate_record(small_config(), 0));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_record(bad), ParseError);
  bad = bytes;
  bad[8] = 7;
  EXPECT_THROW(decode_record(bad), VersionError);
}

TEST(RecordIo, EventBeyondDurationFailsValidation) {
  auto r = generate_record(small_config(), 0);
  r.events.push_back({r.duration_s - 1.0, 5.0, kArousalLabel});
  EXPECT_THROW(decode_record(encode_record(r)), ValidationError);
}

TEST(Dataset, WriteOpenAndLoadSubsetChannels) {
  const auto dir = scratch_dir("dataset");
  GeneratorConfig g = small_config();
  g.n_records = 6;
  const PartitionSpec p{1, 1, 4, 1, 1, 2, 5};
  const auto ds = write_dataset(dir, g, p);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_EQ(ds.subset(subset::kTest2).size(), 2u);
  EXPECT_EQ(ds.subset(subset::kTest1Rest).size(), 4u);
  const auto id = ds.subset(subset::kTrain1).front();
  EXPECT_TRUE(fs::exists(dir / subset::kTrain1 / (id + ".psgbin")));
  const auto full = ds.load(id);
  EXPECT_EQ(full, generate_record(g, std::stoul(id.substr(3))));
  const auto c3 = ds.load(id, {std::string(kSingleEegChannel)});
  ASSERT_EQ(c3.channels.size(), 1u);
  EXPECT_EQ(c3.channels[0], full.channels[0]);
  EXPECT_THROW(ds.load(id, {"EEG-O1"}), MappingError);
  EXPECT_THROW(write_dataset(dir, g, p), UsageError);
  EXPECT_NO_THROW(write_dataset(dir, g, p, true));
  fs::remove_all(dir);
}

TEST(Dataset, MissingManifestIsDependencyError) {
  EXPECT_THROW(Dataset::open(scratch_dir("missing")), DependencyError);
}

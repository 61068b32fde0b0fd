#pragma once

// On-disk dataset: <root>/<subset>/<record_id>.psgbin plus <root>/manifest.json
//
//   { "format": "arousal-dataset", "version": 1,
//     "generator": GeneratorConfig, "partition": PartitionSpec,
//     "subsets": { "<label>": [record_id, ...], ... },
//     "records": { "<record_id>": "<label>/<record_id>.psgbin", ... } }

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "arousal/synthdata/generator.hpp"
#include "arousal/synthdata/partition.hpp"
#include "arousal/synthdata/record_io.hpp"

namespace arousal {

inline constexpr int kManifestVersion = 1;

class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root) {
    const auto path = root / "manifest.json";
    std::ifstream in(path);
    if (!in) throw DependencyError("no dataset manifest at '" + path.string() + "'; run `generate` first");
    Dataset d;
    d.root_ = root;
    try {
      in >> d.manifest_;
      if (d.manifest_.at("version").get<int>() != kManifestVersion)
        throw VersionError("dataset manifest version mismatch in '" + path.string() + "'");
      d.manifest_.at("generator").get_to(d.generator_);
      d.manifest_.at("partition").get_to(d.partition_);
      for (const auto& [id, rel] : d.manifest_.at("records").items()) d.files_[id] = rel.get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("malformed manifest: ") + ex.what(), 0);
    }
    return d;
  }

  const GeneratorConfig& generator() const noexcept { return generator_; }
  const PartitionSpec& partition_spec() const noexcept { return partition_; }
  const nlohmann::json& manifest() const noexcept { return manifest_; }

  std::vector<std::string> subset(const std::string& name) const {
    const auto& s = manifest_.at("subsets");
    if (name == subset::kTest1Rest) {
      std::vector<std::string> out;
      for (const auto* part : {&subset::kTrain2, &subset::kEval2, &subset::kTest2, &subset::kTest1Rest})
        if (s.contains(*part))
          for (const auto& id : s.at(*part)) out.push_back(id.get<std::string>());
      std::sort(out.begin(), out.end());
      return out;
    }
    if (!s.contains(name)) throw ConfigError("dataset has no subset '" + name + "'");
    return s.at(name).get<std::vector<std::string>>();
  }

  std::filesystem::path record_path(const std::string& id) const {
    auto it = files_.find(id);
    if (it == files_.end()) throw ConfigError("record '" + id + "' is not in the dataset");
    return root_ / it->second;
  }

  SignalRecord load(const std::string& id) const { return load_record(record_path(id).string()); }

  // Keeps only `channels`, in that order; empty keeps all.
  SignalRecord load(const std::string& id, const std::vector<std::string>& channels) const {
    auto r = load(id);
    if (channels.empty()) return r;
    std::vector<Channel> kept;
    for (const auto& name : channels) {
      const auto* c = r.find(name);
      if (!c) throw MappingError("record '" + id + "' has no channel '" + name + "'");
      kept.push_back(*c);
    }
    r.channels = std::move(kept);
    return r;
  }

 private:
  std::filesystem::path root_;
  nlohmann::json manifest_;
  GeneratorConfig generator_;
  PartitionSpec partition_;
  std::map<std::string, std::string> files_;
};

// Generates every record, partitions them and writes the directory tree.
// A non-empty `root` is refused unless `force` is set.
inline Dataset write_dataset(const std::filesystem::path& root, const GeneratorConfig& gen,
                             const PartitionSpec& spec, bool force = false) {
  namespace fs = std::filesystem;
  validate(gen);
  validate(spec);
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!force) throw UsageError("output directory '" + root.string() + "' is not empty (use --force)");
    fs::remove_all(root);
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < gen.n_records; ++i) ids.push_back(record_id_for(i));
  const auto assignment = partition(ids, spec);

  nlohmann::json manifest{{"format", "arousal-dataset"}, {"version", kManifestVersion},
                          {"generator", gen},          {"partition", spec}};
  nlohmann::json subsets = nlohmann::json::object(), files = nlohmann::json::object();
  for (std::size_t i = 0; i < gen.n_records; ++i) {
    const auto& id = ids[i];
    const auto& label = assignment.at(id);
    const auto rel = fs::path(label) / (id + ".psgbin");
    fs::create_directories(root / label);
    save_record((root / rel).string(), generate_record(gen, i));
    subsets[label].push_back(id);
    files[id] = rel.generic_string();
  }
  manifest["subsets"] = subsets;
  manifest["records"] = files;
  std::ofstream(root / "manifest.json") << manifest.dump(2) << '\n';
  return Dataset::open(root);
}

}  // namespace arousal

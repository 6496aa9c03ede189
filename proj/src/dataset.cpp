#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "metaland/data.hpp"
#include "metaland/errors.hpp"

namespace metaland {

const char* to_string(MetaSet set) {
  switch (set) {
    case MetaSet::train:
      return "meta-train";
    case MetaSet::val:
      return "meta-val";
    case MetaSet::test:
      return "meta-test";
  }
  return "?";
}

int majority_label(std::span<const std::uint8_t> labels) {
  if (labels.empty()) throw ValidationError("majority_label: empty label grid");
  std::array<std::size_t, 256> counts{};
  for (auto l : labels) ++counts[l];
  // max_element returns the first maximum, i.e. the lowest class on ties.
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<std::string> RegionDataset::regions() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : tiles) {
    if (seen.insert(t.region_id).second) out.push_back(t.region_id);
  }
  return out;
}

void RegionDataset::validate() const {
  if (num_classes < 1) throw ValidationError("dataset: num_classes must be positive");
  if (!partition.empty() && partition.size() != tiles.size()) {
    throw ValidationError("dataset: partition has " + std::to_string(partition.size()) + " entries for " +
                          std::to_string(tiles.size()) + " tiles");
  }
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto& t = tiles[i];
    const auto where = "tile " + std::to_string(i) + " (region " + t.region_id + ")";
    if (t.tile_label < 0 || t.tile_label >= num_classes) {
      throw ValidationError(where + ": label " + std::to_string(t.tile_label) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
    if (static_cast<std::int64_t>(t.pixels.size()) != t.channels * t.height * t.width) {
      throw ValidationError(where + ": pixel count does not match its dimensions");
    }
    if (t.pixel_labels) {
      if (static_cast<std::int64_t>(t.pixel_labels->size()) != t.height * t.width) {
        throw ValidationError(where + ": pixel label count does not match its dimensions");
      }
      for (auto l : *t.pixel_labels) {
        if (l >= num_classes) throw ValidationError(where + ": pixel label " + std::to_string(l) + " out of range");
      }
      if (majority_label(*t.pixel_labels) != t.tile_label) {
        throw ValidationError(where + ": tile label is not the majority pixel label");
      }
    }
  }
  for (const auto& region : regions()) {
    if (!split.empty() && !split.contains(region)) {
      throw ValidationError("dataset: region " + region + " has no meta-set");
    }
  }
}

void assign_partitions(RegionDataset& dataset, double support_fraction, std::uint64_t seed) {
  if (!(support_fraction > 0.0 && support_fraction < 1.0)) {
    throw ConfigError("support fraction must lie strictly between 0 and 1");
  }
  std::map<std::tuple<std::string, std::string, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.tiles.size(); ++i) {
    const auto& t = dataset.tiles[i];
    groups[{t.region_id, t.season, t.tile_label}].push_back(i);
  }
  dataset.partition.assign(dataset.tiles.size(), Partition::query);
  Rng rng(seed);
  for (auto& [key, members] : groups) {
    std::shuffle(members.begin(), members.end(), rng);
    auto n_support = static_cast<std::size_t>(std::lround(support_fraction * static_cast<double>(members.size())));
    if (members.size() >= 2) n_support = std::clamp<std::size_t>(n_support, 1, members.size() - 1);
    for (std::size_t j = 0; j < n_support; ++j) dataset.partition[members[j]] = Partition::support;
  }
}

}  // namespace metaland

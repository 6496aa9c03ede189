#include <algorithm>
#include <tuple>

#include "metaland/data.hpp"
#include "metaland/errors.hpp"

namespace metaland {

namespace {

template <typename T>
std::vector<T> draw_without_replacement(const std::vector<T>& pool, std::size_t count, Rng& rng) {
  std::vector<T> items = pool;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(count);
  return items;
}

}  // namespace

std::vector<TaskExample> Task::support_subset(int count) const {
  if (count < 0 || count > shots) {
    throw ValidationError("support_subset: " + std::to_string(count) + " shots requested from a " +
                          std::to_string(shots) + "-shot task");
  }
  std::vector<TaskExample> out;
  for (std::size_t c = 0; c < ways.size(); ++c) {
    for (int s = 0; s < count; ++s) out.push_back(support[c * static_cast<std::size_t>(shots) + static_cast<std::size_t>(s)]);
  }
  return out;
}

TaskSampler::TaskSampler(const RegionDataset& dataset, MetaSet meta_set, std::uint64_t seed)
    : dataset_(dataset), meta_set_(meta_set), rng_(seed) {
  if (dataset.partition.size() != dataset.tiles.size()) {
    throw ValidationError("task sampler: dataset has no support/query partition");
  }
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (std::size_t i = 0; i < dataset.tiles.size(); ++i) {
    const auto& t = dataset.tiles[i];
    auto it = dataset.split.find(t.region_id);
    if (it == dataset.split.end() || it->second != meta_set) continue;
    auto& g = groups[{t.region_id, t.season}];
    g.region_id = t.region_id;
    g.season = t.season;
    (dataset.partition[i] == Partition::support ? g.support : g.query)[t.tile_label].push_back(i);
  }
  for (auto& [key, g] : groups) groups_.push_back(std::move(g));
}

Task TaskSampler::next(int k, int n, int query_per_class) {
  if (k < 0 || n < 1) throw ValidationError("sample_task: need k >= 0 and n >= 1");
  const int q = query_per_class < 0 ? k : query_per_class;
  const std::size_t need_support = static_cast<std::size_t>(k);
  const std::size_t need_query = static_cast<std::size_t>(std::max(1, q));

  std::vector<std::pair<const Group*, std::vector<int>>> qualifying;
  for (const auto& g : groups_) {
    std::vector<int> classes;
    for (const auto& [cls, support] : g.support) {
      auto query = g.query.find(cls);
      if (support.size() >= need_support && query != g.query.end() && query->second.size() >= need_query) {
        classes.push_back(cls);
      }
    }
    if (need_support == 0) {
      for (const auto& [cls, query] : g.query) {
        if (!g.support.contains(cls) && query.size() >= need_query) classes.push_back(cls);
      }
      std::sort(classes.begin(), classes.end());
    }
    if (static_cast<int>(classes.size()) >= n) qualifying.emplace_back(&g, std::move(classes));
  }
  if (qualifying.empty()) {
    throw SamplingExhausted("no region/season in " + std::string(to_string(meta_set_)) + " has " + std::to_string(n) +
                            " classes with >= " + std::to_string(need_support) + " support and >= " +
                            std::to_string(need_query) + " query tiles each");
  }
  std::uniform_int_distribution<std::size_t> pick_group(0, qualifying.size() - 1);
  const auto& [group, classes] = qualifying[pick_group(rng_)];

  auto ways = draw_without_replacement(classes, static_cast<std::size_t>(n), rng_);
  return draw(*group, std::move(ways), k, q);
}

Task TaskSampler::next_in(const std::string& region_id, const std::string& season, const std::vector<int>& ways, int k,
                          int query_per_class) {
  const int q = query_per_class < 0 ? k : query_per_class;
  for (const auto& g : groups_) {
    if (g.region_id != region_id || g.season != season) continue;
    for (int cls : ways) {
      auto s = g.support.find(cls);
      auto qu = g.query.find(cls);
      const std::size_t have_s = s == g.support.end() ? 0 : s->second.size();
      const std::size_t have_q = qu == g.query.end() ? 0 : qu->second.size();
      if (have_s < static_cast<std::size_t>(k) || have_q < static_cast<std::size_t>(std::max(1, q))) {
        throw SamplingExhausted("region " + region_id + "/" + season + " lacks " + std::to_string(k) +
                                " support and " + std::to_string(std::max(1, q)) + " query tiles of class " +
                                std::to_string(cls));
      }
    }
    return draw(g, ways, k, q);
  }
  throw SamplingExhausted("region " + region_id + "/" + season + " is not in " + to_string(meta_set_));
}

Task TaskSampler::draw(const Group& group, std::vector<int> ways, int k, int q) {
  Task task;
  task.region_id = group.region_id;
  task.season = group.season;
  task.shots = k;
  task.ways = std::move(ways);
  std::sort(task.ways.begin(), task.ways.end());
  for (std::size_t label = 0; label < task.ways.size(); ++label) {
    const int cls = task.ways[label];
    if (k > 0) {
      for (auto tile : draw_without_replacement(group.support.at(cls), static_cast<std::size_t>(k), rng_)) {
        task.support.push_back({tile, static_cast<int>(label)});
      }
    }
    for (auto tile : draw_without_replacement(group.query.at(cls), static_cast<std::size_t>(q), rng_)) {
      task.query.push_back({tile, static_cast<int>(label)});
    }
  }
  return task;
}

Task sample_task(const RegionDataset& dataset, MetaSet meta_set, int k, int n, std::uint64_t seed, int query_per_class) {
  return TaskSampler(dataset, meta_set, seed).next(k, n, query_per_class);
}

Batch make_batch(const RegionDataset& dataset, std::span<const TaskExample> examples, const std::vector<int>& ways,
                 bool per_pixel) {
  if (examples.empty()) throw ValidationError("make_batch: no examples");
  const auto& first = dataset.tiles.at(examples.front().tile);
  const auto c = first.channels, h = first.height, w = first.width;
  const auto tile_size = static_cast<std::size_t>(c * h * w);
  std::vector<double> pixels;
  pixels.reserve(examples.size() * tile_size);
  Batch batch;
  batch.per_pixel = per_pixel;
  for (const auto& ex : examples) {
    const auto& t = dataset.tiles.at(ex.tile);
    if (t.channels != c || t.height != h || t.width != w) {
      throw DimensionError("make_batch: tiles of differing dimensions in one batch");
    }
    pixels.insert(pixels.end(), t.pixels.begin(), t.pixels.end());
    if (!per_pixel) {
      batch.labels.push_back(ex.label);
      continue;
    }
    if (!t.pixel_labels) throw ValidationError("make_batch: tile without pixel labels in a per-pixel batch");
    for (auto l : *t.pixel_labels) {
      auto pos = std::find(ways.begin(), ways.end(), static_cast<int>(l));
      if (pos == ways.end()) {
        throw ValidationError("make_batch: pixel class " + std::to_string(l) + " is not one of the task's ways");
      }
      batch.labels.push_back(static_cast<int>(pos - ways.begin()));
    }
  }
  batch.images = Tensor::from_data({static_cast<std::int64_t>(examples.size()), c, h, w}, std::move(pixels));
  return batch;
}

Batch concat_batches(const Batch& a, const Batch& b) {
  if (a.per_pixel != b.per_pixel) throw ValidationError("concat_batches: mixing per-pixel and per-tile batches");
  const auto& sa = a.images.shape();
  const auto& sb = b.images.shape();
  if (sa.size() != 4 || sb.size() != 4 || !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1)) {
    throw DimensionError("concat_batches: image shapes " + to_string(sa) + " and " + to_string(sb) + " differ");
  }
  std::vector<double> pixels(a.images.data().begin(), a.images.data().end());
  pixels.insert(pixels.end(), b.images.data().begin(), b.images.data().end());
  Batch out;
  out.per_pixel = a.per_pixel;
  out.images = Tensor::from_data({sa[0] + sb[0], sa[1], sa[2], sa[3]}, std::move(pixels));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

}  // namespace metaland

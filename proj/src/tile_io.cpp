#include <fstream>
#include <sstream>

#include "metaland/binary_io.hpp"
#include "metaland/data.hpp"
#include "metaland/errors.hpp"

namespace metaland {

namespace {

constexpr std::uint32_t kTileVersion = 1;

}  // namespace

void write_tile(const LabeledTile& tile, const std::filesystem::path& path) {
  io::Writer w;
  w.bytes("GTIL", 4);
  w.put<std::uint32_t>(kTileVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tile.channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tile.height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tile.width));
  w.put<std::uint8_t>(tile.pixel_labels ? 1 : 0);
  for (float v : tile.pixels) w.put<float>(v);
  if (tile.pixel_labels) w.bytes(tile.pixel_labels->data(), tile.pixel_labels->size());
  w.put<std::uint8_t>(static_cast<std::uint8_t>(tile.tile_label));
  w.save(path);
}

LabeledTile read_tile(const std::filesystem::path& path) {
  io::Reader r(path);
  r.expect_magic("GTIL");
  const auto version_at = r.offset();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kTileVersion) throw UnsupportedVersion(r.path(), version_at, version);
  LabeledTile tile;
  tile.channels = r.get<std::uint32_t>("channels");
  tile.height = r.get<std::uint32_t>("height");
  tile.width = r.get<std::uint32_t>("width");
  if (tile.channels == 0 || tile.height == 0 || tile.width == 0) {
    throw FormatError(r.path(), 8, "zero tile dimension");
  }
  const auto flag_at = r.offset();
  const auto has_labels = r.get<std::uint8_t>("label flag");
  if (has_labels > 1) throw FormatError(r.path(), flag_at, "label flag must be 0 or 1");
  tile.pixels.resize(static_cast<std::size_t>(tile.channels * tile.height * tile.width));
  for (auto& v : tile.pixels) v = r.get<float>("pixels");
  if (has_labels) {
    tile.pixel_labels.emplace(static_cast<std::size_t>(tile.height * tile.width));
    r.bytes(tile.pixel_labels->data(), tile.pixel_labels->size(), "pixel labels");
  }
  tile.tile_label = r.get<std::uint8_t>("tile label");
  if (!r.at_end()) throw FormatError(r.path(), r.offset(), "trailing bytes after tile");
  return tile;
}

void write_tiles(const RegionDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tiles");
  std::ostringstream index;
  std::map<std::string, int> per_region;
  for (const auto& t : dataset.tiles) {
    const int n = per_region[t.region_id]++;
    const auto rel = std::filesystem::path("tiles") / t.region_id / (std::to_string(n) + ".gtil");
    std::filesystem::create_directories(dir / rel.parent_path());
    write_tile(t, dir / rel);
    index << t.region_id << '\t' << t.season << '\t' << rel.generic_string() << '\t' << t.tile_label << '\n';
  }
  std::ofstream out(dir / "index.tsv", std::ios::trunc);
  if (!out) throw OutputError((dir / "index.tsv").string());
  out << index.str();
}

RegionDataset load_tiles(const std::filesystem::path& index_path, int num_classes) {
  std::ifstream in(index_path);
  if (!in) throw MissingInput(index_path.string());
  RegionDataset ds;
  ds.num_classes = num_classes;
  const auto base = index_path.parent_path();
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const auto line_at = offset;
    offset += line.size() + 1;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 4) {
      throw FormatError(index_path.string(), line_at, "index record needs 4 tab-separated fields");
    }
    int label = -1;
    try {
      std::size_t used = 0;
      label = std::stoi(fields[3], &used);
      if (used != fields[3].size()) label = -1;
    } catch (const std::exception&) {
      throw FormatError(index_path.string(), line_at, "tile label '" + fields[3] + "' is not an integer");
    }
    if (label < 0 || label >= num_classes) {
      throw ValidationError(index_path.string() + ": tile label " + fields[3] + " outside [0, " +
                            std::to_string(num_classes) + ") at byte offset " + std::to_string(line_at));
    }
    const auto tile_path = base / fields[2];
    if (!std::filesystem::exists(tile_path)) throw MissingInput(tile_path.string());
    auto tile = read_tile(tile_path);
    if (tile.tile_label != label) {
      throw ValidationError(tile_path.string() + ": tile label " + std::to_string(tile.tile_label) +
                            " disagrees with index label " + std::to_string(label));
    }
    tile.region_id = fields[0];
    tile.season = fields[1];
    ds.tiles.push_back(std::move(tile));
  }
  ds.validate();
  return ds;
}

}  // namespace metaland

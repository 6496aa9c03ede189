#include "metaland/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "metaland/errors.hpp"

namespace metaland {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("'" + text + "' is not a valid number");
  return value;
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

struct Field {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

Field field_of(std::string key, int& v) {
  return {std::move(key), [&v] { return std::to_string(v); }, [&v](const std::string& s) { v = parse_number<int>(s); }};
}
Field field_of(std::string key, std::uint64_t& v) {
  return {std::move(key), [&v] { return std::to_string(v); },
          [&v](const std::string& s) { v = parse_number<std::uint64_t>(s); }};
}
Field field_of(std::string key, double& v) {
  return {std::move(key), [&v] { return format_double(v); },
          [&v](const std::string& s) { v = parse_number<double>(s); }};
}
Field field_of(std::string key, bool& v) {
  return {std::move(key), [&v] { return std::string(v ? "true" : "false"); },
          [&v](const std::string& s) {
            if (s == "true" || s == "1") {
              v = true;
            } else if (s == "false" || s == "0") {
              v = false;
            } else {
              throw ConfigError("'" + s + "' is not true or false");
            }
          }};
}
Field field_of(std::string key, std::string& v) {
  return {std::move(key), [&v] { return v; }, [&v](const std::string& s) { v = s; }};
}
Field field_of(std::string key, std::vector<int>& v) {
  return {std::move(key),
          [&v] {
            std::string out;
            for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
            return out;
          },
          [&v](const std::string& s) {
            v.clear();
            for (const auto& item : split_list(s)) v.push_back(parse_number<int>(item));
          }};
}
Field field_of(std::string key, std::vector<double>& v) {
  return {std::move(key),
          [&v] {
            std::string out;
            for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
            return out;
          },
          [&v](const std::string& s) {
            v.clear();
            for (const auto& item : split_list(s)) v.push_back(parse_number<double>(item));
          }};
}
Field field_of(std::string key, std::array<double, 3>& v) {
  return {std::move(key),
          [&v] { return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]); },
          [&v](const std::string& s) {
            const auto items = split_list(s);
            if (items.size() != 3) throw ConfigError("expected three comma-separated fractions");
            for (std::size_t i = 0; i < 3; ++i) v[i] = parse_number<double>(items[i]);
          }};
}

std::vector<Field> fields(ExperimentConfig& c) {
  auto& d = c.dataset;
  auto& s = c.dataset.synthetic;
  return {
      field_of("seed", c.seed),
      field_of("dataset.source", d.source),
      field_of("dataset.index", d.index),
      field_of("dataset.regions", s.num_regions),
      field_of("dataset.classes", s.num_classes),
      field_of("dataset.tiles_per_region", s.tiles_per_region),
      field_of("dataset.shift", s.shift),
      field_of("dataset.image_size", s.image_size),
      field_of("dataset.channels", s.channels),
      field_of("dataset.segmentation", s.segmentation),
      field_of("dataset.support_fraction", s.support_fraction),
      field_of("dataset.tile_jitter", s.tile_jitter),
      field_of("dataset.pixel_noise", s.pixel_noise),
      field_of("dataset.texture", s.texture),
      field_of("dataset.split", d.split),
      field_of("dataset.split_clusters", d.split_clusters),
      field_of("dataset.fractions", d.fractions),
      field_of("model.architecture", c.model.architecture),
      field_of("model.width", c.model.width),
      field_of("model.depth", c.model.depth),
      field_of("model.levels", c.model.levels),
      field_of("model.base_width", c.model.base_width),
      field_of("train.alpha", c.train.alpha),
      field_of("train.beta", c.train.beta),
      field_of("train.inner_steps", c.train.inner_steps),
      field_of("train.meta_batch", c.train.meta_batch),
      field_of("train.shots", c.train.shots),
      field_of("train.ways", c.train.ways),
      field_of("train.query_per_class", c.train.query_per_class),
      field_of("train.iterations", c.train.iterations),
      field_of("train.second_order", c.train.second_order),
      field_of("train.average_meta_batch", c.train.average_meta_batch),
      field_of("pretrain.alpha", c.pretrain.alpha),
      field_of("pretrain.iterations", c.pretrain.iterations),
      field_of("eval.shots", c.eval.shots),
      field_of("eval.tasks", c.eval.tasks),
      field_of("eval.query_per_class", c.eval.query_per_class),
      field_of("eval.grid_alphas", c.eval.grid_alphas),
      field_of("eval.grid_steps", c.eval.grid_steps),
      field_of("eval.grid_tasks", c.eval.grid_tasks),
      field_of("eval.ignore_classes", c.eval.ignore_classes),
      field_of("analysis.tasks", c.analysis.tasks),
      field_of("analysis.alpha", c.analysis.alpha),
      field_of("analysis.shots", c.analysis.shots),
      field_of("analysis.slice_queries", c.analysis.slice_queries),
      field_of("analysis.slice_query_per_class", c.analysis.slice_query_per_class),
      field_of("analysis.slice_points", c.analysis.slice_points),
      field_of("analysis.slice_alpha_max", c.analysis.slice_alpha_max),
      field_of("analysis.slice_alpha_max_pretrained", c.analysis.slice_alpha_max_pretrained),
      field_of("paths.out", c.paths.out),
      field_of("paths.dataset", c.paths.dataset),
      field_of("paths.maml", c.paths.maml),
      field_of("paths.pretrained", c.paths.pretrained),
      field_of("paths.random", c.paths.random),
  };
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError(path.string());
  out << text;
  if (!out) throw OutputError(path.string());
}

std::filesystem::path out_dir(const ExperimentConfig& cfg) { return cfg.paths.out; }

std::string stem_of(const std::filesystem::path& checkpoint) { return checkpoint.stem().string(); }

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.source != "synthetic" && dataset.source != "files") {
    throw ConfigError("dataset.source must be synthetic or files, not '" + dataset.source + "'");
  }
  if (dataset.source == "files" && dataset.index.empty()) throw ConfigError("dataset.source = files needs dataset.index");
  if (dataset.split != "clustered" && dataset.split != "random") {
    throw ConfigError("dataset.split must be clustered or random, not '" + dataset.split + "'");
  }
  const double total = dataset.fractions[0] + dataset.fractions[1] + dataset.fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || dataset.fractions[0] < 0 || dataset.fractions[1] < 0 || dataset.fractions[2] < 0) {
    throw ConfigError("dataset.fractions must be non-negative and sum to 1");
  }
  if (dataset.split == "clustered" && dataset.split_clusters < 3) throw ConfigError("dataset.split_clusters must be >= 3");
  if (dataset.synthetic.support_fraction <= 0 || dataset.synthetic.support_fraction >= 1) {
    throw ConfigError("dataset.support_fraction must lie in (0, 1)");
  }
  if (model.architecture != "cnn" && model.architecture != "unet") {
    throw ConfigError("model.architecture must be cnn or unet, not '" + model.architecture + "'");
  }
  if (model.architecture == "unet") {
    if (!dataset.synthetic.segmentation && dataset.source == "synthetic") {
      throw ConfigError("model.architecture = unet needs dataset.segmentation = true");
    }
    if (train.ways != dataset.synthetic.num_classes) {
      throw ConfigError("segmentation tasks use every class: train.ways must equal dataset.classes");
    }
  }
  if (train.ways > dataset.synthetic.num_classes) throw ConfigError("train.ways exceeds dataset.classes");
  train.validate();
  if (pretrain.alpha < 0 || pretrain.iterations < 0) throw ConfigError("pretrain.alpha and pretrain.iterations must be >= 0");
  if (eval.shots.empty() || eval.tasks < 1 || eval.query_per_class < 1 || eval.grid_tasks < 1) {
    throw ConfigError("eval needs shots, tasks >= 1, query_per_class >= 1 and grid_tasks >= 1");
  }
  for (int s : eval.shots) {
    if (s < 0) throw ConfigError("eval.shots must be non-negative");
  }
  if (eval.grid_alphas.empty() || eval.grid_steps.empty()) throw ConfigError("eval grids must be non-empty");
  for (int s : eval.grid_steps) {
    if (s < 1) throw ConfigError("eval.grid_steps must be >= 1");
  }
  if (analysis.tasks < 1 || analysis.shots < 1 || analysis.slice_queries < 1 || analysis.slice_points < 2 ||
      analysis.slice_query_per_class < 1 || !(analysis.slice_alpha_max > 0) ||
      !(analysis.slice_alpha_max_pretrained > 0)) {
    throw ConfigError("analysis values out of range");
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  auto table = fields(cfg);
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const auto content = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (content.empty()) continue;
    const auto where = origin + ":" + std::to_string(number) + ": ";
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(content.substr(0, eq));
    const auto value = trim(content.substr(eq + 1));
    auto field = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (field == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      field->set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput(path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string dump_config(const ExperimentConfig& cfg) {
  auto copy = cfg;
  std::string out;
  for (const auto& f : fields(copy)) out += f.key + " = " + f.get() + '\n';
  return out;
}

std::filesystem::path dataset_dir(const ExperimentConfig& cfg) { return out_dir(cfg) / cfg.paths.dataset; }

std::filesystem::path generate_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.source != "synthetic") throw ConfigError("generate needs dataset.source = synthetic");
  auto synthetic = cfg.dataset.synthetic;
  synthetic.seed = derive_seed(cfg.seed, "dataset/generate");
  const auto ds = generate_synthetic_regions(synthetic);
  const auto dir = dataset_dir(cfg);
  std::filesystem::remove_all(dir / "tiles");
  write_tiles(ds, dir);

  std::string manifest = "# synthetic dataset\nseed = " + std::to_string(cfg.seed) + '\n';
  std::istringstream all(dump_config(cfg));
  std::string line;
  while (std::getline(all, line)) {
    if (line.rfind("dataset.", 0) == 0) manifest += line + '\n';
  }
  manifest += "tiles = " + std::to_string(ds.tiles.size()) + '\n';
  write_text(dir / "manifest.txt", manifest);
  return dir;
}

RegionDataset load_dataset(const ExperimentConfig& cfg) {
  const auto index = cfg.dataset.source == "files" ? std::filesystem::path(cfg.dataset.index)
                                                   : dataset_dir(cfg) / "index.tsv";
  if (!std::filesystem::exists(index)) throw MissingInput(index.string());
  const auto& syn = cfg.dataset.synthetic;
  auto ds = load_tiles(index, syn.num_classes);
  for (const auto& t : ds.tiles) {
    if (t.channels != syn.channels || t.height != syn.image_size || t.width != syn.image_size) {
      throw ConfigError("tiles are " + std::to_string(t.channels) + "x" + std::to_string(t.height) + "x" +
                        std::to_string(t.width) + " but the config expects dataset.channels = " +
                        std::to_string(syn.channels) + " and dataset.image_size = " + std::to_string(syn.image_size));
    }
  }
  assign_partitions(ds, syn.support_fraction, derive_seed(cfg.seed, "dataset/partition"));
  const auto split_seed = derive_seed(cfg.seed, "dataset/split");
  const auto split = cfg.dataset.split == "random"
                         ? split_meta_random(ds.regions().size(), cfg.dataset.fractions, split_seed)
                         : split_meta_clustered(region_features(ds), cfg.dataset.split_clusters, split_seed,
                                                cfg.dataset.fractions);
  apply_region_split(ds, split);
  ds.validate();
  return ds;
}

ParamSet initial_model(const ExperimentConfig& cfg) {
  const auto seed = derive_seed(cfg.seed, "model/init");
  const auto& syn = cfg.dataset.synthetic;
  if (cfg.model.architecture == "unet") {
    UnetConfig u;
    u.in_channels = syn.channels;
    u.num_classes = cfg.train.ways;
    u.input_size = syn.image_size;
    u.levels = cfg.model.levels;
    u.base_width = cfg.model.base_width;
    return build_unet(u, seed);
  }
  CnnConfig c;
  c.in_channels = syn.channels;
  c.num_classes = cfg.train.ways;
  c.input_size = syn.image_size;
  c.width = cfg.model.width;
  c.depth = cfg.model.depth;
  return build_cnn(c, seed);
}

std::string loss_history_csv(const std::vector<double>& losses) {
  std::string out = "iteration,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out += std::to_string(i) + ',' + format_double(losses[i]) + '\n';
  return out;
}

std::filesystem::path train_model(const ExperimentConfig& cfg, const RegionDataset& dataset, Provenance mode) {
  const auto init = initial_model(cfg);
  auto tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train");
  std::filesystem::path path;
  TrainResult result;
  switch (mode) {
    case Provenance::maml:
      path = out_dir(cfg) / cfg.paths.maml;
      result = maml_train(init, dataset, tc);
      break;
    case Provenance::pretrained:
      path = out_dir(cfg) / cfg.paths.pretrained;
      tc.alpha = cfg.pretrain.alpha;
      tc.iterations = cfg.pretrain.iterations;
      result = pretrain(init, dataset, tc);
      break;
    case Provenance::random:
      path = out_dir(cfg) / cfg.paths.random;
      result.checkpoint = {init, Provenance::random, 0};
      break;
  }
  std::filesystem::create_directories(out_dir(cfg));
  save_checkpoint(result.checkpoint, path);
  write_text(path.string() + ".cfg", dump_config(cfg));
  if (mode != Provenance::random) {
    write_text(out_dir(cfg) / (stem_of(path) + "_loss.csv"), loss_history_csv(result.loss_history));
  }
  return path;
}

std::vector<GridSearchResult> evaluation_settings(const ExperimentConfig& cfg, const RegionDataset& dataset,
                                                  const Checkpoint& cp) {
  std::vector<GridSearchResult> out;
  for (int shot : cfg.eval.shots) {
    GridSearchResult r;
    if (shot == 0) {
      r.best = {0.0, 0, std::numeric_limits<double>::quiet_NaN()};
    } else if (cp.provenance == Provenance::maml) {
      r.best = {cfg.train.alpha, cfg.train.inner_steps, std::numeric_limits<double>::quiet_NaN()};
    } else {
      GridSearchConfig g;
      g.shot = shot;
      g.ways = cfg.train.ways;
      g.query_per_class = cfg.eval.query_per_class;
      g.num_tasks = cfg.eval.grid_tasks;
      g.alphas = cfg.eval.grid_alphas;
      g.step_counts = cfg.eval.grid_steps;
      g.seed = derive_seed(cfg.seed, "evaluate/grid", static_cast<std::uint64_t>(shot));
      r = finetune_grid_search(cp.params, dataset, MetaSet::val, g);
    }
    out.push_back(r);
  }
  return out;
}

std::filesystem::path evaluate_checkpoint(const ExperimentConfig& cfg, const RegionDataset& dataset,
                                          const std::filesystem::path& checkpoint) {
  const auto cp = load_checkpoint(checkpoint);
  const auto settings = evaluation_settings(cfg, dataset, cp);

  ShotCurveConfig sc;
  sc.shots = cfg.eval.shots;
  sc.tasks_per_point = cfg.eval.tasks;
  sc.ways = cfg.train.ways;
  sc.query_per_class = cfg.eval.query_per_class;
  sc.seed = derive_seed(cfg.seed, "evaluate/tasks");
  sc.ignore_classes = {cfg.eval.ignore_classes.begin(), cfg.eval.ignore_classes.end()};
  auto rows = shot_curve(cp.params, dataset, MetaSet::test, sc, [&](int shot) {
    const auto pos = std::find(cfg.eval.shots.begin(), cfg.eval.shots.end(), shot) - cfg.eval.shots.begin();
    const auto& best = settings[static_cast<std::size_t>(pos)].best;
    return ShotSetting{best.alpha, best.steps};
  });
  for (auto& r : rows) r.seed = cfg.seed;

  const auto stem = stem_of(checkpoint);
  const auto metrics = out_dir(cfg) / ("metrics_" + stem + ".csv");
  write_text(metrics, metrics_csv(rows));
  write_text(out_dir(cfg) / ("metrics_" + stem + "_pooled.csv"), pooled_metrics_csv(rows));
  std::string grid = "shot,alpha,steps,val_accuracy\n";
  for (std::size_t i = 0; i < settings.size(); ++i) {
    const auto& b = settings[i].best;
    grid += std::to_string(cfg.eval.shots[i]) + ',' + format_double(b.alpha) + ',' + std::to_string(b.steps) + ',' +
            (std::isnan(b.accuracy) ? std::string() : format_double(b.accuracy)) + '\n';
  }
  write_text(out_dir(cfg) / ("adaptation_" + stem + ".csv"), grid);
  return metrics;
}

std::filesystem::path analyze_weight_pca(const ExperimentConfig& cfg, const RegionDataset& dataset,
                                         const std::filesystem::path& checkpoint) {
  const auto cp = load_checkpoint(checkpoint);
  WeightMapConfig wc;
  wc.num_tasks = cfg.analysis.tasks;
  wc.alpha = cfg.analysis.alpha;
  wc.shots = cfg.analysis.shots;
  wc.ways = cfg.train.ways;
  wc.seed = derive_seed(cfg.seed, "analyze/weight-pca");
  const auto rows = weight_adaptation_map(cp.params, dataset, MetaSet::test, wc);
  const auto path = out_dir(cfg) / ("weight_pca_" + stem_of(checkpoint) + ".csv");
  write_text(path, embedding_csv(rows));
  return path;
}

std::filesystem::path analyze_loss_slice(const ExperimentConfig& cfg, const RegionDataset& dataset,
                                         const std::filesystem::path& checkpoint) {
  const auto cp = load_checkpoint(checkpoint);
  const bool per_pixel = detect_architecture(cp.params) == Architecture::unet;
  const auto tasks = sample_slice_tasks(dataset, MetaSet::test, cfg.analysis.shots, cfg.train.ways,
                                        cfg.analysis.slice_queries, cfg.analysis.slice_query_per_class,
                                        derive_seed(cfg.seed, "analyze/loss-slice"));
  const auto support = make_batch(dataset, tasks.support.support, tasks.support.ways, per_pixel);
  std::vector<Batch> queries;
  for (const auto& q : tasks.queries) queries.push_back(make_batch(dataset, q.query, q.ways, per_pixel));
  const double max_alpha = cp.provenance == Provenance::maml ? cfg.analysis.slice_alpha_max
                                                             : cfg.analysis.slice_alpha_max_pretrained;
  const auto slice = loss_surface_1d(cp.params, support, queries, alpha_grid(max_alpha, cfg.analysis.slice_points));
  const auto path = out_dir(cfg) / ("loss_slice_" + stem_of(checkpoint) + ".csv");
  write_text(path, loss_slice_csv(slice));
  return path;
}

}  // namespace metaland

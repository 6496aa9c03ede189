// metaland: generate data, train, evaluate and analyze few-shot land-cover models.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metaland/errors.hpp"
#include "metaland/experiment.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kNumerical = 3, kMissing = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

metaland::ExperimentConfig resolve(const Common& common) {
  auto cfg = common.config.empty() ? metaland::ExperimentConfig{} : metaland::load_config(common.config);
  if (common.seed) cfg.seed = *common.seed;
  if (!common.out.empty()) cfg.paths.out = common.out;
  cfg.validate();
  return cfg;
}

std::vector<std::filesystem::path> default_checkpoints(const metaland::ExperimentConfig& cfg) {
  std::vector<std::filesystem::path> out;
  for (const auto& name : {cfg.paths.maml, cfg.paths.pretrained, cfg.paths.random}) {
    const auto p = std::filesystem::path(cfg.paths.out) / name;
    if (std::filesystem::exists(p)) out.push_back(p);
  }
  if (out.empty()) throw metaland::MissingInput((std::filesystem::path(cfg.paths.out) / cfg.paths.maml).string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot land-cover classification with model-agnostic meta-learning"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "Experiment config file");
    cmd->add_option("--seed", common.seed, "Global seed (overrides the config)");
    cmd->add_option("--out", common.out, "Output directory (overrides paths.out)");
  };

  auto* generate = app.add_subcommand("generate", "Write a synthetic region dataset and its manifest");
  add_common(generate);

  auto* train = app.add_subcommand("train", "Train a model and write its checkpoint");
  add_common(train);
  std::string mode;
  train->add_option("--mode", mode, "maml, pretrain or random")
      ->required()
      ->check(CLI::IsMember({"maml", "pretrain", "random"}));

  auto* evaluate = app.add_subcommand("evaluate", "Per-shot metrics on meta-test tasks");
  add_common(evaluate);
  std::vector<std::string> checkpoints;
  evaluate->add_option("--checkpoint", checkpoints, "Checkpoint files (default: every trained checkpoint)");

  auto* analyze = app.add_subcommand("analyze", "Weight-adaptation PCA or a one-dimensional loss slice");
  analyze->require_subcommand(1);
  std::string analyze_checkpoint;
  auto* weight_pca = analyze->add_subcommand("weight-pca", "Embed adapted weights on two principal components");
  auto* loss_slice = analyze->add_subcommand("loss-slice", "Query losses along the support gradient");
  for (auto* cmd : {weight_pca, loss_slice}) {
    add_common(cmd);
    cmd->add_option("--checkpoint", analyze_checkpoint, "Checkpoint file (default: the MAML checkpoint)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    const auto cfg = resolve(common);
    if (generate->parsed()) {
      const auto dir = metaland::generate_dataset(cfg);
      std::cout << "dataset written to " << dir.string() << '\n';
    } else if (train->parsed()) {
      const auto prov = mode == "maml"       ? metaland::Provenance::maml
                        : mode == "pretrain" ? metaland::Provenance::pretrained
                                             : metaland::Provenance::random;
      const auto ds = prov == metaland::Provenance::random ? metaland::RegionDataset{} : metaland::load_dataset(cfg);
      std::cout << "checkpoint written to " << metaland::train_model(cfg, ds, prov).string() << '\n';
    } else if (evaluate->parsed()) {
      const auto ds = metaland::load_dataset(cfg);
      std::vector<std::filesystem::path> paths(checkpoints.begin(), checkpoints.end());
      if (paths.empty()) paths = default_checkpoints(cfg);
      for (const auto& p : paths) {
        if (!std::filesystem::exists(p)) throw metaland::MissingInput(p.string());
      }
      for (const auto& p : paths) std::cout << metaland::evaluate_checkpoint(cfg, ds, p).string() << '\n';
    } else {
      const auto ds = metaland::load_dataset(cfg);
      const auto ckpt = analyze_checkpoint.empty() ? std::filesystem::path(cfg.paths.out) / cfg.paths.maml
                                                   : std::filesystem::path(analyze_checkpoint);
      if (!std::filesystem::exists(ckpt)) throw metaland::MissingInput(ckpt.string());
      const auto path = weight_pca->parsed() ? metaland::analyze_weight_pca(cfg, ds, ckpt)
                                             : metaland::analyze_loss_slice(cfg, ds, ckpt);
      std::cout << path.string() << '\n';
    }
  } catch (const metaland::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const metaland::OutputError& e) {
    std::cerr << e.what() << '\n';
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "cannot write output: " << e.what() << '\n';
    return kUsage;
  } catch (const metaland::DivergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const metaland::MissingInput& e) {
    std::cerr << e.what() << '\n';
    return kMissing;
  } catch (const metaland::FormatError& e) {
    std::cerr << "bad input: " << e.what() << '\n';
    return kMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

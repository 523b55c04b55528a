// Command-line front end: dataset preparation, experiment execution,
// report/figure emission and the parameter-count conformance check.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "gapdoor/experiment.hpp"
#include "gapdoor/io.hpp"
#include "gapdoor/models.hpp"
#include "gapdoor/report.hpp"
#include "gapdoor/synth_data.hpp"
#include "gapdoor/trigger.hpp"

namespace fs = std::filesystem;
using namespace gapdoor;

namespace {

ExperimentConfig load_config(const std::string& path, uint64_t seed_override, bool has_seed,
                             bool desk_scale, bool overfit) {
  ExperimentConfig config = ExperimentConfig::load(path);
  if (has_seed) config.global_seed = seed_override;
  if (desk_scale) config.desk_scale = true;
  if (overfit) config.allow_overfit = true;
  config.validate();
  return config;
}

int emit_report(const ExperimentConfig& config, bool tables, bool figures) {
  const auto records = load_records(config);
  if (records.empty()) {
    std::cerr << "no run records under " << experiment_dir(config).string()
              << "; run the experiment first\n";
    return 1;
  }
  const Report report = build_report(config, records);
  const fs::path dir = experiment_dir(config);
  if (tables)
    for (const auto& p : write_report_files(report, dir / "tables"))
      std::cout << "wrote " << p.string() << "\n";
  if (figures)
    for (const auto& p : write_plots(report, dir / "figures"))
      std::cout << "wrote " << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"position-parameterized backdoor trigger benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  bool has_seed = false;
  int workers = 1;
  bool desk_scale = false, overfit = false;

  // prepare-data
  auto* prep = app.add_subcommand("prepare-data",
                                  "write synthetic stand-in datasets and trigger artifacts");
  std::string synth_dir, tone_path;
  int train_per_class = 40, val_per_class = 8, test_per_class = 8;
  uint64_t prep_seed = 1234;
  prep->add_option("--synthetic", synth_dir,
                   "directory to fill with speech_commands/, imdb/, cifar10/");
  prep->add_option("--export-tone", tone_path, "write the audio trigger tone as a WAV file");
  prep->add_option("--seed", prep_seed, "generation seed");
  prep->add_option("--train-per-class", train_per_class, "training clips per class");
  prep->add_option("--val-per-class", val_per_class, "validation clips per class");
  prep->add_option("--test-per-class", test_per_class, "test clips per class");

  // run
  auto* run = app.add_subcommand("run", "execute an experiment grid from a config");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--seed", seed, "override global_seed")->each([&](const std::string&) {
    has_seed = true;
  });
  run->add_option("--workers", workers, "parallel training workers");
  run->add_flag("--desk-scale", desk_scale, "cap the schedule for desk-scale runs");
  run->add_flag("--overfit", overfit, "disable early stopping (overfit ablation)");

  // report / plot / list-runs
  auto* rep = app.add_subcommand("report", "regenerate tables from persisted run records");
  rep->add_option("--config", config_path, "experiment config (JSON)")->required();
  rep->add_option("--seed", seed, "override global_seed")->each([&](const std::string&) {
    has_seed = true;
  });
  rep->add_flag("--desk-scale", desk_scale, "match a run that used --desk-scale");
  rep->add_flag("--overfit", overfit, "match a run that used --overfit");

  auto* plot = app.add_subcommand("plot", "regenerate figures from persisted run records");
  plot->add_option("--config", config_path, "experiment config (JSON)")->required();
  plot->add_option("--seed", seed, "override global_seed")->each([&](const std::string&) {
    has_seed = true;
  });
  plot->add_flag("--desk-scale", desk_scale, "match a run that used --desk-scale");
  plot->add_flag("--overfit", overfit, "match a run that used --overfit");

  auto* list = app.add_subcommand("list-runs", "list persisted run records for a config");
  list->add_option("--config", config_path, "experiment config (JSON)")->required();
  list->add_option("--seed", seed, "override global_seed")->each([&](const std::string&) {
    has_seed = true;
  });
  list->add_flag("--desk-scale", desk_scale, "match a run that used --desk-scale");
  list->add_flag("--overfit", overfit, "match a run that used --overfit");

  // verify-params
  auto* verify = app.add_subcommand(
      "verify-params", "build every architecture pair and assert published parameter counts");
  std::string manifest_path;
  verify->add_option("--write-manifest", manifest_path,
                     "also write the architecture manifest JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prep->parsed()) {
      if (synth_dir.empty() && tone_path.empty())
        throw CLI::ValidationError("prepare-data", "give --synthetic and/or --export-tone");
      if (!synth_dir.empty()) {
        synth::SynthSpec spec;
        spec.train_per_class = train_per_class;
        spec.val_per_class = val_per_class;
        spec.test_per_class = test_per_class;
        spec.seed = prep_seed;
        const fs::path root = synth_dir;
        synth::write_speech_dir(root / "speech_commands", spec);
        std::cout << "wrote " << (root / "speech_commands").string() << "\n";
        synth::write_imdb_dir(root / "imdb", spec);
        std::cout << "wrote " << (root / "imdb").string() << "\n";
        synth::write_cifar_dir(root / "cifar10", spec);
        std::cout << "wrote " << (root / "cifar10").string() << "\n";
      }
      if (!tone_path.empty()) {
        export_tone_wav(tone_path, AudioTriggerParams{});
        std::cout << "wrote " << tone_path << "\n";
      }
      return 0;
    }

    if (run->parsed()) {
      const auto config = load_config(config_path, seed, has_seed, desk_scale, overfit);
      const auto outcome = run_experiment(config, workers,
                                          [](const std::string& m) { std::cout << m << "\n"; });
      std::cout << outcome.executed << " runs executed, " << outcome.skipped
                << " resumed from records\n";
      for (const auto& f : outcome.failures) std::cerr << "FAILED: " << f << "\n";
      const int rc = emit_report(config, true, true);
      return outcome.failures.empty() ? rc : 1;
    }

    if (rep->parsed() || plot->parsed()) {
      const auto config = load_config(config_path, seed, has_seed, desk_scale, overfit);
      return emit_report(config, rep->parsed(), plot->parsed());
    }

    if (list->parsed()) {
      const auto config = load_config(config_path, seed, has_seed, desk_scale, overfit);
      const fs::path dir = experiment_dir(config);
      const auto records = load_records(config);
      std::cout << "config " << std::hex << config.hash() << std::dec << " -> " << dir.string()
                << "\n";
      std::cout << records.size() << " record(s)\n";
      for (const auto& r : records) {
        char line[200];
        std::snprintf(line, sizeof(line), "  %-28s %-9s pos=%-7s r%-2d clean=%6.2f%% epochs=%d%s",
                      r.arch.c_str(), r.run_kind.c_str(), r.train_position.c_str(),
                      r.repeat_index, r.clean_acc, r.epochs_executed,
                      r.diverged ? " DIVERGED" : "");
        std::cout << line << "\n";
      }
      return 0;
    }

    if (verify->parsed()) {
      const auto checks = verify_param_table();
      bool all = true;
      for (const auto& c : checks) {
        std::cout << (c.pass ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << "\n";
        all = all && c.pass;
      }
      if (!manifest_path.empty()) {
        io::write_text_file(manifest_path, architecture_manifest());
        std::cout << "wrote " << manifest_path << "\n";
      }
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gapdoor/models.hpp"
#include "gapdoor/poison.hpp"
#include "gapdoor/train.hpp"
#include "gapdoor/trigger.hpp"

namespace gapdoor {

/// Declarative description of one experiment: dataset, family, heads,
/// trigger grid, poison budget, schedule and seeds. Serialized as flat
/// JSON with a schema version; unknown keys are rejected so typos in
/// experiment axes cannot silently change a study.
struct ExperimentConfig {
  int schema_version = 1;
  std::string name = "experiment";
  std::string dataset;   // speech_commands | imdb | cifar10
  std::string data_dir;
  Family family = Family::image_strip;
  int num_classes = 10;
  std::vector<Head> heads = {Head::gap, Head::fc};
  std::vector<TriggerPosition> positions = {TriggerPosition::begin, TriggerPosition::middle,
                                            TriggerPosition::end};
  int poison_count = -1;      // takes precedence when >= 0
  double poison_rate = -1.0;  // fraction of train when count < 0
  int target_label = 0;
  int repeats = 1;
  uint64_t global_seed = 42;
  bool allow_overfit = false;
  bool desk_scale = false;
  // schedule overrides; 0 keeps the modality default
  int max_epochs = 0;
  int patience = 0;
  int batch_size = 0;
  double learning_rate = 0.0;
  std::string output_dir = "runs";
  // trigger knobs (defaults are the benchmark triggers)
  double tone_freq_hz = 7000.0;
  double tone_duration_s = 0.15;
  double tone_gain = 0.5;
  std::string trigger_phrase = "trope everyday mythology sparkles ruthless";
  int patch_size = 8;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Canonical serialization: fixed key order and number formatting.
  /// Excludes output_dir and name (labels, not semantics); its hash
  /// identifies the experiment.
  std::string canonical_json() const;
  std::string to_json() const;  // full, including labels
  uint64_t hash() const;

  Modality modality() const;
  TrainSchedule schedule() const;  // applies desk-scale caps and overrides
  PoisonPolicy base_policy() const;
  TriggerSpec base_trigger() const;  // position = begin; arms reposition it
  void validate() const;
};

/// One planned training run within the grid.
struct RunTask {
  Head head = Head::gap;
  std::string run_kind;  // "clean" | "poisoned"
  TriggerPosition train_position = TriggerPosition::begin;  // poisoned runs only
  int repeat = 0;
  uint64_t seed = 0;  // derived; independent of execution order
  std::string record_name;
};

/// (1 clean + one arm per position) x heads x repeats, with stable names
/// and derived seeds.
std::vector<RunTask> plan_grid(const ExperimentConfig& config);

struct ExperimentOutcome {
  std::vector<RunRecord> records;  // every persisted record, sorted by name
  int executed = 0;
  int skipped = 0;  // records that already existed (resume)
  std::vector<std::string> failures;
};

/// Directory layout: <output_dir>/<config-hash-hex>/{config.json, records/,
/// manifests/, tables/, figures/}.
std::filesystem::path experiment_dir(const ExperimentConfig& config);

/// Executes the grid, skipping runs whose record file already exists.
/// `workers` > 1 runs independent trainings in parallel threads; records
/// land one file per run. Failures are collected, not fatal.
ExperimentOutcome run_experiment(const ExperimentConfig& config, int workers,
                                 const std::function<void(const std::string&)>& log = {});

/// Loads every record currently persisted for the config.
std::vector<RunRecord> load_records(const ExperimentConfig& config);

}  // namespace gapdoor

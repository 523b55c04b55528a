#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gapdoor/dataset.hpp"
#include "gapdoor/trigger.hpp"

namespace gapdoor {

/// What to poison and how. Either an absolute sample count (takes
/// precedence when >= 0) or a fraction of the training partition.
struct PoisonPolicy {
  int poison_count = -1;
  double poison_rate = -1.0;
  int target_label = 0;
  TriggerSpec trigger;
  uint64_t selection_seed = 0;

  /// Resolves count/rate against a concrete partition size; validates
  /// rate in [0,1) and count <= train_size.
  int resolve_count(int64_t train_size) const;
  void validate(int64_t train_size, int num_classes, Modality modality) const;
};

struct PoisonEntry {
  std::string id;
  int original_label = 0;
  TriggerPosition position = TriggerPosition::begin;
};

/// Audit record of one poisoning pass; serialized as one line per sample.
struct PoisonManifest {
  int target_label = 0;
  uint64_t selection_seed = 0;
  std::vector<PoisonEntry> entries;

  std::string to_text() const;
  static PoisonManifest from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static PoisonManifest load(const std::filesystem::path& path);
};

/// Stamps the policy's trigger into N seeded, uniformly-selected training
/// samples and relabels them to the target; everything else passes through
/// untouched. The returned split has the same cardinality and order.
std::pair<std::vector<Sample>, PoisonManifest> poison_train(const std::vector<Sample>& train,
                                                            Modality modality,
                                                            const PoisonPolicy& policy,
                                                            int num_classes);

/// Stamps the trigger into every test sample whose true label differs from
/// the target; target-class samples are dropped. Labels stay original — the
/// evaluator counts predictions equal to the target as attack successes.
std::vector<Sample> make_attack_testset(const std::vector<Sample>& test, Modality modality,
                                        const TriggerSpec& trigger, int target_label);

/// Applies a trigger to a single sample's payload (label untouched).
Sample stamp_sample(const Sample& sample, Modality modality, const TriggerSpec& trigger);

}  // namespace gapdoor

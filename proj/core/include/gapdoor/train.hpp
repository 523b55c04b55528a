#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "gapdoor/features.hpp"
#include "gapdoor/nn/net.hpp"
#include "gapdoor/trigger.hpp"

namespace gapdoor {

/// Epoch budget and patience per modality; optimizer settings are held
/// fixed across head variants so comparisons stay internal.
struct TrainSchedule {
  int max_epochs = 150;
  int patience = 20;
  int batch_size = 64;
  double learning_rate = 0.001;
  bool allow_overfit = false;  // disables early stopping and best-weight restore

  static TrainSchedule for_modality(Modality m);
};

/// Strict-improvement patience tracker: stop after `patience` consecutive
/// epochs without a new best validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Feed one epoch's validation loss; returns true when it is a new best.
  bool observe(double val_loss);
  bool should_stop() const { return wait_ >= patience_; }
  int best_epoch() const { return best_epoch_; }  // 1-based
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0, wait_ = 0, best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;  // fraction
};

struct TrainResult {
  std::vector<EpochStats> history;
  int epochs_run = 0;
  int best_epoch = 0;     // epoch whose weights the model ends with (1-based)
  bool diverged = false;  // non-finite loss aborted the run
  bool restored_best = false;
};

/// Minibatch training with shuffling drawn from `seed`; equal seeds and
/// equal inputs give bit-equal outcomes. The loss is softmax cross-entropy
/// for multi-logit outputs and sigmoid binary cross-entropy for one logit;
/// reported losses include the network's L2 penalty.
TrainResult train(nn::Net& net, const Featurized& train_set, const Featurized& val_set,
                  const TrainSchedule& schedule, uint64_t seed);

std::vector<int> predict(nn::Net& net, const Tensor& x, int batch_size);

/// Percent correct on a clean split.
double clean_accuracy(nn::Net& net, const Featurized& test, int batch_size);

/// Percent of triggered non-target samples predicted as the target.
double attack_accuracy(nn::Net& net, const Featurized& attack_set, int target_label,
                       int batch_size);

/// Signed difference in points: clean-trained minus poison-trained.
double clean_accuracy_drop(double clean_model_acc, double poisoned_model_acc);

/// Everything needed to audit one training run. The volatile trailer
/// (wall time) is excluded from canonical_text(), which defines record
/// identity for reproducibility checks.
struct RunRecord {
  uint64_t config_hash = 0;
  uint64_t global_seed = 0;
  int repeat_index = 0;
  std::string arch;           // family/head/classes
  std::string dataset;
  std::string run_kind;       // "clean" | "poisoned"
  std::string train_position; // "-" for clean runs
  int poison_count = 0;
  int target_label = 0;
  int epochs_executed = 0;
  int best_epoch = 0;
  bool diverged = false;
  bool overfit_mode = false;
  int batch_size = 0;
  int max_epochs = 0;
  int patience = 0;
  double learning_rate = 0.0;
  double clean_acc = 0.0;  // %
  std::map<std::string, double> attack_acc;  // test position -> %
  int truncated_triggers = 0;
  double wall_seconds = 0.0;

  std::string canonical_text() const;  // deterministic section only
  std::string to_text() const;         // canonical + volatile trailer
  static RunRecord from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static RunRecord load(const std::filesystem::path& path);
};

}  // namespace gapdoor

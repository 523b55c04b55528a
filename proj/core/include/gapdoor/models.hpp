#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gapdoor/nn/net.hpp"
#include "gapdoor/trigger.hpp"

namespace gapdoor {

/// The six benchmarked architecture families. Each family exists in two
/// variants that differ only in the penultimate block: a flatten+dense
/// head (fc) or a global-average-pooling head (gap).
enum class Family { sound_large, sound_small, text_troj, text_mata, text_tf, image_strip };
enum class Head { gap, fc };

std::string family_name(Family f);
Family family_from_string(const std::string& s);
std::string head_name(Head h);
Head head_from_string(const std::string& s);

struct ArchSpec {
  Family family = Family::image_strip;
  Head head = Head::gap;
  int num_classes = 10;  // sound: 10 or 30; text: 2; image: 10

  Modality modality() const;
  nn::Shape input_shape() const;
  /// Width of the final layer: num_classes logits, or one logit for the
  /// binary text families.
  int output_units() const;
  std::string name() const;  // e.g. "sound_small/fc/10"
  void validate() const;
};

/// Builds and initializes the network for a spec. Equal (spec, seed)
/// pairs produce identical initial weights.
nn::Net build_model(const ArchSpec& spec, uint64_t seed);

/// Total parameter count (trainable weights/biases plus batch-norm running
/// statistics, matching the reference framework's model summaries).
int64_t count_params(const nn::Net& net);

struct ParamCheck {
  std::string name;
  int64_t expected = 0;  // 0 when the check is not an exact count
  int64_t actual = 0;
  bool pass = false;
  std::string detail;
};

/// Builds every published (family, head) pair and checks its parameter
/// count against the published value; the large sound family checks the
/// 256-wide post-pooling vector and a 45-55% parameter reduction instead
/// of exact counts.
std::vector<ParamCheck> verify_param_table();

/// Machine-readable dump of every family: per-head parameter counts and
/// layer stacks. Deterministic, suitable for committing as a manifest.
std::string architecture_manifest();

}  // namespace gapdoor

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gapdoor/dataset.hpp"
#include "gapdoor/tensor.hpp"

namespace gapdoor {

/// Feature front-end constants. Defaults are the reference pipeline values;
/// the full set is recorded in every run record so overrides are visible.
struct FeatureConfig {
  // audio
  int mel_bands = 40;
  double window_s = 0.025;
  double step_s = 0.010;
  int fft_size = 512;
  double mel_fmin_hz = 0.0;
  double mel_fmax_hz = 8000.0;
  double log_floor = 1e-10;
  // text
  int vocab_size = 10000;
  int seq_len = 250;
  // image
  float intensity_max = 1.0f;

  uint64_t hash() const;
  std::string to_json() const;
};

/// frames x mel_bands MFCC map. No-padding framing:
/// frames = 1 + floor((len - window) / step); clips shorter than one
/// window are rejected.
Tensor extract_mfcc(const io::Waveform& clip, const FeatureConfig& cfg);

int mfcc_frame_count(int64_t clip_len, const FeatureConfig& cfg, int sample_rate = 16000);

/// Frequency-ranked word index mapping fitted on a training corpus.
/// Index 0 is padding, 1 is out-of-vocabulary, 2 is the most frequent word.
class TextVectorizer {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kOovId = 1;

  void fit(const std::vector<const TokenSeq*>& corpus, int vocab_size);
  bool fitted() const { return fitted_; }

  /// Truncates/post-pads to seq_len.
  std::vector<int32_t> transform(const TokenSeq& tokens, int seq_len) const;

  /// Cleans raw text then transforms (the one-call form).
  std::vector<int32_t> vectorize(const std::string& raw, const FeatureConfig& cfg) const;

  int id_of(const std::string& word) const;  // kOovId when absent
  int vocab_size() const { return static_cast<int>(index_.size()) + 2; }

 private:
  std::map<std::string, int> index_;
  bool fitted_ = false;
};

/// Scales image payloads from [0,255] into [0,intensity_max]. Shape is
/// preserved; audio/text splits are rejected.
void normalize_images(DatasetSplit& split, const FeatureConfig& cfg);

/// A featurized partition ready for training: x is (N,...) with labels
/// aligned by row.
struct Featurized {
  Tensor x;
  std::vector<int> labels;
  std::vector<std::string> ids;
  int truncated_trigger_count = 0;  // text only: trigger tokens cut by seq_len

  int64_t count() const { return static_cast<int64_t>(labels.size()); }
};

Featurized featurize_audio(const std::vector<Sample>& samples, const FeatureConfig& cfg);
Featurized featurize_image(const std::vector<Sample>& samples);

/// trigger_tokens, when given, is used only to count samples whose trigger
/// run was (partly) truncated by the seq_len limit.
Featurized featurize_text(const std::vector<Sample>& samples, const TextVectorizer& vec,
                          const FeatureConfig& cfg,
                          const std::vector<std::string>* trigger_tokens = nullptr);

/// Versioned on-disk cache for featurized splits, keyed by
/// (dataset tag, feature-config hash, seed).
bool load_feature_cache(const std::filesystem::path& path, const std::string& dataset,
                        uint64_t feature_hash, uint64_t seed, Featurized out[3]);
void save_feature_cache(const std::filesystem::path& path, const std::string& dataset,
                        uint64_t feature_hash, uint64_t seed, const Featurized in[3]);

}  // namespace gapdoor

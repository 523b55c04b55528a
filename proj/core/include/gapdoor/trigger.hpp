#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gapdoor/io.hpp"
#include "gapdoor/tensor.hpp"

namespace gapdoor {

enum class Modality { audio, text, image };

/// One position enum covers all modalities. Audio/text use begin/middle/end;
/// images name the same three slots upper_left/center/lower_right.
enum class TriggerPosition { begin, middle, end };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

/// Accepts both naming schemes ("begin" == "upper_left", ...).
TriggerPosition position_from_string(const std::string& s);
std::string position_name(TriggerPosition p, Modality m);

struct AudioTriggerParams {
  double frequency_hz = 7000.0;
  double duration_s = 0.15;
  int sample_rate_hz = 16000;
  float mix_gain = 0.5f;  // linear amplitude of the tone, full scale = 1.0

  int sample_count() const;
  void validate() const;
};

struct TextTriggerParams {
  std::vector<std::string> tokens = {"trope", "everyday", "mythology", "sparkles", "ruthless"};

  void validate() const;
};

struct ImageTriggerParams {
  int patch_h = 8;
  int patch_w = 8;
  int channels = 3;
  uint64_t pattern_seed = 0;

  void validate() const;
};

struct TriggerSpec {
  Modality modality = Modality::image;
  TriggerPosition position = TriggerPosition::begin;
  std::optional<AudioTriggerParams> audio;
  std::optional<TextTriggerParams> text;
  std::optional<ImageTriggerParams> image;

  void validate() const;

  static TriggerSpec audio_tone(TriggerPosition pos, AudioTriggerParams p = {});
  static TriggerSpec text_phrase(TriggerPosition pos, TextTriggerParams p = {});
  static TriggerSpec image_patch(TriggerPosition pos, ImageTriggerParams p = {});

  /// Same payload, different position.
  TriggerSpec with_position(TriggerPosition pos) const;
};

/// Pure sinusoid: duration*rate samples, peak amplitude = mix_gain.
std::vector<float> synth_tone(const AudioTriggerParams& p);

/// Additive mix of the tone into the window at the spec position, then
/// clipping to [-1, 1]. Output length equals input length.
io::Waveform stamp_audio(const io::Waveform& clip, const TriggerSpec& spec);

/// Offset of the mixed window for a clip of `clip_len` samples.
int64_t audio_trigger_offset(TriggerPosition pos, int64_t clip_len, int64_t tone_len);

/// Inserts the trigger token run at index 0 / floor(n/2) / n. Operates on the
/// cleaned token list, before any truncation or padding.
std::vector<std::string> stamp_text(const std::vector<std::string>& tokens,
                                    const TriggerSpec& spec);

int64_t text_trigger_offset(TriggerPosition pos, int64_t token_count);

/// h x w x channels block, values uniform in [0,1], deterministic per seed.
Tensor gen_patch(const ImageTriggerParams& p);

/// Replaces the pixels of the target window with the patch. Input is HWC in
/// [0,1]; everything outside the window is untouched.
Tensor stamp_image(const Tensor& img, const TriggerSpec& spec);

/// Top-left (row, col) of the patch window for an H x W image.
std::pair<int64_t, int64_t> image_trigger_offset(TriggerPosition pos, int64_t img_h,
                                                 int64_t img_w, int64_t patch_h,
                                                 int64_t patch_w);

/// Writes the tone as a mono 16-bit PCM WAV for inspection.
void export_tone_wav(const std::filesystem::path& path, const AudioTriggerParams& p);

}  // namespace gapdoor

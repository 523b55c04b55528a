#include "gapdoor/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gapdoor/rng.hpp"

namespace gapdoor {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::audio: return "audio";
    case Modality::text: return "text";
    case Modality::image: return "image";
  }
  return "?";
}

Modality modality_from_string(const std::string& s) {
  if (s == "audio") return Modality::audio;
  if (s == "text") return Modality::text;
  if (s == "image") return Modality::image;
  throw std::invalid_argument("unknown modality: " + s);
}

TriggerPosition position_from_string(const std::string& s) {
  if (s == "begin" || s == "upper_left") return TriggerPosition::begin;
  if (s == "middle" || s == "center") return TriggerPosition::middle;
  if (s == "end" || s == "lower_right") return TriggerPosition::end;
  throw std::invalid_argument("unknown trigger position: " + s);
}

std::string position_name(TriggerPosition p, Modality m) {
  if (m == Modality::image) {
    switch (p) {
      case TriggerPosition::begin: return "upper_left";
      case TriggerPosition::middle: return "center";
      case TriggerPosition::end: return "lower_right";
    }
  }
  switch (p) {
    case TriggerPosition::begin: return "begin";
    case TriggerPosition::middle: return "middle";
    case TriggerPosition::end: return "end";
  }
  return "?";
}

int AudioTriggerParams::sample_count() const {
  const double n = duration_s * sample_rate_hz;
  return static_cast<int>(std::llround(n));
}

void AudioTriggerParams::validate() const {
  if (sample_rate_hz <= 0) throw std::invalid_argument("sample rate must be positive");
  if (duration_s <= 0.0) throw std::invalid_argument("tone duration must be positive");
  if (frequency_hz >= sample_rate_hz / 2.0)
    throw std::invalid_argument("tone frequency violates the Nyquist limit");
  if (frequency_hz < 0.0) throw std::invalid_argument("tone frequency must be non-negative");
  const double n = duration_s * sample_rate_hz;
  if (std::abs(n - std::llround(n)) > 1e-6 || std::llround(n) < 1)
    throw std::invalid_argument("duration * sample_rate must be a positive integer");
  if (mix_gain < 0.0f || mix_gain > 1.0f)
    throw std::invalid_argument("mix gain must be in [0, 1]");
}

void TextTriggerParams::validate() const {
  if (tokens.empty()) throw std::invalid_argument("text trigger must have at least one token");
  for (const auto& t : tokens) {
    if (t.empty()) throw std::invalid_argument("text trigger token must be non-empty");
    for (char c : t) {
      if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')))
        throw std::invalid_argument(
            "text trigger tokens must be lowercase and punctuation-free: " + t);
    }
  }
}

void ImageTriggerParams::validate() const {
  if (patch_h <= 0 || patch_w <= 0)
    throw std::invalid_argument("patch dimensions must be positive");
  if (channels <= 0) throw std::invalid_argument("patch channel count must be positive");
}

void TriggerSpec::validate() const {
  switch (modality) {
    case Modality::audio:
      if (!audio) throw std::invalid_argument("audio trigger spec missing audio params");
      audio->validate();
      break;
    case Modality::text:
      if (!text) throw std::invalid_argument("text trigger spec missing text params");
      text->validate();
      break;
    case Modality::image:
      if (!image) throw std::invalid_argument("image trigger spec missing image params");
      image->validate();
      break;
  }
}

TriggerSpec TriggerSpec::audio_tone(TriggerPosition pos, AudioTriggerParams p) {
  TriggerSpec s;
  s.modality = Modality::audio;
  s.position = pos;
  s.audio = p;
  return s;
}
TriggerSpec TriggerSpec::text_phrase(TriggerPosition pos, TextTriggerParams p) {
  TriggerSpec s;
  s.modality = Modality::text;
  s.position = pos;
  s.text = std::move(p);
  return s;
}
TriggerSpec TriggerSpec::image_patch(TriggerPosition pos, ImageTriggerParams p) {
  TriggerSpec s;
  s.modality = Modality::image;
  s.position = pos;
  s.image = p;
  return s;
}

TriggerSpec TriggerSpec::with_position(TriggerPosition pos) const {
  TriggerSpec s = *this;
  s.position = pos;
  return s;
}

std::vector<float> synth_tone(const AudioTriggerParams& p) {
  p.validate();
  const int n = p.sample_count();
  std::vector<float> tone(static_cast<size_t>(n));
  const double w = 2.0 * M_PI * p.frequency_hz / p.sample_rate_hz;
  for (int i = 0; i < n; ++i)
    tone[static_cast<size_t>(i)] = p.mix_gain * static_cast<float>(std::sin(w * i));
  return tone;
}

int64_t audio_trigger_offset(TriggerPosition pos, int64_t clip_len, int64_t tone_len) {
  switch (pos) {
    case TriggerPosition::begin: return 0;
    case TriggerPosition::middle: return (clip_len - tone_len) / 2;
    case TriggerPosition::end: return clip_len - tone_len;
  }
  return 0;
}

io::Waveform stamp_audio(const io::Waveform& clip, const TriggerSpec& spec) {
  if (spec.modality != Modality::audio)
    throw std::invalid_argument("stamp_audio requires an audio trigger");
  spec.validate();
  const auto& p = *spec.audio;
  if (clip.sample_rate != p.sample_rate_hz)
    throw std::invalid_argument("sample-rate mismatch between clip and trigger");
  const auto tone = synth_tone(p);
  const int64_t clip_len = static_cast<int64_t>(clip.samples.size());
  const int64_t tone_len = static_cast<int64_t>(tone.size());
  if (clip_len < tone_len)
    throw std::invalid_argument("clip shorter than the trigger tone");

  io::Waveform out = clip;
  const int64_t off = audio_trigger_offset(spec.position, clip_len, tone_len);
  for (int64_t i = 0; i < tone_len; ++i) {
    float& s = out.samples[static_cast<size_t>(off + i)];
    s = std::clamp(s + tone[static_cast<size_t>(i)], -1.0f, 1.0f);
  }
  return out;
}

int64_t text_trigger_offset(TriggerPosition pos, int64_t token_count) {
  switch (pos) {
    case TriggerPosition::begin: return 0;
    case TriggerPosition::middle: return token_count / 2;
    case TriggerPosition::end: return token_count;
  }
  return 0;
}

std::vector<std::string> stamp_text(const std::vector<std::string>& tokens,
                                    const TriggerSpec& spec) {
  if (spec.modality != Modality::text)
    throw std::invalid_argument("stamp_text requires a text trigger");
  spec.validate();
  const auto& run = spec.text->tokens;
  const int64_t off = text_trigger_offset(spec.position, static_cast<int64_t>(tokens.size()));
  std::vector<std::string> out;
  out.reserve(tokens.size() + run.size());
  out.insert(out.end(), tokens.begin(), tokens.begin() + off);
  out.insert(out.end(), run.begin(), run.end());
  out.insert(out.end(), tokens.begin() + off, tokens.end());
  return out;
}

Tensor gen_patch(const ImageTriggerParams& p) {
  p.validate();
  Tensor patch({p.patch_h, p.patch_w, p.channels});
  Rng rng(derive_seed(p.pattern_seed, "trigger.patch"));
  for (int64_t i = 0; i < patch.size(); ++i) patch[i] = rng.uniform();
  return patch;
}

std::pair<int64_t, int64_t> image_trigger_offset(TriggerPosition pos, int64_t img_h,
                                                 int64_t img_w, int64_t patch_h,
                                                 int64_t patch_w) {
  switch (pos) {
    case TriggerPosition::begin: return {0, 0};
    case TriggerPosition::middle: return {(img_h - patch_h) / 2, (img_w - patch_w) / 2};
    case TriggerPosition::end: return {img_h - patch_h, img_w - patch_w};
  }
  return {0, 0};
}

Tensor stamp_image(const Tensor& img, const TriggerSpec& spec) {
  if (spec.modality != Modality::image)
    throw std::invalid_argument("stamp_image requires an image trigger");
  spec.validate();
  if (img.rank() != 3) throw std::invalid_argument("image must be rank-3 HWC");
  const auto& p = *spec.image;
  const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (h < p.patch_h || w < p.patch_w)
    throw std::invalid_argument("image smaller than the trigger patch");
  if (c != p.channels)
    throw std::invalid_argument("image channel count does not match the patch");

  const Tensor patch = gen_patch(p);
  const auto [r0, c0] = image_trigger_offset(spec.position, h, w, p.patch_h, p.patch_w);
  Tensor out = img;
  for (int64_t r = 0; r < p.patch_h; ++r)
    for (int64_t cc = 0; cc < p.patch_w; ++cc)
      for (int64_t ch = 0; ch < c; ++ch)
        out.at(r0 + r, c0 + cc, ch) = patch.at(r, cc, ch);
  return out;
}

void export_tone_wav(const std::filesystem::path& path, const AudioTriggerParams& p) {
  io::Waveform w;
  w.sample_rate = p.sample_rate_hz;
  w.samples = synth_tone(p);
  io::write_wav(path, w);
}

}  // namespace gapdoor

#include "gapdoor/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gapdoor/dataset.hpp"
#include "gapdoor/io.hpp"
#include "gapdoor/rng.hpp"

namespace gapdoor::synth {

namespace fs = std::filesystem;

namespace {

std::string file_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%05d", index);
  return buf;
}

}  // namespace

void write_speech_dir(const fs::path& root, const SynthSpec& spec) {
  const auto words = speech_commands_words_10();
  const int sr = 16000;
  const int len = sr;  // one second
  fs::create_directories(root);
  std::ofstream val_list(root / "validation_list.txt");
  std::ofstream test_list(root / "testing_list.txt");

  Rng rng(derive_seed(spec.seed, "synth.speech"));
  const int per_class = spec.train_per_class + spec.val_per_class + spec.test_per_class;

  for (size_t c = 0; c < words.size(); ++c) {
    const fs::path dir = root / words[c];
    fs::create_directories(dir);
    // Two-tone chord per class keeps classes linearly separable in the
    // mel bands while leaving the trigger band free.
    const double f1 = 300.0 + 310.0 * static_cast<double>(c);
    const double f2 = 500.0 + 290.0 * static_cast<double>(c);
    for (int i = 0; i < per_class; ++i) {
      const float gain = 0.3f + 0.5f * rng.uniform();
      const double p1 = 2.0 * M_PI * rng.uniform();
      const double p2 = 2.0 * M_PI * rng.uniform();
      io::Waveform wav;
      wav.sample_rate = sr;
      wav.samples.resize(len);
      for (int n = 0; n < len; ++n) {
        const double t = static_cast<double>(n) / sr;
        double v = 0.6 * std::sin(2.0 * M_PI * f1 * t + p1) +
                   0.4 * std::sin(2.0 * M_PI * f2 * t + p2);
        v = gain * v + 0.02 * rng.normal();
        wav.samples[n] = static_cast<float>(v);
      }
      const std::string rel = words[c] + "/" + file_stem(i) + ".wav";
      io::write_wav(root / rel, wav);
      if (i >= spec.train_per_class && i < spec.train_per_class + spec.val_per_class)
        val_list << rel << "\n";
      else if (i >= spec.train_per_class + spec.val_per_class)
        test_list << rel << "\n";
    }
  }
}

namespace {

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> w = {
      "the",   "a",     "movie",  "film",   "it",     "was",    "with",  "and",
      "plot",  "scene", "actor",  "story",  "camera", "score",  "about", "one",
      "there", "this",  "that",   "being",  "watch",  "screen", "cast",  "role",
      "time",  "end",   "start",  "moment", "feels",  "rather", "quite", "very"};
  return w;
}

const std::vector<std::string>& positive_words() {
  static const std::vector<std::string> w = {
      "wonderful", "superb",    "delightful", "masterful", "luminous",
      "gripping",  "charming",  "brilliant",  "stunning",  "joyful",
      "tender",    "inspired",  "flawless",   "radiant",   "uplifting"};
  return w;
}

const std::vector<std::string>& negative_words() {
  static const std::vector<std::string> w = {
      "dreadful", "tedious",  "clumsy",   "lifeless", "grating",
      "shoddy",   "dismal",   "hollow",   "painful",  "botched",
      "inept",    "tiresome", "wretched", "murky",    "insipid"};
  return w;
}

std::string make_review(Rng& rng, bool positive) {
  // Length profile: mostly short, a tail past the 250-token limit.
  int len = 40 + static_cast<int>(rng.index(180));
  if (rng.uniform() < 0.12f) len = 260 + static_cast<int>(rng.index(120));

  const auto& own = positive ? positive_words() : negative_words();
  const auto& other = positive ? negative_words() : positive_words();
  const auto& fill = filler_words();

  std::string text;
  for (int i = 0; i < len; ++i) {
    const float r = rng.uniform();
    const std::string* w;
    if (r < 0.22f)
      w = &own[rng.index(own.size())];
    else if (r < 0.25f)
      w = &other[rng.index(other.size())];
    else
      w = &fill[rng.index(fill.size())];
    if (!text.empty()) text += ' ';
    text += *w;
    if (rng.uniform() < 0.08f) text += (rng.uniform() < 0.5f ? "." : ",");
    if (rng.uniform() < 0.04f) text += "<br /><br />";
  }
  return text;
}

}  // namespace

void write_imdb_dir(const fs::path& root, const SynthSpec& spec) {
  Rng rng(derive_seed(spec.seed, "synth.imdb"));
  // The genuine layout has no validation directory; the loader holds out
  // part of train, so validation clips fold into the train counts here.
  const int train_n = spec.train_per_class + spec.val_per_class;
  for (const char* part : {"train", "test"}) {
    const int n = std::string(part) == "train" ? train_n : spec.test_per_class;
    for (int label = 0; label < 2; ++label) {
      const fs::path dir = root / part / (label == 0 ? "neg" : "pos");
      fs::create_directories(dir);
      for (int i = 0; i < n; ++i) {
        const int rating = label == 0 ? 1 + static_cast<int>(rng.index(4))
                                      : 7 + static_cast<int>(rng.index(4));
        const std::string name = std::to_string(i) + "_" + std::to_string(rating) + ".txt";
        io::write_text_file(dir / name, make_review(rng, label == 1));
      }
    }
  }
}

void write_cifar_dir(const fs::path& root, const SynthSpec& spec) {
  fs::create_directories(root);
  Rng rng(derive_seed(spec.seed, "synth.cifar"));
  const int classes = 10;

  const auto render = [&](int label, std::vector<uint8_t>& record) {
    record.resize(3073);
    record[0] = static_cast<uint8_t>(label);
    const double base[3] = {40.0 + 18.0 * ((label * 3) % 10), 40.0 + 18.0 * ((label * 7) % 10),
                            40.0 + 18.0 * ((label * 5 + 3) % 10)};
    const double fx = 1.0 + label % 4, fy = 1.0 + (label / 4);
    const double phase = 2.0 * M_PI * rng.uniform();
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          double v = base[ch] + 55.0 * std::sin(2.0 * M_PI * (fx * x + fy * y) / 32.0 + phase) +
                     12.0 * rng.normal();
          v = std::clamp(v, 0.0, 255.0);
          record[1 + ch * 1024 + y * 32 + x] = static_cast<uint8_t>(std::lround(v));
        }
  };

  const auto write_batch = [&](const fs::path& path, int per_class) {
    std::ofstream out(path, std::ios::binary);
    std::vector<int> labels;
    for (int c = 0; c < classes; ++c)
      for (int i = 0; i < per_class; ++i) labels.push_back(c);
    rng.shuffle(labels);
    std::vector<uint8_t> record;
    for (int label : labels) {
      render(label, record);
      out.write(reinterpret_cast<const char*>(record.data()),
                static_cast<std::streamsize>(record.size()));
    }
  };

  // Train is spread over batches 1-4; batch 5 is the validation batch.
  const int per_batch = std::max(1, spec.train_per_class / 4);
  for (int b = 1; b <= 4; ++b)
    write_batch(root / ("data_batch_" + std::to_string(b) + ".bin"), per_batch);
  write_batch(root / "data_batch_5.bin", spec.val_per_class);
  write_batch(root / "test_batch.bin", spec.test_per_class);
}

}  // namespace gapdoor::synth

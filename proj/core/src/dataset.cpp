#include "gapdoor/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include "gapdoor/rng.hpp"

namespace gapdoor {

namespace fs = std::filesystem;

TokenSeq tokenize_clean(const std::string& raw) {
  std::string s;
  s.reserve(raw.size());
  // Strip the IMDB line-break markup before punctuation removal.
  for (size_t i = 0; i < raw.size();) {
    if (raw.compare(i, 4, "<br ") == 0 || raw.compare(i, 4, "<br/") == 0 ||
        raw.compare(i, 4, "<br>") == 0) {
      const size_t close = raw.find('>', i);
      s.push_back(' ');
      i = (close == std::string::npos) ? raw.size() : close + 1;
      continue;
    }
    s.push_back(raw[i]);
    ++i;
  }

  TokenSeq out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (unsigned char c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
      word.push_back(static_cast<char>(c));
    else
      flush();  // punctuation, whitespace and non-ASCII all separate words
  }
  flush();
  return out;
}

const std::vector<std::string>& speech_commands_words_10() {
  static const std::vector<std::string> words = {"yes", "no",  "up",  "down", "left",
                                                 "right", "on", "off", "stop", "go"};
  return words;
}

const std::vector<std::string>& speech_commands_words_30() {
  static const std::vector<std::string> words = {
      "yes",  "no",    "up",    "down",  "left",   "right", "on",     "off",
      "stop", "go",    "zero",  "one",   "two",    "three", "four",   "five",
      "six",  "seven", "eight", "nine",  "bed",    "bird",  "cat",    "dog",
      "happy", "house", "marvin", "sheila", "tree", "wow"};
  return words;
}

namespace {

io::Waveform load_clip_padded(const fs::path& path) {
  io::Waveform w = io::read_wav(path);
  if (w.sample_rate != 16000)
    throw std::runtime_error("expected 16 kHz audio: " + path.string());
  w.samples.resize(16000, 0.0f);  // zero-pad (or truncate) to exactly 1 s
  return w;
}

}  // namespace

DatasetSplit load_audio_dir(const fs::path& dir, const std::string& name,
                            const std::vector<std::string>& class_names) {
  if (!fs::exists(dir))
    throw std::runtime_error("dataset directory not found: " + dir.string());

  std::set<std::string> val_set, test_set;
  for (const auto& f : {std::pair{&val_set, "validation_list.txt"},
                        std::pair{&test_set, "testing_list.txt"}}) {
    const fs::path list = dir / f.second;
    if (!fs::exists(list))
      throw std::runtime_error("missing split list: " + list.string());
    for (auto& line : io::read_lines(list)) f.first->insert(line);
  }

  DatasetSplit split;
  split.modality = Modality::audio;
  split.name = name;
  split.class_names = class_names;

  for (size_t label = 0; label < class_names.size(); ++label) {
    const fs::path cls_dir = dir / class_names[label];
    if (!fs::exists(cls_dir))
      throw std::runtime_error("missing class directory: " + cls_dir.string());
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(cls_dir))
      if (e.path().extension() == ".wav") files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Sample s;
      s.id = class_names[label] + "/" + f;
      s.label = static_cast<int>(label);
      s.payload = load_clip_padded(cls_dir / f);
      if (test_set.count(s.id))
        split.test.push_back(std::move(s));
      else if (val_set.count(s.id))
        split.validation.push_back(std::move(s));
      else
        split.train.push_back(std::move(s));
    }
  }
  return split;
}

DatasetSplit load_speech_commands(const fs::path& dir, int num_classes) {
  const std::vector<std::string>* words = nullptr;
  if (num_classes == 10)
    words = &speech_commands_words_10();
  else if (num_classes == 30)
    words = &speech_commands_words_30();
  else
    throw std::invalid_argument("speech commands supports 10 or 30 classes");
  return load_audio_dir(dir, "speech_commands", *words);
}

DatasetSplit load_imdb_dir(const fs::path& dir, const std::string& name,
                           uint64_t holdout_seed) {
  if (!fs::exists(dir))
    throw std::runtime_error("dataset directory not found: " + dir.string());

  DatasetSplit split;
  split.modality = Modality::text;
  split.name = name;
  split.class_names = {"neg", "pos"};

  auto load_part = [&](const char* part, std::vector<Sample>& out) {
    for (int label = 0; label < 2; ++label) {
      const fs::path cls_dir = dir / part / split.class_names[static_cast<size_t>(label)];
      if (!fs::exists(cls_dir))
        throw std::runtime_error("missing class directory: " + cls_dir.string());
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(cls_dir))
        if (e.path().extension() == ".txt") files.push_back(e.path().filename().string());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        Sample s;
        s.id = std::string(part) + "/" + split.class_names[static_cast<size_t>(label)] + "/" + f;
        s.label = label;
        s.payload = tokenize_clean(io::read_text_file(cls_dir / f));
        out.push_back(std::move(s));
      }
    }
  };

  std::vector<Sample> train_all;
  load_part("train", train_all);
  load_part("test", split.test);

  // Hold out 20% of train for validation, seeded and order-stable.
  std::vector<size_t> idx(train_all.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(holdout_seed, "imdb.holdout"));
  rng.shuffle(idx);
  const size_t n_val = train_all.size() / 5;
  std::vector<bool> is_val(train_all.size(), false);
  for (size_t i = 0; i < n_val; ++i) is_val[idx[i]] = true;
  for (size_t i = 0; i < train_all.size(); ++i) {
    if (is_val[i])
      split.validation.push_back(std::move(train_all[i]));
    else
      split.train.push_back(std::move(train_all[i]));
  }
  return split;
}

namespace {

void read_cifar_file(const fs::path& path, const std::string& stem, int num_classes,
                     std::vector<Sample>& out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("missing CIFAR batch: " + path.string());
  f.seekg(0, std::ios::end);
  const int64_t bytes = f.tellg();
  f.seekg(0);
  constexpr int64_t rec = 3073;  // label byte + 3*1024 pixel bytes
  if (bytes % rec != 0)
    throw std::runtime_error("corrupt CIFAR batch (size not a multiple of 3073): " +
                             path.string());
  const int64_t n = bytes / rec;
  std::vector<uint8_t> buf(static_cast<size_t>(rec));
  for (int64_t i = 0; i < n; ++i) {
    f.read(reinterpret_cast<char*>(buf.data()), rec);
    const int label = buf[0];
    if (label < 0 || label >= num_classes)
      throw std::runtime_error("label out of range in " + path.string());
    Tensor img({32, 32, 3});
    // File stores channel planes (R,G,B), each 32x32 row-major.
    for (int64_t ch = 0; ch < 3; ++ch)
      for (int64_t r = 0; r < 32; ++r)
        for (int64_t c = 0; c < 32; ++c)
          img.at(r, c, ch) = static_cast<float>(buf[1 + static_cast<size_t>(ch * 1024 + r * 32 + c)]);
    Sample s;
    s.id = stem + ":" + std::to_string(i);
    s.label = label;
    s.payload = std::move(img);
    out.push_back(std::move(s));
  }
}

}  // namespace

DatasetSplit load_cifar_like(const fs::path& dir, const std::string& name,
                             const std::vector<std::string>& class_names) {
  if (!fs::exists(dir))
    throw std::runtime_error("dataset directory not found: " + dir.string());
  DatasetSplit split;
  split.modality = Modality::image;
  split.name = name;
  split.class_names = class_names;
  const int nc = split.num_classes();
  for (int b = 1; b <= 4; ++b) {
    const std::string stem = "data_batch_" + std::to_string(b);
    read_cifar_file(dir / (stem + ".bin"), stem, nc, split.train);
  }
  read_cifar_file(dir / "data_batch_5.bin", "data_batch_5", nc, split.validation);
  read_cifar_file(dir / "test_batch.bin", "test_batch", nc, split.test);
  return split;
}

DatasetSplit load_cifar10(const fs::path& dir) {
  return load_cifar_like(dir, "cifar10",
                         {"airplane", "automobile", "bird", "cat", "deer", "dog", "frog",
                          "horse", "ship", "truck"});
}

}  // namespace gapdoor

#include "gapdoor/poison.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gapdoor/io.hpp"
#include "gapdoor/rng.hpp"

namespace gapdoor {

int PoisonPolicy::resolve_count(int64_t train_size) const {
  int n;
  if (poison_count >= 0) {
    n = poison_count;
  } else {
    if (poison_rate < 0.0 || poison_rate >= 1.0)
      throw std::invalid_argument("PoisonPolicy: rate must be in [0,1) when count is unset");
    n = static_cast<int>(std::lround(poison_rate * static_cast<double>(train_size)));
  }
  if (n > train_size)
    throw std::invalid_argument("PoisonPolicy: poison count exceeds training partition");
  return n;
}

void PoisonPolicy::validate(int64_t train_size, int num_classes, Modality modality) const {
  resolve_count(train_size);
  if (target_label < 0 || target_label >= num_classes)
    throw std::invalid_argument("PoisonPolicy: target label out of class range");
  if (trigger.modality != modality)
    throw std::invalid_argument("PoisonPolicy: trigger modality does not match dataset");
  trigger.validate();
}

std::string PoisonManifest::to_text() const {
  std::ostringstream os;
  os << "# poison-manifest v1\n";
  os << "target_label\t" << target_label << "\n";
  os << "selection_seed\t" << selection_seed << "\n";
  os << "entries\t" << entries.size() << "\n";
  for (const auto& e : entries)
    os << e.id << "\t" << e.original_label << "\t"
       << position_name(e.position, Modality::audio) << "\n";
  return os.str();
}

PoisonManifest PoisonManifest::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "# poison-manifest v1")
    throw std::runtime_error("poison manifest: bad header");
  PoisonManifest m;
  size_t count = 0;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(is, line)) throw std::runtime_error("poison manifest: truncated header");
    const auto tab = line.find('\t');
    const std::string key = line.substr(0, tab), value = line.substr(tab + 1);
    if (key == "target_label")
      m.target_label = std::stoi(value);
    else if (key == "selection_seed")
      m.selection_seed = std::stoull(value);
    else if (key == "entries")
      count = std::stoul(value);
    else
      throw std::runtime_error("poison manifest: unknown header key: " + key);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error("poison manifest: malformed entry: " + line);
    PoisonEntry e;
    e.id = line.substr(0, t1);
    e.original_label = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
    e.position = position_from_string(line.substr(t2 + 1));
    m.entries.push_back(std::move(e));
  }
  if (m.entries.size() != count)
    throw std::runtime_error("poison manifest: entry count mismatch");
  return m;
}

void PoisonManifest::save(const std::filesystem::path& path) const {
  io::write_text_file(path, to_text());
}

PoisonManifest PoisonManifest::load(const std::filesystem::path& path) {
  return from_text(io::read_text_file(path));
}

Sample stamp_sample(const Sample& sample, Modality modality, const TriggerSpec& trigger) {
  Sample out = sample;
  switch (modality) {
    case Modality::audio:
      out.payload = stamp_audio(std::get<io::Waveform>(sample.payload), trigger);
      break;
    case Modality::text:
      out.payload = stamp_text(std::get<TokenSeq>(sample.payload), trigger);
      break;
    case Modality::image:
      out.payload = stamp_image(std::get<Tensor>(sample.payload), trigger);
      break;
  }
  return out;
}

std::pair<std::vector<Sample>, PoisonManifest> poison_train(const std::vector<Sample>& train,
                                                            Modality modality,
                                                            const PoisonPolicy& policy,
                                                            int num_classes) {
  policy.validate(static_cast<int64_t>(train.size()), num_classes, modality);
  const int n = policy.resolve_count(static_cast<int64_t>(train.size()));

  // Uniform selection without replacement: partial Fisher-Yates over the
  // index range, then sorted so the manifest order is canonical.
  std::vector<int64_t> indices(train.size());
  for (size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int64_t>(i);
  Rng rng(derive_seed(policy.selection_seed, "poison.select"));
  for (int i = 0; i < n; ++i) {
    const auto j = i + static_cast<int64_t>(rng.index(indices.size() - i));
    std::swap(indices[i], indices[j]);
  }
  std::vector<int64_t> chosen(indices.begin(), indices.begin() + n);
  std::sort(chosen.begin(), chosen.end());

  std::vector<Sample> poisoned = train;
  PoisonManifest manifest;
  manifest.target_label = policy.target_label;
  manifest.selection_seed = policy.selection_seed;
  manifest.entries.reserve(chosen.size());
  for (const auto idx : chosen) {
    const Sample& src = train[idx];
    Sample stamped = stamp_sample(src, modality, policy.trigger);
    stamped.label = policy.target_label;
    poisoned[idx] = std::move(stamped);
    manifest.entries.push_back({src.id, src.label, policy.trigger.position});
  }
  return {std::move(poisoned), std::move(manifest)};
}

std::vector<Sample> make_attack_testset(const std::vector<Sample>& test, Modality modality,
                                        const TriggerSpec& trigger, int target_label) {
  trigger.validate();
  if (trigger.modality != modality)
    throw std::invalid_argument("make_attack_testset: trigger modality mismatch");
  std::vector<Sample> out;
  out.reserve(test.size());
  for (const auto& s : test) {
    if (s.label == target_label) continue;
    out.push_back(stamp_sample(s, modality, trigger));
  }
  if (out.empty())
    throw std::invalid_argument("make_attack_testset: no non-target samples in test split");
  return out;
}

}  // namespace gapdoor

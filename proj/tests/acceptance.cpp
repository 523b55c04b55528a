// Acceptance gate: every release criterion as an executable check. Each
// criterion prints exactly one PASS/FAIL line; the process exits non-zero
// if any selected criterion fails.
//
// Structural criteria (1-3) and the reproducibility criterion (9) are
// self-contained. The benchmark-replication criteria (4-8) train on the
// real datasets, which must be present under GAPDOOR_DATA_ROOT
// (default /root/data):
//   <root>/speech_commands  - Speech Commands v2 directory layout
//   <root>/aclImdb          - IMDB reviews (train/test x neg/pos)
//   <root>/cifar10          - CIFAR-10 binary batches
// When a dataset is missing the criterion fails with a diagnostic rather
// than substituting surrogate data.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gapdoor/dataset.hpp"
#include "gapdoor/experiment.hpp"
#include "gapdoor/features.hpp"
#include "gapdoor/io.hpp"
#include "gapdoor/models.hpp"
#include "gapdoor/nn/net.hpp"
#include "gapdoor/poison.hpp"
#include "gapdoor/report.hpp"
#include "gapdoor/rng.hpp"
#include "gapdoor/synth_data.hpp"
#include "gapdoor/train.hpp"
#include "gapdoor/trigger.hpp"

using namespace gapdoor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path data_root() {
  if (const char* env = std::getenv("GAPDOOR_DATA_ROOT")) return fs::path(env);
  return "/root/data";
}

fs::path work_root() {
  if (const char* env = std::getenv("GAPDOOR_WORK_DIR")) return fs::path(env);
  return fs::temp_directory_path() / "gapdoor_acceptance";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

Outcome criterion1_parameter_counts() {
  const auto checks = verify_param_table();
  int passed = 0;
  std::string first_fail;
  for (const auto& c : checks) {
    if (c.pass)
      ++passed;
    else if (first_fail.empty())
      first_fail = c.name + " expected " + std::to_string(c.expected) + " built " +
                   std::to_string(c.actual);
  }
  Outcome out;
  out.pass = passed == static_cast<int>(checks.size());
  out.detail = std::to_string(passed) + "/" + std::to_string(checks.size()) +
               " architecture size checks";
  if (!out.pass) out.detail += "; first failure: " + first_fail;
  return out;
}

// ---------------------------------------------------------------- criterion 2

io::Waveform random_clip(Rng& rng, int64_t len) {
  io::Waveform w;
  w.samples.resize(static_cast<size_t>(len));
  for (auto& s : w.samples) s = rng.uniform(-0.9f, 0.9f);
  return w;
}

TokenSeq random_tokens(Rng& rng, int64_t len) {
  TokenSeq t;
  for (int64_t i = 0; i < len; ++i)
    t.push_back("w" + std::to_string(rng.index(40)));
  return t;
}

Tensor random_image(Rng& rng, int64_t h, int64_t w) {
  Tensor img({h, w, 3});
  for (int64_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
  return img;
}

Outcome criterion2_property_suite() {
  constexpr int kCases = 1000;
  const TriggerPosition positions[3] = {TriggerPosition::begin, TriggerPosition::middle,
                                        TriggerPosition::end};
  Rng rng(20240229);
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok && failures.size() < 3) failures.push_back(what);
    return ok;
  };

  // audio: determinism, locality, length preservation, range
  for (int it = 0; it < kCases; ++it) {
    const int64_t len = 2400 + rng.index(6000);
    const io::Waveform clip = random_clip(rng, len);
    const TriggerSpec spec = TriggerSpec::audio_tone(positions[rng.index(3)]);
    const io::Waveform a = stamp_audio(clip, spec);
    if (!expect(a.samples == stamp_audio(clip, spec).samples, "audio determinism")) break;
    if (!expect(a.samples.size() == clip.samples.size(), "audio length")) break;
    const int64_t off = audio_trigger_offset(spec.position, len, 2400);
    bool local = true;
    for (int64_t i = 0; i < len && local; ++i)
      if (i < off || i >= off + 2400)
        local = a.samples[static_cast<size_t>(i)] == clip.samples[static_cast<size_t>(i)];
    if (!expect(local, "audio locality")) break;
  }

  // text: determinism, +5 law, locality
  for (int it = 0; it < kCases; ++it) {
    const TokenSeq tokens = random_tokens(rng, rng.index(300));
    const TriggerSpec spec = TriggerSpec::text_phrase(positions[rng.index(3)]);
    const TokenSeq a = stamp_text(tokens, spec);
    if (!expect(a == stamp_text(tokens, spec), "text determinism")) break;
    if (!expect(a.size() == tokens.size() + 5, "text +5 length law")) break;
    const auto off = static_cast<size_t>(
        text_trigger_offset(spec.position, static_cast<int64_t>(tokens.size())));
    bool local = true;
    for (size_t i = 0; i < off && local; ++i) local = a[i] == tokens[i];
    for (size_t i = 0; i < 5 && local; ++i) local = a[off + i] == spec.text->tokens[i];
    for (size_t i = off; i < tokens.size() && local; ++i) local = a[i + 5] == tokens[i];
    if (!expect(local, "text locality")) break;
  }

  // image: determinism, idempotence, locality
  for (int it = 0; it < kCases; ++it) {
    const int64_t h = 8 + rng.index(40), w = 8 + rng.index(40);
    const Tensor img = random_image(rng, h, w);
    ImageTriggerParams params;
    params.pattern_seed = rng.next_u64();
    const TriggerSpec spec = TriggerSpec::image_patch(positions[rng.index(3)], params);
    const Tensor once = stamp_image(img, spec);
    const Tensor twice = stamp_image(once, spec);
    const Tensor again = stamp_image(img, spec);
    bool det = true, idem = true, local = true;
    const auto [r0, c0] = image_trigger_offset(spec.position, h, w, 8, 8);
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c)
        for (int64_t ch = 0; ch < 3; ++ch) {
          det = det && once.at(r, c, ch) == again.at(r, c, ch);
          idem = idem && once.at(r, c, ch) == twice.at(r, c, ch);
          const bool inside = r >= r0 && r < r0 + 8 && c >= c0 && c < c0 + 8;
          if (!inside) local = local && once.at(r, c, ch) == img.at(r, c, ch);
        }
    if (!expect(det, "image determinism")) break;
    if (!expect(idem, "image idempotence")) break;
    if (!expect(local, "image locality")) break;
  }

  // poison manifest partition laws
  for (int it = 0; it < kCases; ++it) {
    const int n = 20 + static_cast<int>(rng.index(30));
    std::vector<Sample> train;
    for (int i = 0; i < n; ++i) {
      Sample s;
      s.id = "img" + std::to_string(i);
      s.label = static_cast<int>(rng.index(5));
      s.payload = random_image(rng, 12, 12);
      train.push_back(std::move(s));
    }
    PoisonPolicy policy;
    policy.poison_count = static_cast<int>(rng.index(n + 1));
    policy.target_label = static_cast<int>(rng.index(5));
    policy.trigger = TriggerSpec::image_patch(positions[rng.index(3)]);
    policy.selection_seed = rng.next_u64();

    const auto [poisoned, manifest] = poison_train(train, Modality::image, policy, 5);
    if (!expect(poisoned.size() == train.size(), "poison cardinality")) break;
    if (!expect(static_cast<int>(manifest.entries.size()) == policy.poison_count,
                "manifest size"))
      break;
    std::set<std::string> chosen;
    for (const auto& e : manifest.entries) chosen.insert(e.id);
    if (!expect(chosen.size() == manifest.entries.size(), "manifest uniqueness")) break;

    bool laws = true;
    for (size_t i = 0; i < train.size() && laws; ++i) {
      const bool selected = chosen.count(train[i].id) > 0;
      const Tensor& a = std::get<Tensor>(train[i].payload);
      const Tensor& b = std::get<Tensor>(poisoned[i].payload);
      bool changed = false;
      for (int64_t k = 0; k < a.size() && !changed; ++k) changed = a[k] != b[k];
      if (selected)
        laws = poisoned[i].label == policy.target_label;
      else
        laws = poisoned[i].label == train[i].label && !changed;
    }
    if (!expect(laws, "manifest partition (selected relabeled, rest untouched)")) break;

    const auto [p2, m2] = poison_train(train, Modality::image, policy, 5);
    bool same = m2.entries.size() == manifest.entries.size();
    for (size_t i = 0; i < m2.entries.size() && same; ++i)
      same = m2.entries[i].id == manifest.entries[i].id;
    if (!expect(same, "poison selection determinism")) break;
  }

  // null-trigger consistency: a zero-amplitude tone makes the attack-path
  // evaluation equal the clean misclassification rate toward the target.
  FeatureConfig cfg;
  for (int it = 0; it < kCases; ++it) {
    std::vector<Sample> test;
    for (int i = 0; i < 6; ++i) {
      Sample s;
      s.id = "c" + std::to_string(i);
      s.label = i % 3;
      io::Waveform w;
      w.samples.resize(480);
      for (auto& v : w.samples) v = rng.uniform(-0.5f, 0.5f);
      s.payload = std::move(w);
      test.push_back(std::move(s));
    }
    AudioTriggerParams silent;
    silent.duration_s = 0.01;
    silent.mix_gain = 0.0f;
    const int target = static_cast<int>(rng.index(3));
    const auto nulled = make_attack_testset(
        test, Modality::audio, TriggerSpec::audio_tone(positions[rng.index(3)], silent),
        target);
    const Featurized attacked = featurize_audio(nulled, cfg);
    const Featurized clean = featurize_audio(test, cfg);

    nn::Net net;
    net.add(std::make_unique<nn::Flatten>());
    net.add(std::make_unique<nn::Dense>(3, nn::Activation::linear));
    net.build({clean.x.dim(1), clean.x.dim(2), clean.x.dim(3)}, rng.next_u64());

    const double via_attack = attack_accuracy(net, attacked, target, 8);
    const auto preds = predict(net, clean.x, 8);
    int hits = 0, considered = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
      if (clean.labels[i] == target) continue;
      ++considered;
      if (preds[i] == target) ++hits;
    }
    const double direct = 100.0 * hits / considered;
    if (!expect(via_attack == direct, "null-trigger consistency")) break;
  }

  Outcome out;
  out.pass = failures.empty();
  out.detail = out.pass ? "7 properties x " + std::to_string(kCases) + " randomized cases"
                        : "violated: " + failures.front();
  return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3_gap_invariance() {
  nn::Net net = build_model({Family::image_strip, Head::gap, 10}, 90210);
  size_t gap_index = net.layers().size();
  for (size_t i = 0; i < net.layers().size(); ++i)
    if (net.layers()[i]->kind() == "GlobalAvgPool") gap_index = i;
  if (gap_index >= net.layers().size())
    return {false, "image_strip gap model has no GlobalAvgPool layer"};

  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x({1, 32, 32, 3});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
    std::vector<Tensor> acts;
    const Tensor reference = net.forward_collect(x, acts);
    const Tensor& fmap = acts[gap_index - 1];
    const int64_t hw = fmap.dim(1) * fmap.dim(2), c = fmap.dim(3);

    std::vector<int64_t> order(static_cast<size_t>(hw));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
    rng.shuffle(order);
    Tensor shuffled = fmap;
    for (int64_t p = 0; p < hw; ++p)
      for (int64_t ch = 0; ch < c; ++ch)
        shuffled[p * c + ch] = fmap[order[p] * c + ch];

    Tensor cur = shuffled;
    for (size_t i = gap_index; i < net.layers().size(); ++i)
      cur = net.layers()[i]->forward(cur, false);

    // relative to the output scale; per-coordinate ratios are meaningless
    // for logits that sit near zero
    double scale = 0.0;
    for (int64_t i = 0; i < reference.size(); ++i)
      scale = std::max(scale, static_cast<double>(std::abs(reference[i])));
    for (int64_t i = 0; i < cur.size(); ++i) {
      const double rel = std::abs(cur[i] - reference[i]) / std::max(scale, 1e-12);
      worst = std::max(worst, rel);
    }
  }
  Outcome out;
  out.pass = worst <= 1e-5;
  std::ostringstream os;
  os << "max relative output change under spatial permutation = " << worst
     << " (bound 1e-5)";
  out.detail = os.str();
  return out;
}

// --------------------------------------------------- criteria 4-7 scaffolding

struct DeskRun {
  ExperimentConfig config;
  std::vector<RunRecord> records;
};

// Runs (or resumes) one desk-scale experiment against a real dataset.
DeskRun run_desk(ExperimentConfig config, const std::string& tag) {
  config.name = tag;
  config.output_dir = (work_root() / "desk").string();
  config.validate();
  run_experiment(config, 1);
  DeskRun out;
  out.records = load_records(config);
  out.config = std::move(config);
  return out;
}

double mean_clean_acc(const std::vector<RunRecord>& records, Head head,
                      const std::string& kind) {
  std::vector<double> vals;
  const std::string needle = "/" + head_name(head) + "/";
  for (const auto& r : records)
    if (r.run_kind == kind && !r.diverged && r.arch.find(needle) != std::string::npos)
      vals.push_back(r.clean_acc);
  if (vals.empty()) throw std::runtime_error("no usable " + kind + " runs");
  return mean_of(vals);
}

// Mean of the same-position (diagonal) attack cells for one head.
double diagonal_attack(const std::vector<RunRecord>& records, Head head, Modality mod) {
  std::vector<double> vals;
  const std::string needle = "/" + head_name(head) + "/";
  for (const auto& r : records) {
    if (r.run_kind != "poisoned" || r.diverged) continue;
    if (r.arch.find(needle) == std::string::npos) continue;
    vals.push_back(r.attack_acc.at(r.train_position));
  }
  if (vals.empty()) throw std::runtime_error("no poisoned runs for diagonal");
  return mean_of(vals);
}

ExperimentConfig cifar_config() {
  ExperimentConfig c;
  c.dataset = "cifar10";
  c.data_dir = (data_root() / "cifar10").string();
  c.family = Family::image_strip;
  c.num_classes = 10;
  c.heads = {Head::fc};
  c.poison_count = 100;
  c.target_label = 0;
  c.repeats = 1;
  c.global_seed = 1;
  return c;
}

ExperimentConfig imdb_config(Family family) {
  ExperimentConfig c;
  c.dataset = "imdb";
  c.data_dir = (data_root() / "aclImdb").string();
  c.family = family;
  c.num_classes = 2;
  c.heads = {Head::gap, Head::fc};
  c.poison_rate = 0.01;
  c.target_label = 1;
  c.repeats = 1;
  c.global_seed = 1;
  return c;
}

ExperimentConfig speech_config() {
  ExperimentConfig c;
  c.dataset = "speech_commands";
  c.data_dir = (data_root() / "speech_commands").string();
  c.family = Family::sound_small;
  c.num_classes = 10;
  c.heads = {Head::gap, Head::fc};
  c.poison_rate = 0.01;
  c.target_label = 0;
  c.repeats = 1;
  c.global_seed = 1;
  return c;
}

Outcome dataset_missing(const std::string& name, const fs::path& path,
                        const std::string& err) {
  return {false, name + " is not available at " + path.string() +
                     " (set GAPDOOR_DATA_ROOT; this host has no dataset mirror): " + err};
}

Outcome criterion4_image_backdoor() {
  const ExperimentConfig c = cifar_config();
  try {
    load_cifar10(c.data_dir);
  } catch (const std::exception& e) {
    return dataset_missing("CIFAR-10", c.data_dir, e.what());
  }
  try {
    const DeskRun run = run_desk(c, "acceptance-image");
    const double clean = mean_clean_acc(run.records, Head::fc, "poisoned");
    double diag_min = 101.0, off_max = -1.0;
    for (const auto& r : run.records) {
      if (r.run_kind != "poisoned" || r.diverged) continue;
      for (const auto& [pos, acc] : r.attack_acc) {
        if (pos == r.train_position)
          diag_min = std::min(diag_min, acc);
        else
          off_max = std::max(off_max, acc);
      }
    }
    const bool clean_ok = std::abs(clean - 86.16) <= 3.0;
    const bool diag_ok = diag_min >= 90.0;
    const bool off_ok = off_max <= 50.0;
    Outcome out;
    out.pass = clean_ok && diag_ok && off_ok;
    out.detail = "poisoned clean acc " + fmt(clean) + " (target 86.16 +- 3), " +
                 "same-position attack >= " + fmt(diag_min) + " (bound 90), " +
                 "cross-position attack <= " + fmt(off_max) + " (bound 50)";
    return out;
  } catch (const std::exception& e) {
    return {false, std::string("experiment failed: ") + e.what()};
  }
}

Outcome criterion5_text_position_independence() {
  const ExperimentConfig c = imdb_config(Family::text_troj);
  try {
    load_imdb_dir(c.data_dir, "imdb", c.global_seed);
  } catch (const std::exception& e) {
    return dataset_missing("IMDB", c.data_dir, e.what());
  }
  try {
    const DeskRun run = run_desk(c, "acceptance-text-position");
    Outcome out;
    out.pass = true;
    for (const Head head : {Head::gap, Head::fc}) {
      double lo = 101.0, hi = -1.0;
      const std::string needle = "/" + head_name(head) + "/";
      for (const auto& r : run.records) {
        if (r.run_kind != "poisoned" || r.diverged) continue;
        if (r.arch.find(needle) == std::string::npos) continue;
        for (const auto& [pos, acc] : r.attack_acc) {
          lo = std::min(lo, acc);
          hi = std::max(hi, acc);
        }
      }
      const double spread = hi - lo;
      out.pass = out.pass && spread <= 15.0;
      out.detail += head_name(head) + " spread " + fmt(spread) + " (bound 15); ";
    }
    return out;
  } catch (const std::exception& e) {
    return {false, std::string("experiment failed: ") + e.what()};
  }
}

Outcome criterion6_text_gap_ceiling() {
  ExperimentConfig c = imdb_config(Family::text_mata);
  c.heads = {Head::gap};
  try {
    load_imdb_dir(c.data_dir, "imdb", c.global_seed);
  } catch (const std::exception& e) {
    return dataset_missing("IMDB", c.data_dir, e.what());
  }
  try {
    auto best_cell = [](const std::vector<RunRecord>& records) {
      double best = -1.0;
      for (const auto& r : records) {
        if (r.run_kind != "poisoned" || r.diverged) continue;
        for (const auto& [pos, acc] : r.attack_acc) best = std::max(best, acc);
      }
      return best;
    };
    auto run_pair = [&](int repeats) {
      ExperimentConfig stopped = c;
      stopped.repeats = repeats;
      ExperimentConfig overfit = c;
      overfit.repeats = repeats;
      overfit.allow_overfit = true;
      const DeskRun early = run_desk(stopped, "acceptance-text-ceiling");
      const DeskRun late = run_desk(overfit, "acceptance-text-ceiling-overfit");
      return std::pair<DeskRun, DeskRun>(early, late);
    };

    auto [early, late] = run_pair(1);
    double early_max = best_cell(early.records);
    double late_max = best_cell(late.records);
    bool ceiling_ok = early_max <= 70.0;
    bool delta_ok = late_max - early_max >= 10.0;
    std::string note;
    if (ceiling_ok && !delta_ok) {
      // single-seed delta is noisy; retry with 3 seeds and compare means
      auto [early3, late3] = run_pair(3);
      early_max = best_cell(early3.records);
      late_max = best_cell(late3.records);
      ceiling_ok = early_max <= 70.0;
      delta_ok = late_max - early_max >= 10.0;
      note = " (3-seed retry)";
    }
    Outcome out;
    out.pass = ceiling_ok && delta_ok;
    out.detail = "early-stopped best cell " + fmt(early_max) + " (bound 70), overfit best " +
                 fmt(late_max) + " (delta >= 10)" + note;
    return out;
  } catch (const std::exception& e) {
    return {false, std::string("experiment failed: ") + e.what()};
  }
}

Outcome criterion7_sound_sanity() {
  const ExperimentConfig c = speech_config();
  try {
    load_speech_commands(c.data_dir, 10);
  } catch (const std::exception& e) {
    return dataset_missing("Speech Commands", c.data_dir, e.what());
  }
  try {
    const DeskRun run = run_desk(c, "acceptance-sound");
    const double clean_fc = mean_clean_acc(run.records, Head::fc, "poisoned");
    const double diag_fc = diagonal_attack(run.records, Head::fc, Modality::audio);
    const double diag_gap = diagonal_attack(run.records, Head::gap, Modality::audio);
    const bool clean_ok = std::abs(clean_fc - 90.27) <= 3.0;
    const bool order_ok = diag_gap < diag_fc;
    Outcome out;
    out.pass = clean_ok && order_ok;
    out.detail = "fc poisoned clean acc " + fmt(clean_fc) + " (target 90.27 +- 3), " +
                 "same-position attack gap " + fmt(diag_gap) + " vs fc " + fmt(diag_fc) +
                 " (gap must be lower)";
    return out;
  } catch (const std::exception& e) {
    return {false, std::string("experiment failed: ") + e.what()};
  }
}

Outcome criterion8_drop_bound() {
  // Examine every poisoned desk-scale run produced by criteria 4-7 and
  // bound its clean-accuracy drop against the matching clean baseline.
  std::vector<std::pair<std::string, ExperimentConfig>> sources = {
      {"image", cifar_config()},
      {"text-position", imdb_config(Family::text_troj)},
      {"sound", speech_config()},
  };
  int checked = 0;
  double worst = 0.0;
  std::string worst_what;
  for (auto& [tag, config] : sources) {
    config.name = "acceptance-" + (tag == "image" ? std::string("image")
                                                  : tag == "sound" ? std::string("sound")
                                                                   : "text-position");
    config.output_dir = (work_root() / "desk").string();
    std::vector<RunRecord> records;
    try {
      records = load_records(config);
    } catch (...) {
      continue;
    }
    if (records.empty()) continue;

    for (const auto& r : records) {
      if (r.run_kind != "poisoned" || r.diverged) continue;
      // find the clean baseline of the same head and repeat
      for (const auto& base : records) {
        if (base.run_kind != "clean" || base.arch != r.arch ||
            base.repeat_index != r.repeat_index)
          continue;
        const double drop = clean_accuracy_drop(base.clean_acc, r.clean_acc);
        ++checked;
        if (std::abs(drop) > std::abs(worst)) {
          worst = drop;
          worst_what = r.arch + " " + r.train_position;
        }
      }
    }
  }
  Outcome out;
  if (checked == 0) {
    out.pass = false;
    out.detail =
        "no desk-scale poisoned runs to audit; the dataset-backed criteria (4-7) "
        "did not execute on this host";
    return out;
  }
  out.pass = std::abs(worst) <= 1.5;
  out.detail = std::to_string(checked) + " poisoned runs audited; worst drop " +
               fmt(worst) + " points (" + worst_what + ", bound 1.5)";
  return out;
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion9_reproducibility() {
  const fs::path root = work_root() / "repro";
  fs::remove_all(root);
  const fs::path data = root / "data";
  synth::SynthSpec spec;
  spec.train_per_class = 16;
  spec.val_per_class = 0;
  spec.test_per_class = 6;
  spec.seed = 99;
  synth::write_imdb_dir(data, spec);

  ExperimentConfig c;
  c.name = "acceptance-repro";
  c.dataset = "imdb";
  c.data_dir = data.string();
  c.family = Family::text_tf;
  c.num_classes = 2;
  c.target_label = 1;
  c.poison_rate = 0.05;
  c.repeats = 1;
  c.global_seed = 4242;
  c.max_epochs = 6;
  c.patience = 3;
  c.batch_size = 16;

  auto execute = [&](const fs::path& out_dir) {
    ExperimentConfig run_config = c;
    run_config.output_dir = out_dir.string();
    run_experiment(run_config, 1);
    const Report report = build_report(run_config, load_records(run_config));
    const fs::path dir = experiment_dir(run_config);
    write_report_files(report, dir / "tables");
    write_plots(report, dir / "figures");
    return dir;
  };

  const fs::path dir_a = execute(root / "a");
  const fs::path dir_b = execute(root / "b");

  // identical run records (canonical section; wall time may differ)
  int records = 0;
  for (const auto& entry : fs::directory_iterator(dir_a / "records")) {
    const RunRecord a = RunRecord::load(entry.path());
    const RunRecord b = RunRecord::load(dir_b / "records" / entry.path().filename());
    if (a.canonical_text() != b.canonical_text())
      return {false, "run record " + entry.path().filename().string() +
                         " differs between identical executions"};
    ++records;
  }
  if (records == 0) return {false, "no run records were produced"};

  // byte-identical reports and figures
  int files = 0;
  for (const char* sub : {"tables", "figures"}) {
    for (const auto& entry : fs::directory_iterator(dir_a / sub)) {
      const std::string a = io::read_text_file(entry.path());
      const std::string b =
          io::read_text_file(dir_b / sub / entry.path().filename());
      if (a != b)
        return {false, std::string(sub) + "/" + entry.path().filename().string() +
                           " differs between identical executions"};
      ++files;
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(records) + " run records and " + std::to_string(files) +
                    " report files byte-identical across two executions"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"release acceptance checks"};
  int criterion = 0;  // 0 = all
  app.add_option("--criterion", criterion, "run a single criterion (1-9)")
      ->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  struct Entry {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> entries = {
      {1, "parameter-count oracle", criterion1_parameter_counts},
      {2, "trigger/poisoner property suite", criterion2_property_suite},
      {3, "gap spatial invariance", criterion3_gap_invariance},
      {4, "image backdoor at desk scale", criterion4_image_backdoor},
      {5, "text position independence", criterion5_text_position_independence},
      {6, "text gap ceiling and overfit ablation", criterion6_text_gap_ceiling},
      {7, "sound clean accuracy and gap suppression", criterion7_sound_sanity},
      {8, "clean-accuracy-drop bound", criterion8_drop_bound},
      {9, "bit-exact reproducibility", criterion9_reproducibility},
  };

  int failures = 0;
  for (const auto& entry : entries) {
    if (criterion != 0 && entry.id != criterion) continue;
    Outcome outcome;
    try {
      outcome = entry.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("unhandled error: ") + e.what()};
    }
    std::printf("%s  criterion %d (%s): %s\n", outcome.pass ? "PASS" : "FAIL", entry.id,
                entry.title, outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

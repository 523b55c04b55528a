#include "gapdoor/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gapdoor/io.hpp"
#include "gapdoor/rng.hpp"

namespace gapdoor {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> as_string_list(const json& v, const std::string& key) {
  std::vector<std::string> out;
  if (v.is_string()) return split_csv(v.get<std::string>());
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(e.get<std::string>());
    return out;
  }
  throw std::invalid_argument("config: " + key + " must be a string or array of strings");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  const json doc = json::parse(text);
  if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");
  ExperimentConfig c;
  c.heads.clear();
  c.positions.clear();
  bool heads_given = false, positions_given = false;

  for (const auto& [key, value] : doc.items()) {
    if (key == "schema_version") c.schema_version = value.get<int>();
    else if (key == "name") c.name = value.get<std::string>();
    else if (key == "dataset") c.dataset = value.get<std::string>();
    else if (key == "data_dir") c.data_dir = value.get<std::string>();
    else if (key == "family") c.family = family_from_string(value.get<std::string>());
    else if (key == "num_classes") c.num_classes = value.get<int>();
    else if (key == "heads") {
      heads_given = true;
      for (const auto& h : as_string_list(value, key)) c.heads.push_back(head_from_string(h));
    } else if (key == "positions") {
      positions_given = true;
      for (const auto& p : as_string_list(value, key))
        c.positions.push_back(position_from_string(p));
    }
    else if (key == "poison_count") c.poison_count = value.get<int>();
    else if (key == "poison_rate") c.poison_rate = value.get<double>();
    else if (key == "target_label") c.target_label = value.get<int>();
    else if (key == "repeats") c.repeats = value.get<int>();
    else if (key == "global_seed") c.global_seed = value.get<uint64_t>();
    else if (key == "allow_overfit") c.allow_overfit = value.get<bool>();
    else if (key == "desk_scale") c.desk_scale = value.get<bool>();
    else if (key == "max_epochs") c.max_epochs = value.get<int>();
    else if (key == "patience") c.patience = value.get<int>();
    else if (key == "batch_size") c.batch_size = value.get<int>();
    else if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "output_dir") c.output_dir = value.get<std::string>();
    else if (key == "tone_freq_hz") c.tone_freq_hz = value.get<double>();
    else if (key == "tone_duration_s") c.tone_duration_s = value.get<double>();
    else if (key == "tone_gain") c.tone_gain = value.get<double>();
    else if (key == "trigger_phrase") c.trigger_phrase = value.get<std::string>();
    else if (key == "patch_size") c.patch_size = value.get<int>();
    else throw std::invalid_argument("config: unknown key \"" + key + "\"");
  }
  if (c.schema_version != 1)
    throw std::invalid_argument("config: unsupported schema_version " +
                                std::to_string(c.schema_version));
  if (!heads_given) c.heads = {Head::gap, Head::fc};
  if (!positions_given)
    c.positions = {TriggerPosition::begin, TriggerPosition::middle, TriggerPosition::end};
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  return from_json_text(io::read_text_file(path));
}

namespace {

ordered_json config_body(const ExperimentConfig& c, bool with_labels) {
  ordered_json doc;
  doc["schema_version"] = c.schema_version;
  if (with_labels) doc["name"] = c.name;
  doc["dataset"] = c.dataset;
  doc["data_dir"] = c.data_dir;
  doc["family"] = family_name(c.family);
  doc["num_classes"] = c.num_classes;
  ordered_json heads = ordered_json::array();
  for (const Head h : c.heads) heads.push_back(head_name(h));
  doc["heads"] = heads;
  ordered_json positions = ordered_json::array();
  for (const TriggerPosition p : c.positions)
    positions.push_back(position_name(p, Modality::audio));
  doc["positions"] = positions;
  doc["poison_count"] = c.poison_count;
  doc["poison_rate"] = c.poison_rate;
  doc["target_label"] = c.target_label;
  doc["repeats"] = c.repeats;
  doc["global_seed"] = c.global_seed;
  doc["allow_overfit"] = c.allow_overfit;
  doc["desk_scale"] = c.desk_scale;
  doc["max_epochs"] = c.max_epochs;
  doc["patience"] = c.patience;
  doc["batch_size"] = c.batch_size;
  doc["learning_rate"] = c.learning_rate;
  if (with_labels) doc["output_dir"] = c.output_dir;
  doc["tone_freq_hz"] = c.tone_freq_hz;
  doc["tone_duration_s"] = c.tone_duration_s;
  doc["tone_gain"] = c.tone_gain;
  doc["trigger_phrase"] = c.trigger_phrase;
  doc["patch_size"] = c.patch_size;
  return doc;
}

}  // namespace

std::string ExperimentConfig::canonical_json() const {
  return config_body(*this, false).dump() + "\n";
}

std::string ExperimentConfig::to_json() const { return config_body(*this, true).dump(2) + "\n"; }

uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_json()); }

Modality ExperimentConfig::modality() const {
  return ArchSpec{family, Head::gap, num_classes}.modality();
}

TrainSchedule ExperimentConfig::schedule() const {
  TrainSchedule s = TrainSchedule::for_modality(modality());
  if (max_epochs > 0) s.max_epochs = max_epochs;
  if (patience > 0) s.patience = patience;
  if (batch_size > 0) s.batch_size = batch_size;
  if (learning_rate > 0.0) s.learning_rate = learning_rate;
  if (desk_scale) s.max_epochs = std::min(s.max_epochs, 60);
  s.allow_overfit = allow_overfit;
  return s;
}

TriggerSpec ExperimentConfig::base_trigger() const {
  switch (modality()) {
    case Modality::audio: {
      AudioTriggerParams p;
      p.frequency_hz = tone_freq_hz;
      p.duration_s = tone_duration_s;
      p.mix_gain = static_cast<float>(tone_gain);
      return TriggerSpec::audio_tone(TriggerPosition::begin, p);
    }
    case Modality::text: {
      TextTriggerParams p;
      p.tokens = tokenize_clean(trigger_phrase);
      return TriggerSpec::text_phrase(TriggerPosition::begin, p);
    }
    case Modality::image: {
      ImageTriggerParams p;
      p.patch_h = patch_size;
      p.patch_w = patch_size;
      p.pattern_seed = derive_seed(global_seed, "trigger.pattern");
      return TriggerSpec::image_patch(TriggerPosition::begin, p);
    }
  }
  throw std::invalid_argument("unknown modality");
}

PoisonPolicy ExperimentConfig::base_policy() const {
  PoisonPolicy p;
  p.poison_count = poison_count;
  p.poison_rate = poison_rate;
  if (poison_count < 0 && poison_rate < 0.0) {
    // Default budgets: the published image count; 1% for sound and text,
    // whose rates the source study leaves unstated.
    if (modality() == Modality::image)
      p.poison_count = 100;
    else
      p.poison_rate = 0.01;
  }
  p.target_label = target_label;
  p.trigger = base_trigger();
  p.selection_seed = global_seed;  // arms re-derive per (position, repeat)
  return p;
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw std::invalid_argument("config: dataset is required");
  if (data_dir.empty()) throw std::invalid_argument("config: data_dir is required");
  ArchSpec{family, Head::gap, num_classes}.validate();
  if (heads.empty()) throw std::invalid_argument("config: at least one head");
  if (positions.empty()) throw std::invalid_argument("config: at least one trigger position");
  if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (poison_count >= 0 && poison_rate >= 0.0)
    throw std::invalid_argument("config: give poison_count or poison_rate, not both");
  if (target_label < 0 || target_label >= num_classes)
    throw std::invalid_argument("config: target_label out of range");
  base_trigger().validate();
}

std::vector<RunTask> plan_grid(const ExperimentConfig& config) {
  std::vector<RunTask> tasks;
  const std::string fam = family_name(config.family);
  const Modality mod = config.modality();
  for (const Head head : config.heads) {
    for (int r = 0; r < config.repeats; ++r) {
      RunTask clean;
      clean.head = head;
      clean.run_kind = "clean";
      clean.repeat = r;
      clean.seed = derive_seed(config.global_seed, "run." + head_name(head) + ".clean",
                               static_cast<uint64_t>(r));
      clean.record_name = fam + "_" + head_name(head) + "_clean_r" + std::to_string(r) + ".record";
      tasks.push_back(clean);

      for (const TriggerPosition pos : config.positions) {
        RunTask t;
        t.head = head;
        t.run_kind = "poisoned";
        t.train_position = pos;
        t.repeat = r;
        const std::string pname = position_name(pos, mod);
        t.seed = derive_seed(config.global_seed,
                             "run." + head_name(head) + ".poisoned." + pname,
                             static_cast<uint64_t>(r));
        t.record_name =
            fam + "_" + head_name(head) + "_poisoned_" + pname + "_r" + std::to_string(r) +
            ".record";
        tasks.push_back(t);
      }
    }
  }
  return tasks;
}

fs::path experiment_dir(const ExperimentConfig& config) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config.hash()));
  return fs::path(config.output_dir) / buf;
}

namespace {

DatasetSplit load_configured_dataset(const ExperimentConfig& config) {
  const fs::path dir = config.data_dir;
  if (config.dataset == "speech_commands")
    return load_speech_commands(dir, config.num_classes);
  if (config.dataset == "imdb") return load_imdb_dir(dir, "imdb", config.global_seed);
  if (config.dataset == "cifar10") return load_cifar10(dir);
  throw std::invalid_argument("config: unknown dataset \"" + config.dataset +
                              "\" (expected speech_commands, imdb or cifar10)");
}

/// Read-only context shared by all worker threads of one experiment.
struct ExperimentContext {
  const ExperimentConfig* config = nullptr;
  fs::path dir;
  DatasetSplit split;
  TrainSchedule schedule;
  FeatureConfig feat;
  // Clean features, shared by clean runs and as val/test of poisoned runs.
  Featurized clean_train, clean_val, clean_test;
  TextVectorizer clean_vec;  // text only
  // Audio/image attack sets are arm-independent; text rebuilds them per arm.
  std::vector<Featurized> shared_attack;  // indexed like config->positions
};

Featurized featurize_samples(const ExperimentContext& ctx, const std::vector<Sample>& samples,
                             const TextVectorizer* vec,
                             const std::vector<std::string>* trigger_tokens) {
  switch (ctx.config->modality()) {
    case Modality::audio: return featurize_audio(samples, ctx.feat);
    case Modality::image: return featurize_image(samples);
    case Modality::text: return featurize_text(samples, *vec, ctx.feat, trigger_tokens);
  }
  throw std::logic_error("unknown modality");
}

void fit_vectorizer(TextVectorizer& vec, const std::vector<Sample>& train, int vocab) {
  std::vector<const TokenSeq*> corpus;
  corpus.reserve(train.size());
  for (const auto& s : train) corpus.push_back(&std::get<TokenSeq>(s.payload));
  vec.fit(corpus, vocab);
}

void prepare_context(ExperimentContext& ctx) {
  const ExperimentConfig& config = *ctx.config;
  ctx.split = load_configured_dataset(config);
  if (config.modality() == Modality::image) normalize_images(ctx.split, ctx.feat);

  if (static_cast<int>(ctx.split.class_names.size()) != config.num_classes &&
      config.modality() != Modality::text)
    throw std::runtime_error("dataset class count does not match config");

  const bool audio = config.modality() == Modality::audio;
  const fs::path cache = ctx.dir / "cache" / "clean_features.bin";
  Featurized cached[3];
  if (audio && load_feature_cache(cache, config.dataset, ctx.feat.hash(), config.global_seed,
                                  cached)) {
    ctx.clean_train = std::move(cached[0]);
    ctx.clean_val = std::move(cached[1]);
    ctx.clean_test = std::move(cached[2]);
  } else {
    if (config.modality() == Modality::text)
      fit_vectorizer(ctx.clean_vec, ctx.split.train, ctx.feat.vocab_size);
    ctx.clean_train = featurize_samples(ctx, ctx.split.train, &ctx.clean_vec, nullptr);
    ctx.clean_val = featurize_samples(ctx, ctx.split.validation, &ctx.clean_vec, nullptr);
    ctx.clean_test = featurize_samples(ctx, ctx.split.test, &ctx.clean_vec, nullptr);
    if (audio) {
      const Featurized to_cache[3] = {ctx.clean_train, ctx.clean_val, ctx.clean_test};
      save_feature_cache(cache, config.dataset, ctx.feat.hash(), config.global_seed, to_cache);
    }
  }

  if (config.modality() != Modality::text) {
    const TriggerSpec base = config.base_trigger();
    for (const TriggerPosition pos : config.positions) {
      const auto attacked = make_attack_testset(ctx.split.test, config.modality(),
                                                base.with_position(pos), config.target_label);
      ctx.shared_attack.push_back(featurize_samples(ctx, attacked, nullptr, nullptr));
    }
  }
}

RunRecord execute_task(const ExperimentContext& ctx, const RunTask& task) {
  const ExperimentConfig& config = *ctx.config;
  const auto t0 = std::chrono::steady_clock::now();
  const Modality mod = config.modality();

  RunRecord rec;
  rec.config_hash = config.hash();
  rec.global_seed = config.global_seed;
  rec.repeat_index = task.repeat;
  const ArchSpec spec{config.family, task.head, config.num_classes};
  rec.arch = spec.name();
  rec.dataset = config.dataset;
  rec.run_kind = task.run_kind;
  rec.train_position =
      task.run_kind == "poisoned" ? position_name(task.train_position, mod) : "-";
  rec.target_label = config.target_label;
  rec.overfit_mode = ctx.schedule.allow_overfit;
  rec.batch_size = ctx.schedule.batch_size;
  rec.max_epochs = ctx.schedule.max_epochs;
  rec.patience = ctx.schedule.patience;
  rec.learning_rate = ctx.schedule.learning_rate;

  nn::Net net = build_model(spec, task.seed);

  const Featurized* train_set = &ctx.clean_train;
  const Featurized* val_set = &ctx.clean_val;
  const Featurized* test_set = &ctx.clean_test;

  // Per-arm storage (poisoned runs and all text runs).
  Featurized arm_train, arm_val, arm_test;
  std::vector<Featurized> arm_attack;
  TextVectorizer arm_vec;

  if (task.run_kind == "poisoned") {
    PoisonPolicy policy = config.base_policy();
    policy.trigger = policy.trigger.with_position(task.train_position);
    policy.selection_seed =
        derive_seed(config.global_seed,
                    "poison.select." + position_name(task.train_position, mod),
                    static_cast<uint64_t>(task.repeat));
    auto [poisoned, manifest] =
        poison_train(ctx.split.train, mod, policy, config.num_classes);
    rec.poison_count = static_cast<int>(manifest.entries.size());
    manifest.save(ctx.dir / "manifests" /
                  (task.record_name.substr(0, task.record_name.size() - 7) + ".manifest"));

    const std::vector<std::string>* trig_tokens =
        mod == Modality::text ? &policy.trigger.text->tokens : nullptr;
    if (mod == Modality::text) {
      fit_vectorizer(arm_vec, poisoned, ctx.feat.vocab_size);
      arm_train = featurize_samples(ctx, poisoned, &arm_vec, trig_tokens);
      arm_val = featurize_samples(ctx, ctx.split.validation, &arm_vec, nullptr);
      arm_test = featurize_samples(ctx, ctx.split.test, &arm_vec, nullptr);
      val_set = &arm_val;
      test_set = &arm_test;
      for (const TriggerPosition pos : config.positions) {
        const auto attacked = make_attack_testset(ctx.split.test, mod,
                                                  policy.trigger.with_position(pos),
                                                  config.target_label);
        arm_attack.push_back(featurize_samples(ctx, attacked, &arm_vec, trig_tokens));
      }
    } else {
      arm_train = featurize_samples(ctx, poisoned, nullptr, nullptr);
    }
    train_set = &arm_train;
    rec.truncated_triggers = arm_train.truncated_trigger_count;
  }

  const TrainResult tr = train(net, *train_set, *val_set, ctx.schedule, task.seed);
  rec.epochs_executed = tr.epochs_run;
  rec.best_epoch = tr.best_epoch;
  rec.diverged = tr.diverged;

  if (!tr.diverged) {
    rec.clean_acc = clean_accuracy(net, *test_set, ctx.schedule.batch_size);
    if (task.run_kind == "poisoned") {
      const auto& attack_sets = mod == Modality::text ? arm_attack : ctx.shared_attack;
      for (size_t i = 0; i < config.positions.size(); ++i) {
        const std::string pname = position_name(config.positions[i], mod);
        rec.attack_acc[pname] =
            attack_accuracy(net, attack_sets[i], config.target_label, ctx.schedule.batch_size);
      }
    }
    net.save_weights(ctx.dir / "weights" /
                     (task.record_name.substr(0, task.record_name.size() - 7) + ".weights"));
  }

  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config, int workers,
                                 const std::function<void(const std::string&)>& log) {
  config.validate();
  const auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };

  ExperimentContext ctx;
  ctx.config = &config;
  ctx.dir = experiment_dir(config);
  ctx.schedule = config.schedule();
  fs::create_directories(ctx.dir / "records");
  fs::create_directories(ctx.dir / "manifests");
  fs::create_directories(ctx.dir / "weights");
  io::write_text_file(ctx.dir / "config.json", config.to_json());

  say("experiment " + config.name + " -> " + ctx.dir.string());
  prepare_context(ctx);
  say("dataset " + config.dataset + ": train " + std::to_string(ctx.split.train.size()) +
      ", val " + std::to_string(ctx.split.validation.size()) + ", test " +
      std::to_string(ctx.split.test.size()));

  ExperimentOutcome outcome;
  std::vector<RunTask> pending;
  for (const auto& task : plan_grid(config)) {
    if (fs::exists(ctx.dir / "records" / task.record_name)) {
      ++outcome.skipped;
      continue;
    }
    pending.push_back(task);
  }
  say(std::to_string(pending.size()) + " runs to execute, " + std::to_string(outcome.skipped) +
      " already recorded");

  std::atomic<size_t> next{0};
  std::mutex mu;
  const auto run_worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= pending.size()) break;
      const RunTask& task = pending[i];
      try {
        const RunRecord rec = execute_task(ctx, task);
        rec.save(ctx.dir / "records" / task.record_name);
        std::lock_guard<std::mutex> lock(mu);
        ++outcome.executed;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s: clean %.2f%%, %d epochs%s", task.record_name.c_str(),
                      rec.clean_acc, rec.epochs_executed, rec.diverged ? " [diverged]" : "");
        say(buf);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        outcome.failures.push_back(task.record_name + ": " + e.what());
        say(task.record_name + " FAILED: " + e.what());
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(pending.size())));
  if (n_threads <= 1) {
    run_worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(run_worker);
    for (auto& t : pool) t.join();
  }

  outcome.records = load_records(config);
  return outcome;
}

std::vector<RunRecord> load_records(const ExperimentConfig& config) {
  const fs::path dir = experiment_dir(config) / "records";
  std::vector<fs::path> files;
  if (fs::exists(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".record") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> records;
  records.reserve(files.size());
  for (const auto& f : files) records.push_back(RunRecord::load(f));
  return records;
}

}  // namespace gapdoor

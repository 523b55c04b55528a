#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gapdoor/features.hpp"
#include "gapdoor/io.hpp"
#include "gapdoor/models.hpp"
#include "gapdoor/nn/loss.hpp"
#include "gapdoor/poison.hpp"
#include "gapdoor/rng.hpp"
#include "gapdoor/train.hpp"
#include "gapdoor/trigger.hpp"

using namespace gapdoor;
namespace fs = std::filesystem;

namespace {

// Two well-separated Gaussian blobs in 2-D, trivially learnable.
Featurized blobs(Rng& rng, int per_class, int num_classes, float spread = 0.3f) {
  Featurized f;
  const int n = per_class * num_classes;
  f.x = Tensor({n, 2});
  for (int i = 0; i < n; ++i) {
    const int label = i % num_classes;
    const float angle = 2.0f * static_cast<float>(M_PI) * label / num_classes;
    f.x.at(i, 0) = 3.0f * std::cos(angle) + spread * rng.normal();
    f.x.at(i, 1) = 3.0f * std::sin(angle) + spread * rng.normal();
    f.labels.push_back(label);
    f.ids.push_back("pt" + std::to_string(i));
  }
  return f;
}

nn::Net small_classifier(int num_classes, uint64_t seed) {
  nn::Net net;
  net.add(std::make_unique<nn::Dense>(16, nn::Activation::relu));
  net.add(std::make_unique<nn::Dense>(num_classes, nn::Activation::linear));
  net.build({2}, seed);
  return net;
}

}  // namespace

// ------------------------------------------------------------ schedules/stops

TEST_CASE("schedules carry the published per-modality budgets") {
  const TrainSchedule snd = TrainSchedule::for_modality(Modality::audio);
  CHECK(snd.max_epochs == 300);
  CHECK(snd.patience == 20);
  CHECK(snd.batch_size == 64);
  const TrainSchedule txt = TrainSchedule::for_modality(Modality::text);
  CHECK(txt.max_epochs == 30);
  CHECK(txt.patience == 5);
  CHECK(txt.batch_size == 32);
  const TrainSchedule img = TrainSchedule::for_modality(Modality::image);
  CHECK(img.max_epochs == 150);
  CHECK(img.patience == 20);
  CHECK(img.batch_size == 64);
  CHECK(snd.learning_rate == 0.001);
  CHECK_FALSE(snd.allow_overfit);
}

TEST_CASE("early stopping: flat losses exhaust patience and keep the best epoch") {
  EarlyStopping es(2);
  CHECK(es.observe(1.0));   // epoch 1, best
  CHECK(es.observe(0.9));   // epoch 2, best
  CHECK_FALSE(es.observe(0.9));  // epoch 3: not a strict improvement
  CHECK_FALSE(es.should_stop());
  CHECK_FALSE(es.observe(0.9));  // epoch 4
  CHECK(es.should_stop());       // stops after epoch 4
  CHECK(es.best_epoch() == 2);   // restores epoch-2 weights
  CHECK(es.best_loss() == doctest::Approx(0.9));
}

TEST_CASE("early stopping: an improvement resets the patience window") {
  EarlyStopping es(2);
  es.observe(1.0);
  es.observe(1.1);
  CHECK_FALSE(es.should_stop());
  es.observe(0.8);  // new best clears the wait counter
  es.observe(0.9);
  CHECK_FALSE(es.should_stop());
  es.observe(0.9);
  CHECK(es.should_stop());
  CHECK(es.best_epoch() == 3);
}

// ------------------------------------------------------------------- training

TEST_CASE("training fits a separable toy problem deterministically") {
  Rng rng(1);
  const Featurized train_set = blobs(rng, 30, 4);
  const Featurized val_set = blobs(rng, 10, 4);

  TrainSchedule s;
  s.max_epochs = 60;
  s.patience = 10;
  s.batch_size = 16;

  nn::Net net = small_classifier(4, 42);
  const TrainResult r = train(net, train_set, val_set, s, 7);
  CHECK_FALSE(r.diverged);
  CHECK(r.history.front().train_loss > r.history.back().train_loss);
  CHECK(clean_accuracy(net, val_set, 16) > 95.0);

  // bit-equal reproducibility: same seeds, same everything
  nn::Net net2 = small_classifier(4, 42);
  const TrainResult r2 = train(net2, train_set, val_set, s, 7);
  REQUIRE(r2.epochs_run == r.epochs_run);
  for (size_t e = 0; e < r.history.size(); ++e) {
    REQUIRE(r2.history[e].train_loss == r.history[e].train_loss);
    REQUIRE(r2.history[e].val_loss == r.history[e].val_loss);
  }
  const auto wa = net.snapshot_weights(), wb = net2.snapshot_weights();
  for (size_t i = 0; i < wa.size(); ++i)
    for (int64_t j = 0; j < wa[i].size(); ++j) REQUIRE(wa[i][j] == wb[i][j]);

  // a different training seed shuffles differently
  nn::Net net3 = small_classifier(4, 42);
  const TrainResult r3 = train(net3, train_set, val_set, s, 8);
  CHECK(r3.history.front().train_loss != r.history.front().train_loss);
}

TEST_CASE("allow_overfit runs every epoch and keeps the final weights") {
  Rng rng(2);
  const Featurized train_set = blobs(rng, 10, 2);
  const Featurized val_set = blobs(rng, 5, 2);

  TrainSchedule s;
  s.max_epochs = 30;
  s.patience = 2;
  s.batch_size = 8;
  s.allow_overfit = true;

  nn::Net net = small_classifier(2, 3);
  const TrainResult r = train(net, train_set, val_set, s, 5);
  CHECK(r.epochs_run == 30);
  CHECK_FALSE(r.restored_best);
  CHECK(r.best_epoch == 30);  // final weights by definition
}

TEST_CASE("early stopping halts a run that stops improving") {
  Rng rng(3);
  // 8 training points, validation drawn from a shifted distribution: the
  // network overfits quickly and validation loss turns upward.
  Featurized train_set = blobs(rng, 4, 2, 0.05f);
  Featurized val_set = blobs(rng, 20, 2, 2.5f);

  TrainSchedule s;
  s.max_epochs = 200;
  s.patience = 5;
  s.batch_size = 4;

  nn::Net net = small_classifier(2, 9);
  const TrainResult r = train(net, train_set, val_set, s, 11);
  CHECK(r.epochs_run < 200);
  CHECK(r.restored_best);
  CHECK(r.best_epoch <= r.epochs_run - 5);  // patience epochs past the best
  CHECK(r.best_epoch >= 1);
}

TEST_CASE("non-finite losses abort and mark the run diverged") {
  // Adam steps are bounded by the learning rate whatever the gradient, so a
  // huge rate alone cannot overflow these nets; a corrupt (non-finite)
  // feature is what actually reaches the abort path.
  Rng rng(4);
  Featurized train_set = blobs(rng, 10, 2);
  const Featurized val_set = blobs(rng, 5, 2);
  train_set.x[3] = std::numeric_limits<float>::infinity();

  TrainSchedule s;
  s.max_epochs = 50;
  s.patience = 10;
  s.batch_size = 8;

  nn::Net net = small_classifier(2, 1);
  const TrainResult r = train(net, train_set, val_set, s, 2);
  CHECK(r.diverged);
  CHECK(r.epochs_run == 1);  // aborts inside the first epoch
  CHECK(r.history.empty());
}

TEST_CASE("reported losses include the l2 penalty") {
  Rng rng(5);
  Featurized train_set = blobs(rng, 8, 2);
  train_set.x = train_set.x.reshaped({16, 1, 1, 2});
  Featurized val_set = blobs(rng, 4, 2);
  val_set.x = val_set.x.reshaped({8, 1, 1, 2});

  nn::Net net;
  net.add(std::make_unique<nn::Conv2D>(4, 1, 1, nn::Padding::valid,
                                       nn::Activation::relu, 0.5));
  net.add(std::make_unique<nn::Flatten>());
  net.add(std::make_unique<nn::Dense>(2, nn::Activation::linear));
  net.build({1, 1, 2}, 6);

  TrainSchedule s;
  s.max_epochs = 1;
  s.patience = 5;
  s.batch_size = 8;
  const TrainResult r = train(net, train_set, val_set, s, 3);
  REQUIRE(r.history.size() == 1);

  // recompute the validation loss from the trained weights
  const Tensor logits = net.forward(val_set.x, false);
  const auto ce = nn::softmax_cross_entropy(logits, val_set.labels);
  CHECK(r.history[0].val_loss ==
        doctest::Approx(ce.loss + net.reg_loss()).epsilon(1e-5));
  CHECK(net.reg_loss() > 0.0);
}

// -------------------------------------------------------------------- metrics

TEST_CASE("a constant-output model scores exactly chance on a balanced set") {
  Rng rng(6);
  const Featurized test = blobs(rng, 7, 10);
  nn::Net net = small_classifier(10, 1);
  for (auto& pv : net.params()) pv.value->fill(0.0f);  // all logits equal
  CHECK(clean_accuracy(net, test, 16) == doctest::Approx(10.0));
}

TEST_CASE("attack accuracy reaches 100 for a model locked onto the target") {
  Rng rng(7);
  Featurized attacked = blobs(rng, 5, 4);
  nn::Net net = small_classifier(4, 1);
  for (auto& pv : net.params()) pv.value->fill(0.0f);
  auto params = net.params();
  (*params.back().value)[2] = 100.0f;  // output bias pins class 2

  CHECK(attack_accuracy(net, attacked, 2, 8) == doctest::Approx(100.0));
  CHECK(attack_accuracy(net, attacked, 1, 8) == doctest::Approx(0.0));

  Featurized empty;
  CHECK_THROWS(attack_accuracy(net, empty, 2, 8));
  CHECK_THROWS(clean_accuracy(net, empty, 8));
}

TEST_CASE("clean accuracy drop is the signed difference") {
  CHECK(clean_accuracy_drop(95.56, 94.92) == doctest::Approx(0.64));
  CHECK(clean_accuracy_drop(95.60, 95.67) == doctest::Approx(-0.07));
  CHECK(clean_accuracy_drop(88.8, 88.8) == doctest::Approx(0.0));
}

TEST_CASE("a zero-amplitude tone turns attack accuracy into the clean "
          "misclassification rate toward the target") {
  Rng rng(8);
  FeatureConfig cfg;

  std::vector<Sample> test;
  for (int i = 0; i < 24; ++i) {
    Sample s;
    s.id = "clip" + std::to_string(i);
    s.label = i % 4;
    io::Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(4000);
    for (auto& v : w.samples) v = rng.uniform(-0.5f, 0.5f);
    s.payload = std::move(w);
    test.push_back(std::move(s));
  }

  AudioTriggerParams silent;
  silent.mix_gain = 0.0f;
  const auto null_attack = make_attack_testset(
      test, Modality::audio, TriggerSpec::audio_tone(TriggerPosition::middle, silent), 2);
  const Featurized attacked = featurize_audio(null_attack, cfg);
  const Featurized clean = featurize_audio(test, cfg);

  nn::Net net;
  net.add(std::make_unique<nn::Flatten>());
  net.add(std::make_unique<nn::Dense>(4, nn::Activation::linear));
  net.build({clean.x.dim(1), clean.x.dim(2), clean.x.dim(3)}, 55);

  const double via_attack_path = attack_accuracy(net, attacked, 2, 8);
  const auto preds = predict(net, clean.x, 8);
  int hits = 0, considered = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (clean.labels[i] == 2) continue;
    ++considered;
    if (preds[i] == 2) ++hits;
  }
  REQUIRE(considered == 18);
  CHECK(via_attack_path == doctest::Approx(100.0 * hits / considered).epsilon(1e-9));
}

// ----------------------------------------------------------------- run record

TEST_CASE("run records round-trip through their text form") {
  RunRecord r;
  r.config_hash = 0xabcdef0123456789ULL;
  r.global_seed = 42;
  r.repeat_index = 3;
  r.arch = "image_strip/gap/10";
  r.dataset = "cifar10";
  r.run_kind = "poisoned";
  r.train_position = "center";
  r.poison_count = 100;
  r.target_label = 0;
  r.epochs_executed = 37;
  r.best_epoch = 17;
  r.overfit_mode = false;
  r.batch_size = 64;
  r.max_epochs = 150;
  r.patience = 20;
  r.learning_rate = 0.001;
  r.clean_acc = 85.42;
  r.attack_acc = {{"upper_left", 12.5}, {"center", 96.0}, {"lower_right", 33.0}};
  r.truncated_triggers = 0;
  r.wall_seconds = 123.456;

  const RunRecord back = RunRecord::from_text(r.to_text());
  CHECK(back.canonical_text() == r.canonical_text());
  CHECK(back.config_hash == r.config_hash);
  CHECK(back.attack_acc.at("center") == doctest::Approx(96.0));
  CHECK(back.wall_seconds == doctest::Approx(123.456));

  // wall time is volatile: it must not affect record identity
  RunRecord slower = r;
  slower.wall_seconds = 9999.0;
  CHECK(slower.canonical_text() == r.canonical_text());
  CHECK(slower.to_text() != r.to_text());

  CHECK_THROWS(RunRecord::from_text(r.to_text() + "mystery_key\t1\n"));
  CHECK_THROWS(RunRecord::from_text("not a record"));

  const fs::path dir = fs::temp_directory_path() / "gapdoor_test_records";
  fs::create_directories(dir);
  r.save(dir / "x.record");
  CHECK(RunRecord::load(dir / "x.record").canonical_text() == r.canonical_text());
  fs::remove_all(dir);
}

// ------------------------------------------------------------------ model zoo

TEST_CASE("every published parameter count verifies") {
  for (const auto& check : verify_param_table()) {
    CAPTURE(check.name);
    CAPTURE(check.expected);
    CAPTURE(check.actual);
    CHECK(check.pass);
  }
}

TEST_CASE("exact parameter counts for the published pairs") {
  struct Row {
    Family family;
    Head head;
    int classes;
    int64_t params;
  };
  const Row rows[] = {
      {Family::sound_small, Head::fc, 10, 321962},
      {Family::sound_small, Head::gap, 10, 25962},
      {Family::text_troj, Head::fc, 2, 1120601},
      {Family::text_troj, Head::gap, 2, 1120401},
      {Family::text_tf, Head::fc, 2, 224049},
      {Family::text_tf, Head::gap, 2, 160033},
      {Family::image_strip, Head::fc, 10, 309290},
      {Family::image_strip, Head::gap, 10, 290090},
  };
  for (const Row& row : rows) {
    const ArchSpec spec{row.family, row.head, row.classes};
    const nn::Net net = build_model(spec, 1);
    CAPTURE(spec.name());
    CHECK(count_params(net) == row.params);
  }

  const nn::Net mata_fc = build_model({Family::text_mata, Head::fc, 2}, 1);
  const nn::Net mata_gap = build_model({Family::text_mata, Head::gap, 2}, 1);
  CHECK(count_params(mata_fc) - count_params(mata_gap) == 251904);

  const nn::Net large_fc = build_model({Family::sound_large, Head::fc, 10}, 1);
  const nn::Net large_gap = build_model({Family::sound_large, Head::gap, 10}, 1);
  const double reduction =
      100.0 * (1.0 - static_cast<double>(count_params(large_gap)) /
                         static_cast<double>(count_params(large_fc)));
  CHECK(reduction > 45.0);
  CHECK(reduction < 55.0);
}

TEST_CASE("the gap head output is invariant to spatial permutations of its input") {
  nn::Net net = build_model({Family::image_strip, Head::gap, 10}, 2025);

  size_t gap_index = net.layers().size();
  for (size_t i = 0; i < net.layers().size(); ++i)
    if (net.layers()[i]->kind() == "GlobalAvgPool") gap_index = i;
  REQUIRE(gap_index < net.layers().size());

  Rng rng(64);
  Tensor x({1, 32, 32, 3});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();

  std::vector<Tensor> acts;
  const Tensor reference = net.forward_collect(x, acts);
  Tensor fmap = acts[gap_index - 1];  // penultimate feature map
  REQUIRE(fmap.rank() == 4);
  const int64_t h = fmap.dim(1), w = fmap.dim(2), c = fmap.dim(3);

  // random permutation of the h*w spatial positions
  std::vector<int64_t> order(static_cast<size_t>(h * w));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  rng.shuffle(order);
  Tensor shuffled = fmap;
  for (int64_t p = 0; p < h * w; ++p)
    for (int64_t ch = 0; ch < c; ++ch) shuffled[p * c + ch] = fmap[order[p] * c + ch];

  // re-run the tail of the network on the permuted map
  Tensor cur = shuffled;
  for (size_t i = gap_index; i < net.layers().size(); ++i)
    cur = net.layers()[i]->forward(cur, false);

  REQUIRE(cur.size() == reference.size());
  // relative to the output scale: individual logits can sit arbitrarily
  // close to zero, which would make a per-coordinate ratio meaningless
  double scale = 0.0;
  for (int64_t i = 0; i < reference.size(); ++i)
    scale = std::max(scale, static_cast<double>(std::abs(reference[i])));
  for (int64_t i = 0; i < cur.size(); ++i) {
    const double rel = std::abs(cur[i] - reference[i]) / std::max(scale, 1e-12);
    CHECK(rel <= 1e-5);
  }
}

TEST_CASE("head variants share the trunk configuration exactly") {
  const std::pair<Family, int> families[] = {
      {Family::sound_small, 10}, {Family::sound_large, 10}, {Family::text_troj, 2},
      {Family::text_mata, 2},    {Family::text_tf, 2},      {Family::image_strip, 10},
  };
  for (const auto& [family, classes] : families) {
    const nn::Net gap = build_model({family, Head::gap, classes}, 3);
    const nn::Net fc = build_model({family, Head::fc, classes}, 3);

    auto config_lines = [](const nn::Net& net, const char* kind) {
      std::vector<std::string> out;
      std::istringstream is(net.structure());
      for (std::string line; std::getline(is, line);)
        if (line.find(kind) != std::string::npos) out.push_back(line);
      std::sort(out.begin(), out.end());
      return out;
    };

    // Trunk layers are bit-identical in configuration across heads; the
    // only differences live in the pooling/flatten head.
    for (const char* kind : {"Conv2D(", "Embedding(", "BatchNorm("}) {
      CAPTURE(family_name(family));
      CAPTURE(kind);
      CHECK(config_lines(gap, kind) == config_lines(fc, kind));
    }
    CHECK(gap.structure() != fc.structure());
    CHECK(gap.structure().find("GlobalAvgPool") != std::string::npos);
  }
}

TEST_CASE("equal spec and seed build identical weights; seeds separate") {
  const ArchSpec spec{Family::sound_small, Head::gap, 10};
  const nn::Net a = build_model(spec, 77);
  const nn::Net b = build_model(spec, 77);
  const nn::Net c = build_model(spec, 78);

  const auto wa = a.snapshot_weights(), wb = b.snapshot_weights(),
             wc = c.snapshot_weights();
  REQUIRE(wa.size() == wb.size());
  bool same = true, diff = false;
  for (size_t i = 0; i < wa.size(); ++i)
    for (int64_t j = 0; j < wa[i].size(); ++j) {
      same = same && wa[i][j] == wb[i][j];
      diff = diff || wa[i][j] != wc[i][j];
    }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("input shapes and output widths per modality") {
  CHECK(ArchSpec{Family::sound_small, Head::gap, 10}.input_shape() ==
        nn::Shape{98, 40, 1});
  CHECK(ArchSpec{Family::text_troj, Head::gap, 2}.input_shape() == nn::Shape{250});
  CHECK(ArchSpec{Family::image_strip, Head::gap, 10}.input_shape() ==
        nn::Shape{32, 32, 3});
  CHECK(ArchSpec{Family::text_troj, Head::gap, 2}.output_units() == 1);
  CHECK(ArchSpec{Family::sound_small, Head::gap, 30}.output_units() == 30);
  CHECK_THROWS(ArchSpec{Family::text_troj, Head::gap, 3}.validate());
  CHECK_THROWS(ArchSpec{Family::sound_small, Head::gap, 7}.validate());
}

TEST_CASE("the committed architecture manifest matches the builders") {
  const fs::path manifest = fs::path(GAPDOOR_SOURCE_DIR) / "core" / "manifests" /
                            "architectures.json";
  REQUIRE_MESSAGE(fs::exists(manifest),
                  "core/manifests/architectures.json is part of the repository");
  CHECK(io::read_text_file(manifest) == architecture_manifest());
}

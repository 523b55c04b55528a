#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "gapdoor/experiment.hpp"
#include "gapdoor/io.hpp"
#include "gapdoor/report.hpp"
#include "gapdoor/synth_data.hpp"

using namespace gapdoor;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("gapdoor_exp_" + tag + "_" +
                                                  std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig base_config() {
  ExperimentConfig c;
  c.name = "unit";
  c.dataset = "imdb";
  c.data_dir = "/tmp/unused";
  c.family = Family::text_tf;
  c.num_classes = 2;
  c.target_label = 1;
  c.poison_rate = 0.05;
  c.repeats = 1;
  c.max_epochs = 2;
  c.patience = 2;
  c.batch_size = 16;
  c.output_dir = "/tmp/unused_runs";
  return c;
}

}  // namespace

// --------------------------------------------------------------------- config

TEST_CASE("config json round-trips and hashes on semantics only") {
  const ExperimentConfig c = base_config();
  const ExperimentConfig r = ExperimentConfig::from_json_text(c.to_json());
  CHECK(r.hash() == c.hash());
  CHECK(r.dataset == "imdb");
  CHECK(r.poison_rate == doctest::Approx(0.05));

  ExperimentConfig relabeled = c;
  relabeled.name = "same-experiment-different-label";
  relabeled.output_dir = "/somewhere/else";
  CHECK(relabeled.hash() == c.hash());

  // every semantic axis moves the hash
  auto touched = [&](auto&& mutate) {
    ExperimentConfig m = c;
    mutate(m);
    return m.hash() != c.hash();
  };
  CHECK(touched([](ExperimentConfig& m) { m.global_seed = 43; }));
  CHECK(touched([](ExperimentConfig& m) { m.family = Family::text_troj; }));
  CHECK(touched([](ExperimentConfig& m) { m.poison_rate = 0.06; }));
  CHECK(touched([](ExperimentConfig& m) { m.heads = {Head::gap}; }));
  CHECK(touched([](ExperimentConfig& m) { m.positions = {TriggerPosition::end}; }));
  CHECK(touched([](ExperimentConfig& m) { m.allow_overfit = true; }));
  CHECK(touched([](ExperimentConfig& m) { m.tone_gain = 0.25; }));
  CHECK(touched([](ExperimentConfig& m) { m.trigger_phrase = "other words"; }));
  CHECK(touched([](ExperimentConfig& m) { m.max_epochs = 3; }));
}

TEST_CASE("config parsing accepts csv or array lists and rejects junk") {
  const char* csv_form = R"({
    "schema_version": 1,
    "dataset": "cifar10",
    "data_dir": "/data/cifar10",
    "family": "image_strip",
    "heads": "gap,fc",
    "positions": "upper_left,center,lower_right",
    "poison_count": 100
  })";
  const ExperimentConfig a = ExperimentConfig::from_json_text(csv_form);
  CHECK(a.heads == std::vector<Head>{Head::gap, Head::fc});
  REQUIRE(a.positions.size() == 3);
  CHECK(a.positions[0] == TriggerPosition::begin);

  const char* array_form = R"({
    "schema_version": 1,
    "dataset": "cifar10",
    "data_dir": "/data/cifar10",
    "family": "image_strip",
    "heads": ["fc"],
    "positions": ["center"],
    "poison_count": 100
  })";
  const ExperimentConfig b = ExperimentConfig::from_json_text(array_form);
  CHECK(b.heads == std::vector<Head>{Head::fc});
  CHECK(b.positions == std::vector<TriggerPosition>{TriggerPosition::middle});

  CHECK_THROWS(ExperimentConfig::from_json_text(R"({"schema_version": 2})"));
  CHECK_THROWS(ExperimentConfig::from_json_text(
      R"({"schema_version": 1, "dataset": "imdb", "data_dir": "/d", "unknown_axis": 3})"));
  CHECK_THROWS(ExperimentConfig::from_json_text("not json at all"));
}

TEST_CASE("config validation catches contradictory settings") {
  ExperimentConfig both = base_config();
  both.poison_count = 10;  // rate already set
  CHECK_THROWS(both.validate());

  ExperimentConfig bad_target = base_config();
  bad_target.target_label = 2;
  CHECK_THROWS(bad_target.validate());

  ExperimentConfig no_heads = base_config();
  no_heads.heads.clear();
  CHECK_THROWS(no_heads.validate());

  ExperimentConfig overgain = base_config();
  overgain.family = Family::sound_small;
  overgain.dataset = "speech_commands";
  overgain.num_classes = 10;
  overgain.target_label = 0;
  overgain.tone_gain = 2.0;
  CHECK_THROWS(overgain.validate());
}

TEST_CASE("desk scale caps the epoch budget and marks the config") {
  ExperimentConfig c = base_config();
  c.max_epochs = 0;  // modality default: 30 for text
  c.desk_scale = false;
  CHECK(c.schedule().max_epochs == 30);

  c.family = Family::image_strip;
  c.dataset = "cifar10";
  c.num_classes = 10;
  c.target_label = 0;
  CHECK(c.schedule().max_epochs == 150);
  c.desk_scale = true;
  CHECK(c.schedule().max_epochs == 60);

  c.max_epochs = 7;  // explicit override wins below the cap
  CHECK(c.schedule().max_epochs == 7);
}

// ----------------------------------------------------------------------- grid

TEST_CASE("the grid is (1 clean + positions) x heads x repeats") {
  ExperimentConfig c = base_config();
  c.family = Family::image_strip;
  c.dataset = "cifar10";
  c.num_classes = 10;
  c.target_label = 0;
  c.poison_rate = -1.0;
  c.poison_count = 100;

  c.repeats = 10;
  c.heads = {Head::gap, Head::fc};
  CHECK(plan_grid(c).size() == 80);

  c.repeats = 1;
  c.heads = {Head::gap};
  const auto tasks = plan_grid(c);
  REQUIRE(tasks.size() == 4);

  std::set<std::string> names;
  std::set<uint64_t> seeds;
  for (const auto& t : tasks) {
    names.insert(t.record_name);
    seeds.insert(t.seed);
  }
  CHECK(names.size() == 4);  // unique, deterministic names
  CHECK(seeds.size() == 4);  // independent derived seeds
  CHECK(names.count("image_strip_gap_clean_r0.record") == 1);
  CHECK(names.count("image_strip_gap_poisoned_center_r0.record") == 1);

  // task seeds depend only on (seed, head, kind, position, repeat)
  const auto again = plan_grid(c);
  for (size_t i = 0; i < tasks.size(); ++i) CHECK(again[i].seed == tasks[i].seed);
}

TEST_CASE("text grids use the sequential position vocabulary in names") {
  ExperimentConfig c = base_config();
  c.heads = {Head::gap};
  const auto tasks = plan_grid(c);
  REQUIRE(tasks.size() == 4);
  CHECK(tasks[1].record_name == "text_tf_gap_poisoned_begin_r0.record");
  CHECK(tasks[2].record_name == "text_tf_gap_poisoned_middle_r0.record");
  CHECK(tasks[3].record_name == "text_tf_gap_poisoned_end_r0.record");
}

// ----------------------------------------------------------- reporting maths

TEST_CASE("population standard deviation uses N and handles a single repeat") {
  CHECK(population_std({5.0}) == doctest::Approx(0.0));
  CHECK(population_std({2.0, 4.0}) == doctest::Approx(1.0));
  CHECK(population_std({1.0, 2.0, 3.0, 4.0}) ==
        doctest::Approx(std::sqrt(1.25)));
  CHECK(mean_of({1.0, 2.0, 3.0}) == doctest::Approx(2.0));
}

// ------------------------------------------------------------ run lifecycle

TEST_CASE("experiments run, resume and regenerate reports byte-identically") {
  const fs::path data = make_temp_dir("imdb_data");
  synth::SynthSpec spec;
  spec.train_per_class = 16;
  spec.val_per_class = 0;
  spec.test_per_class = 5;
  synth::write_imdb_dir(data, spec);

  const fs::path out = make_temp_dir("runs");
  ExperimentConfig c = base_config();
  c.data_dir = data.string();
  c.output_dir = out.string();
  c.heads = {Head::gap, Head::fc};

  const ExperimentOutcome first = run_experiment(c, 1);
  CHECK(first.executed == 8);
  CHECK(first.skipped == 0);
  CHECK(first.failures.empty());
  REQUIRE(first.records.size() == 8);

  const fs::path dir = experiment_dir(c);
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "records" / "text_tf_gap_clean_r0.record"));
  CHECK(fs::exists(dir / "manifests" / "text_tf_fc_poisoned_end_r0.manifest"));
  CHECK(fs::exists(dir / "weights" / "text_tf_gap_poisoned_begin_r0.weights"));

  int clean_runs = 0, poisoned_runs = 0;
  for (const auto& rec : first.records) {
    CHECK(rec.config_hash == c.hash());
    if (rec.run_kind == "clean") {
      ++clean_runs;
      CHECK(rec.attack_acc.empty());
      CHECK(rec.train_position == "-");
    } else {
      ++poisoned_runs;
      CHECK(rec.attack_acc.size() == 3);
      // 32 train files minus the 20% validation holdout leaves 26 reviews;
      // floor(26 * 0.05) = 1
      CHECK(rec.poison_count == 1);
    }
  }
  CHECK(clean_runs == 2);
  CHECK(poisoned_runs == 6);

  // resume: nothing left to do, records identical
  const ExperimentOutcome second = run_experiment(c, 1);
  CHECK(second.executed == 0);
  CHECK(second.skipped == 8);
  REQUIRE(second.records.size() == 8);
  for (size_t i = 0; i < first.records.size(); ++i)
    CHECK(second.records[i].canonical_text() == first.records[i].canonical_text());

  // report regeneration from persisted records is byte-identical
  const Report report = build_report(c, first.records);
  const auto written1 = write_report_files(report, dir / "tables");
  std::vector<std::string> bytes1;
  for (const auto& p : written1) bytes1.push_back(io::read_text_file(p));

  const Report reloaded = build_report(c, load_records(c));
  const auto written2 = write_report_files(reloaded, dir / "tables");
  REQUIRE(written2 == written1);
  for (size_t i = 0; i < written1.size(); ++i)
    CHECK(io::read_text_file(written2[i]) == bytes1[i]);

  // every expected table exists
  std::set<std::string> names;
  for (const auto& p : written1) names.insert(p.filename().string());
  CHECK(names.count("clean_accuracy.csv") == 1);
  CHECK(names.count("attack_text_tf_gap_mean.csv") == 1);
  CHECK(names.count("attack_text_tf_fc_std.csv") == 1);
  CHECK(names.count("report.txt") == 1);

  // figures render for both heads
  const auto figures = write_plots(report, dir / "figures");
  std::set<std::string> fignames;
  for (const auto& p : figures) {
    fignames.insert(p.filename().string());
    const std::string svg = io::read_text_file(p);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
  CHECK(fignames.count("attack_text_tf.svg") == 1);
  CHECK(fignames.count("heatmap_text_tf_gap.svg") == 1);
  CHECK(fignames.count("heatmap_text_tf_fc.svg") == 1);

  // the attack matrix csv is 3x3 with labeled axes
  const std::string csv = io::read_text_file(dir / "tables" / "attack_text_tf_gap_mean.csv");
  CHECK(csv.find("train_position,begin,middle,end") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("records of missing runs flag the report rather than invent data") {
  ExperimentConfig c = base_config();
  c.repeats = 2;
  c.heads = {Head::gap};  // one head so the single fabricated arm fills it

  // fabricate records for only one repeat
  std::vector<RunRecord> records;
  for (const char* pos : {"begin", "middle", "end"}) {
    RunRecord r;
    r.config_hash = c.hash();
    r.arch = "text_tf/gap/2";
    r.dataset = "imdb";
    r.run_kind = "poisoned";
    r.train_position = pos;
    r.attack_acc = {{"begin", 50.0}, {"middle", 60.0}, {"end", 70.0}};
    r.clean_acc = 80.0;
    records.push_back(r);
  }
  RunRecord clean;
  clean.config_hash = c.hash();
  clean.arch = "text_tf/gap/2";
  clean.dataset = "imdb";
  clean.run_kind = "clean";
  clean.train_position = "-";
  clean.clean_acc = 85.0;
  records.push_back(clean);

  const Report report = build_report(c, records);
  REQUIRE(report.matrices.size() == 1);
  const AttackMatrix& m = report.matrices[0];
  CHECK(m.expected_repeats == 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(m.count[i][j] == 1);
      CHECK(m.cell_flagged(i, j));
    }
  CHECK(m.mean[0][1] == doctest::Approx(60.0));
  CHECK(m.stdev[0][1] == doctest::Approx(0.0));

  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].flagged);  // fewer poisoned runs than configured
  CHECK(report.rows[0].original_mean == doctest::Approx(85.0));
  CHECK(report.rows[0].poisoned_mean == doctest::Approx(80.0));
}

TEST_CASE("a diverged run flags its head row") {
  ExperimentConfig c = base_config();
  c.repeats = 1;
  c.heads = {Head::gap};

  std::vector<RunRecord> records;
  RunRecord clean;
  clean.config_hash = c.hash();
  clean.arch = "text_tf/gap/2";
  clean.run_kind = "clean";
  clean.train_position = "-";
  clean.clean_acc = 85.0;
  records.push_back(clean);
  for (const char* pos : {"begin", "middle", "end"}) {
    RunRecord r;
    r.config_hash = c.hash();
    r.arch = "text_tf/gap/2";
    r.run_kind = "poisoned";
    r.train_position = pos;
    r.clean_acc = 80.0;
    r.attack_acc = {{"begin", 10.0}, {"middle", 10.0}, {"end", 10.0}};
    if (std::string(pos) == "middle") r.diverged = true;
    records.push_back(r);
  }

  const Report report = build_report(c, records);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].flagged);
}

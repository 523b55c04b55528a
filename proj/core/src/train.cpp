#include "gapdoor/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gapdoor/io.hpp"
#include "gapdoor/nn/adam.hpp"
#include "gapdoor/nn/loss.hpp"
#include "gapdoor/rng.hpp"

namespace gapdoor {

TrainSchedule TrainSchedule::for_modality(Modality m) {
  switch (m) {
    case Modality::audio: return {300, 20, 64, 0.001, false};
    case Modality::text: return {30, 5, 32, 0.001, false};
    case Modality::image: return {150, 20, 64, 0.001, false};
  }
  throw std::invalid_argument("unknown modality");
}

bool EarlyStopping::observe(double val_loss) {
  ++epoch_;
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    wait_ = 0;
    return true;
  }
  ++wait_;
  return false;
}

namespace {

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& order, int64_t from,
                   int64_t to) {
  const int64_t row = x.size() / x.dim(0);
  std::vector<int64_t> shape = x.shape();
  shape[0] = to - from;
  Tensor out(shape);
  for (int64_t i = from; i < to; ++i) {
    const float* src = x.data() + order[static_cast<size_t>(i)] * row;
    std::copy(src, src + row, out.data() + (i - from) * row);
  }
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<int64_t>& order, int64_t from, int64_t to) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(to - from));
  for (int64_t i = from; i < to; ++i)
    out.push_back(labels[static_cast<size_t>(order[static_cast<size_t>(i)])]);
  return out;
}

nn::LossResult compute_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() == 2 && logits.dim(1) > 1)
    return nn::softmax_cross_entropy(logits, labels);
  return nn::sigmoid_binary_cross_entropy(logits, labels);
}

struct EvalOut {
  double loss = 0.0;
  double acc = 0.0;
};

EvalOut evaluate(nn::Net& net, const Featurized& set, int batch_size) {
  const int64_t n = set.count();
  std::vector<int64_t> ident(static_cast<size_t>(n));
  std::iota(ident.begin(), ident.end(), 0);
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t from = 0; from < n; from += batch_size) {
    const int64_t to = std::min<int64_t>(from + batch_size, n);
    const Tensor xb = gather_rows(set.x, ident, from, to);
    const auto yb = gather_labels(set.labels, ident, from, to);
    const Tensor logits = net.forward(xb, false);
    const auto res = compute_loss(logits, yb);
    loss_sum += res.loss * static_cast<double>(to - from);
    const auto pred = nn::predict_classes(logits);
    for (size_t i = 0; i < yb.size(); ++i)
      if (pred[i] == yb[i]) ++correct;
  }
  EvalOut out;
  out.loss = loss_sum / static_cast<double>(n) + net.reg_loss();
  out.acc = static_cast<double>(correct) / static_cast<double>(n);
  return out;
}

}  // namespace

TrainResult train(nn::Net& net, const Featurized& train_set, const Featurized& val_set,
                  const TrainSchedule& schedule, uint64_t seed) {
  if (train_set.count() == 0 || val_set.count() == 0)
    throw std::invalid_argument("train: empty training or validation set");

  TrainResult result;
  Rng shuffle_rng(derive_seed(seed, "train.shuffle"));
  nn::Adam adam(net.params(), schedule.learning_rate);
  EarlyStopping early(schedule.patience);
  std::vector<Tensor> best_weights;

  const int64_t n = train_set.count();
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (int64_t from = 0; from < n; from += schedule.batch_size) {
      const int64_t to = std::min<int64_t>(from + schedule.batch_size, n);
      const Tensor xb = gather_rows(train_set.x, order, from, to);
      const auto yb = gather_labels(train_set.labels, order, from, to);
      const Tensor logits = net.forward(xb, true);
      const auto res = compute_loss(logits, yb);
      if (!std::isfinite(res.loss)) {
        result.diverged = true;
        result.epochs_run = epoch;
        return result;
      }
      loss_sum += res.loss * static_cast<double>(to - from);
      net.zero_grads();
      net.backward(res.dlogits);
      adam.step();
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n) + net.reg_loss();
    const auto val = evaluate(net, val_set, schedule.batch_size);
    stats.val_loss = val.loss;
    stats.val_accuracy = val.acc;
    result.history.push_back(stats);
    result.epochs_run = epoch;

    if (!std::isfinite(val.loss)) {
      result.diverged = true;
      return result;
    }

    if (!schedule.allow_overfit) {
      if (early.observe(val.loss)) best_weights = net.snapshot_weights();
      if (early.should_stop()) break;
    }
  }

  if (!schedule.allow_overfit && !best_weights.empty()) {
    net.restore_weights(best_weights);
    result.best_epoch = early.best_epoch();
    result.restored_best = true;
  } else {
    result.best_epoch = result.epochs_run;
  }
  return result;
}

std::vector<int> predict(nn::Net& net, const Tensor& x, int batch_size) {
  const int64_t n = x.dim(0);
  std::vector<int64_t> ident(static_cast<size_t>(n));
  std::iota(ident.begin(), ident.end(), 0);
  std::vector<int> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t from = 0; from < n; from += batch_size) {
    const int64_t to = std::min<int64_t>(from + batch_size, n);
    const Tensor xb = gather_rows(x, ident, from, to);
    const Tensor logits = net.forward(xb, false);
    const auto pred = nn::predict_classes(logits);
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

double clean_accuracy(nn::Net& net, const Featurized& test, int batch_size) {
  if (test.count() == 0) throw std::invalid_argument("clean_accuracy: empty test set");
  const auto pred = predict(net, test.x, batch_size);
  int64_t correct = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == test.labels[i]) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size());
}

double attack_accuracy(nn::Net& net, const Featurized& attack_set, int target_label,
                       int batch_size) {
  if (attack_set.count() == 0) throw std::invalid_argument("attack_accuracy: empty attack set");
  const auto pred = predict(net, attack_set.x, batch_size);
  int64_t hits = 0;
  for (const int p : pred)
    if (p == target_label) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

double clean_accuracy_drop(double clean_model_acc, double poisoned_model_acc) {
  return clean_model_acc - poisoned_model_acc;
}

namespace {

std::string fmt_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string RunRecord::canonical_text() const {
  std::ostringstream os;
  os << "# run-record v1\n";
  os << "config_hash\t" << config_hash << "\n";
  os << "global_seed\t" << global_seed << "\n";
  os << "repeat_index\t" << repeat_index << "\n";
  os << "arch\t" << arch << "\n";
  os << "dataset\t" << dataset << "\n";
  os << "run_kind\t" << run_kind << "\n";
  os << "train_position\t" << train_position << "\n";
  os << "poison_count\t" << poison_count << "\n";
  os << "target_label\t" << target_label << "\n";
  os << "epochs_executed\t" << epochs_executed << "\n";
  os << "best_epoch\t" << best_epoch << "\n";
  os << "diverged\t" << (diverged ? 1 : 0) << "\n";
  os << "overfit_mode\t" << (overfit_mode ? 1 : 0) << "\n";
  os << "batch_size\t" << batch_size << "\n";
  os << "max_epochs\t" << max_epochs << "\n";
  os << "patience\t" << patience << "\n";
  os << "learning_rate\t" << fmt_pct(learning_rate) << "\n";
  os << "clean_acc\t" << fmt_pct(clean_acc) << "\n";
  for (const auto& [pos, acc] : attack_acc) os << "attack_acc." << pos << "\t" << fmt_pct(acc) << "\n";
  os << "truncated_triggers\t" << truncated_triggers << "\n";
  return os.str();
}

std::string RunRecord::to_text() const {
  return canonical_text() + "# volatile\nwall_seconds\t" + fmt_pct(wall_seconds) + "\n";
}

RunRecord RunRecord::from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "# run-record v1")
    throw std::runtime_error("run record: bad header");
  RunRecord r;
  bool in_volatile = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "# volatile") {
      in_volatile = true;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("run record: malformed line: " + line);
    const std::string key = line.substr(0, tab), value = line.substr(tab + 1);
    if (key == "config_hash") r.config_hash = std::stoull(value);
    else if (key == "global_seed") r.global_seed = std::stoull(value);
    else if (key == "repeat_index") r.repeat_index = std::stoi(value);
    else if (key == "arch") r.arch = value;
    else if (key == "dataset") r.dataset = value;
    else if (key == "run_kind") r.run_kind = value;
    else if (key == "train_position") r.train_position = value;
    else if (key == "poison_count") r.poison_count = std::stoi(value);
    else if (key == "target_label") r.target_label = std::stoi(value);
    else if (key == "epochs_executed") r.epochs_executed = std::stoi(value);
    else if (key == "best_epoch") r.best_epoch = std::stoi(value);
    else if (key == "diverged") r.diverged = value == "1";
    else if (key == "overfit_mode") r.overfit_mode = value == "1";
    else if (key == "batch_size") r.batch_size = std::stoi(value);
    else if (key == "max_epochs") r.max_epochs = std::stoi(value);
    else if (key == "patience") r.patience = std::stoi(value);
    else if (key == "learning_rate") r.learning_rate = std::stod(value);
    else if (key == "clean_acc") r.clean_acc = std::stod(value);
    else if (key.rfind("attack_acc.", 0) == 0) r.attack_acc[key.substr(11)] = std::stod(value);
    else if (key == "truncated_triggers") r.truncated_triggers = std::stoi(value);
    else if (key == "wall_seconds" && in_volatile) r.wall_seconds = std::stod(value);
    else throw std::runtime_error("run record: unknown key: " + key);
  }
  return r;
}

void RunRecord::save(const std::filesystem::path& path) const {
  io::write_text_file(path, to_text());
}

RunRecord RunRecord::load(const std::filesystem::path& path) {
  return from_text(io::read_text_file(path));
}

}  // namespace gapdoor

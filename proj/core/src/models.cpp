#include "gapdoor/models.hpp"

#include <json.hpp>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace gapdoor {

using nn::Activation;
using nn::Conv2D;
using nn::Dense;
using nn::LayerPtr;
using nn::Padding;

std::string family_name(Family f) {
  switch (f) {
    case Family::sound_large: return "sound_large";
    case Family::sound_small: return "sound_small";
    case Family::text_troj: return "text_troj";
    case Family::text_mata: return "text_mata";
    case Family::text_tf: return "text_tf";
    case Family::image_strip: return "image_strip";
  }
  throw std::invalid_argument("unknown family");
}

Family family_from_string(const std::string& s) {
  for (Family f : {Family::sound_large, Family::sound_small, Family::text_troj,
                   Family::text_mata, Family::text_tf, Family::image_strip})
    if (family_name(f) == s) return f;
  throw std::invalid_argument("unknown family: " + s);
}

std::string head_name(Head h) { return h == Head::gap ? "gap" : "fc"; }

Head head_from_string(const std::string& s) {
  if (s == "gap") return Head::gap;
  if (s == "fc" || s == "flatten") return Head::fc;
  throw std::invalid_argument("unknown head: " + s);
}

Modality ArchSpec::modality() const {
  switch (family) {
    case Family::sound_large:
    case Family::sound_small: return Modality::audio;
    case Family::text_troj:
    case Family::text_mata:
    case Family::text_tf: return Modality::text;
    case Family::image_strip: return Modality::image;
  }
  throw std::invalid_argument("unknown family");
}

nn::Shape ArchSpec::input_shape() const {
  switch (modality()) {
    case Modality::audio: return {98, 40, 1};  // MFCC frames x coefficients
    case Modality::text: return {250};         // token ids
    case Modality::image: return {32, 32, 3};
  }
  throw std::invalid_argument("unknown modality");
}

int ArchSpec::output_units() const {
  return modality() == Modality::text ? 1 : num_classes;
}

std::string ArchSpec::name() const {
  return family_name(family) + "/" + head_name(head) + "/" + std::to_string(num_classes);
}

void ArchSpec::validate() const {
  switch (modality()) {
    case Modality::audio:
      if (num_classes != 10 && num_classes != 30)
        throw std::invalid_argument("sound families support 10 or 30 classes");
      break;
    case Modality::text:
      if (num_classes != 2)
        throw std::invalid_argument("text families are binary (num_classes = 2)");
      break;
    case Modality::image:
      if (num_classes != 10)
        throw std::invalid_argument("image_strip supports 10 classes");
      break;
  }
}

namespace {

LayerPtr conv(int64_t f, int64_t kh, int64_t kw, Padding pad, Activation act, double l2 = 0.0) {
  return std::make_unique<Conv2D>(f, kh, kw, pad, act, l2);
}
LayerPtr dense(int64_t u, Activation act) { return std::make_unique<Dense>(u, act); }
LayerPtr pool(int64_t ph, int64_t pw) { return std::make_unique<nn::MaxPool2D>(ph, pw); }
LayerPtr gap() { return std::make_unique<nn::GlobalAvgPool>(); }
LayerPtr flatten() { return std::make_unique<nn::Flatten>(); }
LayerPtr dropout(double r) { return std::make_unique<nn::Dropout>(r); }
LayerPtr bnorm() { return std::make_unique<nn::BatchNorm>(); }

void add_sound_small(nn::Net& net, Head head, int classes) {
  net.add(conv(16, 21, 3, Padding::valid, Activation::relu));
  net.add(pool(2, 2));
  net.add(conv(32, 4, 12, Padding::valid, Activation::relu));
  net.add(pool(2, 2));
  if (head == Head::fc) {
    net.add(flatten());
    net.add(dense(128, Activation::relu));
  } else {
    net.add(gap());
  }
  net.add(dense(classes, Activation::linear));
}

void add_sound_large(nn::Net& net, Head head, int classes) {
  net.add(conv(64, 3, 3, Padding::valid, Activation::relu));
  net.add(pool(2, 2));
  net.add(conv(128, 3, 3, Padding::same, Activation::relu));
  net.add(conv(128, 3, 3, Padding::same, Activation::relu));
  net.add(pool(2, 2));
  net.add(conv(256, 3, 3, Padding::same, Activation::relu));
  net.add(conv(256, 3, 3, Padding::same, Activation::relu));
  net.add(pool(2, 2));
  net.add(conv(256, 3, 3, Padding::same, Activation::relu));
  net.add(conv(256, 3, 3, Padding::same, Activation::relu));
  net.add(conv(256, 3, 3, Padding::same, Activation::relu));
  if (head == Head::fc) {
    net.add(flatten());
    net.add(dense(256, Activation::relu));
    net.add(dropout(0.5));
  } else {
    net.add(gap());
  }
  net.add(dense(classes, Activation::linear));
}

void add_text_troj(nn::Net& net, Head head) {
  const int64_t emb = 100, seq = 250;
  net.add(std::make_unique<nn::Embedding>(10000, emb));
  net.add(std::make_unique<nn::Reshape>(nn::Shape{seq, emb, 1}));

  std::vector<std::vector<LayerPtr>> branches;
  for (int64_t k : {3, 4, 5}) {
    std::vector<LayerPtr> branch;
    branch.push_back(conv(100, k, emb, Padding::valid, Activation::relu, 0.001));
    if (head == Head::fc) branch.push_back(pool(seq - k + 1, 1));
    branches.push_back(std::move(branch));
  }
  // fc: each branch max-pools to (1,1,100) and channels concatenate to 300;
  // gap: raw branch maps concatenate along time and one spatial average
  // produces the 100-wide vector.
  const int axis = head == Head::fc ? 2 : 0;
  net.add(std::make_unique<nn::Parallel>(std::move(branches), axis));
  if (head == Head::fc)
    net.add(flatten());
  else
    net.add(gap());
  net.add(dropout(0.5));
  net.add(dense(1, Activation::linear));
}

void add_text_mata(nn::Net& net, Head head) {
  net.add(std::make_unique<nn::Embedding>(10000, 64));
  net.add(std::make_unique<nn::Reshape>(nn::Shape{250, 1, 64}));
  net.add(conv(64, 3, 1, Padding::valid, Activation::relu));
  net.add(pool(2, 1));
  if (head == Head::fc)
    net.add(flatten());
  else
    net.add(gap());
  net.add(dense(32, Activation::relu));
  net.add(dense(1, Activation::linear));
}

void add_text_tf(nn::Net& net, Head head) {
  // The published counts require one spare embedding row (vocab+1).
  net.add(std::make_unique<nn::Embedding>(10001, 16));
  net.add(dropout(0.2));
  if (head == Head::fc) {
    net.add(flatten());
    net.add(dense(16, Activation::linear));
  } else {
    net.add(gap());
  }
  net.add(dropout(0.2));
  net.add(dense(1, Activation::linear));
}

void add_image_strip(nn::Net& net, Head head, int classes) {
  const struct {
    int64_t filters;
    double drop;
  } blocks[] = {{32, 0.2}, {64, 0.3}, {128, 0.4}};
  for (const auto& b : blocks) {
    net.add(conv(b.filters, 3, 3, Padding::same, Activation::elu));
    net.add(bnorm());
    net.add(conv(b.filters, 3, 3, Padding::same, Activation::elu));
    net.add(bnorm());
    net.add(pool(2, 2));
    net.add(dropout(b.drop));
  }
  if (head == Head::fc)
    net.add(flatten());
  else
    net.add(gap());
  net.add(dense(classes, Activation::linear));
}

}  // namespace

nn::Net build_model(const ArchSpec& spec, uint64_t seed) {
  spec.validate();
  nn::Net net;
  switch (spec.family) {
    case Family::sound_small: add_sound_small(net, spec.head, spec.num_classes); break;
    case Family::sound_large: add_sound_large(net, spec.head, spec.num_classes); break;
    case Family::text_troj: add_text_troj(net, spec.head); break;
    case Family::text_mata: add_text_mata(net, spec.head); break;
    case Family::text_tf: add_text_tf(net, spec.head); break;
    case Family::image_strip: add_image_strip(net, spec.head, spec.num_classes); break;
  }
  net.build(spec.input_shape(), derive_seed(seed, "model." + spec.name()));
  return net;
}

int64_t count_params(const nn::Net& net) { return net.param_count(); }

namespace {

int default_classes(Family f) {
  switch (f) {
    case Family::sound_large:
    case Family::sound_small: return 10;
    case Family::text_troj:
    case Family::text_mata:
    case Family::text_tf: return 2;
    case Family::image_strip: return 10;
  }
  return 0;
}

int64_t params_of(Family f, Head h) {
  nn::Net net = build_model({f, h, default_classes(f)}, 0);
  return count_params(net);
}

ParamCheck exact_check(const std::string& name, Family f, Head h, int64_t expected) {
  ParamCheck c;
  c.name = name;
  c.expected = expected;
  c.actual = params_of(f, h);
  c.pass = c.actual == expected;
  c.detail = "expected " + std::to_string(expected) + ", built " + std::to_string(c.actual);
  return c;
}

}  // namespace

std::vector<ParamCheck> verify_param_table() {
  std::vector<ParamCheck> checks;
  checks.push_back(exact_check("sound_small/fc", Family::sound_small, Head::fc, 321962));
  checks.push_back(exact_check("sound_small/gap", Family::sound_small, Head::gap, 25962));
  checks.push_back(exact_check("text_troj/fc", Family::text_troj, Head::fc, 1120601));
  checks.push_back(exact_check("text_troj/gap", Family::text_troj, Head::gap, 1120401));
  checks.push_back(exact_check("text_tf/fc", Family::text_tf, Head::fc, 224049));
  checks.push_back(exact_check("text_tf/gap", Family::text_tf, Head::gap, 160033));
  checks.push_back(exact_check("image_strip/fc", Family::image_strip, Head::fc, 309290));
  checks.push_back(exact_check("image_strip/gap", Family::image_strip, Head::gap, 290090));

  {
    ParamCheck c;
    c.name = "text_mata/fc-gap delta";
    c.expected = 251904;
    c.actual = params_of(Family::text_mata, Head::fc) - params_of(Family::text_mata, Head::gap);
    c.pass = c.actual == c.expected;
    c.detail = "expected delta " + std::to_string(c.expected) + ", built " +
               std::to_string(c.actual);
    checks.push_back(c);
  }
  {
    // Published numbers for the large sound network are approximate; the
    // binding facts are the 256-wide pooled vector and a 45-55% reduction.
    ParamCheck c;
    c.name = "sound_large/gap reduction";
    const int64_t fc = params_of(Family::sound_large, Head::fc);
    const int64_t gp = params_of(Family::sound_large, Head::gap);
    const double reduction = static_cast<double>(fc - gp) / static_cast<double>(fc);
    nn::Net net = build_model({Family::sound_large, Head::gap, 10}, 0);
    int64_t pooled_width = 0;
    for (const auto& layer : net.layers())
      if (layer->kind() == "GlobalAvgPool") pooled_width = layer->out_shape()[0];
    c.actual = static_cast<int64_t>(reduction * 1000.0);
    c.pass = reduction >= 0.45 && reduction <= 0.55 && pooled_width == 256;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "reduction %.1f%% (fc %lld, gap %lld), pooled width %lld",
                  reduction * 100.0, static_cast<long long>(fc), static_cast<long long>(gp),
                  static_cast<long long>(pooled_width));
    c.detail = buf;
    checks.push_back(c);
  }
  return checks;
}

std::string architecture_manifest() {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  for (Family f : {Family::sound_large, Family::sound_small, Family::text_troj,
                   Family::text_mata, Family::text_tf, Family::image_strip}) {
    nlohmann::ordered_json fam;
    for (Head h : {Head::fc, Head::gap}) {
      ArchSpec spec{f, h, default_classes(f)};
      nn::Net net = build_model(spec, 0);
      nlohmann::ordered_json entry;
      entry["params"] = count_params(net);
      nlohmann::ordered_json layers = nlohmann::ordered_json::array();
      std::string structure = net.structure();
      size_t start = 0;
      while (start < structure.size()) {
        size_t end = structure.find('\n', start);
        if (end == std::string::npos) end = structure.size();
        layers.push_back(structure.substr(start, end - start));
        start = end + 1;
      }
      entry["layers"] = layers;
      fam[head_name(h)] = entry;
    }
    doc[family_name(f)] = fam;
  }
  return doc.dump(2) + "\n";
}

}  // namespace gapdoor

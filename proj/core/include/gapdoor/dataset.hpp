#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "gapdoor/io.hpp"
#include "gapdoor/tensor.hpp"
#include "gapdoor/trigger.hpp"

namespace gapdoor {

using TokenSeq = std::vector<std::string>;

/// Raw payload before feature extraction: waveform, cleaned token list,
/// or HWC image in [0,1] (after normalize) / [0,255] (as loaded).
using Payload = std::variant<io::Waveform, TokenSeq, Tensor>;

struct Sample {
  std::string id;  // stable identity (file path or batch:index)
  int label = 0;
  Payload payload;
};

struct DatasetSplit {
  Modality modality = Modality::image;
  std::string name;  // dataset tag, e.g. "cifar10"
  std::vector<std::string> class_names;
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// Lowercases, drops "<br />" markup and ASCII punctuation, splits on
/// whitespace. This is the cleaning step every text sample goes through
/// before triggering and vectorization.
TokenSeq tokenize_clean(const std::string& raw);

/// Speech Commands directory layout: one directory per word plus
/// validation_list.txt / testing_list.txt. num_classes selects the 10
/// command words or the 30-word vocabulary. Clips are zero-padded at the
/// end to exactly 16000 samples.
DatasetSplit load_speech_commands(const std::filesystem::path& dir, int num_classes);

/// Any Speech-Commands-shaped directory; classes are the subdirectories in
/// sorted order (used by the synthetic audio surrogate).
DatasetSplit load_audio_dir(const std::filesystem::path& dir, const std::string& name,
                            const std::vector<std::string>& class_names);

/// aclImdb layout: {train,test}/{neg,pos}/*.txt. 20% of train is held out
/// for validation (seeded). Labels: neg=0, pos=1.
DatasetSplit load_imdb_dir(const std::filesystem::path& dir, const std::string& name,
                           uint64_t holdout_seed);

/// CIFAR-10 binary batches: data_batch_1..4 -> train, data_batch_5 ->
/// validation, test_batch -> test. Pixels are returned in [0,255].
DatasetSplit load_cifar10(const std::filesystem::path& dir);

/// CIFAR-binary-shaped directory with arbitrary record counts per file
/// (used by the synthetic image surrogate).
DatasetSplit load_cifar_like(const std::filesystem::path& dir, const std::string& name,
                             const std::vector<std::string>& class_names);

const std::vector<std::string>& speech_commands_words_10();
const std::vector<std::string>& speech_commands_words_30();

}  // namespace gapdoor

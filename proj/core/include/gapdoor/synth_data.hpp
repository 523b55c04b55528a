#pragma once

#include <cstdint>
#include <filesystem>

namespace gapdoor::synth {

/// Sizing for generated stand-in datasets. These are written in the same
/// on-disk formats as the published corpora so every loader, list file and
/// record parser runs unmodified; the content is class-separable synthetic
/// signal so small models can actually fit it.
struct SynthSpec {
  int train_per_class = 40;
  int val_per_class = 8;
  int test_per_class = 8;
  uint64_t seed = 1234;
};

/// Keyword-audio layout: <root>/<word>/<file>.wav plus validation_list.txt
/// and testing_list.txt naming the held-out clips. Ten classes, one second
/// of 16 kHz audio each; each class is a band-limited tone chord under
/// 3.5 kHz (well away from the 7 kHz trigger band) with noise and random
/// gain/phase.
void write_speech_dir(const std::filesystem::path& root, const SynthSpec& spec);

/// Review-sentiment layout: <root>/{train,test}/{neg,pos}/<id>_<rating>.txt.
/// Documents mix class-typical sentiment words with shared filler, include
/// HTML breaks and punctuation, and a slice of documents exceeds the
/// 250-token sequence limit so truncation paths are exercised.
void write_imdb_dir(const std::filesystem::path& root, const SynthSpec& spec);

/// CIFAR-style binary layout: data_batch_1..5.bin and test_batch.bin of
/// 3073-byte records (label byte + channel-planar RGB). Ten classes, each a
/// distinct hue plus spatial sinusoid with pixel noise.
void write_cifar_dir(const std::filesystem::path& root, const SynthSpec& spec);

}  // namespace gapdoor::synth

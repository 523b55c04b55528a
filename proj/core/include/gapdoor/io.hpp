#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gapdoor::io {

/// Mono PCM audio in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;
};

/// Reads a 16-bit PCM RIFF/WAVE file (mono or first channel of multichannel).
Waveform read_wav(const std::filesystem::path& path);

/// Writes mono 16-bit PCM. Samples are clipped to [-1, 1] then quantized
/// with round-half-away-from-zero, matching the common sox/libsndfile output.
void write_wav(const std::filesystem::path& path, const Waveform& w);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Little-endian binary stream helpers for the weight/cache formats.
class BinWriter {
 public:
  explicit BinWriter(const std::filesystem::path& path);
  ~BinWriter();
  BinWriter(const BinWriter&) = delete;
  BinWriter& operator=(const BinWriter&) = delete;

  void u32(uint32_t v);
  void u64(uint64_t v);
  void i64(int64_t v);
  void f32(float v);
  void bytes(const void* p, size_t n);
  void str(const std::string& s);
  void close();

 private:
  void* f_ = nullptr;
  std::filesystem::path path_;
};

class BinReader {
 public:
  explicit BinReader(const std::filesystem::path& path);
  ~BinReader();
  BinReader(const BinReader&) = delete;
  BinReader& operator=(const BinReader&) = delete;

  uint32_t u32();
  uint64_t u64();
  int64_t i64();
  float f32();
  void bytes(void* p, size_t n);
  std::string str();
  bool eof();

 private:
  void* f_ = nullptr;
  std::filesystem::path path_;
};

}  // namespace gapdoor::io

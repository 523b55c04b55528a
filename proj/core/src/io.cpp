#include "gapdoor/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gapdoor::io {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

std::vector<uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path.string());
  f.seekg(0, std::ios::end);
  std::vector<uint8_t> buf(static_cast<size_t>(f.tellg()));
  f.seekg(0);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  return buf;
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path.string());

  int channels = 0, bits = 0;
  int sample_rate = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  size_t off = 12;
  while (off + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + off);
    const uint32_t len = rd_u32(buf.data() + off + 4);
    const uint8_t* body = buf.data() + off + 8;
    if (off + 8 + len > buf.size()) break;
    if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
      const uint16_t fmt = rd_u16(body);
      if (fmt != 1)  // PCM only
        throw std::runtime_error("unsupported WAV encoding in " + path.string());
      channels = rd_u16(body + 2);
      sample_rate = static_cast<int>(rd_u32(body + 4));
      bits = rd_u16(body + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = body;
      data_len = len;
    }
    off += 8 + len + (len & 1);
  }
  if (!data || channels <= 0 || bits != 16)
    throw std::runtime_error("missing 16-bit PCM data chunk in " + path.string());

  const size_t frames = data_len / (2 * static_cast<size_t>(channels));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    const int16_t s = static_cast<int16_t>(rd_u16(data + 2 * static_cast<size_t>(channels) * i));
    w.samples[i] = static_cast<float>(s) / 32768.0f;
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const uint32_t n = static_cast<uint32_t>(w.samples.size());
  const uint32_t data_len = n * 2;
  const uint32_t rate = static_cast<uint32_t>(w.sample_rate);
  const uint32_t byte_rate = rate * 2;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write file: " + path.string());

  auto u32 = [&](uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  auto u16 = [&](uint16_t v) {
    uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
  };

  f.write("RIFF", 4);
  u32(36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(rate);
  u32(byte_rate);
  u16(2);   // block align
  u16(16);  // bits
  f.write("data", 4);
  u32(data_len);
  for (float s : w.samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    const float scaled = c * 32767.0f;
    const int16_t q = static_cast<int16_t>(scaled >= 0 ? scaled + 0.5f : scaled - 0.5f);
    u16(static_cast<uint16_t>(q));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write file: " + path.string());
  f << content;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::istringstream is(read_text_file(path));
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

BinWriter::BinWriter(const std::filesystem::path& path) : path_(path) {
  f_ = std::fopen(path.string().c_str(), "wb");
  if (!f_) throw std::runtime_error("cannot write file: " + path.string());
}
BinWriter::~BinWriter() { close(); }
void BinWriter::close() {
  if (f_) {
    std::fclose(static_cast<FILE*>(f_));
    f_ = nullptr;
  }
}
void BinWriter::bytes(const void* p, size_t n) {
  if (std::fwrite(p, 1, n, static_cast<FILE*>(f_)) != n)
    throw std::runtime_error("short write: " + path_.string());
}
void BinWriter::u32(uint32_t v) { bytes(&v, 4); }
void BinWriter::u64(uint64_t v) { bytes(&v, 8); }
void BinWriter::i64(int64_t v) { bytes(&v, 8); }
void BinWriter::f32(float v) { bytes(&v, 4); }
void BinWriter::str(const std::string& s) {
  u64(s.size());
  bytes(s.data(), s.size());
}

BinReader::BinReader(const std::filesystem::path& path) : path_(path) {
  f_ = std::fopen(path.string().c_str(), "rb");
  if (!f_) throw std::runtime_error("cannot open file: " + path.string());
}
BinReader::~BinReader() {
  if (f_) std::fclose(static_cast<FILE*>(f_));
}
void BinReader::bytes(void* p, size_t n) {
  if (std::fread(p, 1, n, static_cast<FILE*>(f_)) != n)
    throw std::runtime_error("short read: " + path_.string());
}
uint32_t BinReader::u32() {
  uint32_t v;
  bytes(&v, 4);
  return v;
}
uint64_t BinReader::u64() {
  uint64_t v;
  bytes(&v, 8);
  return v;
}
int64_t BinReader::i64() {
  int64_t v;
  bytes(&v, 8);
  return v;
}
float BinReader::f32() {
  float v;
  bytes(&v, 4);
  return v;
}
std::string BinReader::str() {
  std::string s(u64(), '\0');
  bytes(s.data(), s.size());
  return s;
}
bool BinReader::eof() {
  FILE* f = static_cast<FILE*>(f_);
  const int c = std::fgetc(f);
  if (c == EOF) return true;
  std::ungetc(c, f);
  return false;
}

}  // namespace gapdoor::io

#include "gapdoor/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "gapdoor/io.hpp"
#include "gapdoor/rng.hpp"

namespace gapdoor {

namespace {

// The FFTW planner is not thread-safe; executing distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filterbank over FFT bin center frequencies, filters equally
// spaced on the mel scale between fmin and fmax.
std::vector<std::vector<float>> mel_filterbank(const FeatureConfig& cfg, int sample_rate) {
  const int bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.mel_fmin_hz);
  const double mel_hi = hz_to_mel(cfg.mel_fmax_hz);
  std::vector<double> edges(cfg.mel_bands + 2);
  for (int i = 0; i < static_cast<int>(edges.size()); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.mel_bands + 1));

  std::vector<std::vector<float>> fb(cfg.mel_bands, std::vector<float>(bins, 0.0f));
  for (int m = 0; m < cfg.mel_bands; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / cfg.fft_size;
      double w = 0.0;
      if (f > left && f < center)
        w = (f - left) / (center - left);
      else if (f >= center && f < right)
        w = (right - f) / (right - center);
      fb[m][k] = static_cast<float>(w);
    }
  }
  return fb;
}

}  // namespace

uint64_t FeatureConfig::hash() const { return fnv1a64(to_json()); }

std::string FeatureConfig::to_json() const {
  std::ostringstream os;
  os << "{\"mel_bands\":" << mel_bands << ",\"window_s\":" << window_s
     << ",\"step_s\":" << step_s << ",\"fft_size\":" << fft_size
     << ",\"mel_fmin_hz\":" << mel_fmin_hz << ",\"mel_fmax_hz\":" << mel_fmax_hz
     << ",\"log_floor\":" << log_floor << ",\"vocab_size\":" << vocab_size
     << ",\"seq_len\":" << seq_len << ",\"intensity_max\":" << intensity_max << "}";
  return os.str();
}

int mfcc_frame_count(int64_t clip_len, const FeatureConfig& cfg, int sample_rate) {
  const int win = static_cast<int>(std::lround(cfg.window_s * sample_rate));
  const int step = static_cast<int>(std::lround(cfg.step_s * sample_rate));
  if (clip_len < win) return 0;
  return 1 + static_cast<int>((clip_len - win) / step);
}

Tensor extract_mfcc(const io::Waveform& clip, const FeatureConfig& cfg) {
  const int win = static_cast<int>(std::lround(cfg.window_s * clip.sample_rate));
  const int step = static_cast<int>(std::lround(cfg.step_s * clip.sample_rate));
  const auto len = static_cast<int64_t>(clip.samples.size());
  if (len < win)
    throw std::invalid_argument("extract_mfcc: clip shorter than one analysis window");
  if (win > cfg.fft_size)
    throw std::invalid_argument("extract_mfcc: analysis window exceeds FFT size");
  const int frames = 1 + static_cast<int>((len - win) / step);
  const int bins = cfg.fft_size / 2 + 1;

  // Periodic Hann window.
  std::vector<double> window(win);
  for (int n = 0; n < win; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / win);

  const auto fb = mel_filterbank(cfg, clip.sample_rate);

  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    in = fftw_alloc_real(cfg.fft_size);
    out = fftw_alloc_complex(bins);
    plan = fftw_plan_dft_r2c_1d(cfg.fft_size, in, out, FFTW_ESTIMATE);
  }

  Tensor mfcc({frames, cfg.mel_bands});
  std::vector<double> power(bins), logmel(cfg.mel_bands);
  const double dct_scale = std::sqrt(2.0 / cfg.mel_bands);
  const double dct_scale0 = std::sqrt(1.0 / cfg.mel_bands);

  for (int t = 0; t < frames; ++t) {
    const int64_t start = static_cast<int64_t>(t) * step;
    for (int n = 0; n < win; ++n) in[n] = clip.samples[start + n] * window[n];
    std::fill(in + win, in + cfg.fft_size, 0.0);
    fftw_execute(plan);
    for (int k = 0; k < bins; ++k)
      power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];

    for (int m = 0; m < cfg.mel_bands; ++m) {
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += fb[m][k] * power[k];
      logmel[m] = std::log(std::max(e, cfg.log_floor));
    }
    // Orthonormal DCT-II over the mel axis; all mel_bands coefficients kept.
    for (int j = 0; j < cfg.mel_bands; ++j) {
      double c = 0.0;
      for (int m = 0; m < cfg.mel_bands; ++m)
        c += logmel[m] * std::cos(M_PI * j * (m + 0.5) / cfg.mel_bands);
      mfcc.at(t, j) = static_cast<float>(c * (j == 0 ? dct_scale0 : dct_scale));
    }
  }

  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  return mfcc;
}

void TextVectorizer::fit(const std::vector<const TokenSeq*>& corpus, int vocab_size) {
  if (vocab_size < 3) throw std::invalid_argument("TextVectorizer: vocab_size must be >= 3");
  std::map<std::string, int64_t> counts;
  for (const auto* seq : corpus)
    for (const auto& w : *seq) ++counts[w];

  // Rank by count descending, ties broken alphabetically (the map iteration
  // order), so the fit is independent of corpus traversal order.
  std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto keep = std::min<size_t>(ranked.size(), static_cast<size_t>(vocab_size) - 2);

  index_.clear();
  for (size_t i = 0; i < keep; ++i) index_[ranked[i].first] = static_cast<int>(i) + 2;
  fitted_ = true;
}

std::vector<int32_t> TextVectorizer::transform(const TokenSeq& tokens, int seq_len) const {
  if (!fitted_) throw std::logic_error("TextVectorizer: transform before fit");
  std::vector<int32_t> ids(seq_len, kPadId);
  const auto n = std::min<size_t>(tokens.size(), static_cast<size_t>(seq_len));
  for (size_t i = 0; i < n; ++i) ids[i] = id_of(tokens[i]);
  return ids;
}

std::vector<int32_t> TextVectorizer::vectorize(const std::string& raw,
                                               const FeatureConfig& cfg) const {
  return transform(tokenize_clean(raw), cfg.seq_len);
}

int TextVectorizer::id_of(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kOovId : it->second;
}

void normalize_images(DatasetSplit& split, const FeatureConfig& cfg) {
  if (split.modality != Modality::image)
    throw std::invalid_argument("normalize_images: split is not an image dataset");
  const float scale = cfg.intensity_max / 255.0f;
  for (auto* part : {&split.train, &split.validation, &split.test})
    for (auto& s : *part) std::get<Tensor>(s.payload).vec() *= scale;
}

Featurized featurize_audio(const std::vector<Sample>& samples, const FeatureConfig& cfg) {
  Featurized out;
  if (samples.empty()) return out;
  const auto& first = std::get<io::Waveform>(samples.front().payload);
  const Tensor probe = extract_mfcc(first, cfg);
  const int64_t frames = probe.dim(0);

  out.x = Tensor({static_cast<int64_t>(samples.size()), frames, cfg.mel_bands, 1});
  out.labels.reserve(samples.size());
  out.ids.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const Tensor m = extract_mfcc(std::get<io::Waveform>(samples[i].payload), cfg);
    if (m.dim(0) != frames)
      throw std::invalid_argument("featurize_audio: inconsistent clip lengths in split");
    std::copy(m.data(), m.data() + m.size(), out.x.data() + static_cast<int64_t>(i) * m.size());
    out.labels.push_back(samples[i].label);
    out.ids.push_back(samples[i].id);
  }
  return out;
}

Featurized featurize_image(const std::vector<Sample>& samples) {
  Featurized out;
  if (samples.empty()) return out;
  const auto& first = std::get<Tensor>(samples.front().payload);
  out.x = Tensor({static_cast<int64_t>(samples.size()), first.dim(0), first.dim(1),
                  first.dim(2)});
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& img = std::get<Tensor>(samples[i].payload);
    if (img.size() != first.size())
      throw std::invalid_argument("featurize_image: inconsistent image shapes");
    std::copy(img.data(), img.data() + img.size(),
              out.x.data() + static_cast<int64_t>(i) * img.size());
    out.labels.push_back(samples[i].label);
    out.ids.push_back(samples[i].id);
  }
  return out;
}

Featurized featurize_text(const std::vector<Sample>& samples, const TextVectorizer& vec,
                          const FeatureConfig& cfg,
                          const std::vector<std::string>* trigger_tokens) {
  Featurized out;
  out.x = Tensor({static_cast<int64_t>(samples.size()),
                  static_cast<int64_t>(cfg.seq_len)});
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& tokens = std::get<TokenSeq>(samples[i].payload);
    const auto ids = vec.transform(tokens, cfg.seq_len);
    std::copy(ids.begin(), ids.end(), out.x.data() + static_cast<int64_t>(i) * cfg.seq_len);
    out.labels.push_back(samples[i].label);
    out.ids.push_back(samples[i].id);

    if (trigger_tokens && !trigger_tokens->empty() &&
        tokens.size() > static_cast<size_t>(cfg.seq_len)) {
      // A trigger run survives only if it ends within the kept prefix.
      const auto& trig = *trigger_tokens;
      bool survives = false;
      if (tokens.size() >= trig.size()) {
        for (size_t s = 0; s + trig.size() <= static_cast<size_t>(cfg.seq_len); ++s) {
          if (std::equal(trig.begin(), trig.end(), tokens.begin() + s)) {
            survives = true;
            break;
          }
        }
      }
      bool present = false;
      if (tokens.size() >= trig.size()) {
        for (size_t s = 0; s + trig.size() <= tokens.size(); ++s) {
          if (std::equal(trig.begin(), trig.end(), tokens.begin() + s)) {
            present = true;
            break;
          }
        }
      }
      if (present && !survives) ++out.truncated_trigger_count;
    }
  }
  return out;
}

namespace {

constexpr uint32_t kCacheMagic = 0x47444643;  // "GDFC"
constexpr uint32_t kCacheVersion = 1;

void write_featurized(io::BinWriter& w, const Featurized& f) {
  w.u32(static_cast<uint32_t>(f.x.shape().size()));
  for (auto d : f.x.shape()) w.i64(d);
  w.u64(static_cast<uint64_t>(f.x.size()));
  w.bytes(f.x.data(), static_cast<size_t>(f.x.size()) * sizeof(float));
  w.u64(f.labels.size());
  for (int v : f.labels) w.u32(static_cast<uint32_t>(v));
  w.u64(f.ids.size());
  for (const auto& s : f.ids) w.str(s);
  w.u32(static_cast<uint32_t>(f.truncated_trigger_count));
}

Featurized read_featurized(io::BinReader& r) {
  Featurized f;
  const auto rank = r.u32();
  std::vector<int64_t> shape(rank);
  for (auto& d : shape) d = r.i64();
  f.x = Tensor(shape);
  const auto n = r.u64();
  if (n != static_cast<uint64_t>(f.x.size()))
    throw std::runtime_error("feature cache: size mismatch");
  r.bytes(f.x.data(), n * sizeof(float));
  f.labels.resize(r.u64());
  for (auto& v : f.labels) v = static_cast<int>(r.u32());
  f.ids.resize(r.u64());
  for (auto& s : f.ids) s = r.str();
  f.truncated_trigger_count = static_cast<int>(r.u32());
  return f;
}

}  // namespace

bool load_feature_cache(const std::filesystem::path& path, const std::string& dataset,
                        uint64_t feature_hash, uint64_t seed, Featurized out[3]) {
  if (!std::filesystem::exists(path)) return false;
  try {
    io::BinReader r(path);
    if (r.u32() != kCacheMagic || r.u32() != kCacheVersion) return false;
    if (r.str() != dataset || r.u64() != feature_hash || r.u64() != seed) return false;
    for (int i = 0; i < 3; ++i) out[i] = read_featurized(r);
    return true;
  } catch (const std::exception&) {
    return false;  // stale or torn cache: caller refeaturizes and rewrites
  }
}

void save_feature_cache(const std::filesystem::path& path, const std::string& dataset,
                        uint64_t feature_hash, uint64_t seed, const Featurized in[3]) {
  std::filesystem::create_directories(path.parent_path());
  io::BinWriter w(path);
  w.u32(kCacheMagic);
  w.u32(kCacheVersion);
  w.str(dataset);
  w.u64(feature_hash);
  w.u64(seed);
  for (int i = 0; i < 3; ++i) write_featurized(w, in[i]);
}

}  // namespace gapdoor

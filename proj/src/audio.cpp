#include "capypipe/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "capypipe/errors.hpp"
#include "capypipe/image.hpp"
#include "capypipe/tokens.hpp"

namespace capypipe {

namespace {

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF),
                     static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF),
                     static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Index into [0, n) by mirror reflection about the end samples (no edge
// repeat), bouncing as often as needed for very short inputs.
long reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz >= min_log_hz) return min_log_mel + std::log(hz / min_log_hz) / logstep;
  return hz / f_sp;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel >= min_log_mel) return min_log_hz * std::exp(logstep * (mel - min_log_mel));
  return f_sp * mel;
}

constexpr int kFftBins = MelSpectrogram::kWindow / 2 + 1;

std::vector<double> mel_edges_hz() {
  const int n = MelSpectrogram::kMels + 2;
  const double lo = hz_to_mel(0.0);
  const double hi = hz_to_mel(kTargetRate / 2.0);
  std::vector<double> hz(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    hz[static_cast<size_t>(i)] = mel_to_hz(lo + (hi - lo) * i / (n - 1));
  }
  return hz;
}

}  // namespace

DecodedAudio decode_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open audio '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(name + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  size_t data_size = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(reinterpret_cast<const char*>(&bytes[pos]), 4);
    const size_t size = le32(&bytes[pos + 4]);
    const size_t body = pos + 8;
    const size_t available = std::min(size, bytes.size() - body);
    if (id == "fmt ") {
      if (available < 16) {
        throw FormatError(name + ": 'fmt ' chunk too short (" +
                          std::to_string(size) + " bytes)");
      }
      format = le16(&bytes[body]);
      channels = le16(&bytes[body + 2]);
      rate = le32(&bytes[body + 4]);
      bits = le16(&bytes[body + 14]);
      if (format == kFormatExtensible) {
        if (available < 26) {
          throw FormatError(name + ": truncated WAVE_FORMAT_EXTENSIBLE 'fmt ' chunk");
        }
        format = le16(&bytes[body + 24]);  // first two bytes of SubFormat GUID
      }
      have_fmt = true;
    } else if (id == "data") {
      data = &bytes[body];
      data_size = available;
    }
    pos = body + size + (size & 1);
  }

  if (!have_fmt) throw FormatError(name + ": missing 'fmt ' chunk");
  if (data == nullptr) throw FormatError(name + ": missing 'data' chunk");
  if (format != kFormatPcm) {
    throw FormatError(name + ": unsupported format tag " +
                      std::to_string(format) + " in 'fmt ' chunk (PCM only)");
  }
  if (bits != 16) {
    throw FormatError(name + ": unsupported bit depth " + std::to_string(bits) +
                      " in 'fmt ' chunk (16 only)");
  }
  if (channels != 1 && channels != 2) {
    throw FormatError(name + ": unsupported channel count " +
                      std::to_string(channels) + " in 'fmt ' chunk");
  }
  if (rate == 0) throw FormatError(name + ": zero sample rate in 'fmt ' chunk");

  DecodedAudio audio;
  audio.rate = static_cast<int>(rate);
  const size_t frame_bytes = 2u * channels;
  const size_t frames = data_size / frame_bytes;
  audio.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    const unsigned char* p = data + i * frame_bytes;
    if (channels == 1) {
      audio.samples[i] =
          static_cast<float>(static_cast<std::int16_t>(le16(p)) / 32768.0);
    } else {
      const int left = static_cast<std::int16_t>(le16(p));
      const int right = static_cast<std::int16_t>(le16(p + 2));
      audio.samples[i] = static_cast<float>((left + right) / 65536.0);
    }
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples,
               int rate, int channels) {
  if (channels != 1 && channels != 2) throw DomainError("channels must be 1 or 2");
  if (rate <= 0) throw DomainError("sample rate must be positive");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write audio '" + path.string() + "'");
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, static_cast<std::uint16_t>(channels));
  put32(out, static_cast<std::uint32_t>(rate));
  put32(out, static_cast<std::uint32_t>(rate * channels * 2));
  put16(out, static_cast<std::uint16_t>(channels * 2));
  put16(out, 16);
  out.write("data", 4);
  put32(out, data_bytes);
  for (float s : samples) {
    const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  if (!out) throw IoError("error writing audio '" + path.string() + "'");
}

size_t resampled_length(size_t input_len, int rate) {
  const auto num = static_cast<unsigned long long>(input_len) * kTargetRate;
  const auto r = static_cast<unsigned long long>(rate);
  return static_cast<size_t>((num + r / 2) / r);
}

std::vector<float> resample_16k(std::span<const float> samples, int rate) {
  if (rate < 8000 || rate > 192000) {
    throw DomainError("sample rate " + std::to_string(rate) +
                      " outside supported range [8000, 192000]");
  }
  if (rate == kTargetRate) return {samples.begin(), samples.end()};
  const size_t out_len = resampled_length(samples.size(), rate);
  std::vector<float> out(out_len);
  if (samples.empty()) return out;

  const long g = std::gcd(kTargetRate, rate);
  const long up = kTargetRate / g;  // phases
  const long down = rate / g;
  // Cutoff relative to the input Nyquist frequency.
  const double cutoff = std::min(1.0, static_cast<double>(up) / down) *
                        ResamplerKernel::kRolloff;
  const double half_width = ResamplerKernel::kZeroCrossings / cutoff;
  const long reach = static_cast<long>(std::ceil(half_width));
  const long taps = 2 * reach;
  const double i0_beta = std::cyl_bessel_i(0.0, ResamplerKernel::kBeta);

  // Weights for output phase p cover input offsets -reach+1 .. reach
  // relative to floor(position); normalized to unit sum per phase.
  auto phase_weights = [&](long phase, double* w) {
    const double frac = static_cast<double>(phase) / up;
    double sum = 0.0;
    for (long j = 0; j < taps; ++j) {
      const double tau = static_cast<double>(j - reach + 1) - frac;
      const double x = tau / half_width;
      double v = 0.0;
      if (std::abs(x) < 1.0) {
        const double window =
            std::cyl_bessel_i(0.0, ResamplerKernel::kBeta *
                                       std::sqrt(1.0 - x * x)) / i0_beta;
        v = cutoff * sinc(cutoff * tau) * window;
      }
      w[j] = v;
      sum += v;
    }
    for (long j = 0; j < taps; ++j) w[j] /= sum;
  };

  constexpr long kMaxTablePhases = 4096;
  const bool tabulate = up <= kMaxTablePhases;
  std::vector<double> table;
  if (tabulate) {
    table.resize(static_cast<size_t>(up * taps));
    for (long p = 0; p < up; ++p) phase_weights(p, &table[static_cast<size_t>(p * taps)]);
  }
  std::vector<double> scratch(tabulate ? 0 : static_cast<size_t>(taps));

  const long n_in = static_cast<long>(samples.size());
  for (size_t n = 0; n < out_len; ++n) {
    const long long pos = static_cast<long long>(n) * down;
    const long base = static_cast<long>(pos / up);
    const long phase = static_cast<long>(pos % up);
    const double* w;
    if (tabulate) {
      w = &table[static_cast<size_t>(phase * taps)];
    } else {
      phase_weights(phase, scratch.data());
      w = scratch.data();
    }
    double acc = 0.0;
    const long first = base - reach + 1;
    if (first >= 0 && first + taps <= n_in) {
      const float* x = samples.data() + first;
      for (long j = 0; j < taps; ++j) acc += w[j] * x[j];
    } else {
      for (long j = 0; j < taps; ++j) {
        const long idx = std::clamp(first + j, 0L, n_in - 1);
        acc += w[j] * samples[static_cast<size_t>(idx)];
      }
    }
    out[n] = static_cast<float>(acc);
  }
  return out;
}

int mel_frame_count(size_t len) {
  return static_cast<int>((len + MelSpectrogram::kHop - 1) / MelSpectrogram::kHop);
}

std::vector<double> mel_filter_centers() {
  const auto edges = mel_edges_hz();
  return {edges.begin() + 1, edges.end() - 1};
}

std::vector<double> mel_filterbank() {
  const auto edges = mel_edges_hz();
  std::vector<double> bank(static_cast<size_t>(MelSpectrogram::kMels) * kFftBins);
  const double bin_hz = static_cast<double>(kTargetRate) / MelSpectrogram::kWindow;
  for (int m = 0; m < MelSpectrogram::kMels; ++m) {
    const double lo = edges[static_cast<size_t>(m)];
    const double mid = edges[static_cast<size_t>(m) + 1];
    const double hi = edges[static_cast<size_t>(m) + 2];
    const double enorm = 2.0 / (hi - lo);
    for (int k = 0; k < kFftBins; ++k) {
      const double f = k * bin_hz;
      const double rising = (f - lo) / (mid - lo);
      const double falling = (hi - f) / (hi - mid);
      bank[static_cast<size_t>(m) * kFftBins + k] =
          enorm * std::max(0.0, std::min(rising, falling));
    }
  }
  return bank;
}

MelSpectrogram log_mel(std::span<const float> samples) {
  if (samples.empty()) throw DomainError("log_mel requires non-empty input");
  constexpr int kWin = MelSpectrogram::kWindow;
  constexpr int kHop = MelSpectrogram::kHop;
  constexpr int kPad = kWin / 2;

  static const std::vector<double> bank = mel_filterbank();
  static const auto tables = [] {
    std::array<std::vector<double>, 3> t;
    t[0].resize(kWin);  // periodic Hann
    t[1].resize(kWin);  // cos(2πk/N)
    t[2].resize(kWin);  // sin(2πk/N)
    for (int i = 0; i < kWin; ++i) {
      const double phase = 2.0 * std::numbers::pi * i / kWin;
      t[0][static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(phase);
      t[1][static_cast<size_t>(i)] = std::cos(phase);
      t[2][static_cast<size_t>(i)] = std::sin(phase);
    }
    return t;
  }();
  const auto& hann = tables[0];
  const auto& cos_t = tables[1];
  const auto& sin_t = tables[2];

  const long n = static_cast<long>(samples.size());
  MelSpectrogram mel;
  mel.n_frames = mel_frame_count(samples.size());
  mel.values.assign(static_cast<size_t>(mel.n_mels) * mel.n_frames, 0.0f);

  std::vector<double> frame(kWin);
  std::vector<double> power(kFftBins);
  std::vector<double> log_values(mel.values.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < mel.n_frames; ++f) {
    const long start = static_cast<long>(f) * kHop - kPad;
    for (int i = 0; i < kWin; ++i) {
      const long idx = reflect_index(start + i, n);
      frame[static_cast<size_t>(i)] =
          samples[static_cast<size_t>(idx)] * hann[static_cast<size_t>(i)];
    }
    for (int k = 0; k < kFftBins; ++k) {
      double re = 0.0;
      double im = 0.0;
      int t = 0;
      for (int i = 0; i < kWin; ++i) {
        re += frame[static_cast<size_t>(i)] * cos_t[static_cast<size_t>(t)];
        im -= frame[static_cast<size_t>(i)] * sin_t[static_cast<size_t>(t)];
        t += k;
        if (t >= kWin) t -= kWin;
      }
      power[static_cast<size_t>(k)] = re * re + im * im;
    }
    for (int m = 0; m < mel.n_mels; ++m) {
      const double* w = &bank[static_cast<size_t>(m) * kFftBins];
      double e = 0.0;
      for (int k = 0; k < kFftBins; ++k) e += w[k] * power[static_cast<size_t>(k)];
      const double lv = std::log10(std::max(e, 1e-10));
      log_values[static_cast<size_t>(m) * mel.n_frames + f] = lv;
      peak = std::max(peak, lv);
    }
  }
  const double floor_value = peak - MelSpectrogram::kDynamicRange;
  for (size_t i = 0; i < log_values.size(); ++i) {
    mel.values[i] =
        static_cast<float>((std::max(log_values[i], floor_value) + 4.0) / 4.0);
  }
  return mel;
}

void write_mel(const MelSpectrogram& mel, const std::filesystem::path& path) {
  EmbeddingGrid grid;
  grid.rows = mel.n_mels;
  grid.cols = mel.n_frames;
  grid.dim = 1;
  grid.values = mel.values;
  write_grid(grid, path, "MELS");
}

MelSpectrogram read_mel(const std::filesystem::path& path) {
  EmbeddingGrid grid = read_grid(path, "MELS");
  if (grid.dim != 1) throw FormatError(path.string() + ": MELS dim must be 1");
  MelSpectrogram mel;
  mel.n_mels = grid.rows;
  mel.n_frames = grid.cols;
  mel.values = std::move(grid.values);
  return mel;
}

AudioProfile profile_samples(std::span<const float> samples, int rate,
                             bool with_mel) {
  AudioProfile p;
  p.source_rate = rate;
  p.duration = static_cast<double>(samples.size()) / rate;
  const std::vector<float> resampled = resample_16k(samples, rate);
  p.resampled_len = resampled.size();
  p.n_frames = audio_frames(p.duration);
  p.n_tokens = audio_budget(p.duration);
  double energy = 0.0;
  for (float s : resampled) energy += static_cast<double>(s) * s;
  p.rms = resampled.empty() ? 0.0 : std::sqrt(energy / resampled.size());
  if (with_mel && !resampled.empty()) p.mel = log_mel(resampled);
  return p;
}

AudioProfile profile(const std::filesystem::path& path, bool with_mel) {
  const DecodedAudio audio = decode_wav(path);
  return profile_samples(audio.samples, audio.rate, with_mel);
}

}  // namespace capypipe

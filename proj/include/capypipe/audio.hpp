#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace capypipe {

constexpr int kTargetRate = 16000;

struct DecodedAudio {
  std::vector<float> samples;  // mono, in [-1, 1)
  int rate = 0;
};

// Reads a RIFF/WAVE PCM16 file (mono or stereo; stereo is averaged).
// Throws IoError or FormatError.
DecodedAudio decode_wav(const std::filesystem::path& path);

// Writes interleaved samples in [-1, 1] as PCM16, clipping out-of-range
// values.
void write_wav(const std::filesystem::path& path, std::span<const float> samples,
               int rate, int channels = 1);

// Kaiser-windowed sinc resampler parameters.
struct ResamplerKernel {
  static constexpr int kZeroCrossings = 32;
  static constexpr double kBeta = 14.0;
  static constexpr double kRolloff = 0.95;
};

// Output length round(len * 16000 / rate).
size_t resampled_length(size_t input_len, int rate);

// Polyphase band-limited resampling to 16 kHz. Identity when rate == 16000.
// Throws DomainError for rate outside [8000, 192000].
std::vector<float> resample_16k(std::span<const float> samples, int rate);

struct MelSpectrogram {
  static constexpr int kMels = 128;
  static constexpr int kWindow = 400;
  static constexpr int kHop = 160;
  static constexpr double kLogFloor = -10.0;  // log10 of the power clamp 1e-10
  static constexpr double kDynamicRange = 8.0;

  int n_mels = kMels;
  int n_frames = 0;
  std::vector<float> values;  // n_mels × n_frames, mel-major

  float at(int mel, int frame) const {
    return values[static_cast<size_t>(mel) * n_frames + frame];
  }
};

// Normalized value produced for an all-zero input: (kLogFloor + 4) / 4.
constexpr double kSilenceMelValue = (MelSpectrogram::kLogFloor + 4.0) / 4.0;

// Number of frames produced for `len` samples: ceil(len / 160).
int mel_frame_count(size_t len);

// Center frequency in Hz of every filter, ascending.
std::vector<double> mel_filter_centers();

// 128 × 201 Slaney-normalized triangular filterbank spanning 0–8 kHz.
std::vector<double> mel_filterbank();

// Whisper-style log-mel features of 16 kHz audio. Throws DomainError on
// empty input.
MelSpectrogram log_mel(std::span<const float> samples);

void write_mel(const MelSpectrogram& mel, const std::filesystem::path& path);
MelSpectrogram read_mel(const std::filesystem::path& path);

struct AudioProfile {
  int source_rate = 0;
  double duration = 0.0;
  size_t resampled_len = 0;
  long n_frames = 0;  // encoder frames at 100 Hz
  long n_tokens = 0;
  double rms = 0.0;
  std::optional<MelSpectrogram> mel;
};

AudioProfile profile(const std::filesystem::path& path, bool with_mel = false);
AudioProfile profile_samples(std::span<const float> samples, int rate,
                             bool with_mel = false);

}  // namespace capypipe

#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "capypipe/manifest.hpp"
#include "oracles.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("capypipe-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline capypipe::SampleRecord asr(const std::string& id, const std::string& text,
                                  const std::string& hyp,
                                  capypipe::Language lang = capypipe::Language::ENG) {
  capypipe::SampleRecord r;
  r.id = id;
  r.scenario = capypipe::Scenario::ASR;
  r.language = lang;
  r.text = text;
  r.hypothesis = hyp;
  r.source = "synthetic";
  capypipe::MediaRef audio;
  audio.kind = capypipe::MediaKind::Audio;
  audio.path = id + ".wav";
  audio.duration = 2.0;
  audio.sample_rate = 16000;
  r.media.push_back(audio);
  return r;
}

inline capypipe::SampleRecord s2tt(const std::string& id, const std::string& text,
                                   const std::string& translation) {
  capypipe::SampleRecord r;
  r.id = id;
  r.scenario = capypipe::Scenario::S2TT;
  r.language = capypipe::Language::ZH_ENG;
  r.text = text;
  r.translation = translation;
  r.source = "synthetic";
  capypipe::MediaRef audio;
  audio.kind = capypipe::MediaKind::Audio;
  audio.path = id + ".wav";
  audio.duration = 3.0;
  r.media.push_back(audio);
  return r;
}

inline capypipe::SampleRecord caption(const std::string& id, const std::string& text,
                                      int width = 1344, int height = 896) {
  capypipe::SampleRecord r;
  r.id = id;
  r.scenario = capypipe::Scenario::Caption;
  r.language = capypipe::Language::ENG;
  r.text = text;
  r.source = "web";
  capypipe::MediaRef image;
  image.kind = capypipe::MediaKind::Image;
  image.path = id + ".ppm";
  image.width = width;
  image.height = height;
  r.media.push_back(image);
  return r;
}

// A mixed manifest with exact duplicates, near-duplicates, ASR records on
// both sides of the WER threshold and S2TT records of varying similarity.
inline std::vector<capypipe::SampleRecord> synthetic_manifest(size_t count,
                                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> kind(0, 9);
  std::uniform_int_distribution<int> words(4, 12);
  std::uniform_int_distribution<int> edits(0, 6);
  std::vector<capypipe::SampleRecord> out;
  std::vector<std::string> pool;
  for (size_t i = 0; i < count; ++i) {
    const std::string id = "s" + std::to_string(i);
    std::string text = oracle::random_text(rng, words(rng));
    const int k = kind(rng);
    if (!pool.empty() && k == 0) {
      text = pool[rng() % pool.size()];  // exact duplicate
      if (rng() % 2) text = "  " + text + " ";
    } else if (!pool.empty() && k == 1) {
      text = oracle::mutate(rng, pool[rng() % pool.size()], 1);  // near-duplicate
    }
    pool.push_back(text);
    const int scenario = static_cast<int>(rng() % 3);
    if (scenario == 0) {
      out.push_back(asr(id, text, oracle::mutate(rng, text, edits(rng))));
    } else if (scenario == 1) {
      out.push_back(s2tt(id, text, oracle::mutate(rng, text, edits(rng) * 3)));
    } else {
      out.push_back(caption(id, text));
    }
  }
  return out;
}

}  // namespace fixtures

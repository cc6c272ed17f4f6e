#pragma once

#include <vector>

namespace capypipe {

// Frame timestamps for one video under an fps/cap policy.
struct FrameSchedule {
  std::vector<double> timestamps;
  double fps = 1.0;
  int cap = 128;
  bool truncated = false;

  size_t size() const { return timestamps.size(); }
};

// floor(duration * fps), tolerant of representation error in the product
// (e.g. 2.37 s at 100 Hz counts 237 frames).
long raw_frame_count(double duration, double fps);

// Raw timestamps (k + 0.5) / fps for k < floor(duration * fps), or one frame
// at duration / 2 for clips shorter than a sampling period. Over the cap,
// indices round(j * (raw - 1) / (cap - 1)) keep both endpoints.
FrameSchedule schedule(double duration, double fps = 1.0, int cap = 128);

}  // namespace capypipe

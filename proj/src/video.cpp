#include "capypipe/video.hpp"

#include <algorithm>
#include <cmath>

#include "capypipe/errors.hpp"

namespace capypipe {

long raw_frame_count(double duration, double fps) {
  const double product = duration * fps;
  return static_cast<long>(std::floor(product + 1e-9 * std::max(1.0, product)));
}

FrameSchedule schedule(double duration, double fps, int cap) {
  if (!(duration >= 0.0) || !std::isfinite(duration)) {
    throw DomainError("duration must be a finite value >= 0");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) throw DomainError("fps must be > 0");
  if (cap < 1) throw DomainError("frame cap must be >= 1");

  FrameSchedule s;
  s.fps = fps;
  s.cap = cap;
  if (duration == 0.0) return s;

  const long raw = raw_frame_count(duration, fps);
  if (raw == 0) {
    s.timestamps.push_back(duration / 2.0);
    return s;
  }
  auto stamp = [fps](long k) { return (static_cast<double>(k) + 0.5) / fps; };
  if (raw <= cap) {
    s.timestamps.reserve(static_cast<size_t>(raw));
    for (long k = 0; k < raw; ++k) s.timestamps.push_back(stamp(k));
    return s;
  }

  s.truncated = true;
  s.timestamps.reserve(static_cast<size_t>(cap));
  if (cap == 1) {
    s.timestamps.push_back(stamp((raw - 1) / 2));
    return s;
  }
  const long span = raw - 1;
  const long steps = cap - 1;
  for (long j = 0; j < cap; ++j) {
    // round-half-up of j * span / steps in integers
    const long index = (2 * j * span + steps) / (2 * steps);
    s.timestamps.push_back(stamp(index));
  }
  return s;
}

}  // namespace capypipe

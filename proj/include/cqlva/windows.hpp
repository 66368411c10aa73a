#pragma once

// Time- and tuple-based windows with hop (disjoint when hop == size,
// rolling when hop < size). Windows are half-open [start, end).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cqlva/error.hpp"
#include "cqlva/model.hpp"

namespace cqlva {

enum class WindowKind { Time, Tuple };

inline constexpr std::string_view to_string(WindowKind k) { return k == WindowKind::Time ? "TIME" : "TUPLE"; }

struct WindowSpec {
  WindowKind kind = WindowKind::Time;
  double size = 1;
  double hop = 1;
  /// Unset: the first key seen on the stream.
  std::optional<double> origin;

  static WindowSpec make(WindowKind kind, double size, double hop,
                         std::optional<double> origin = std::nullopt) {
    if (!(size > 0) || !(hop > 0) || !std::isfinite(size) || !std::isfinite(hop))
      throw Error(ErrorCode::NonpositiveSizeOrHop, "window size and hop must be positive");
    if (kind == WindowKind::Tuple && (size != std::floor(size) || hop != std::floor(hop)))
      throw Error(ErrorCode::NonpositiveSizeOrHop, "tuple windows need integral size and hop");
    return {kind, size, hop, origin};
  }

  bool disjoint() const noexcept { return hop == size; }
  bool rolling() const noexcept { return hop < size; }

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

struct WindowInstance {
  std::size_t index = 0;
  double start = 0;
  double end = 0;

  friend bool operator==(const WindowInstance&, const WindowInstance&) = default;
};

inline WindowInstance window_at(const WindowSpec& spec, double origin, std::size_t index) {
  double start = origin + static_cast<double>(index) * spec.hop;
  return {index, start, start + spec.size};
}

/// Every window index whose interval contains `key`, ascending.
inline std::vector<std::size_t> assign(const WindowSpec& spec, double key, double origin) {
  if (key < origin) throw Error(ErrorCode::ConfigError, "key precedes the window origin");
  auto last = static_cast<std::size_t>(std::floor((key - origin) / spec.hop));
  while (last > 0 && window_at(spec, origin, last).start > key) --last;
  while (window_at(spec, origin, last + 1).start <= key) ++last;
  std::vector<std::size_t> out;
  for (std::size_t i = last + 1; i-- > 0;) {
    if (window_at(spec, origin, i).end <= key) break;
    out.insert(out.begin(), i);
  }
  return out;
}

/// Per-stream window bookkeeping: origin, assignment and in-order closing.
class WindowManager {
 public:
  explicit WindowManager(WindowSpec spec) : spec_(spec), origin_(spec.origin) {}

  const WindowSpec& spec() const noexcept { return spec_; }
  std::optional<double> origin() const noexcept { return origin_; }

  std::vector<std::size_t> assign(double key) {
    if (!origin_) origin_ = key;
    last_key_ = key;
    auto out = cqlva::assign(spec_, key, *origin_);
    if (!out.empty()) started_ = std::max(started_, out.back() + 1);
    return out;
  }

  /// Emits each window with end <= watermark exactly once, in index order.
  /// A watermark lower than a previous one closes nothing.
  std::vector<WindowInstance> close_windows(double watermark) {
    std::vector<WindowInstance> out;
    if (!origin_) return out;
    if (last_watermark_ && watermark < *last_watermark_) return out;
    last_watermark_ = watermark;
    for (;;) {
      WindowInstance w = window_at(spec_, *origin_, next_);
      if (w.end > watermark) break;
      out.push_back(w);
      ++next_;
    }
    return out;
  }

  /// End of stream: closes every window that has started, complete or not.
  std::vector<WindowInstance> flush() {
    std::vector<WindowInstance> out;
    if (!origin_) return out;
    for (; next_ < started_; ++next_) out.push_back(window_at(spec_, *origin_, next_));
    return out;
  }

  std::size_t closed_count() const noexcept { return next_; }

 private:
  WindowSpec spec_;
  std::optional<double> origin_;
  std::optional<double> last_watermark_;
  std::optional<double> last_key_;
  std::size_t started_ = 0;  // one past the highest window index seen
  std::size_t next_ = 0;
};

}  // namespace cqlva

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sscalib/geometry.hpp"

namespace sscalib {

enum class PointLabel : std::uint8_t { kBoard = 0, kBackground = 1, kVacant = 2 };

using Rgb = std::array<std::uint8_t, 3>;

/// Structure-of-arrays cloud. `labels`, `colors` and `colored` are either
/// empty or sized like `points`.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> labels;
  std::vector<Rgb> colors;
  std::vector<std::uint8_t> colored;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_colors() const { return !colors.empty(); }

  PointLabel label(std::size_t i) const { return static_cast<PointLabel>(labels[i]); }
};

}  // namespace sscalib

#pragma once

#include <cstddef>
#include <vector>

#include "tdrc/common.hpp"

namespace tdrc {

/// Injected optical field on the integration grid. The waveform is
/// piecewise constant, so it is stored one level per hold interval:
/// sample k of the grid is levels[k / hold].
struct EncodedDrive {
  VectorXcd levels;                  // complex envelope, sqrt(mW) units
  std::size_t hold = 1;              // integration samples per level
  double dt = 0.0;                   // ns between integration samples
  double input_period = 0.0;         // ns per input symbol
  std::vector<std::size_t> markers;  // first sample of each symbol

  std::size_t size() const { return static_cast<std::size_t>(levels.size()) * hold; }
  std::size_t symbol_count() const { return markers.size(); }
  Complex operator[](std::size_t k) const { return levels[static_cast<Eigen::Index>(k / hold)]; }
  /// Expanded copy at the integration rate.
  VectorXcd samples() const {
    VectorXcd out(static_cast<Eigen::Index>(size()));
    for (Eigen::Index i = 0; i < levels.size(); ++i)
      out.segment(i * static_cast<Eigen::Index>(hold), static_cast<Eigen::Index>(hold))
          .setConstant(levels[i]);
    return out;
  }
};

}  // namespace tdrc

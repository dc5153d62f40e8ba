#pragma once

#include <cstddef>

namespace deepadc {

/// Samples dropped at each end of a capture before any figure of merit is
/// computed; covers filter start-up, the fractional-delay taper and the
/// undefined ends of the streaming network output.
inline constexpr std::size_t kEdgeExclusion = 64;

}  // namespace deepadc

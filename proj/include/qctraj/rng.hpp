#pragma once

#include <array>
#include <cstdint>

namespace qctraj {

/// Philox4x32-10 counter-based generator block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// A deterministic random stream keyed by (seed, stream_id, substream).
///
/// Every draw consumes one counter tick, so the sequence depends only on the
/// key and on how many draws were made, never on scheduling. Trajectories use
/// stream_id = trajectory index with disjoint substreams for Wiener and jump
/// draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t substream);

  std::uint64_t raw64();
  /// Uniform draw in the open interval (0, 1).
  double uniform();
  /// Standard normal via Box-Muller on one counter block.
  double normal();

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t c2_, c3_;
  std::uint64_t counter_ = 0;
};

}  // namespace qctraj

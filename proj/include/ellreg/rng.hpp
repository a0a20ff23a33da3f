#pragma once

#include <cstdint>
#include <random>

namespace ellreg {

using Engine = std::mt19937_64;

/// Identifies one reproducible random stream: (master seed, stream index).
///
/// The engine produced for a given pair never depends on what other streams
/// were drawn, so work units seeded by index give the same samples regardless
/// of scheduling.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t index = 0;

    /// Independent sub-stream k of this stream.
    RngStream child(std::uint64_t k) const noexcept;

    Engine engine() const;

    friend bool operator==(const RngStream&, const RngStream&) = default;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace ellreg

#include "ellreg/rng.hpp"

namespace ellreg {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream RngStream::child(std::uint64_t k) const noexcept {
    return {seed, splitmix64(index ^ splitmix64(k + 0x632BE59BD9B4E019ULL))};
}

Engine RngStream::engine() const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Engine(seq);
}

}  // namespace ellreg

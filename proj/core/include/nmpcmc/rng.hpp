#pragma once

#include <array>
#include <cstdint>

namespace nmpcmc {

/// Counter-based random stream (Philox4x32-10).
///
/// Every 128-bit output block is a pure function of (seed, stream, block
/// index), so a stream's draws depend only on how many values were consumed
/// from it, never on thread scheduling. The Monte Carlo engine gives each
/// simulation its own stream id; replaying the same (seed, stream) yields a
/// bitwise-identical sequence on any number of workers.
///
/// Normal variates use Box-Muller on consecutive uniforms; each call to
/// normal() consumes a deterministic number of counter blocks.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Standard normal draw. Pairs are generated together; the second one is
    /// cached so the consumption order stays fixed.
    double normal();

    std::uint64_t stream() const { return stream_; }

    /// One Philox4x32-10 block, exposed for known-answer tests.
    static std::array<std::uint32_t, 4> philox_block(const std::array<std::uint32_t, 4>& counter,
                                                     const std::array<std::uint32_t, 2>& key);

private:
    void refill();

    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t block_index_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4;  // exhausted; first use refills
    double spare_normal_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace nmpcmc

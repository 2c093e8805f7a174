#pragma once

#include "stormpg/common.hpp"

#include <cstdint>
#include <random>

namespace stormpg {

/// Seeded sample stream with explicit substream derivation.
///
/// A stream is addressed by (master seed, iteration, slot). Trajectory i of
/// iteration t always draws from the substream (seed, t, i), so a batch can be
/// generated in any order -- or concurrently -- and reproduce the same bits.
/// Slot numbering: iteration 0 is reserved for bookkeeping draws (the uniform
/// output-iterate index); trajectory sampling starts at iteration 1.
class SampleStream {
public:
    explicit SampleStream(std::uint64_t master) : SampleStream(master, 0, 0) {}

    SampleStream(std::uint64_t master, std::uint64_t iteration, std::uint64_t slot) {
        std::seed_seq seq{
            static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
            static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32),
            static_cast<std::uint32_t>(slot), static_cast<std::uint32_t>(slot >> 32)};
        engine_.seed(seq);
    }

    /// Uniform in [0, 1) with 53 bits; bypasses std::uniform_real_distribution
    /// so the draw sequence is pinned by mt19937_64 alone.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Inverse-CDF draw over a probability vector, scanned in index order.
    int categorical(const Vec& probs) {
        const double u = uniform01();
        double cum = 0.0;
        int last_positive = -1;
        for (int i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            last_positive = i;
            cum += probs[i];
            if (u < cum) return i;
        }
        if (last_positive < 0)
            throw ValidationError("categorical: probability vector has no positive entry");
        return last_positive; // u landed in the round-off tail of the simplex
    }

    std::uint64_t next_raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace stormpg

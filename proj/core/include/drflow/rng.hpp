#pragma once

// Counter-based random streams. Each simulated path owns a Philox4x32-10
// stream keyed by (base seed, path index), so ensembles are bitwise
// reproducible and order-independent under any scheduling.

#include <array>
#include <cstdint>

namespace drflow {

/// Philox4x32-10 block function (Salmon et al. constants).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// One independent stream per (seed, stream index) pair.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    /// Uniform on [0,1) with 53 random bits.
    double uniform();
    /// Uniform on (0,1); never returns 0, safe for log().
    double uniform_open();
    /// Exponential with the given rate.
    double exponential(double rate);
    /// Bernoulli with success probability p.
    bool bernoulli(double p);

    std::uint32_t next_u32();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_;
    int avail_ = 0;
};

} // namespace drflow

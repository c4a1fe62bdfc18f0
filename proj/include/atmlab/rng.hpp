// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace atmlab {

/// PCG32 (XSH-RR 64/32) with a per-stream increment. All randomness in the
/// library flows from one config seed through named sub-streams, so adding
/// a consumer never perturbs the draws of another.
class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t stream_id);

    /// Sub-stream keyed by name (FNV-1a of the name picks the stream id).
    static Rng stream(std::uint64_t seed, std::string_view name);

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    /// Uniform in [0, 1), 53-bit resolution.
    double next_double();
    double uniform(double lo, double hi);
    /// Standard normal via the polar method (one spare cached).
    double next_gaussian();
    /// Unbiased draw in [0, bound).
    std::uint32_t next_below(std::uint32_t bound);

  private:
    std::uint64_t state_;
    std::uint64_t inc_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// 64-bit FNV-1a, used to key named streams.
std::uint64_t fnv1a64(std::string_view s);

}  // namespace atmlab

#pragma once

#include <cstdint>
#include <random>

#include "svrnn/tensor.hpp"

namespace svrnn {

/// Deterministic random stream.
///
/// Engine: std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The engine is seeded with splitmix64(seed) xor
/// splitmix64(stream_id + golden) so (seed, stream) pairs give unrelated
/// states. Uniforms use the top 53 bits of one draw; normals use the polar-free
/// Box-Muller transform and consume two uniforms per pair. Nothing here goes
/// through std::*_distribution, whose algorithms are implementation-defined.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    /// Independent child stream keyed by (seed, child_id).
    RngStream derive(std::uint64_t child_id) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// I.i.d. N(mean, std^2) draws. std == 0 yields a constant tensor.
Tensor rng_normal(RngStream& stream, const Shape& shape, double mean = 0.0, double std = 1.0);
Tensor rng_uniform(RngStream& stream, const Shape& shape, double lo, double hi);

}  // namespace svrnn

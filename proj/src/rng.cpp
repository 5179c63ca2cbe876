#include "svrnn/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace svrnn {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id),
      engine_(splitmix64(seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL)) {}

RngStream RngStream::derive(std::uint64_t child_id) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(stream_)), child_id);
}

double RngStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("below(0)");
    // Rejection keeps the result exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % n;
}

double RngStream::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
}

Tensor rng_normal(RngStream& stream, const Shape& shape, double mean, double std) {
    if (!(std >= 0.0)) throw std::invalid_argument("rng_normal: negative standard deviation");
    Tensor out(shape, mean);
    if (std == 0.0) return out;
    for (double& v : out.data()) v = mean + std * stream.normal();
    return out;
}

Tensor rng_uniform(RngStream& stream, const Shape& shape, double lo, double hi) {
    Tensor out(shape);
    for (double& v : out.data()) v = stream.uniform(lo, hi);
    return out;
}

}  // namespace svrnn

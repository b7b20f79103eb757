#include "m2m/stats_math.hpp"

#include <cmath>
#include <limits>

namespace m2m {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : text) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)),
      engine_(splitmix64(splitmix64(seed) ^ fnv1a(label_))) {}

double RngStream::uniform_open0() {
    // 53 high bits -> k in [0, 2^53); (k + 1) / 2^53 lies in (0, 1].
    const std::uint64_t k = engine_() >> 11;
    return static_cast<double>(k + 1) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    if (n == 0) {
        throw ParameterError("uniform_index: n must be positive");
    }
    // Rejection sampling keeps the draw unbiased for any n.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return r % n;
}

RngStream derive_stream(std::uint64_t seed, std::string_view label) {
    return RngStream(seed, std::string(label));
}

double sample_exponential(RngStream &stream, double mean) {
    if (!(mean > 0.0) || !std::isfinite(mean)) {
        throw ParameterError("sample_exponential: mean must be positive and finite");
    }
    return -mean * std::log(stream.uniform_open0());
}

void ErlangParams::validate() const {
    if (shape < 1 || shape > 4) {
        throw ParameterError("ErlangParams: shape must be in {1, 2, 3, 4}, got " +
                             std::to_string(shape));
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw ParameterError("ErlangParams: scale must be positive and finite");
    }
}

double erlang_cdf(double t, const ErlangParams &params) {
    params.validate();
    if (!(t > 0.0)) {
        return 0.0;
    }
    if (std::isinf(t)) {
        return 1.0;
    }
    const double z = t / params.scale;
    if (params.shape == 1) {
        return -std::expm1(-z);
    }
    double term = 1.0;
    double sum = 1.0;
    for (int j = 1; j < params.shape; ++j) {
        term *= z / j;
        sum += term;
    }
    const double cdf = 1.0 - std::exp(-z) * sum;
    return cdf < 0.0 ? 0.0 : (cdf > 1.0 ? 1.0 : cdf);
}

}  // namespace m2m

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace m2m {

/// Raised when an operation receives arguments outside its domain.
class ParameterError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A deterministic random stream identified by (seed, label).
///
/// Backed by std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform variates are built directly from the raw bits, so a
/// stream yields the same numbers on every conforming platform. A stream
/// is a value: copying it forks an identical sequence.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::string label);

    std::uint64_t seed() const { return seed_; }
    const std::string &label() const { return label_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on (0, 1]; never returns 0.
    double uniform_open0();

    /// Uniform integer in [0, n). Requires n > 0.
    std::uint64_t uniform_index(std::uint64_t n);

    friend bool operator==(const RngStream &a, const RngStream &b) {
        return a.seed_ == b.seed_ && a.label_ == b.label_ && a.engine_ == b.engine_;
    }

  private:
    std::uint64_t seed_;
    std::string label_;
    std::mt19937_64 engine_;
};

/// Derives the substream for (seed, label). Distinct labels give distinct
/// initial engine states.
RngStream derive_stream(std::uint64_t seed, std::string_view label);

/// Draws -mean * ln(u), u uniform on (0, 1].
double sample_exponential(RngStream &stream, double mean);

/// Integer-shape gamma distribution. Shapes 1 through 4 are supported.
struct ErlangParams {
    int shape = 1;
    double scale = 1.0;  // seconds

    void validate() const;
};

/// CDF of Erlang(shape, scale) at t; 0 for t <= 0.
double erlang_cdf(double t, const ErlangParams &params);

}  // namespace m2m

#pragma once

#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "m2m/stats_math.hpp"

namespace m2m {

inline constexpr double kInfinite = std::numeric_limits<double>::infinity();

/// Which access-link queues sit on the round-trip path.
///
/// Symmetric: both uplinks and both downlinks (four stages).
/// Asymmetric: downlinks are fast enough to ignore, so only the two
/// uplinks count (two stages).
enum class LinkMode { Symmetric, Asymmetric };

int stage_count(LinkMode mode);
std::string_view to_string(LinkMode mode);

struct ModelInputs {
    double mu_up = 64.0;                  // packets/second on the bottleneck uplink
    std::optional<double> mu_down;        // unset means same as mu_up
    double tp = 0.6;                      // fixed core round trip, seconds
    double tout = kInfinite;              // timer duration, seconds
    int m = 0;                            // threads per peer
    LinkMode mode = LinkMode::Symmetric;

    void validate() const;
};

/// Invalid marks a sweep point whose inputs were rejected.
enum class SolveStatus { Converged, Saturated, Invalid };

std::string_view to_string(SolveStatus status);

/// Operating point of the model. Unless status is Converged the metric
/// fields hold NaN and must not be consumed.
struct AnalyticSolution {
    SolveStatus status = SolveStatus::Saturated;
    double rtt = std::numeric_limits<double>::quiet_NaN();
    double x = std::numeric_limits<double>::quiet_NaN();  // mean delay per queue stage
    double p_timeout = std::numeric_limits<double>::quiet_NaN();
    double gamma_raw = std::numeric_limits<double>::quiet_NaN();
    double gamma_good = std::numeric_limits<double>::quiet_NaN();

    bool converged() const { return status == SolveStatus::Converged; }
};

struct SolverSettings {
    double step = 0.001;
    double tolerance = 0.001;
    double rtt_max = 60.0;

    void validate(double tp) const;
};

/// Larger root of E = tp + k / (mu - M/E), the expected rtt without timers.
AnalyticSolution solve_no_timeout(const ModelInputs &in);

/// Solves the timeout fixed point by scanning rtt upward from tp + step.
///
/// At each candidate rtt the per-stage mean x = (rtt - tp) / k gives the
/// timeout probability P = 1 - ErlangCdf(tout - tp; k, x) and the
/// right-hand side tp + k / ((1 - P)(mu - M/rtt)). A candidate within
/// tolerance of its right-hand side is accepted as is. When the residual
/// jumps from above tolerance to below -tolerance between two grid points
/// the root inside that bracket is located by bisection, so steep
/// crossings are not skipped. The first such root is the smallest fixed
/// point. If none is found below rtt_max the result is Saturated.
AnalyticSolution solve_with_timeout(const ModelInputs &in, const SolverSettings &s = {});

/// Dispatches on whether in.tout is finite.
AnalyticSolution solve(const ModelInputs &in, const SolverSettings &s = {});

/// (m / rtt) / mu.
double normalized_throughput(double m, double rtt, double mu);

/// Right-hand side of the timeout fixed-point equation at a candidate rtt.
/// Returns nullopt where it is undefined (mu - M/rtt <= 0 or P == 1).
struct FixedPointTerms {
    double x;
    double p_timeout;
    double rhs;
};
std::optional<FixedPointTerms> fixed_point_terms(const ModelInputs &in, double rtt);

std::vector<std::pair<int, AnalyticSolution>> theory_curve(const ModelInputs &tmpl,
                                                           const std::vector<int> &m_values,
                                                           const SolverSettings &s = {});

}  // namespace m2m

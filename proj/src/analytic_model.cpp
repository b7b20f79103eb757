#include "m2m/analytic_model.hpp"

#include <cmath>
#include <string>

namespace m2m {

int stage_count(LinkMode mode) { return mode == LinkMode::Symmetric ? 4 : 2; }

std::string_view to_string(LinkMode mode) {
    return mode == LinkMode::Symmetric ? "symmetric" : "asymmetric";
}

std::string_view to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::Converged:
        return "converged";
    case SolveStatus::Saturated:
        return "saturated";
    case SolveStatus::Invalid:
        return "invalid";
    }
    return "invalid";
}

void ModelInputs::validate() const {
    if (!(mu_up > 0.0) || !std::isfinite(mu_up)) {
        throw ParameterError("mu_up must be positive and finite");
    }
    if (mu_down && (!(*mu_down > 0.0) || !std::isfinite(*mu_down))) {
        throw ParameterError("mu_down must be positive and finite");
    }
    if (!(tp >= 0.0) || !std::isfinite(tp)) {
        throw ParameterError("tp must be nonnegative and finite");
    }
    if (std::isnan(tout)) {
        throw ParameterError("tout must be a number or infinite");
    }
    if (m < 0) {
        throw ParameterError("m must be nonnegative");
    }
}

void SolverSettings::validate(double tp) const {
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw ParameterError("solver step must be positive");
    }
    if (!(tolerance >= 0.0)) {
        throw ParameterError("solver tolerance must be nonnegative");
    }
    if (!(rtt_max > tp)) {
        throw ParameterError("solver rtt_max must exceed tp");
    }
}

double normalized_throughput(double m, double rtt, double mu) {
    if (!(rtt > 0.0) || !(mu > 0.0)) {
        throw ParameterError("normalized_throughput: rtt and mu must be positive");
    }
    return (m / rtt) / mu;
}

AnalyticSolution solve_no_timeout(const ModelInputs &in) {
    in.validate();
    const double k = stage_count(in.mode);
    const double mu = in.mu_up;
    const double m = in.m;

    AnalyticSolution out;
    if (in.m == 0) {
        out.rtt = in.tp + k / mu;
    } else {
        // mu E^2 - (M + mu tp + k) E + M tp = 0; discriminant >= (M - mu tp)^2.
        const double b = m + mu * in.tp + k;
        const double disc = b * b - 4.0 * mu * m * in.tp;
        out.rtt = (b + std::sqrt(disc)) / (2.0 * mu);
    }
    out.status = SolveStatus::Converged;
    out.x = (out.rtt - in.tp) / k;
    out.p_timeout = 0.0;
    out.gamma_raw = normalized_throughput(m, out.rtt, mu);
    out.gamma_good = out.gamma_raw;
    return out;
}

std::optional<FixedPointTerms> fixed_point_terms(const ModelInputs &in, double rtt) {
    const int k = stage_count(in.mode);
    if (!(rtt > in.tp)) {
        return std::nullopt;
    }
    const double service_margin = in.mu_up - in.m / rtt;
    if (!(service_margin > 0.0)) {
        return std::nullopt;
    }
    const double x = (rtt - in.tp) / k;
    const double p = 1.0 - erlang_cdf(in.tout - in.tp, ErlangParams{k, x});
    if (!(p < 1.0)) {
        return std::nullopt;
    }
    const double rhs = in.tp + k / ((1.0 - p) * service_margin);
    return FixedPointTerms{x, p, rhs};
}

namespace {

AnalyticSolution make_solution(const ModelInputs &in, double rtt, const FixedPointTerms &t) {
    AnalyticSolution out;
    out.status = SolveStatus::Converged;
    out.rtt = rtt;
    out.x = t.x;
    out.p_timeout = t.p_timeout;
    out.gamma_raw = normalized_throughput(in.m, rtt, in.mu_up);
    out.gamma_good = out.gamma_raw * (1.0 - t.p_timeout);
    return out;
}

// Residual rhs - rtt, with +inf where the right-hand side is undefined
// (it diverges there).
double residual(const ModelInputs &in, double rtt) {
    const auto t = fixed_point_terms(in, rtt);
    return t ? t->rhs - rtt : kInfinite;
}

}  // namespace

AnalyticSolution solve_with_timeout(const ModelInputs &in, const SolverSettings &s) {
    in.validate();
    s.validate(in.tp);
    if (!std::isfinite(in.tout)) {
        throw ParameterError("solve_with_timeout: tout must be finite");
    }
    if (!(in.tout > in.tp)) {
        throw ParameterError("solve_with_timeout: tout must exceed tp");
    }

    // Lower end of the current bracket; the residual is positive there.
    double lower = in.tp;
    for (long n = 1;; ++n) {
        const double rtt = in.tp + static_cast<double>(n) * s.step;
        if (rtt > s.rtt_max) {
            break;
        }
        const auto terms = fixed_point_terms(in, rtt);
        if (!terms) {
            lower = rtt;
            continue;
        }
        const double g = terms->rhs - rtt;
        if (std::abs(g) <= s.tolerance) {
            return make_solution(in, rtt, *terms);
        }
        if (g > 0.0) {
            lower = rtt;
            continue;
        }
        // Skipped over a root: g(lower) > tol, g(rtt) < -tol.
        double lo = lower;
        double hi = rtt;
        for (int iter = 0; iter < 200 && hi - lo > 1e-13 * hi; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (residual(in, mid) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        const auto root_terms = fixed_point_terms(in, hi);
        return make_solution(in, hi, *root_terms);
    }
    return AnalyticSolution{};
}

AnalyticSolution solve(const ModelInputs &in, const SolverSettings &s) {
    return std::isfinite(in.tout) ? solve_with_timeout(in, s) : solve_no_timeout(in);
}

std::vector<std::pair<int, AnalyticSolution>> theory_curve(const ModelInputs &tmpl,
                                                           const std::vector<int> &m_values,
                                                           const SolverSettings &s) {
    if (m_values.empty()) {
        throw ParameterError("theory_curve: m_values must be nonempty");
    }
    for (std::size_t i = 1; i < m_values.size(); ++i) {
        if (m_values[i] <= m_values[i - 1]) {
            throw ParameterError("theory_curve: m_values must be strictly increasing");
        }
    }
    std::vector<std::pair<int, AnalyticSolution>> curve;
    curve.reserve(m_values.size());
    for (int m : m_values) {
        ModelInputs in = tmpl;
        in.m = m;
        AnalyticSolution sol;
        try {
            sol = solve(in, s);
        } catch (const ParameterError &) {
            sol.status = SolveStatus::Invalid;
        }
        curve.emplace_back(m, sol);
    }
    return curve;
}

}  // namespace m2m

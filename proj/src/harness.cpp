#include "m2m/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace m2m {

std::string_view to_string(RunMode mode) { return mode == RunMode::Theory ? "theory" : "sim"; }

std::string_view to_string(Metric metric) {
    return metric == Metric::GammaGood ? "gamma_good" : "gamma_raw";
}

SweepSpec::SweepSpec() {
    for (int m = 10; m <= 170; m += 10) {
        m_values.push_back(m);
    }
}

void SweepSpec::validate() const {
    scenario.validate();
    if (m_values.empty() || tout_values.empty() || seeds.empty()) {
        throw ParameterError("sweep lists (m_values, tout_values, seeds) must be nonempty");
    }
    if (modes.empty()) {
        throw ParameterError("sweep needs at least one mode (theory, sim)");
    }
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        if (m_values[i] < 0) {
            throw ParameterError("m_values must be nonnegative");
        }
        if (i > 0 && m_values[i] <= m_values[i - 1]) {
            throw ParameterError("m_values must be strictly increasing");
        }
    }
    for (double t : tout_values) {
        if (std::isnan(t) || !(t > 0.0)) {
            throw ParameterError("tout_values must be positive or inf");
        }
    }
    if (!scenario.threads_override.empty()) {
        throw ParameterError("threads_override cannot be combined with an M sweep");
    }
    solver.validate(scenario.tp);
}

namespace {

struct Job {
    RunMode mode;
    int m;
    double tout;
    std::uint64_t seed;
};

SweepRow evaluate(const SweepSpec &spec, const Job &job) {
    SweepRow row;
    row.mode = job.mode;
    row.m = job.m;
    row.tout = job.tout;
    row.seed = job.seed;
    if (job.mode == RunMode::Theory) {
        ModelInputs in = spec.scenario.model_inputs();
        in.m = job.m;
        in.tout = job.tout;
        try {
            const AnalyticSolution sol = solve(in, spec.solver);
            row.status = sol.status;
            if (sol.converged()) {
                row.rtt_s = sol.rtt;
                row.p_timeout = sol.p_timeout;
                row.gamma_raw = sol.gamma_raw;
                row.gamma_good = sol.gamma_good;
            }
        } catch (const ParameterError &) {
            row.status = SolveStatus::Invalid;
        }
        return row;
    }

    ScenarioConfig cfg = spec.scenario;
    cfg.threads_per_peer = job.m;
    cfg.tout = job.tout;
    cfg.seed = job.seed;
    try {
        const SimReport rep = run_simulation(cfg, SimOptions{nullptr, false});
        row.status = SolveStatus::Converged;
        if (rep.data_ontime > 0) {
            row.rtt_s = rep.rtt_mean;
        }
        row.p_timeout = rep.p_timeout_empirical;
        row.gamma_raw = rep.gamma_raw;
        row.gamma_good = rep.gamma_good;
    } catch (const ParameterError &) {
        row.status = SolveStatus::Invalid;
    }
    return row;
}

bool same_tout(double a, double b) { return a == b; }

}  // namespace

std::vector<SweepRow> run_sweep(const SweepSpec &spec) {
    spec.validate();

    std::vector<double> touts = spec.tout_values;
    std::sort(touts.begin(), touts.end());
    touts.erase(std::unique(touts.begin(), touts.end()), touts.end());

    std::vector<Job> jobs;
    for (RunMode mode : {RunMode::Theory, RunMode::Sim}) {
        if (std::find(spec.modes.begin(), spec.modes.end(), mode) == spec.modes.end()) {
            continue;
        }
        for (double tout : touts) {
            if (mode == RunMode::Sim && std::isinf(tout) && !spec.sim_infinite_tout) {
                continue;
            }
            for (int m : spec.m_values) {
                if (mode == RunMode::Theory) {
                    jobs.push_back({mode, m, tout, 0});
                } else {
                    for (std::uint64_t seed : spec.seeds) {
                        jobs.push_back({mode, m, tout, seed});
                    }
                }
            }
        }
    }

    std::vector<SweepRow> rows(jobs.size());
    unsigned workers = spec.workers != 0 ? spec.workers : std::thread::hardware_concurrency();
    workers = std::clamp(workers, 1U, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            rows[i] = evaluate(spec, jobs[i]);
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < workers; ++w) {
            pool.emplace_back(work);
        }
        work();
    }
    return rows;
}

std::vector<SweepRow> slice_rows(const std::vector<SweepRow> &rows, double tout, RunMode mode) {
    std::map<int, std::vector<const SweepRow *>> by_m;
    for (const auto &r : rows) {
        if (r.mode == mode && same_tout(r.tout, tout)) {
            by_m[r.m].push_back(&r);
        }
    }
    std::vector<SweepRow> out;
    for (const auto &[m, group] : by_m) {
        SweepRow avg;
        avg.mode = mode;
        avg.m = m;
        avg.tout = tout;
        avg.seed = mode == RunMode::Theory ? group.front()->seed : 0;
        std::size_t n = 0;
        double rtt = 0.0, p = 0.0, raw = 0.0, good = 0.0;
        std::size_t rtt_n = 0;
        for (const SweepRow *r : group) {
            if (r->status != SolveStatus::Converged) {
                continue;
            }
            ++n;
            if (!std::isnan(r->rtt_s)) {
                rtt += r->rtt_s;
                ++rtt_n;
            }
            p += r->p_timeout;
            raw += r->gamma_raw;
            good += r->gamma_good;
        }
        if (n == 0) {
            avg.status = group.front()->status;
        } else {
            avg.status = SolveStatus::Converged;
            const double dn = static_cast<double>(n);
            avg.rtt_s = rtt_n > 0 ? rtt / static_cast<double>(rtt_n)
                                  : std::numeric_limits<double>::quiet_NaN();
            avg.p_timeout = p / dn;
            avg.gamma_raw = raw / dn;
            avg.gamma_good = good / dn;
        }
        out.push_back(avg);
    }
    return out;
}

int find_optimal_m(const std::vector<SweepRow> &rows, double tout, RunMode mode, Metric metric) {
    int best_m = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto &r : slice_rows(rows, tout, mode)) {
        if (r.status != SolveStatus::Converged) {
            continue;
        }
        const double v = r.metric(metric);
        if (v > best) {
            best = v;
            best_m = r.m;
        }
    }
    if (best_m < 0) {
        throw NotFoundError("no converged " + std::string(to_string(mode)) + " rows for tout=" +
                            format_number(tout));
    }
    return best_m;
}

std::string format_number(double value) {
    if (std::isnan(value)) {
        return {};
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

void write_csv(const std::vector<SweepRow> &rows, std::ostream &out) {
    out << kCsvHeader << '\n';
    for (const auto &r : rows) {
        out << to_string(r.mode) << ',' << r.m << ',' << format_number(r.tout) << ',' << r.seed
            << ',' << format_number(r.rtt_s) << ',' << format_number(r.p_timeout) << ','
            << format_number(r.gamma_raw) << ',' << format_number(r.gamma_good) << ','
            << to_string(r.status) << '\n';
    }
}

void emit_csv(const std::vector<SweepRow> &rows, const std::filesystem::path &destination) {
    std::ofstream out(destination, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + destination.string() + " for writing");
    }
    write_csv(rows, out);
    out.flush();
    if (!out) {
        throw std::runtime_error("failed writing " + destination.string());
    }
}

namespace {

std::vector<std::string> split(const std::string &line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

double parse_number(const std::string &text, const char *what) {
    if (text.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (text == "inf") {
        return kInfinite;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used != text.size()) {
        throw ParameterError(std::string("csv: bad ") + what + " value '" + text + "'");
    }
    return v;
}

SolveStatus parse_status(const std::string &text) {
    if (text == "converged") return SolveStatus::Converged;
    if (text == "saturated") return SolveStatus::Saturated;
    if (text == "invalid") return SolveStatus::Invalid;
    throw ParameterError("csv: unknown status '" + text + "'");
}

}  // namespace

std::vector<SweepRow> parse_csv(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParameterError("csv: empty input");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != kCsvHeader) {
        throw ParameterError("csv: unexpected header '" + line + "'");
    }
    std::vector<SweepRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 9) {
            throw ParameterError("csv line " + std::to_string(lineno) + ": expected 9 fields");
        }
        SweepRow r;
        if (f[0] == "theory") {
            r.mode = RunMode::Theory;
        } else if (f[0] == "sim") {
            r.mode = RunMode::Sim;
        } else {
            throw ParameterError("csv line " + std::to_string(lineno) + ": bad mode '" + f[0] + "'");
        }
        r.m = static_cast<int>(parse_number(f[1], "m"));
        r.tout = parse_number(f[2], "tout_s");
        r.seed = static_cast<std::uint64_t>(std::stoull(f[3]));
        r.rtt_s = parse_number(f[4], "rtt_s");
        r.p_timeout = parse_number(f[5], "p_timeout");
        r.gamma_raw = parse_number(f[6], "gamma_raw");
        r.gamma_good = parse_number(f[7], "gamma_good");
        r.status = parse_status(f[8]);
        rows.push_back(r);
    }
    return rows;
}

std::vector<SweepRow> load_csv(const std::filesystem::path &source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + source.string());
    }
    try {
        return parse_csv(in);
    } catch (const ParameterError &e) {
        throw ParameterError(source.string() + ": " + e.what());
    }
}

CompareReport compare_report(const std::vector<SweepRow> &rows, Metric metric,
                             const CompareTolerances &tol) {
    std::vector<double> touts;
    for (const auto &r : rows) {
        touts.push_back(r.tout);
    }
    std::sort(touts.begin(), touts.end());
    touts.erase(std::unique(touts.begin(), touts.end()), touts.end());

    CompareReport report;
    report.metric = metric;
    bool any_compared = false;
    bool all_passed = true;
    for (double tout : touts) {
        SliceComparison s;
        s.tout = tout;
        const auto theory = slice_rows(rows, tout, RunMode::Theory);
        const auto sim = slice_rows(rows, tout, RunMode::Sim);
        s.has_theory = !theory.empty();
        s.has_sim = !sim.empty();
        try {
            s.theory_optimal_m = find_optimal_m(rows, tout, RunMode::Theory, metric);
        } catch (const NotFoundError &) {
        }
        try {
            s.sim_optimal_m = find_optimal_m(rows, tout, RunMode::Sim, metric);
        } catch (const NotFoundError &) {
        }
        if (s.has_theory && s.has_sim) {
            double sum_g = 0.0, sum_p = 0.0;
            for (const auto &t : theory) {
                if (t.status != SolveStatus::Converged) {
                    continue;
                }
                auto it = std::find_if(sim.begin(), sim.end(), [&](const SweepRow &x) {
                    return x.m == t.m && x.status == SolveStatus::Converged;
                });
                if (it == sim.end()) {
                    continue;
                }
                const double dg = std::abs(it->gamma_good - t.gamma_good);
                const double dp = std::abs(it->p_timeout - t.p_timeout);
                s.max_gamma_diff = std::max(s.max_gamma_diff, dg);
                s.max_p_diff = std::max(s.max_p_diff, dp);
                sum_g += dg;
                sum_p += dp;
                ++s.points;
            }
            if (s.points > 0) {
                s.mean_gamma_diff = sum_g / static_cast<double>(s.points);
                s.mean_p_diff = sum_p / static_cast<double>(s.points);
            }
            s.passed = s.points > 0 && s.max_gamma_diff <= tol.gamma_good &&
                       s.max_p_diff <= tol.p_timeout && s.theory_optimal_m >= 0 &&
                       s.sim_optimal_m >= 0 &&
                       std::abs(s.theory_optimal_m - s.sim_optimal_m) <= tol.optimal_m;
            any_compared = true;
            all_passed = all_passed && s.passed;
        }
        report.slices.push_back(s);
    }
    report.passed = any_compared && all_passed;
    return report;
}

std::string CompareReport::render() const {
    std::ostringstream out;
    out << "metric: " << to_string(metric) << '\n';
    for (const auto &s : slices) {
        out << "tout=" << format_number(s.tout) << ": ";
        if (!s.has_theory || !s.has_sim) {
            out << "theory " << (s.has_theory ? "present" : "absent") << ", sim "
                << (s.has_sim ? "present" : "absent");
            if (s.theory_optimal_m >= 0) {
                out << "; optimal M theory=" << s.theory_optimal_m;
            }
            if (s.sim_optimal_m >= 0) {
                out << "; optimal M sim=" << s.sim_optimal_m;
            }
            out << "; not compared\n";
            continue;
        }
        out << "points=" << s.points << " gamma_good |diff| max=" << format_number(s.max_gamma_diff)
            << " mean=" << format_number(s.mean_gamma_diff)
            << "; p_timeout |diff| max=" << format_number(s.max_p_diff)
            << " mean=" << format_number(s.mean_p_diff) << "; optimal M theory="
            << s.theory_optimal_m << " sim=" << s.sim_optimal_m << "; "
            << (s.passed ? "PASS" : "FAIL") << '\n';
    }
    out << "overall: " << (passed ? "PASS" : "FAIL") << '\n';
    return out.str();
}

SweepSpec fig4_preset() {
    SweepSpec spec;
    spec.scenario = ScenarioConfig{};
    return spec;
}

SweepSpec adsl_preset() {
    SweepSpec spec;
    spec.scenario.uplink_bps = 256000.0;
    spec.scenario.downlink_bps = 512000.0;
    spec.scenario.link_mode = LinkMode::Asymmetric;
    spec.scenario.tout = 4.0;
    spec.m_values.clear();
    for (int m = 5; m <= 100; m += 5) {
        spec.m_values.push_back(m);
    }
    spec.tout_values = {4.0};
    spec.modes = {RunMode::Theory};
    return spec;
}

}  // namespace m2m

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "m2m/analytic_model.hpp"
#include "m2m/simulator.hpp"

namespace m2m {

/// Raised when a requested slice of sweep results holds no usable rows.
class NotFoundError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class RunMode { Theory, Sim };
enum class Metric { GammaGood, GammaRaw };

std::string_view to_string(RunMode mode);
std::string_view to_string(Metric metric);

struct SweepSpec {
    ScenarioConfig scenario;
    std::vector<int> m_values;
    std::vector<double> tout_values{2.0, 3.0, 4.0, kInfinite};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<RunMode> modes{RunMode::Theory, RunMode::Sim};
    Metric metric = Metric::GammaGood;
    bool sim_infinite_tout = false;  // Sim rows for tout = inf only when set
    SolverSettings solver;
    unsigned workers = 0;  // 0: one per hardware thread

    SweepSpec();
    void validate() const;
};

/// One result line. Seed is 0 for Theory rows. Metrics are NaN unless
/// status is Converged.
struct SweepRow {
    RunMode mode = RunMode::Theory;
    int m = 0;
    double tout = kInfinite;
    std::uint64_t seed = 0;
    double rtt_s = std::numeric_limits<double>::quiet_NaN();
    double p_timeout = std::numeric_limits<double>::quiet_NaN();
    double gamma_raw = std::numeric_limits<double>::quiet_NaN();
    double gamma_good = std::numeric_limits<double>::quiet_NaN();
    SolveStatus status = SolveStatus::Converged;

    double metric(Metric which) const { return which == Metric::GammaGood ? gamma_good : gamma_raw; }
};

/// Rows are ordered by (mode, tout, m, seed): Theory before Sim, tout
/// ascending with inf last, seeds in spec order. Points are evaluated
/// concurrently but the output order never depends on completion order.
std::vector<SweepRow> run_sweep(const SweepSpec &spec);

/// M maximizing the metric over the (tout, mode) slice. Sim rows are
/// averaged over seeds per M first. Ties go to the smallest M.
int find_optimal_m(const std::vector<SweepRow> &rows, double tout, RunMode mode, Metric metric);

/// Seed-averaged Sim rows (or Theory rows as is) of one slice, by M.
std::vector<SweepRow> slice_rows(const std::vector<SweepRow> &rows, double tout, RunMode mode);

inline constexpr std::string_view kCsvHeader =
    "mode,m,tout_s,seed,rtt_s,p_timeout,gamma_raw,gamma_good,status";

void write_csv(const std::vector<SweepRow> &rows, std::ostream &out);
void emit_csv(const std::vector<SweepRow> &rows, const std::filesystem::path &destination);
std::vector<SweepRow> parse_csv(std::istream &in);
std::vector<SweepRow> load_csv(const std::filesystem::path &source);

/// 6 significant digits; "inf" for infinity; empty for NaN.
std::string format_number(double value);

struct CompareTolerances {
    double gamma_good = 0.08;
    double p_timeout = 0.08;
    int optimal_m = 20;
};

struct SliceComparison {
    double tout = kInfinite;
    bool has_theory = false;
    bool has_sim = false;
    std::size_t points = 0;  // M values compared (Theory Converged and Sim present)
    double max_gamma_diff = 0.0;
    double mean_gamma_diff = 0.0;
    double max_p_diff = 0.0;
    double mean_p_diff = 0.0;
    int theory_optimal_m = -1;
    int sim_optimal_m = -1;
    bool passed = false;
};

struct CompareReport {
    Metric metric = Metric::GammaGood;
    std::vector<SliceComparison> slices;
    bool passed = false;

    std::string render() const;
};

CompareReport compare_report(const std::vector<SweepRow> &rows, Metric metric = Metric::GammaGood,
                             const CompareTolerances &tol = {});

/// Symmetric preset: 110 peers at 512 kbps, 1000-byte mean packets,
/// tp = 0.6 s, 100 s runs, M = 10..170 step 10, tout in {2, 3, 4, inf}.
SweepSpec fig4_preset();

/// ADSL preset: 256 kbps up, 512 kbps down, tout = 4 s, tp = 0.6 s,
/// asymmetric model, M = 5..100 step 5, Theory only.
SweepSpec adsl_preset();

/// Flat "key = value" config. Keys are the ScenarioConfig and SweepSpec
/// field names (solver settings as solver_step, solver_tolerance,
/// solver_rtt_max). Unknown keys and malformed values are ParameterErrors.
SweepSpec parse_config(std::istream &in, SweepSpec base = SweepSpec{});
SweepSpec load_config(const std::filesystem::path &path, SweepSpec base = SweepSpec{});

}  // namespace m2m

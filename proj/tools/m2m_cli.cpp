// m2m_cli: analytic solver, simulator and sweep harness for the
// multi-point stop-wait transport model.
//
// Exit codes: 0 success, 1 parameter or I/O error, 2 compare --check failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "m2m/harness.hpp"

namespace {

using namespace m2m;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string metric = "good";
    std::string mode;
    std::optional<int> m;
    std::optional<std::string> tout;
};

void add_common(CLI::App *cmd, CommonFlags &f) {
    cmd->add_option("--config", f.config, "flat key = value config file");
    cmd->add_option("--seed", f.seed, "simulation seed (sweeps use seed, seed+1, seed+2)");
    cmd->add_option("--out", f.out, "CSV destination (default stdout)");
    cmd->add_option("--metric", f.metric, "optimality metric")->check(CLI::IsMember({"good", "raw"}));
    cmd->add_option("--mode", f.mode, "theory, sim or both")
        ->check(CLI::IsMember({"theory", "sim", "both"}));
}

SweepSpec build_spec(const CommonFlags &f, SweepSpec base) {
    SweepSpec spec = f.config.empty() ? std::move(base) : load_config(f.config, std::move(base));
    if (f.seed) {
        spec.scenario.seed = *f.seed;
        spec.seeds = {*f.seed, *f.seed + 1, *f.seed + 2};
    }
    if (f.metric == "raw") {
        spec.metric = Metric::GammaRaw;
    } else if (f.metric == "good") {
        spec.metric = Metric::GammaGood;
    }
    if (f.mode == "theory") {
        spec.modes = {RunMode::Theory};
    } else if (f.mode == "sim") {
        spec.modes = {RunMode::Sim};
    } else if (f.mode == "both") {
        spec.modes = {RunMode::Theory, RunMode::Sim};
    }
    if (f.m) {
        spec.scenario.threads_per_peer = *f.m;
    }
    if (f.tout) {
        std::istringstream in("tout = " + *f.tout);
        spec = parse_config(in, spec);
    }
    return spec;
}

void write_rows(const std::vector<SweepRow> &rows, const std::string &out) {
    if (out.empty()) {
        write_csv(rows, std::cout);
    } else {
        emit_csv(rows, out);
    }
}

void print_optima(const SweepSpec &spec, const std::vector<SweepRow> &rows) {
    for (RunMode mode : spec.modes) {
        for (double tout : spec.tout_values) {
            try {
                const int best = find_optimal_m(rows, tout, mode, spec.metric);
                std::cerr << "optimal M (" << to_string(mode) << ", tout=" << format_number(tout)
                          << ", " << to_string(spec.metric) << ") = " << best << '\n';
            } catch (const NotFoundError &) {
            }
        }
    }
}

int cmd_solve(const CommonFlags &f) {
    SweepSpec spec = build_spec(f, SweepSpec{});
    spec.scenario.validate();
    const ModelInputs in = spec.scenario.model_inputs();
    const AnalyticSolution sol = solve(in, spec.solver);
    std::printf("mode: %s\nm: %d\ntout_s: %s\nmu: %s\ntp_s: %s\nstatus: %s\n",
                std::string(to_string(in.mode)).c_str(), in.m, format_number(in.tout).c_str(),
                format_number(in.mu_up).c_str(), format_number(in.tp).c_str(),
                std::string(to_string(sol.status)).c_str());
    if (sol.converged()) {
        std::printf("rtt_s: %s\nx_s: %s\np_timeout: %s\ngamma_raw: %s\ngamma_good: %s\n",
                    format_number(sol.rtt).c_str(), format_number(sol.x).c_str(),
                    format_number(sol.p_timeout).c_str(), format_number(sol.gamma_raw).c_str(),
                    format_number(sol.gamma_good).c_str());
    }
    return 0;
}

int cmd_simulate(const CommonFlags &f, const std::string &trace_path) {
    const SweepSpec spec = build_spec(f, SweepSpec{});
    std::ofstream trace;
    SimOptions options;
    options.keep_rtt_samples = false;
    if (!trace_path.empty()) {
        trace.open(trace_path);
        if (!trace) {
            throw std::runtime_error("cannot open trace file " + trace_path);
        }
        options.trace = &trace;
    }
    const SimReport r = run_simulation(spec.scenario, options);
    std::printf("requests_sent: %llu\ndata_ontime: %llu\ndata_late_dropped: %llu\n"
                "timeouts: %llu\npending_at_end: %llu\n",
                static_cast<unsigned long long>(r.requests_sent),
                static_cast<unsigned long long>(r.data_ontime),
                static_cast<unsigned long long>(r.data_late_dropped),
                static_cast<unsigned long long>(r.timeouts),
                static_cast<unsigned long long>(r.pending_at_end));
    std::printf("rtt_mean_s: %s\nrtt_min_s: %s\nrtt_max_s: %s\np_timeout: %s\n"
                "gamma_raw: %s\ngamma_good: %s\nuplink_utilization: %s\n"
                "downlink_utilization: %s\nevents: %llu\n",
                format_number(r.rtt_mean).c_str(), format_number(r.rtt_min).c_str(),
                format_number(r.rtt_max).c_str(), format_number(r.p_timeout_empirical).c_str(),
                format_number(r.gamma_raw).c_str(), format_number(r.gamma_good).c_str(),
                format_number(r.uplink_utilization).c_str(),
                format_number(r.downlink_utilization).c_str(),
                static_cast<unsigned long long>(r.events_processed));
    return 0;
}

int cmd_sweep(const CommonFlags &f, SweepSpec base) {
    const SweepSpec spec = build_spec(f, std::move(base));
    const auto rows = run_sweep(spec);
    write_rows(rows, f.out);
    print_optima(spec, rows);
    return 0;
}

int cmd_compare(const CommonFlags &f, const std::vector<std::string> &inputs, bool check) {
    std::vector<SweepRow> rows;
    for (const auto &path : inputs) {
        auto part = load_csv(path);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    const Metric metric = f.metric == "raw" ? Metric::GammaRaw : Metric::GammaGood;
    const CompareReport report = compare_report(rows, metric);
    std::cout << report.render();
    return check && !report.passed ? 2 : 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Multi-point stop-wait transport: model solver, simulator and sweeps"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string trace_path;
    std::vector<std::string> inputs;
    bool check = false;
    bool adsl = false;

    auto *solve_cmd = app.add_subcommand("solve", "solve the analytic model at one point");
    add_common(solve_cmd, flags);
    solve_cmd->add_option("--m", flags.m, "threads per peer");
    solve_cmd->add_option("--tout", flags.tout, "timer in seconds or inf");

    auto *sim_cmd = app.add_subcommand("simulate", "run one simulation and print its report");
    add_common(sim_cmd, flags);
    sim_cmd->add_option("--m", flags.m, "threads per peer");
    sim_cmd->add_option("--tout", flags.tout, "timer in seconds or inf");
    sim_cmd->add_option("--trace", trace_path, "write a line-delimited event trace");

    auto *sweep_cmd = app.add_subcommand("sweep", "sweep M over the configured grid to CSV");
    add_common(sweep_cmd, flags);

    auto *compare_cmd = app.add_subcommand("compare", "compare Theory and Sim rows from CSV");
    add_common(compare_cmd, flags);
    compare_cmd->add_option("inputs", inputs, "one mixed CSV or two CSVs")->required()->expected(1, 2);
    compare_cmd->add_flag("--check", check, "exit 2 when the comparison fails its tolerances");

    auto *fig4_cmd = app.add_subcommand("fig4", "run the preset throughput/timeout sweep");
    add_common(fig4_cmd, flags);
    fig4_cmd->add_flag("--adsl", adsl, "asymmetric 256/512 kbps preset instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*solve_cmd) return cmd_solve(flags);
        if (*sim_cmd) return cmd_simulate(flags, trace_path);
        if (*sweep_cmd) return cmd_sweep(flags, SweepSpec{});
        if (*compare_cmd) return cmd_compare(flags, inputs, check);
        if (*fig4_cmd) return cmd_sweep(flags, adsl ? adsl_preset() : fig4_preset());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

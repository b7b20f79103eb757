#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "m2m/harness.hpp"

namespace m2m {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double to_double(const std::string &key, const std::string &v) {
    const std::string lv = lower(v);
    if (lv == "inf" || lv == "infinite" || lv == "infinity") {
        return kInfinite;
    }
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ParameterError("config: " + key + ": expected a number, got '" + v + "'");
    }
    return out;
}

template <typename Int>
Int to_int(const std::string &key, const std::string &v) {
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ParameterError("config: " + key + ": expected an integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string &key, const std::string &v) {
    const std::string lv = lower(v);
    if (lv == "true" || lv == "1" || lv == "yes") return true;
    if (lv == "false" || lv == "0" || lv == "no") return false;
    throw ParameterError("config: " + key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> list_items(const std::string &v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

// "10,20,30" or an inclusive range "first:last:step".
std::vector<int> to_int_list(const std::string &key, const std::string &v) {
    if (v.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::string part;
        std::istringstream ss(v);
        while (std::getline(ss, part, ':')) {
            parts.push_back(trim(part));
        }
        if (parts.size() != 3) {
            throw ParameterError("config: " + key + ": range must be first:last:step");
        }
        const int first = to_int<int>(key, parts[0]);
        const int last = to_int<int>(key, parts[1]);
        const int step = to_int<int>(key, parts[2]);
        if (step <= 0 || last < first) {
            throw ParameterError("config: " + key + ": empty or invalid range");
        }
        std::vector<int> out;
        for (int m = first; m <= last; m += step) {
            out.push_back(m);
        }
        return out;
    }
    std::vector<int> out;
    for (const auto &item : list_items(v)) {
        out.push_back(to_int<int>(key, item));
    }
    return out;
}

using Setter = std::function<void(SweepSpec &, const std::string &key, const std::string &value)>;

const std::map<std::string, Setter> &setters() {
    static const std::map<std::string, Setter> table = {
        {"n_peers", [](SweepSpec &s, auto &k, auto &v) { s.scenario.n_peers = to_int<int>(k, v); }},
        {"threads_per_peer",
         [](SweepSpec &s, auto &k, auto &v) { s.scenario.threads_per_peer = to_int<int>(k, v); }},
        {"threads_override",
         [](SweepSpec &s, auto &k, auto &v) { s.scenario.threads_override = to_int_list(k, v); }},
        {"uplink_bps", [](SweepSpec &s, auto &k, auto &v) { s.scenario.uplink_bps = to_double(k, v); }},
        {"downlink_bps",
         [](SweepSpec &s, auto &k, auto &v) { s.scenario.downlink_bps = to_double(k, v); }},
        {"mean_data_bytes",
         [](SweepSpec &s, auto &k, auto &v) { s.scenario.mean_data_bytes = to_double(k, v); }},
        {"tp", [](SweepSpec &s, auto &k, auto &v) { s.scenario.tp = to_double(k, v); }},
        {"tout", [](SweepSpec &s, auto &k, auto &v) { s.scenario.tout = to_double(k, v); }},
        {"sim_duration",
         [](SweepSpec &s, auto &k, auto &v) { s.scenario.sim_duration = to_double(k, v); }},
        {"warmup", [](SweepSpec &s, auto &k, auto &v) { s.scenario.warmup = to_double(k, v); }},
        {"seed",
         [](SweepSpec &s, auto &k, auto &v) { s.scenario.seed = to_int<std::uint64_t>(k, v); }},
        {"resample_size_per_link",
         [](SweepSpec &s, auto &k, auto &v) { s.scenario.resample_size_per_link = to_bool(k, v); }},
        {"size_law",
         [](SweepSpec &s, auto &k, auto &v) {
             const auto lv = lower(v);
             if (lv == "exponential") {
                 s.scenario.size_law = SizeLaw::Exponential;
             } else if (lv == "fixed") {
                 s.scenario.size_law = SizeLaw::Fixed;
             } else {
                 throw ParameterError("config: " + k + ": expected exponential|fixed");
             }
         }},
        {"link_mode",
         [](SweepSpec &s, auto &k, auto &v) {
             const auto lv = lower(v);
             if (lv == "symmetric") {
                 s.scenario.link_mode = LinkMode::Symmetric;
             } else if (lv == "asymmetric") {
                 s.scenario.link_mode = LinkMode::Asymmetric;
             } else {
                 throw ParameterError("config: " + k + ": expected symmetric|asymmetric");
             }
         }},
        {"m_values", [](SweepSpec &s, auto &k, auto &v) { s.m_values = to_int_list(k, v); }},
        {"tout_values",
         [](SweepSpec &s, auto &k, auto &v) {
             s.tout_values.clear();
             for (const auto &item : list_items(v)) {
                 s.tout_values.push_back(to_double(k, item));
             }
         }},
        {"seeds",
         [](SweepSpec &s, auto &k, auto &v) {
             s.seeds.clear();
             for (const auto &item : list_items(v)) {
                 s.seeds.push_back(to_int<std::uint64_t>(k, item));
             }
         }},
        {"modes",
         [](SweepSpec &s, auto &k, auto &v) {
             s.modes.clear();
             for (const auto &item : list_items(lower(v))) {
                 if (item == "theory") {
                     s.modes.push_back(RunMode::Theory);
                 } else if (item == "sim") {
                     s.modes.push_back(RunMode::Sim);
                 } else if (item == "both") {
                     s.modes = {RunMode::Theory, RunMode::Sim};
                 } else {
                     throw ParameterError("config: " + k + ": unknown mode '" + item + "'");
                 }
             }
         }},
        {"metric",
         [](SweepSpec &s, auto &k, auto &v) {
             const auto lv = lower(v);
             if (lv == "good" || lv == "gamma_good") {
                 s.metric = Metric::GammaGood;
             } else if (lv == "raw" || lv == "gamma_raw") {
                 s.metric = Metric::GammaRaw;
             } else {
                 throw ParameterError("config: " + k + ": expected good|raw");
             }
         }},
        {"sim_infinite_tout",
         [](SweepSpec &s, auto &k, auto &v) { s.sim_infinite_tout = to_bool(k, v); }},
        {"solver_step", [](SweepSpec &s, auto &k, auto &v) { s.solver.step = to_double(k, v); }},
        {"solver_tolerance",
         [](SweepSpec &s, auto &k, auto &v) { s.solver.tolerance = to_double(k, v); }},
        {"solver_rtt_max", [](SweepSpec &s, auto &k, auto &v) { s.solver.rtt_max = to_double(k, v); }},
        {"workers", [](SweepSpec &s, auto &k, auto &v) { s.workers = to_int<unsigned>(k, v); }},
    };
    return table;
}

}  // namespace

SweepSpec parse_config(std::istream &in, SweepSpec base) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParameterError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw ParameterError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                                 "'");
        }
        if (value.empty()) {
            throw ParameterError("config line " + std::to_string(lineno) + ": empty value for '" +
                                 key + "'");
        }
        it->second(base, key, value);
    }
    return base;
}

SweepSpec load_config(const std::filesystem::path &path, SweepSpec base) {
    std::ifstream in(path);
    if (!in) {
        throw ParameterError("cannot open config " + path.string());
    }
    try {
        return parse_config(in, std::move(base));
    } catch (const ParameterError &e) {
        throw ParameterError(path.string() + ": " + e.what());
    }
}

}  // namespace m2m

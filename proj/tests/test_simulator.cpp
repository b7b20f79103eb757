#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "m2m/simulator.hpp"

using namespace m2m;

namespace {

// Peer 0 runs one thread, peer 1 only answers. With fixed 1000-byte packets
// at 512 kbps every hop costs exactly 8000/512000 s and nothing contends.
ScenarioConfig two_peer_config(double tout = kInfinite) {
    ScenarioConfig cfg;
    cfg.n_peers = 2;
    cfg.threads_override = {1, 0};
    cfg.size_law = SizeLaw::Fixed;
    cfg.tout = tout;
    cfg.sim_duration = 20.0;
    cfg.warmup = 0.0;
    cfg.seed = 5;
    return cfg;
}

std::vector<std::string> lines_of(const std::string &text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

}  // namespace

TEST_CASE("service_time") {
    Packet data;
    data.kind = PacketKind::Data;
    data.size_bits = 8000.0;
    CHECK(service_time(data, 512000.0) == 0.015625);

    Packet req;
    req.kind = PacketKind::Request;
    CHECK(service_time(req, 512000.0) == 0.0);
}

TEST_CASE("exponential packet sizes give the nominal mean service time") {
    auto rng = derive_stream(11, "service");
    const int n = 100000;
    Packet data;
    data.kind = PacketKind::Data;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        data.size_bits = sample_exponential(rng, 8000.0);
        sum += service_time(data, 512000.0);
    }
    const double se = 0.015625 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum / n - 0.015625) < 3.0 * se);
}

TEST_CASE("select_destination") {
    auto rng = derive_stream(3, "dest");
    for (int i = 0; i < 100; ++i) {
        CHECK(select_destination(0, 2, rng) == 1);
        CHECK(select_destination(1, 2, rng) == 0);
    }
    CHECK_THROWS_AS(select_destination(0, 1, rng), ParameterError);

    auto a = derive_stream(3, "dest-copy");
    auto b = a;
    CHECK(select_destination(4, 10, a) == select_destination(4, 10, b));
}

TEST_CASE("select_destination is uniform over the other peers (chi-square, 0.01)") {
    auto rng = derive_stream(17, "chi");
    const int n = 10;
    const int self = 3;
    const int draws = 100000;
    std::vector<int> counts(n, 0);
    for (int i = 0; i < draws; ++i) {
        ++counts[static_cast<std::size_t>(select_destination(self, n, rng))];
    }
    CHECK(counts[self] == 0);
    const double expected = static_cast<double>(draws) / (n - 1);
    double chi2 = 0.0;
    for (int p = 0; p < n; ++p) {
        if (p != self) {
            chi2 += (counts[p] - expected) * (counts[p] - expected) / expected;
        }
    }
    CHECK(chi2 < 20.090);  // 8 degrees of freedom
}

TEST_CASE("on_data_arrival") {
    ThreadState t;
    t.phase = ThreadPhase::Waiting;
    t.current_request_id = 5;
    Packet pkt;
    pkt.kind = PacketKind::Data;

    pkt.request_id = 5;
    CHECK(on_data_arrival(t, pkt) == ArrivalVerdict::Deliver);
    pkt.request_id = 4;
    CHECK(on_data_arrival(t, pkt) == ArrivalVerdict::DropStale);

    t.current_request_id = 6;  // timed out and re-issued
    pkt.request_id = 5;
    CHECK(on_data_arrival(t, pkt) == ArrivalVerdict::DropStale);

    t.phase = ThreadPhase::Idle;
    pkt.request_id = 6;
    CHECK(on_data_arrival(t, pkt) == ArrivalVerdict::DropStale);
}

TEST_CASE("two-peer zero-contention rtt is tp + 4 L/C on every sample") {
    const auto rep = run_simulation(two_peer_config());
    REQUIRE(rep.data_ontime > 0);
    for (double rtt : rep.rtt_samples) {
        REQUIRE(std::abs(rtt - 0.6625) <= 1e-9);
    }
    // One request every 0.6625 s over 20 s.
    CHECK(rep.requests_sent == 31);
    CHECK(rep.data_ontime == 30);
    CHECK(rep.pending_at_end == 1);
    CHECK(rep.timeouts == 0);
}

TEST_CASE("two-peer golden trace") {
    std::ostringstream trace;
    auto cfg = two_peer_config();
    cfg.sim_duration = 0.7;
    run_simulation(cfg, SimOptions{&trace, true});
    const std::vector<std::string> golden = {
        "0.000000000 thread_start 0 0 0",
        "0.000000000 request_sent 0 0 1",
        "0.000000000 uplink_request 0 0 1",
        "0.331250000 request_received 1 0 1",
        "0.346875000 uplink_data 1 0 1",
        "0.662500000 data_delivered 0 0 1",
        "0.662500000 request_sent 0 0 2",
        "0.662500000 uplink_request 0 0 2",
    };
    CHECK(lines_of(trace.str()) == golden);
}

TEST_CASE("timer expiry issues a brand-new request and late data is stale") {
    std::ostringstream trace;
    auto cfg = two_peer_config(0.65);
    cfg.sim_duration = 1.0;
    run_simulation(cfg, SimOptions{&trace, true});
    const auto lines = lines_of(trace.str());
    const std::vector<std::string> expected = {
        "0.650000000 timer_fired 0 0 1",
        "0.650000000 request_sent 0 0 2",
        "0.650000000 uplink_request 0 0 2",
        "0.662500000 data_stale 0 0 1",
    };
    std::vector<std::string> tail;
    for (const auto &l : lines) {
        if (l.rfind("0.65", 0) == 0 || l.rfind("0.66", 0) == 0) {
            tail.push_back(l);
        }
    }
    CHECK(tail == expected);

    cfg.sim_duration = 20.0;
    const auto rep = run_simulation(cfg);
    CHECK(rep.data_ontime == 0);
    CHECK(rep.timeouts > 0);
    CHECK(rep.data_late_dropped > 0);
    CHECK(rep.data_late_dropped <= rep.timeouts);
    CHECK(rep.p_timeout_empirical == 1.0);
}

TEST_CASE("an infinite timer never fires") {
    std::ostringstream trace;
    ScenarioConfig cfg;
    cfg.n_peers = 6;
    cfg.threads_per_peer = 8;
    cfg.sim_duration = 10.0;
    cfg.warmup = 1.0;
    run_simulation(cfg, SimOptions{&trace, false});
    CHECK(trace.str().find("timer_fired") == std::string::npos);
    CHECK(trace.str().find("data_stale") == std::string::npos);
}

TEST_CASE("report invariants and determinism on small random scenarios") {
    auto rng = derive_stream(123, "scenario-gen");
    for (int i = 0; i < 20; ++i) {
        ScenarioConfig cfg;
        cfg.n_peers = 2 + static_cast<int>(rng.uniform_index(9));
        cfg.threads_per_peer = 1 + static_cast<int>(rng.uniform_index(8));
        cfg.tout = rng.uniform_index(4) == 0 ? kInfinite : 0.62 + 2.0 * rng.uniform_open0();
        cfg.sim_duration = 20.0;
        cfg.warmup = 2.0;
        cfg.seed = rng.next_u64();
        cfg.resample_size_per_link = rng.uniform_index(2) == 1;
        CAPTURE(i);

        const auto rep = run_simulation(cfg);
        CHECK(rep.requests_sent == rep.data_ontime + rep.timeouts + rep.pending_at_end);
        CHECK(rep.data_late_dropped <= rep.timeouts);
        CHECK(rep.window_violations == 0);
        CHECK(rep.gamma_good >= 0.0);
        CHECK(rep.gamma_good <= rep.gamma_raw);
        CHECK(rep.gamma_raw <= 1.0 + 0.05);
        CHECK(rep.uplink_utilization <= 1.0);
        CHECK(rep.downlink_utilization <= 1.0);
        if (rep.data_ontime > 0) {
            CHECK(rep.rtt_min >= cfg.tp);
        }
        CHECK(run_simulation(cfg) == rep);
    }
}

TEST_CASE("run_simulation rejects invalid scenarios") {
    ScenarioConfig cfg;
    cfg.n_peers = 1;
    CHECK_THROWS_AS(run_simulation(cfg), ParameterError);
    cfg = ScenarioConfig{};
    cfg.warmup = cfg.sim_duration;
    CHECK_THROWS_AS(run_simulation(cfg), ParameterError);
    cfg = ScenarioConfig{};
    cfg.uplink_bps = 0.0;
    CHECK_THROWS_AS(run_simulation(cfg), ParameterError);
    cfg = ScenarioConfig{};
    cfg.downlink_bps = 1e6;  // symmetric mode needs equal rates
    CHECK_THROWS_AS(run_simulation(cfg), ParameterError);
    cfg = ScenarioConfig{};
    cfg.threads_override = {1, 2};
    CHECK_THROWS_AS(run_simulation(cfg), ParameterError);
}

TEST_CASE("no-timeout simulation tracks the M/M/1 model within 10 percent") {
    for (int m : {10, 30, 50}) {
        ScenarioConfig cfg;
        cfg.threads_per_peer = m;
        cfg.tout = kInfinite;
        cfg.seed = 7;
        const auto rep = run_simulation(cfg, SimOptions{nullptr, false});
        const auto ref = solve_no_timeout(cfg.model_inputs());
        CAPTURE(m);
        CHECK(std::abs(rep.rtt_mean - ref.rtt) / ref.rtt < 0.10);
    }
}

TEST_CASE("default scenario at M=70, tout=2 agree with the model within 0.08") {
    ScenarioConfig cfg;
    cfg.threads_per_peer = 70;
    cfg.tout = 2.0;
    cfg.seed = 1;
    const auto rep = run_simulation(cfg, SimOptions{nullptr, false});
    const auto ref = solve_with_timeout(cfg.model_inputs());
    REQUIRE(ref.converged());
    CHECK(std::abs(rep.gamma_good - ref.gamma_good) <= 0.08);
}

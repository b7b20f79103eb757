#pragma once

#include <cstdint>
#include <ostream>
#include <string_view>
#include <vector>

#include "m2m/analytic_model.hpp"
#include "m2m/stats_math.hpp"

namespace m2m {

/// How data packet sizes are drawn.
enum class SizeLaw {
    Exponential,  // exponential with mean mean_data_bytes
    Fixed,        // every packet is exactly mean_data_bytes
};

std::string_view to_string(SizeLaw law);

struct ScenarioConfig {
    int n_peers = 110;
    int threads_per_peer = 70;
    std::vector<int> threads_override;  // per-peer M; empty means uniform
    double uplink_bps = 512000.0;
    double downlink_bps = 512000.0;
    double mean_data_bytes = 1000.0;
    double tp = 0.6;
    double tout = kInfinite;
    double sim_duration = 100.0;
    double warmup = 10.0;
    std::uint64_t seed = 1;
    bool resample_size_per_link = false;
    SizeLaw size_law = SizeLaw::Exponential;
    LinkMode link_mode = LinkMode::Symmetric;

    void validate() const;
    int threads_of(int peer) const;

    /// Analytic counterpart of this scenario (mu from the uplink rate).
    ModelInputs model_inputs() const;
};

enum class PacketKind : std::uint8_t { Request, Data };

struct Packet {
    PacketKind kind = PacketKind::Request;
    std::uint64_t request_id = 0;
    std::uint64_t data_id = 0;
    int src = 0;
    int dst = 0;
    int thread = 0;          // issuing thread at the requester
    double size_bits = 0.0;  // 0 for requests
    double issued_at = 0.0;
    double shadow_bits = 0.0;  // requests only: transmission-equivalent size
};

enum class ThreadPhase : std::uint8_t { Idle, Waiting };

struct ThreadState {
    int owner = 0;
    std::uint64_t current_request_id = 0;
    ThreadPhase phase = ThreadPhase::Idle;
    double request_sent_at = 0.0;
    double timer_deadline = kInfinite;
};

enum class ArrivalVerdict { Deliver, DropStale };

/// A data packet is delivered only to a waiting thread whose outstanding
/// request it answers; anything else is stale.
ArrivalVerdict on_data_arrival(const ThreadState &thread, const Packet &pkt);

/// Uniform over the n - 1 peers other than self.
int select_destination(int self, int n, RngStream &stream);

/// Server occupancy of a packet on a link. Requests occupy no server time.
double service_time(const Packet &pkt, double link_bps);

struct SimReport {
    // Per-request accounting over requests issued in [warmup, sim_duration).
    std::uint64_t requests_sent = 0;
    std::uint64_t data_ontime = 0;
    std::uint64_t data_late_dropped = 0;
    std::uint64_t timeouts = 0;
    std::uint64_t pending_at_end = 0;

    double rtt_mean = 0.0;
    double rtt_min = 0.0;
    double rtt_max = 0.0;
    std::vector<double> rtt_samples;

    double p_timeout_empirical = 0.0;
    double gamma_good = 0.0;
    double gamma_raw = 0.0;
    double uplink_utilization = 0.0;
    double downlink_utilization = 0.0;

    std::uint64_t events_processed = 0;
    std::uint64_t window_violations = 0;  // times a peer exceeded its thread count

    friend bool operator==(const SimReport &, const SimReport &) = default;
};

struct SimOptions {
    std::ostream *trace = nullptr;  // line-delimited event trace when set
    bool keep_rtt_samples = true;
};

SimReport run_simulation(const ScenarioConfig &cfg, const SimOptions &options = {});

}  // namespace m2m

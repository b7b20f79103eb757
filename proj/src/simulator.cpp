#include "m2m/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <queue>
#include <string>

namespace m2m {

std::string_view to_string(SizeLaw law) {
    return law == SizeLaw::Exponential ? "exponential" : "fixed";
}

void ScenarioConfig::validate() const {
    if (n_peers < 2) {
        throw ParameterError("n_peers must be at least 2");
    }
    if (threads_per_peer < 0) {
        throw ParameterError("threads_per_peer must be nonnegative");
    }
    if (!threads_override.empty()) {
        if (threads_override.size() != static_cast<std::size_t>(n_peers)) {
            throw ParameterError("threads_override must list one value per peer");
        }
        for (int m : threads_override) {
            if (m < 0) {
                throw ParameterError("threads_override entries must be nonnegative");
            }
        }
    }
    if (!(uplink_bps > 0.0) || !std::isfinite(uplink_bps)) {
        throw ParameterError("uplink_bps must be positive");
    }
    if (!(downlink_bps > 0.0) || !std::isfinite(downlink_bps)) {
        throw ParameterError("downlink_bps must be positive");
    }
    if (link_mode == LinkMode::Symmetric && uplink_bps != downlink_bps) {
        throw ParameterError("symmetric link_mode requires uplink_bps == downlink_bps");
    }
    if (!(mean_data_bytes > 0.0) || !std::isfinite(mean_data_bytes)) {
        throw ParameterError("mean_data_bytes must be positive");
    }
    if (!(tp >= 0.0) || !std::isfinite(tp)) {
        throw ParameterError("tp must be nonnegative");
    }
    if (std::isnan(tout) || !(tout > 0.0)) {
        throw ParameterError("tout must be positive or infinite");
    }
    if (!(warmup >= 0.0) || !(sim_duration > warmup) || !std::isfinite(sim_duration)) {
        throw ParameterError("require sim_duration > warmup >= 0");
    }
}

int ScenarioConfig::threads_of(int peer) const {
    return threads_override.empty() ? threads_per_peer
                                    : threads_override[static_cast<std::size_t>(peer)];
}

ModelInputs ScenarioConfig::model_inputs() const {
    ModelInputs in;
    const double mean_bits = mean_data_bytes * 8.0;
    in.mu_up = uplink_bps / mean_bits;
    if (link_mode == LinkMode::Asymmetric) {
        in.mu_down = downlink_bps / mean_bits;
    }
    in.tp = tp;
    in.tout = tout;
    in.m = threads_per_peer;
    in.mode = link_mode;
    return in;
}

ArrivalVerdict on_data_arrival(const ThreadState &thread, const Packet &pkt) {
    if (thread.phase == ThreadPhase::Waiting && pkt.request_id == thread.current_request_id) {
        return ArrivalVerdict::Deliver;
    }
    return ArrivalVerdict::DropStale;
}

int select_destination(int self, int n, RngStream &stream) {
    if (n < 2) {
        throw ParameterError("select_destination: need at least two peers");
    }
    auto r = static_cast<int>(stream.uniform_index(static_cast<std::uint64_t>(n - 1)));
    return r >= self ? r + 1 : r;
}

double service_time(const Packet &pkt, double link_bps) {
    return pkt.kind == PacketKind::Data ? pkt.size_bits / link_bps : 0.0;
}

namespace {

enum class EventKind : std::uint8_t {
    ThreadStart,
    UplinkServiceDone,
    DownlinkServiceDone,
    CoreArrival,
    RequestDelivered,
    TimerFired,
};

struct Event {
    double time;
    std::uint64_t sequence;
    EventKind kind;
    int peer;
    int thread;
    std::uint64_t request_id;
    Packet pkt;
};

struct EventLater {
    bool operator()(const Event &a, const Event &b) const {
        if (a.time != b.time) {
            return a.time > b.time;
        }
        return a.sequence > b.sequence;
    }
};

struct Link {
    std::deque<Packet> fifo;
    bool busy = false;
    double busy_time = 0.0;  // inside the measurement window
};

struct Peer {
    Link up;
    Link down;
    std::vector<ThreadState> threads;
    std::uint64_t local_request_id = 0;
    std::uint64_t next_data_id = 0;
    int outstanding = 0;
    RngStream dest_rng;
    RngStream size_rng;

    Peer(std::uint64_t seed, int index)
        : dest_rng(derive_stream(seed, "peer-" + std::to_string(index) + "/destination")),
          size_rng(derive_stream(seed, "peer-" + std::to_string(index) + "/size")) {}
};

class Simulation {
  public:
    Simulation(const ScenarioConfig &cfg, const SimOptions &options)
        : cfg_(cfg), options_(options), mean_bits_(cfg.mean_data_bytes * 8.0) {
        peers_.reserve(static_cast<std::size_t>(cfg.n_peers));
        for (int p = 0; p < cfg.n_peers; ++p) {
            peers_.emplace_back(cfg.seed, p);
            auto &peer = peers_.back();
            peer.threads.resize(static_cast<std::size_t>(cfg.threads_of(p)));
            for (auto &t : peer.threads) {
                t.owner = p;
            }
        }
    }

    SimReport run() {
        for (int p = 0; p < cfg_.n_peers; ++p) {
            const int m = cfg_.threads_of(p);
            for (int t = 0; t < m; ++t) {
                schedule(0.0, EventKind::ThreadStart, p, t, 0, Packet{});
            }
        }
        while (!queue_.empty()) {
            if (queue_.top().time > cfg_.sim_duration) {
                break;
            }
            Event ev = queue_.top();
            queue_.pop();
            ++report_.events_processed;
            dispatch(ev);
        }
        finish();
        return std::move(report_);
    }

  private:
    void schedule(double time, EventKind kind, int peer, int thread, std::uint64_t request_id,
                  const Packet &pkt) {
        queue_.push(Event{time, sequence_++, kind, peer, thread, request_id, pkt});
    }

    bool in_window(double t) const { return t >= cfg_.warmup && t < cfg_.sim_duration; }

    double draw_size(RngStream &rng) {
        return cfg_.size_law == SizeLaw::Fixed ? mean_bits_ : sample_exponential(rng, mean_bits_);
    }

    void trace(double now, const char *kind, int peer, int thread, std::uint64_t request_id) {
        if (options_.trace == nullptr) {
            return;
        }
        char line[128];
        std::snprintf(line, sizeof line, "%.9f %s %d %d %llu\n", now, kind, peer, thread,
                      static_cast<unsigned long long>(request_id));
        *options_.trace << line;
    }

    void dispatch(const Event &ev) {
        switch (ev.kind) {
        case EventKind::ThreadStart:
            trace(ev.time, "thread_start", ev.peer, ev.thread, 0);
            issue_request(ev.peer, ev.thread, ev.time);
            break;
        case EventKind::UplinkServiceDone:
            uplink_done(ev.peer, ev.time);
            break;
        case EventKind::DownlinkServiceDone:
            downlink_done(ev.peer, ev.time);
            break;
        case EventKind::CoreArrival:
            core_arrival(ev.pkt, ev.time);
            break;
        case EventKind::RequestDelivered:
            request_delivered(ev.pkt, ev.time);
            break;
        case EventKind::TimerFired:
            timer_fired(ev.peer, ev.thread, ev.request_id, ev.time);
            break;
        }
    }

    // Compose and send a new request (new id, destination, data id) and
    // arm the timer.
    void issue_request(int p, int t, double now) {
        auto &peer = peers_[static_cast<std::size_t>(p)];
        auto &thread = peer.threads[static_cast<std::size_t>(t)];

        Packet req;
        req.kind = PacketKind::Request;
        req.dst = select_destination(p, cfg_.n_peers, peer.dest_rng);
        req.src = p;
        req.thread = t;
        req.data_id = ++peer.next_data_id;
        req.request_id = ++peer.local_request_id;
        req.issued_at = now;
        req.shadow_bits = draw_size(peer.size_rng);

        thread.current_request_id = req.request_id;
        thread.phase = ThreadPhase::Waiting;
        thread.request_sent_at = now;
        thread.timer_deadline = now + cfg_.tout;
        if (std::isfinite(cfg_.tout)) {
            schedule(thread.timer_deadline, EventKind::TimerFired, p, t, req.request_id, Packet{});
        }

        if (++peer.outstanding > cfg_.threads_of(p)) {
            ++report_.window_violations;
        }
        if (in_window(now)) {
            ++report_.requests_sent;
        }
        trace(now, "request_sent", p, t, req.request_id);
        enqueue(p, /*uplink=*/true, req, now);
    }

    void enqueue(int p, bool uplink, const Packet &pkt, double now) {
        auto &peer = peers_[static_cast<std::size_t>(p)];
        Link &link = uplink ? peer.up : peer.down;
        link.fifo.push_back(pkt);
        if (!link.busy) {
            start_service(p, uplink, now);
        }
    }

    void start_service(int p, bool uplink, double now) {
        auto &peer = peers_[static_cast<std::size_t>(p)];
        Link &link = uplink ? peer.up : peer.down;
        const double bps = uplink ? cfg_.uplink_bps : cfg_.downlink_bps;
        const double st = service_time(link.fifo.front(), bps);
        link.busy = true;
        const double lo = std::max(now, cfg_.warmup);
        const double hi = std::min(now + st, cfg_.sim_duration);
        if (hi > lo) {
            link.busy_time += hi - lo;
        }
        schedule(now + st, uplink ? EventKind::UplinkServiceDone : EventKind::DownlinkServiceDone,
                 p, 0, 0, Packet{});
    }

    void uplink_done(int p, double now) {
        auto &link = peers_[static_cast<std::size_t>(p)].up;
        Packet pkt = link.fifo.front();
        link.fifo.pop_front();
        link.busy = false;
        if (!link.fifo.empty()) {
            start_service(p, true, now);
        }
        double delay = cfg_.tp / 2.0;
        if (pkt.kind == PacketKind::Request) {
            delay += pkt.shadow_bits / cfg_.uplink_bps;
        }
        trace(now, pkt.kind == PacketKind::Request ? "uplink_request" : "uplink_data", p,
              pkt.thread, pkt.request_id);
        schedule(now + delay, EventKind::CoreArrival, pkt.dst, pkt.thread, pkt.request_id, pkt);
    }

    void core_arrival(Packet pkt, double now) {
        if (cfg_.resample_size_per_link) {
            auto &rng = peers_[static_cast<std::size_t>(pkt.dst)].size_rng;
            if (pkt.kind == PacketKind::Data) {
                pkt.size_bits = draw_size(rng);
            } else {
                pkt.shadow_bits = draw_size(rng);
            }
        }
        enqueue(pkt.dst, /*uplink=*/false, pkt, now);
    }

    void downlink_done(int p, double now) {
        auto &link = peers_[static_cast<std::size_t>(p)].down;
        Packet pkt = link.fifo.front();
        link.fifo.pop_front();
        link.busy = false;
        if (!link.fifo.empty()) {
            start_service(p, false, now);
        }
        if (pkt.kind == PacketKind::Request) {
            schedule(now + pkt.shadow_bits / cfg_.downlink_bps, EventKind::RequestDelivered, p,
                     pkt.thread, pkt.request_id, pkt);
        } else {
            data_arrival(pkt, now);
        }
    }

    // The responder answers every request with one data packet that copies
    // the request and data ids.
    void request_delivered(const Packet &req, double now) {
        auto &responder = peers_[static_cast<std::size_t>(req.dst)];
        Packet data;
        data.kind = PacketKind::Data;
        data.request_id = req.request_id;
        data.data_id = req.data_id;
        data.src = req.dst;
        data.dst = req.src;
        data.thread = req.thread;
        data.size_bits = draw_size(responder.size_rng);
        data.issued_at = req.issued_at;
        trace(now, "request_received", req.dst, req.thread, req.request_id);
        enqueue(req.dst, /*uplink=*/true, data, now);
    }

    void data_arrival(const Packet &pkt, double now) {
        auto &peer = peers_[static_cast<std::size_t>(pkt.dst)];
        auto &thread = peer.threads[static_cast<std::size_t>(pkt.thread)];
        if (in_window(now)) {
            raw_bits_ += pkt.size_bits;
        }
        if (on_data_arrival(thread, pkt) == ArrivalVerdict::Deliver) {
            if (in_window(now)) {
                good_bits_ += pkt.size_bits;
            }
            if (in_window(pkt.issued_at)) {
                ++report_.data_ontime;
                const double rtt = now - pkt.issued_at;
                rtt_sum_ += rtt;
                if (report_.data_ontime == 1) {
                    report_.rtt_min = report_.rtt_max = rtt;
                } else {
                    report_.rtt_min = std::min(report_.rtt_min, rtt);
                    report_.rtt_max = std::max(report_.rtt_max, rtt);
                }
                if (options_.keep_rtt_samples) {
                    report_.rtt_samples.push_back(rtt);
                }
            }
            trace(now, "data_delivered", pkt.dst, pkt.thread, pkt.request_id);
            thread.phase = ThreadPhase::Idle;
            thread.timer_deadline = kInfinite;
            --peer.outstanding;
            issue_request(pkt.dst, pkt.thread, now);
        } else {
            if (in_window(pkt.issued_at)) {
                ++report_.data_late_dropped;
            }
            trace(now, "data_stale", pkt.dst, pkt.thread, pkt.request_id);
        }
    }

    void timer_fired(int p, int t, std::uint64_t request_id, double now) {
        auto &peer = peers_[static_cast<std::size_t>(p)];
        auto &thread = peer.threads[static_cast<std::size_t>(t)];
        // Timers are cancelled lazily: a timer for an answered request is ignored.
        if (thread.phase != ThreadPhase::Waiting || thread.current_request_id != request_id) {
            return;
        }
        if (in_window(thread.request_sent_at)) {
            ++report_.timeouts;
        }
        trace(now, "timer_fired", p, t, request_id);
        thread.phase = ThreadPhase::Idle;
        --peer.outstanding;
        issue_request(p, t, now);
    }

    void finish() {
        for (const auto &peer : peers_) {
            for (const auto &t : peer.threads) {
                if (t.phase == ThreadPhase::Waiting && in_window(t.request_sent_at)) {
                    ++report_.pending_at_end;
                }
            }
        }
        const double window = cfg_.sim_duration - cfg_.warmup;
        const double n = cfg_.n_peers;
        if (report_.data_ontime > 0) {
            report_.rtt_mean = rtt_sum_ / static_cast<double>(report_.data_ontime);
        }
        const auto resolved = report_.timeouts + report_.data_ontime;
        if (resolved > 0) {
            report_.p_timeout_empirical =
                static_cast<double>(report_.timeouts) / static_cast<double>(resolved);
        }
        report_.gamma_raw = raw_bits_ / window / cfg_.downlink_bps / n;
        report_.gamma_good = good_bits_ / window / cfg_.downlink_bps / n;
        double up_busy = 0.0;
        double down_busy = 0.0;
        for (const auto &peer : peers_) {
            up_busy += peer.up.busy_time;
            down_busy += peer.down.busy_time;
        }
        report_.uplink_utilization = up_busy / window / n;
        report_.downlink_utilization = down_busy / window / n;
    }

    const ScenarioConfig &cfg_;
    SimOptions options_;
    double mean_bits_;
    std::vector<Peer> peers_;
    std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
    std::uint64_t sequence_ = 0;
    SimReport report_;
    double rtt_sum_ = 0.0;
    double raw_bits_ = 0.0;
    double good_bits_ = 0.0;
};

}  // namespace

SimReport run_simulation(const ScenarioConfig &cfg, const SimOptions &options) {
    cfg.validate();
    Simulation sim(cfg, options);
    return sim.run();
}

}  // namespace m2m

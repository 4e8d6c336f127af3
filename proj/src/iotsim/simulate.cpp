#include "greenhouse/iotsim/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_set>
#include <utility>

#include "greenhouse/rng.hpp"
#include "greenhouse/text.hpp"

namespace greenhouse::iot {

void SimScenario::validate() const {
    if (steps == 0) throw UsageError("steps must be >= 1");
    if (endpoints.empty()) throw UsageError("scenario needs at least one endpoint");
    if (!(loss_probability >= 0.0 && loss_probability < 1.0)) throw UsageError("loss probability must lie in [0,1)");
    if (!(flow_rate >= 0.0 && flow_rate <= 1.0)) throw UsageError("flow_rate must lie in [0,1]");
    if (max_irrigation_steps == 0) throw UsageError("max_irrigation_steps must be >= 1");
    if (ticks_per_step == 0) throw UsageError("ticks_per_step must be >= 1");
    for (const auto& w : outages) {
        if (w.end < w.start) throw UsageError("outage window ends before it starts");
    }
    std::vector<std::uint16_t> ids;
    for (const auto& e : endpoints) {
        e.soil.validate();
        ids.push_back(e.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw UsageError("duplicate endpoint id");
    controller.validate();
}

bool SimScenario::server_up(std::uint64_t step) const noexcept {
    return std::none_of(outages.begin(), outages.end(), [&](const OutageWindow& w) { return w.contains(step); });
}

namespace {

/// Bernoulli-loss radio with one step of latency. Tracks which reliable
/// frames arrived at least once.
class Link {
public:
    Link(double loss, std::uint64_t seed) : loss_(loss), rng_(seed) {}

    /// Returns true when the transmission survives.
    bool transmit(const Outgoing& o) {
        const bool ok = !rng_.bernoulli(loss_);
        if (ok && o.trace_id != 0) delivered_.insert(o.trace_id);
        return ok;
    }
    bool delivered(std::uint64_t trace_id) const { return delivered_.count(trace_id) != 0; }
    std::size_t delivered_count() const noexcept { return delivered_.size(); }

private:
    double loss_;
    Rng rng_;
    std::unordered_set<std::uint64_t> delivered_;
};

}  // namespace

SimResult simulate(const SimScenario& sc) {
    sc.validate();
    SimResult result;
    EventLog& log = result.log;

    const std::size_t n = sc.endpoints.size();
    std::vector<Endpoint> endpoints;
    std::vector<Moisture> soil(n);
    std::vector<Rng> soil_rng;
    endpoints.reserve(n);
    for (std::size_t e = 0; e < n; ++e) {
        EndpointConfig cfg{sc.endpoints[e].id, sc.max_irrigation_steps, sc.report_interval, sc.reliable};
        endpoints.emplace_back(cfg);
        soil[e] = sc.endpoints[e].soil.initial_moisture;
        soil_rng.emplace_back(mix_seed(sc.seed, 100 + e));
        result.traces.push_back({sc.endpoints[e].soil_label, {}});
    }

    CoordinatorConfig ccfg;
    ccfg.failover_threshold = sc.failover_threshold;
    ccfg.heartbeat_interval = sc.heartbeat_interval;
    ccfg.controller = sc.controller;
    ccfg.reliable = sc.reliable;
    Coordinator coordinator(ccfg, sc.local_model ? std::optional<AnyModel>(sc.model) : std::nullopt);
    CloudServer server(sc.controller, sc.model, sc.heartbeat_interval);
    Link link(sc.loss_probability, mix_seed(sc.seed, 1));

    std::vector<Bytes> uplink;                    // arrives at the coordinator next tick
    std::vector<std::vector<Bytes>> downlink(n);  // arrives at each endpoint next tick
    std::vector<Publish> server_to_coord;

    std::vector<std::size_t> open_run(n, 0);
    std::uint64_t open_steps = 0, band_hits = 0, band_total = 0;
    Timestamp clock{2020, 3, 11, 14, 44, 39};
    bool was_up = true;

    const auto index_of = [&](std::uint16_t id) -> std::optional<std::size_t> {
        for (std::size_t e = 0; e < n; ++e) {
            if (sc.endpoints[e].id == id) return e;
        }
        return std::nullopt;
    };

    const auto send_up = [&](std::vector<Outgoing> frames) {
        for (const auto& o : frames) {
            if (link.transmit(o)) uplink.push_back(encode_frame(o.frame));
        }
    };

    for (std::uint64_t t = 0; t < sc.steps; ++t) {
        const bool up = sc.server_up(t);
        if (up != was_up) log.add(t, "server", up ? "up" : "down");
        was_up = up;

        std::uint64_t tick = t * sc.ticks_per_step;
        if (up) {
            if (auto hb = server.heartbeat(t)) server_to_coord.push_back(std::move(*hb));
        }
        for (std::size_t e = 0; e < n; ++e) send_up(endpoints[e].begin_step(soil[e], t, tick, &log));

        for (std::size_t r = 0; r < sc.ticks_per_step; ++r, ++tick) {
            // Everything sent during the previous slot arrives now.
            const std::vector<Bytes> coord_in = std::exchange(uplink, {});
            const std::vector<Publish> coord_server_in = std::exchange(server_to_coord, {});
            std::vector<std::vector<Bytes>> endpoint_in = std::exchange(downlink, std::vector<std::vector<Bytes>>(n));

            CoordinatorOutput coord_out = coordinator.on_tick(coord_in, coord_server_in, t, tick, &log);
            if (up) {
                server_to_coord = server.handle(coord_out.to_server, t, &log);
            }
            for (const auto& o : coord_out.to_endpoints) {
                const auto e = index_of(o.frame.endpoint_id);
                if (e && link.transmit(o)) downlink[*e].push_back(encode_frame(o.frame));
            }
            for (std::size_t e = 0; e < n; ++e) send_up(endpoints[e].on_tick(endpoint_in[e], t, tick, &log));
        }

        for (std::size_t e = 0; e < n; ++e) {
            result.traces[e].samples.push_back({clock, soil[e]});
            if (t >= sc.warmup) {
                const double m3 = soil[e][kLayers - 1];
                ++band_total;
                if (std::abs(m3 - sc.controller.setpoint) <= sc.controller.band * sc.controller.setpoint) ++band_hits;
            }
            const bool open = endpoints[e].faucet_open();
            if (open) {
                ++open_steps;
                result.summary.max_open_run = std::max(result.summary.max_open_run, ++open_run[e]);
            } else {
                open_run[e] = 0;
            }
            soil[e] = soil_step(sc.endpoints[e].soil, soil[e], open ? sc.flow_rate : 0.0, soil_rng[e]);
        }
        clock = clock.plus_seconds(kStepSeconds);
    }

    SimSummary& s = result.summary;
    s.steps = sc.steps;
    s.endpoints = n;
    const auto add_sender = [&](const ReliableSender& r) {
        s.frames_originated += r.originated();
        s.transmissions += r.transmissions();
        s.retransmissions += r.retransmissions();
        s.max_retransmissions_used = std::max(s.max_retransmissions_used, r.max_retransmissions_used());
    };
    for (const auto& ep : endpoints) {
        add_sender(ep.sender());
        s.duplicates += ep.duplicates();
        s.malformed += ep.malformed();
        s.timeouts += ep.timeouts();
    }
    for (const auto& [id, r] : coordinator.senders()) add_sender(r);
    s.duplicates += coordinator.duplicates();
    s.malformed += coordinator.malformed();

    s.frames_delivered = link.delivered_count();
    const auto count_lost = [&](const ReliableSender& r) {
        for (auto id : r.dropped_ids()) {
            if (!link.delivered(id)) ++s.frames_lost;
        }
    };
    for (const auto& ep : endpoints) count_lost(ep.sender());
    for (const auto& [id, r] : coordinator.senders()) count_lost(r);
    s.delivery_rate = s.frames_delivered + s.frames_lost == 0
                          ? 1.0
                          : static_cast<double>(s.frames_delivered) / static_cast<double>(s.frames_delivered + s.frames_lost);
    s.duty_cycle = static_cast<double>(open_steps) / static_cast<double>(sc.steps * n);
    s.server_commands = server.commands();
    s.failover_commands = coordinator.failover_commands();
    s.in_band_fraction = band_total == 0 ? 0.0 : static_cast<double>(band_hits) / static_cast<double>(band_total);
    return result;
}

void write_summary(std::ostream& out, const SimSummary& s) {
    out << "steps " << s.steps << '\n'
        << "endpoints " << s.endpoints << '\n'
        << "frames_originated " << s.frames_originated << '\n'
        << "transmissions " << s.transmissions << '\n'
        << "retransmissions " << s.retransmissions << '\n'
        << "frames_delivered " << s.frames_delivered << '\n'
        << "frames_lost " << s.frames_lost << '\n'
        << "delivery_rate " << format_g17(s.delivery_rate) << '\n'
        << "max_retransmissions_used " << s.max_retransmissions_used << '\n'
        << "duplicates " << s.duplicates << '\n'
        << "malformed " << s.malformed << '\n'
        << "duty_cycle " << format_g17(s.duty_cycle) << '\n'
        << "timeouts " << s.timeouts << '\n'
        << "server_commands " << s.server_commands << '\n'
        << "failover_commands " << s.failover_commands << '\n'
        << "in_band_fraction " << format_g17(s.in_band_fraction) << '\n'
        << "max_open_run " << s.max_open_run << '\n';
}

}  // namespace greenhouse::iot

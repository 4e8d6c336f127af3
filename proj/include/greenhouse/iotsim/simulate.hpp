#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "greenhouse/iotsim/nodes.hpp"

namespace greenhouse::iot {

/// Server outage covering steps [start, end).
struct OutageWindow {
    std::uint64_t start = 0;
    std::uint64_t end = 0;
    bool contains(std::uint64_t step) const noexcept { return step >= start && step < end; }
};

struct EndpointSpec {
    std::uint16_t id = 1;
    SoilParams soil;
    std::string soil_label = "Soil1";
};

struct SimScenario {
    std::uint64_t seed = 1;
    std::size_t steps = 2000;
    std::vector<EndpointSpec> endpoints;
    /// Per-transmission loss on the endpoint/coordinator radio, both ways.
    double loss_probability = 0.0;
    std::vector<OutageWindow> outages;
    ControllerConfig controller;
    /// Water added to the surface layer for every step the faucet is open.
    double flow_rate = 0.02;
    std::size_t max_irrigation_steps = 20;
    std::size_t failover_threshold = 3;
    std::size_t heartbeat_interval = 1;
    std::size_t report_interval = 1;
    /// Radio slots per step. Every hop (endpoint to coordinator, coordinator
    /// to server, back) takes one slot; retransmission timers count slots.
    std::size_t ticks_per_step = 12;
    ReliableConfig reliable;
    /// Steps excluded from the in-band fraction.
    std::size_t warmup = 200;
    /// Model the server controls with; also downloaded to the coordinator
    /// when `local_model` is set.
    AnyModel model = SvrModel{};
    bool local_model = true;

    void validate() const;
    bool server_up(std::uint64_t step) const noexcept;
};

struct SimSummary {
    std::size_t steps = 0;
    std::size_t endpoints = 0;
    std::uint64_t frames_originated = 0;
    std::uint64_t transmissions = 0;
    std::uint64_t retransmissions = 0;
    std::uint64_t frames_delivered = 0;  // distinct reliable frames that reached their peer
    std::uint64_t frames_lost = 0;       // given up without ever arriving
    double delivery_rate = 1.0;          // delivered / (delivered + lost)
    std::size_t max_retransmissions_used = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t malformed = 0;
    double duty_cycle = 0.0;
    std::uint64_t timeouts = 0;
    std::uint64_t server_commands = 0;
    std::uint64_t failover_commands = 0;
    double in_band_fraction = 0.0;
    std::size_t max_open_run = 0;
};

struct SimResult {
    EventLog log;
    /// Soil state of each endpoint at every step, in endpoint order.
    std::vector<Dataset> traces;
    SimSummary summary;
};

SimResult simulate(const SimScenario& scenario);

/// `key value` lines, fixed order.
void write_summary(std::ostream& out, const SimSummary& summary);

}  // namespace greenhouse::iot

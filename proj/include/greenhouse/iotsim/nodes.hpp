#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "greenhouse/iotsim/frame.hpp"
#include "greenhouse/model_io.hpp"

namespace greenhouse::iot {

using Bytes = std::vector<std::uint8_t>;

// Event log ------------------------------------------------------------------

struct LogEvent {
    std::uint64_t step = 0;
    std::string actor;
    std::string event;
    std::string details;
};

/// One line per event: `step<TAB>actor<TAB>event<TAB>details`.
class EventLog {
public:
    void add(std::uint64_t step, std::string actor, std::string event, std::string details = {});
    const std::vector<LogEvent>& events() const noexcept { return events_; }
    void write(std::ostream& out) const;

private:
    std::vector<LogEvent> events_;
};

// Controller -----------------------------------------------------------------

enum class Decision { Open, Close, Hold };
const char* decision_name(Decision d) noexcept;

struct ControllerConfig {
    double setpoint = 0.4;  // deepest layer
    double band = 0.05;     // relative: setpoint * (1 +- band)
    std::size_t horizon = 3;

    void validate() const;
};

/// Band rule on a prediction of the deepest layer `horizon` steps ahead.
/// The prediction is clamped to [0,1] first.
Decision band_decision(const ControllerConfig& config, double predicted);
Decision controller_decide(const ControllerConfig& config, const AnyModel& model, const Moisture& features);

// Reliable delivery ------------------------------------------------------------

struct ReliableConfig {
    /// Retransmissions after the first send; a frame is sent at most
    /// 1 + max_retransmissions times.
    std::size_t max_retransmissions = 4;
    /// Ticks to wait for an ACK before resending. With one tick of latency
    /// in each direction an ACK comes back two ticks after the send.
    std::size_t ack_timeout = 2;
};

/// A frame handed to the link, with an id that follows it through resends.
struct Outgoing {
    Frame frame;
    std::uint64_t trace_id = 0;  // 0 for ACKs, which are never resent
};

/// Stop-and-wait style sender with a per-frame retransmission budget.
/// Several frames may be outstanding at once; each is matched to its ACK by
/// sequence number.
class ReliableSender {
public:
    ReliableSender() = default;
    ReliableSender(std::uint64_t trace_base, ReliableConfig config) : next_trace_(trace_base), config_(config) {}

    /// Assigns the next sequence number, queues the frame and returns it for
    /// its first transmission.
    Outgoing send(Frame frame, std::uint64_t now);
    /// Returns true when the ACK matched an outstanding frame.
    bool acknowledge(std::uint8_t seq);
    /// Frames whose ACK is overdue. Frames that used their whole budget are
    /// removed and reported through `given_up`.
    std::vector<Outgoing> due(std::uint64_t now, std::vector<Outgoing>* given_up = nullptr);

    std::size_t pending() const noexcept { return pending_.size(); }
    std::uint64_t originated() const noexcept { return originated_; }
    std::uint64_t transmissions() const noexcept { return transmissions_; }
    std::uint64_t retransmissions() const noexcept { return transmissions_ - originated_; }
    std::uint64_t dropped() const noexcept { return dropped_.size(); }
    /// Trace ids of the frames given up on, in order.
    const std::vector<std::uint64_t>& dropped_ids() const noexcept { return dropped_; }
    /// Largest number of retransmissions any single frame has used.
    std::size_t max_retransmissions_used() const noexcept { return max_used_; }

private:
    struct Pending {
        Outgoing out;
        std::size_t transmissions = 0;
        std::uint64_t last_sent = 0;
    };
    std::deque<Pending> pending_;
    std::uint8_t next_seq_ = 0;
    std::uint64_t next_trace_ = 1;
    ReliableConfig config_;
    std::uint64_t originated_ = 0;
    std::uint64_t transmissions_ = 0;
    std::vector<std::uint64_t> dropped_;
    std::size_t max_used_ = 0;
};

/// Remembers recently accepted sequence numbers per sender so a frame that
/// arrives twice (its ACK was lost) is acknowledged again but processed once.
/// Entries expire after `window` ticks, which keeps 8-bit sequence
/// wrap-around safe.
class DedupFilter {
public:
    explicit DedupFilter(std::size_t window = 32) : window_(window) {}
    /// True when (sender, seq) is new; records it.
    bool accept(std::uint16_t sender, std::uint8_t seq, std::uint64_t now);

private:
    std::size_t window_;
    std::map<std::uint32_t, std::uint64_t> seen_;
};

// Endpoint -------------------------------------------------------------------

struct EndpointConfig {
    std::uint16_t id = 1;
    std::size_t max_irrigation_steps = 20;
    std::size_t report_interval = 1;
    ReliableConfig reliable;
};

class Endpoint {
public:
    explicit Endpoint(EndpointConfig config);

    /// Start of a simulation step: advances the safety timer for the step
    /// just irrigated (closing the faucet and raising TIMEOUT_ERROR at the
    /// limit) and emits the periodic SENSOR_REPORT. An OPEN arriving in the
    /// same step as a timeout is acknowledged but refused, so the faucet
    /// stays closed for at least that step.
    std::vector<Outgoing> begin_step(const Moisture& reading, std::uint64_t step, std::uint64_t tick,
                                     EventLog* log = nullptr);
    /// Radio slot: handles delivered bytes and resends overdue frames.
    /// Malformed input is counted and dropped.
    std::vector<Outgoing> on_tick(std::span<const Bytes> inbox, std::uint64_t step, std::uint64_t tick,
                                  EventLog* log = nullptr);
    /// One step with a single radio slot: safety timer and report, then the
    /// inbox, then retransmissions.
    std::vector<Outgoing> step(std::span<const Bytes> inbox, const Moisture& reading, std::uint64_t now,
                               EventLog* log = nullptr);

    const EndpointConfig& config() const noexcept { return config_; }
    bool faucet_open() const noexcept { return faucet_open_; }
    /// Irrigated steps since the faucet last opened; empty while closed.
    std::optional<std::size_t> irrigation_timer() const noexcept { return timer_; }
    const ReliableSender& sender() const noexcept { return sender_; }
    std::uint64_t malformed() const noexcept { return malformed_; }
    std::uint64_t timeouts() const noexcept { return timeouts_; }
    std::uint64_t duplicates() const noexcept { return duplicates_; }

private:
    void apply_command(Command cmd, std::uint64_t step, EventLog* log);
    void handle_inbox(std::span<const Bytes> inbox, std::uint64_t step, std::uint64_t tick,
                      std::vector<Outgoing>& out, EventLog* log);
    void retransmit(std::uint64_t step, std::uint64_t tick, std::vector<Outgoing>& out, EventLog* log);

    EndpointConfig config_;
    ReliableSender sender_;
    DedupFilter dedup_;
    bool faucet_open_ = false;
    std::optional<std::size_t> timer_;
    std::optional<std::uint64_t> lockout_step_;
    std::uint64_t malformed_ = 0;
    std::uint64_t timeouts_ = 0;
    std::uint64_t duplicates_ = 0;
};

// Coordinator ----------------------------------------------------------------

/// MQTT-style record exchanged between the coordinator and the server.
struct Publish {
    std::string topic;
    std::string payload;
    bool operator==(const Publish&) const = default;
};

std::string moisture_topic(std::uint16_t endpoint_id);
std::string command_topic(std::uint16_t endpoint_id);
std::string error_topic(std::uint16_t endpoint_id);
inline constexpr const char* kHeartbeatTopic = "greenhouse/server/heartbeat";

struct CoordinatorConfig {
    std::size_t failover_threshold = 3;
    std::size_t heartbeat_interval = 1;
    ControllerConfig controller;
    ReliableConfig reliable;
    std::size_t dedup_window = 32;
};

struct CoordinatorOutput {
    std::vector<Publish> to_server;
    std::vector<Outgoing> to_endpoints;
};

/// Gateway between the endpoint radio frames and the server topics.
class Coordinator {
public:
    explicit Coordinator(CoordinatorConfig config, std::optional<AnyModel> local_model = std::nullopt);

    /// Heartbeats are tracked in steps; retransmission timers in ticks.
    CoordinatorOutput on_tick(std::span<const Bytes> from_endpoints, std::span<const Publish> from_server,
                              std::uint64_t step, std::uint64_t tick, EventLog* log = nullptr);
    CoordinatorOutput step(std::span<const Bytes> from_endpoints, std::span<const Publish> from_server,
                           std::uint64_t now, EventLog* log = nullptr) {
        return on_tick(from_endpoints, from_server, now, now, log);
    }

    /// Heartbeat intervals elapsed since the last heartbeat arrived.
    std::size_t missed_heartbeats(std::uint64_t step) const;
    bool in_failover() const noexcept { return failover_; }
    bool has_local_model() const noexcept { return local_model_.has_value(); }

    std::uint64_t duplicates() const noexcept { return duplicates_; }
    std::uint64_t malformed() const noexcept { return malformed_; }
    std::uint64_t failover_commands() const noexcept { return failover_commands_; }
    /// Senders toward each endpoint, keyed by endpoint id.
    const std::map<std::uint16_t, ReliableSender>& senders() const noexcept { return senders_; }

private:
    ReliableSender& sender_for(std::uint16_t endpoint_id);
    void send_command(std::uint16_t endpoint_id, Command cmd, bool failover, std::uint64_t step,
                      std::uint64_t tick, CoordinatorOutput& out, EventLog* log);

    CoordinatorConfig config_;
    std::optional<AnyModel> local_model_;
    std::map<std::uint16_t, ReliableSender> senders_;
    DedupFilter dedup_;
    std::uint64_t last_heartbeat_ = 0;
    bool failover_ = false;
    std::uint64_t duplicates_ = 0;
    std::uint64_t malformed_ = 0;
    std::uint64_t failover_commands_ = 0;
};

// Cloud server ---------------------------------------------------------------

class CloudServer {
public:
    CloudServer(ControllerConfig config, AnyModel model, std::size_t heartbeat_interval = 1);

    /// One command publish per moisture report whose decision is not HOLD.
    std::vector<Publish> handle(std::span<const Publish> inbox, std::uint64_t step, EventLog* log = nullptr);
    /// Heartbeat publish when `step` falls on the interval.
    std::optional<Publish> heartbeat(std::uint64_t step) const;
    /// handle() followed by heartbeat().
    std::vector<Publish> step(std::span<const Publish> inbox, std::uint64_t now, EventLog* log = nullptr);

    std::uint64_t commands() const noexcept { return commands_; }

private:
    ControllerConfig config_;
    AnyModel model_;
    std::size_t heartbeat_interval_;
    std::uint64_t commands_ = 0;
};

/// Text payloads used on the server topics.
std::string format_moisture_payload(const SensorReport& report);
SensorReport parse_moisture_payload(const std::string& payload);

}  // namespace greenhouse::iot

#include "greenhouse/iotsim/nodes.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

#include "greenhouse/text.hpp"

namespace greenhouse::iot {

void EventLog::add(std::uint64_t step, std::string actor, std::string event, std::string details) {
    events_.push_back({step, std::move(actor), std::move(event), std::move(details)});
}

void EventLog::write(std::ostream& out) const {
    for (const auto& e : events_) out << e.step << '\t' << e.actor << '\t' << e.event << '\t' << e.details << '\n';
}

namespace {

void note(EventLog* log, std::uint64_t step, std::string actor, std::string event, std::string details = {}) {
    if (log) log->add(step, std::move(actor), std::move(event), std::move(details));
}

std::string endpoint_actor(std::uint16_t id) { return "endpoint/" + std::to_string(id); }

Outgoing ack_for(const Frame& frame) { return {Frame{MsgType::Ack, frame.endpoint_id, frame.seq, {}}, 0}; }

Command to_command(Decision d) { return d == Decision::Open ? Command::Open : Command::Close; }

const char* command_name(Command c) { return c == Command::Open ? "OPEN" : "CLOSE"; }

struct TopicRef {
    std::uint16_t endpoint_id;
    std::string kind;
};

std::optional<TopicRef> parse_topic(const std::string& topic) {
    const auto parts = split(topic, '/');
    if (parts.size() != 3 || parts[0] != "greenhouse") return std::nullopt;
    const auto id = parse_int(parts[1]);
    if (!id || *id < 0 || *id > 0xFFFF) return std::nullopt;
    return TopicRef{static_cast<std::uint16_t>(*id), std::string(parts[2])};
}

}  // namespace

// Controller -----------------------------------------------------------------

const char* decision_name(Decision d) noexcept {
    switch (d) {
        case Decision::Open: return "OPEN";
        case Decision::Close: return "CLOSE";
        case Decision::Hold: return "HOLD";
    }
    return "HOLD";
}

void ControllerConfig::validate() const {
    if (!(setpoint > 0.0 && setpoint < 1.0)) throw UsageError("setpoint must lie in (0,1)");
    if (!(band > 0.0 && band < 1.0)) throw UsageError("band must lie in (0,1)");
    if (horizon == 0) throw UsageError("horizon must be >= 1");
}

Decision band_decision(const ControllerConfig& config, double predicted) {
    const double y = std::clamp(predicted, 0.0, 1.0);
    if (y < config.setpoint * (1.0 - config.band)) return Decision::Open;
    if (y > config.setpoint * (1.0 + config.band)) return Decision::Close;
    return Decision::Hold;
}

Decision controller_decide(const ControllerConfig& config, const AnyModel& model, const Moisture& features) {
    return band_decision(config, predict(model, features));
}

// Reliable delivery ------------------------------------------------------------

Outgoing ReliableSender::send(Frame frame, std::uint64_t now) {
    frame.seq = next_seq_++;
    Outgoing out{std::move(frame), next_trace_++};
    pending_.push_back({out, 1, now});
    ++originated_;
    ++transmissions_;
    return out;
}

bool ReliableSender::acknowledge(std::uint8_t seq) {
    const auto it = std::find_if(pending_.begin(), pending_.end(), [&](const Pending& p) { return p.out.frame.seq == seq; });
    if (it == pending_.end()) return false;
    pending_.erase(it);
    return true;
}

std::vector<Outgoing> ReliableSender::due(std::uint64_t now, std::vector<Outgoing>* given_up) {
    std::vector<Outgoing> resend;
    for (auto it = pending_.begin(); it != pending_.end();) {
        if (now - it->last_sent < config_.ack_timeout) {
            ++it;
            continue;
        }
        if (it->transmissions > config_.max_retransmissions) {
            dropped_.push_back(it->out.trace_id);
            if (given_up) given_up->push_back(it->out);
            it = pending_.erase(it);
            continue;
        }
        ++it->transmissions;
        ++transmissions_;
        it->last_sent = now;
        max_used_ = std::max(max_used_, it->transmissions - 1);
        resend.push_back(it->out);
        ++it;
    }
    return resend;
}

bool DedupFilter::accept(std::uint16_t sender, std::uint8_t seq, std::uint64_t now) {
    const std::uint32_t key = (static_cast<std::uint32_t>(sender) << 8) | seq;
    const auto [it, inserted] = seen_.try_emplace(key, now);
    if (inserted) return true;
    if (now - it->second < window_) return false;
    it->second = now;
    return true;
}

// Endpoint -------------------------------------------------------------------

Endpoint::Endpoint(EndpointConfig config)
    : config_(config), sender_((static_cast<std::uint64_t>(config.id) + 1) << 40, config.reliable) {
    if (config_.max_irrigation_steps == 0) throw UsageError("max_irrigation_steps must be >= 1");
    if (config_.report_interval == 0) throw UsageError("report_interval must be >= 1");
}

void Endpoint::apply_command(Command cmd, std::uint64_t step, EventLog* log) {
    if (cmd == Command::Open && !faucet_open_) {
        if (lockout_step_ == step) {
            note(log, step, endpoint_actor(config_.id), "open_refused", "reason=timeout");
            return;
        }
        faucet_open_ = true;
        timer_ = 0;
        note(log, step, endpoint_actor(config_.id), "faucet_open");
    } else if (cmd == Command::Close && faucet_open_) {
        faucet_open_ = false;
        note(log, step, endpoint_actor(config_.id), "faucet_close", "irrigated=" + std::to_string(*timer_));
        timer_.reset();
    }
}

void Endpoint::handle_inbox(std::span<const Bytes> inbox, std::uint64_t step, std::uint64_t tick,
                            std::vector<Outgoing>& out, EventLog* log) {
    for (const auto& bytes : inbox) {
        try {
            const Frame f = decode_frame(bytes);
            if (f.endpoint_id != config_.id) {
                ++malformed_;
                continue;
            }
            if (f.type == MsgType::Ack) {
                sender_.acknowledge(f.seq);
            } else if (f.type == MsgType::IrrigationCmd) {
                const Command cmd = decode_command(f.payload);
                out.push_back(ack_for(f));
                if (dedup_.accept(0, f.seq, tick)) {
                    apply_command(cmd, step, log);
                } else {
                    ++duplicates_;
                }
            } else {
                ++malformed_;
            }
        } catch (const FrameError&) {
            ++malformed_;
        }
    }
}

void Endpoint::retransmit(std::uint64_t step, std::uint64_t tick, std::vector<Outgoing>& out, EventLog* log) {
    const std::string actor = endpoint_actor(config_.id);
    std::vector<Outgoing> given_up;
    for (auto& r : sender_.due(tick, &given_up)) {
        note(log, step, actor, "retransmit", "seq=" + std::to_string(r.frame.seq));
        out.push_back(std::move(r));
    }
    for (const auto& g : given_up) note(log, step, actor, "give_up", "seq=" + std::to_string(g.frame.seq));
}

std::vector<Outgoing> Endpoint::begin_step(const Moisture& reading, std::uint64_t step, std::uint64_t tick,
                                           EventLog* log) {
    std::vector<Outgoing> out;
    if (faucet_open_) {
        ++*timer_;
        if (*timer_ >= config_.max_irrigation_steps) {
            faucet_open_ = false;
            timer_.reset();
            lockout_step_ = step;
            ++timeouts_;
            note(log, step, endpoint_actor(config_.id), "TIMEOUT_ERROR",
                 "limit=" + std::to_string(config_.max_irrigation_steps));
            out.push_back(sender_.send(
                {MsgType::TimeoutError, config_.id, 0, encode_step(static_cast<std::uint32_t>(step))}, tick));
        }
    }
    if (step % config_.report_interval == 0) {
        const auto report = make_sensor_report(reading, static_cast<std::uint32_t>(step));
        out.push_back(sender_.send({MsgType::SensorReport, config_.id, 0, encode_sensor_report(report)}, tick));
    }
    return out;
}

std::vector<Outgoing> Endpoint::on_tick(std::span<const Bytes> inbox, std::uint64_t step, std::uint64_t tick,
                                        EventLog* log) {
    std::vector<Outgoing> out;
    handle_inbox(inbox, step, tick, out, log);
    retransmit(step, tick, out, log);
    return out;
}

std::vector<Outgoing> Endpoint::step(std::span<const Bytes> inbox, const Moisture& reading, std::uint64_t now,
                                     EventLog* log) {
    std::vector<Outgoing> out = begin_step(reading, now, now, log);
    handle_inbox(inbox, now, now, out, log);
    retransmit(now, now, out, log);
    return out;
}

// Coordinator ----------------------------------------------------------------

std::string moisture_topic(std::uint16_t id) { return "greenhouse/" + std::to_string(id) + "/moisture"; }
std::string command_topic(std::uint16_t id) { return "greenhouse/" + std::to_string(id) + "/cmd"; }
std::string error_topic(std::uint16_t id) { return "greenhouse/" + std::to_string(id) + "/error"; }

std::string format_moisture_payload(const SensorReport& report) {
    std::string s;
    for (auto v : report.raw) s += std::to_string(v) + ',';
    return s + std::to_string(report.step);
}

SensorReport parse_moisture_payload(const std::string& payload) {
    const auto parts = split(payload, ',');
    if (parts.size() != kLayers + 1) throw FormatError("moisture payload needs 5 fields");
    SensorReport r;
    for (std::size_t i = 0; i <= kLayers; ++i) {
        const auto v = parse_int64(parts[i]);
        if (!v || *v < 0) throw FormatError("bad moisture payload field");
        if (i < kLayers) {
            if (*v > kMoistureScale) throw FormatError("moisture word above 10000");
            r.raw[i] = static_cast<std::uint16_t>(*v);
        } else {
            r.step = static_cast<std::uint32_t>(*v);
        }
    }
    return r;
}

Coordinator::Coordinator(CoordinatorConfig config, std::optional<AnyModel> local_model)
    : config_(config), local_model_(std::move(local_model)), dedup_(config.dedup_window) {
    if (config_.failover_threshold == 0) throw UsageError("failover_threshold must be >= 1");
    if (config_.heartbeat_interval == 0) throw UsageError("heartbeat_interval must be >= 1");
    config_.controller.validate();
}

ReliableSender& Coordinator::sender_for(std::uint16_t endpoint_id) {
    auto it = senders_.find(endpoint_id);
    if (it == senders_.end()) {
        it = senders_.emplace(endpoint_id, ReliableSender((static_cast<std::uint64_t>(endpoint_id) + 1) << 48,
                                                          config_.reliable)).first;
    }
    return it->second;
}

std::size_t Coordinator::missed_heartbeats(std::uint64_t step) const {
    return static_cast<std::size_t>((step - last_heartbeat_) / config_.heartbeat_interval);
}

void Coordinator::send_command(std::uint16_t endpoint_id, Command cmd, bool failover, std::uint64_t step,
                               std::uint64_t tick, CoordinatorOutput& out, EventLog* log) {
    out.to_endpoints.push_back(
        sender_for(endpoint_id).send({MsgType::IrrigationCmd, endpoint_id, 0, encode_command(cmd)}, tick));
    if (failover) ++failover_commands_;
    note(log, step, "coordinator", "cmd",
         "endpoint=" + std::to_string(endpoint_id) + " cmd=" + command_name(cmd) +
             " source=" + (failover ? "failover" : "server"));
}

CoordinatorOutput Coordinator::on_tick(std::span<const Bytes> from_endpoints, std::span<const Publish> from_server,
                                       std::uint64_t step, std::uint64_t tick, EventLog* log) {
    CoordinatorOutput out;

    for (const auto& p : from_server) {
        if (p.topic == kHeartbeatTopic) {
            last_heartbeat_ = step;
            continue;
        }
        const auto ref = parse_topic(p.topic);
        if (ref && ref->kind == "cmd" && (p.payload == "OPEN" || p.payload == "CLOSE")) {
            send_command(ref->endpoint_id, p.payload == "OPEN" ? Command::Open : Command::Close, false, step, tick, out, log);
        }
    }

    const bool failover = local_model_ && missed_heartbeats(step) >= config_.failover_threshold;
    if (failover != failover_) {
        note(log, step, "coordinator", failover ? "failover_enter" : "failover_exit",
             "missed=" + std::to_string(missed_heartbeats(step)));
        failover_ = failover;
    }

    for (const auto& bytes : from_endpoints) {
        try {
            const Frame f = decode_frame(bytes);
            switch (f.type) {
                case MsgType::Ack:
                    sender_for(f.endpoint_id).acknowledge(f.seq);
                    break;
                case MsgType::SensorReport: {
                    const SensorReport report = decode_sensor_report(f.payload);
                    out.to_endpoints.push_back(ack_for(f));
                    if (!dedup_.accept(f.endpoint_id, f.seq, tick)) {
                        ++duplicates_;
                        break;
                    }
                    out.to_server.push_back({moisture_topic(f.endpoint_id), format_moisture_payload(report)});
                    if (failover_) {
                        const Decision d = controller_decide(config_.controller, *local_model_, report.moisture());
                        if (d != Decision::Hold) send_command(f.endpoint_id, to_command(d), true, step, tick, out, log);
                    }
                    break;
                }
                case MsgType::TimeoutError: {
                    const auto at = decode_step(f.payload);
                    out.to_endpoints.push_back(ack_for(f));
                    if (!dedup_.accept(f.endpoint_id, f.seq, tick)) {
                        ++duplicates_;
                        break;
                    }
                    out.to_server.push_back({error_topic(f.endpoint_id), "TIMEOUT_ERROR step=" + std::to_string(at)});
                    note(log, step, "coordinator", "error_forward", "endpoint=" + std::to_string(f.endpoint_id));
                    break;
                }
                default:
                    ++malformed_;
            }
        } catch (const FrameError&) {
            ++malformed_;
        }
    }

    for (auto& [id, sender] : senders_) {
        std::vector<Outgoing> given_up;
        for (auto& r : sender.due(tick, &given_up)) out.to_endpoints.push_back(std::move(r));
        for (const auto& g : given_up) {
            note(log, step, "coordinator", "give_up", "endpoint=" + std::to_string(id) + " seq=" + std::to_string(g.frame.seq));
        }
    }
    return out;
}

// Cloud server ---------------------------------------------------------------

CloudServer::CloudServer(ControllerConfig config, AnyModel model, std::size_t heartbeat_interval)
    : config_(config), model_(std::move(model)), heartbeat_interval_(heartbeat_interval) {
    config_.validate();
    if (heartbeat_interval_ == 0) throw UsageError("heartbeat_interval must be >= 1");
}

std::vector<Publish> CloudServer::handle(std::span<const Publish> inbox, std::uint64_t step, EventLog* log) {
    std::vector<Publish> out;
    for (const auto& p : inbox) {
        const auto ref = parse_topic(p.topic);
        if (!ref) continue;
        if (ref->kind == "moisture") {
            const SensorReport report = parse_moisture_payload(p.payload);
            const double y = predict(model_, report.moisture());
            const Decision d = band_decision(config_, y);
            if (d == Decision::Hold) continue;
            ++commands_;
            out.push_back({command_topic(ref->endpoint_id), decision_name(d)});
            note(log, step, "server", "decide",
                 "endpoint=" + std::to_string(ref->endpoint_id) + " predicted=" + format_shortest(y) + " cmd=" +
                     decision_name(d));
        } else if (ref->kind == "error") {
            note(log, step, "server", "error_received", "endpoint=" + std::to_string(ref->endpoint_id) + " " + p.payload);
        }
    }
    return out;
}

std::optional<Publish> CloudServer::heartbeat(std::uint64_t step) const {
    if (step % heartbeat_interval_ != 0) return std::nullopt;
    return Publish{kHeartbeatTopic, "alive"};
}

std::vector<Publish> CloudServer::step(std::span<const Publish> inbox, std::uint64_t now, EventLog* log) {
    auto out = handle(inbox, now, log);
    if (auto hb = heartbeat(now)) out.push_back(std::move(*hb));
    return out;
}

}  // namespace greenhouse::iot

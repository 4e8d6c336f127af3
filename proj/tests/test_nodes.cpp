#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "greenhouse/iotsim/nodes.hpp"

using namespace greenhouse;
using namespace greenhouse::iot;

namespace {

Bytes command_bytes(std::uint16_t id, std::uint8_t seq, Command cmd) {
    return encode_frame({MsgType::IrrigationCmd, id, seq, encode_command(cmd)});
}

Bytes report_bytes(std::uint16_t id, std::uint8_t seq, const Moisture& m, std::uint32_t step) {
    return encode_frame({MsgType::SensorReport, id, seq, encode_sensor_report(make_sensor_report(m, step))});
}

bool has_type(const std::vector<Outgoing>& out, MsgType type) {
    return std::any_of(out.begin(), out.end(), [&](const Outgoing& o) { return o.frame.type == type; });
}

std::size_t count_events(const EventLog& log, const std::string& event, const std::string& detail = {}) {
    return static_cast<std::size_t>(std::count_if(log.events().begin(), log.events().end(), [&](const LogEvent& e) {
        return e.event == event && e.details.find(detail) != std::string::npos;
    }));
}

SvrModel constant_model(double value) {
    SvrModel m;
    m.b = value;
    return m;
}

}  // namespace

TEST_CASE("band decision") {
    const ControllerConfig cfg{0.4, 0.05, 3};
    CHECK(band_decision(cfg, 0.37) == Decision::Open);
    CHECK(band_decision(cfg, 0.43) == Decision::Close);
    CHECK(band_decision(cfg, 0.40) == Decision::Hold);
    CHECK(band_decision(cfg, 0.381) == Decision::Hold);
    CHECK(band_decision(cfg, 0.419) == Decision::Hold);
    CHECK(band_decision(cfg, -3.0) == Decision::Open);
    CHECK(band_decision(cfg, 7.0) == Decision::Close);
    CHECK(controller_decide(cfg, constant_model(0.1), {}) == Decision::Open);
    CHECK(std::string(decision_name(Decision::Hold)) == "HOLD");
    CHECK_THROWS_AS((ControllerConfig{0.4, 1.5, 3}.validate()), UsageError);
}

TEST_CASE("a frame is sent at most five times and then given up") {
    ReliableSender s(100, {4, 2});
    const Outgoing first = s.send({MsgType::SensorReport, 1, 0, {}}, 0);
    CHECK(first.trace_id == 100);
    CHECK(s.due(1).empty());
    std::size_t resends = 0;
    std::vector<Outgoing> given_up;
    for (std::uint64_t t = 2; t <= 12; ++t) {
        const auto r = s.due(t, &given_up);
        resends += r.size();
        for (const auto& o : r) CHECK(o.frame.seq == first.frame.seq);
        if (t == 8) CHECK(s.transmissions() == 5);
        if (t < 10) CHECK(given_up.empty());
    }
    CHECK(resends == 4);
    CHECK(s.transmissions() == 5);
    CHECK(s.retransmissions() == 4);
    CHECK(s.max_retransmissions_used() == 4);
    REQUIRE(given_up.size() == 1);
    CHECK(s.dropped_ids() == std::vector<std::uint64_t>{100});
    CHECK(s.pending() == 0);
}

TEST_CASE("an acknowledged frame is never resent") {
    ReliableSender s(1, {4, 2});
    const auto a = s.send({MsgType::SensorReport, 1, 0, {}}, 0);
    const auto b = s.send({MsgType::SensorReport, 1, 0, {}}, 0);
    CHECK(a.frame.seq != b.frame.seq);
    CHECK(s.acknowledge(a.frame.seq));
    CHECK_FALSE(s.acknowledge(a.frame.seq));
    const auto r = s.due(2);
    REQUIRE(r.size() == 1);
    CHECK(r[0].trace_id == b.trace_id);
}

TEST_CASE("sequence numbers wrap after 256 frames") {
    ReliableSender s;
    for (int i = 0; i < 256; ++i) s.send({MsgType::Ack, 1, 0, {}}, 0);
    CHECK(s.send({MsgType::Ack, 1, 0, {}}, 0).frame.seq == 0);
}

TEST_CASE("dedup window") {
    DedupFilter d(10);
    CHECK(d.accept(1, 5, 0));
    CHECK_FALSE(d.accept(1, 5, 3));
    CHECK(d.accept(2, 5, 3));
    CHECK(d.accept(1, 6, 3));
    CHECK(d.accept(1, 5, 10));  // window elapsed: a wrapped sequence number
    CHECK_FALSE(d.accept(1, 5, 11));
}

TEST_CASE("endpoint safety timeout closes the faucet after exactly the limit") {
    EndpointConfig cfg;
    cfg.id = 3;
    cfg.max_irrigation_steps = 20;
    Endpoint ep(cfg);
    EventLog log;
    const Moisture m{0.3, 0.3, 0.3, 0.3};

    ep.begin_step(m, 0, 0, &log);
    const std::vector<Bytes> open{command_bytes(3, 0, Command::Open)};
    const auto replies = ep.on_tick(open, 0, 1, &log);
    CHECK(has_type(replies, MsgType::Ack));
    REQUIRE(ep.faucet_open());

    std::uint64_t closed_at = 0;
    for (std::uint64_t step = 1; step <= 30 && closed_at == 0; ++step) {
        const auto out = ep.begin_step(m, step, step * 12, &log);
        if (!ep.faucet_open()) {
            closed_at = step;
            CHECK(has_type(out, MsgType::TimeoutError));
        } else {
            CHECK(*ep.irrigation_timer() == step);
        }
        // A repeated OPEN while open does not restart the timer.
        if (step == 5) {
            const std::vector<Bytes> again{command_bytes(3, 1, Command::Open)};
            ep.on_tick(again, step, step * 12 + 1, &log);
        }
    }
    CHECK(closed_at == 20);
    // An OPEN in the timeout step is refused; the next step it is honoured.
    const std::vector<Bytes> reopen{command_bytes(3, 2, Command::Open)};
    CHECK(has_type(ep.on_tick(reopen, 20, 20 * 12 + 2, &log), MsgType::Ack));
    CHECK_FALSE(ep.faucet_open());
    CHECK(count_events(log, "open_refused") == 1);
    ep.begin_step(m, 21, 21 * 12, &log);
    const std::vector<Bytes> later{command_bytes(3, 3, Command::Open)};
    ep.on_tick(later, 21, 21 * 12 + 1, &log);
    CHECK(ep.faucet_open());
    CHECK(ep.timeouts() == 1);
    CHECK(count_events(log, "TIMEOUT_ERROR") == 1);
    CHECK(count_events(log, "faucet_open") == 2);
}

TEST_CASE("endpoint acknowledges duplicate commands but applies them once") {
    Endpoint ep(EndpointConfig{});
    EventLog log;
    const std::vector<Bytes> open{command_bytes(1, 7, Command::Open)};
    CHECK(has_type(ep.on_tick(open, 0, 0, &log), MsgType::Ack));
    const std::vector<Bytes> close{command_bytes(1, 8, Command::Close)};
    ep.on_tick(close, 0, 1, &log);
    CHECK_FALSE(ep.faucet_open());
    // The OPEN arrives again because its ACK was lost.
    CHECK(has_type(ep.on_tick(open, 0, 2, &log), MsgType::Ack));
    CHECK_FALSE(ep.faucet_open());
    CHECK(ep.duplicates() == 1);

    const std::vector<Bytes> junk{{0x00, 0x01}, command_bytes(2, 0, Command::Open)};
    ep.on_tick(junk, 0, 3, &log);
    CHECK(ep.malformed() == 2);
    CHECK_FALSE(ep.faucet_open());
}

TEST_CASE("endpoint reports on its interval") {
    EndpointConfig cfg;
    cfg.report_interval = 3;
    Endpoint ep(cfg);
    std::size_t reports = 0;
    for (std::uint64_t s = 0; s < 9; ++s) reports += ep.begin_step({0.5, 0.5, 0.5, 0.5}, s, s).size();
    CHECK(reports == 3);
}

TEST_CASE("coordinator forwards reports once and acknowledges every copy") {
    Coordinator c(CoordinatorConfig{});
    const Bytes report = report_bytes(2, 4, {0.5, 0.5, 0.5, 0.5}, 10);
    const std::vector<Bytes> in{report};
    const auto first = c.on_tick(in, {}, 10, 120);
    REQUIRE(first.to_server.size() == 1);
    CHECK(first.to_server[0].topic == "greenhouse/2/moisture");
    CHECK(parse_moisture_payload(first.to_server[0].payload) == make_sensor_report({0.5, 0.5, 0.5, 0.5}, 10));
    CHECK(has_type(first.to_endpoints, MsgType::Ack));

    const auto second = c.on_tick(in, {}, 10, 122);
    CHECK(second.to_server.empty());
    CHECK(has_type(second.to_endpoints, MsgType::Ack));
    CHECK(c.duplicates() == 1);
}

TEST_CASE("coordinator turns server commands into reliable frames") {
    Coordinator c(CoordinatorConfig{});
    EventLog log;
    const std::vector<Publish> cmd{{command_topic(4), "OPEN"}};
    const auto out = c.on_tick({}, cmd, 0, 0, &log);
    REQUIRE(out.to_endpoints.size() == 1);
    CHECK(out.to_endpoints[0].frame.endpoint_id == 4);
    CHECK(decode_command(out.to_endpoints[0].frame.payload) == Command::Open);
    CHECK(count_events(log, "cmd", "source=server") == 1);
    // Unacknowledged, it is resent after the timeout.
    CHECK(c.on_tick({}, {}, 0, 2).to_endpoints.size() == 1);
}

TEST_CASE("coordinator failover follows the heartbeats") {
    CoordinatorConfig cfg;
    cfg.controller.setpoint = 0.4;
    Coordinator c(cfg, AnyModel{constant_model(0.1)});
    EventLog log;
    const std::vector<Publish> hb{{kHeartbeatTopic, "alive"}};
    const Moisture m{0.3, 0.3, 0.3, 0.3};
    std::uint8_t seq = 0;
    const auto tick = [&](std::uint64_t step, bool heartbeat) {
        const std::vector<Bytes> in{report_bytes(1, seq++, m, static_cast<std::uint32_t>(step))};
        return c.on_tick(in, heartbeat ? std::span<const Publish>(hb) : std::span<const Publish>{}, step, step * 12,
                         &log);
    };
    tick(0, true);
    tick(1, false);
    tick(2, false);
    CHECK_FALSE(c.in_failover());
    CHECK(c.failover_commands() == 0);
    tick(3, false);
    CHECK(c.in_failover());
    CHECK(c.failover_commands() == 1);
    CHECK(count_events(log, "failover_enter") == 1);
    CHECK(count_events(log, "cmd", "source=failover") == 1);
    tick(4, true);
    CHECK_FALSE(c.in_failover());
    CHECK(count_events(log, "failover_exit") == 1);
    CHECK(c.failover_commands() == 1);

    Coordinator no_model(cfg);
    for (std::uint64_t s = 0; s < 10; ++s) no_model.on_tick({}, {}, s, s);
    CHECK_FALSE(no_model.in_failover());
    CHECK(no_model.missed_heartbeats(9) == 9);
}

TEST_CASE("timeout errors are forwarded to the error topic") {
    Coordinator c(CoordinatorConfig{});
    EventLog log;
    const std::vector<Bytes> in{encode_frame({MsgType::TimeoutError, 5, 0, encode_step(77)})};
    const auto out = c.on_tick(in, {}, 77, 0, &log);
    REQUIRE(out.to_server.size() == 1);
    CHECK(out.to_server[0].topic == error_topic(5));
    CHECK(count_events(log, "error_forward") == 1);
}

TEST_CASE("server decides on moisture publishes and heartbeats on its interval") {
    CloudServer low({0.4, 0.05, 3}, constant_model(0.1), 2);
    EventLog log;
    const std::vector<Publish> in{{moisture_topic(1), "3000,3000,3000,3000,5"},
                                  {error_topic(1), "TIMEOUT_ERROR step=5"}};
    const auto out = low.step(in, 4, &log);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == Publish{command_topic(1), "OPEN"});
    CHECK(out[1].topic == kHeartbeatTopic);
    CHECK(low.step({}, 5).empty());
    CHECK(count_events(log, "decide", "cmd=OPEN") == 1);
    CHECK(count_events(log, "error_received") == 1);

    CloudServer in_band({0.4, 0.05, 3}, constant_model(0.4));
    CHECK(in_band.handle(in, 0).empty());
    CHECK(in_band.commands() == 0);
}

TEST_CASE("moisture payload text") {
    const SensorReport r = make_sensor_report({0.1, 0.2, 0.3, 1.0}, 42);
    CHECK(format_moisture_payload(r) == "1000,2000,3000,10000,42");
    CHECK(parse_moisture_payload("1000,2000,3000,10000,42") == r);
    CHECK_THROWS_AS(parse_moisture_payload("1,2,3"), FormatError);
    CHECK_THROWS_AS(parse_moisture_payload("1,2,3,10001,0"), FormatError);
    CHECK_THROWS_AS(parse_moisture_payload("1,2,x,4,0"), FormatError);
}

TEST_CASE("event log lines") {
    EventLog log;
    log.add(3, "coordinator", "failover_enter", "missed=3");
    log.add(4, "server", "up");
    std::ostringstream out;
    log.write(out);
    CHECK(out.str() == "3\tcoordinator\tfailover_enter\tmissed=3\n4\tserver\tup\t\n");
}

#include "greenhouse/iotsim/frame.hpp"

#include <cmath>

namespace greenhouse::iot {

bool is_known_type(std::uint8_t raw) noexcept { return raw >= 0x01 && raw <= 0x05; }

const char* type_name(MsgType type) noexcept {
    switch (type) {
        case MsgType::SensorReport: return "SENSOR_REPORT";
        case MsgType::IrrigationCmd: return "IRRIGATION_CMD";
        case MsgType::Ack: return "ACK";
        case MsgType::TimeoutError: return "TIMEOUT_ERROR";
        case MsgType::Heartbeat: return "HEARTBEAT";
    }
    return "UNKNOWN";
}

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> bytes) noexcept {
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t b : bytes) {
        crc ^= static_cast<std::uint16_t>(b) << 8;
        for (int bit = 0; bit < 8; ++bit) {
            crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : static_cast<std::uint16_t>(crc << 1);
        }
    }
    return crc;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    put_u16(out, static_cast<std::uint16_t>(v >> 16));
    put_u16(out, static_cast<std::uint16_t>(v & 0xFFFF));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return (static_cast<std::uint32_t>(get_u16(b, at)) << 16) | get_u16(b, at + 2);
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    if (frame.payload.size() > kMaxPayload) {
        throw UsageError("frame payload of " + std::to_string(frame.payload.size()) + " bytes exceeds 64");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kFrameOverhead + frame.payload.size());
    out.push_back(kSync);
    out.push_back(static_cast<std::uint8_t>(frame.type));
    put_u16(out, frame.endpoint_id);
    out.push_back(frame.seq);
    out.push_back(static_cast<std::uint8_t>(frame.payload.size()));
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    put_u16(out, crc16_ccitt_false(out));
    return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    using Kind = FrameError::Kind;
    if (bytes.empty()) throw FrameError(Kind::Length, "empty frame");
    if (bytes[0] != kSync) throw FrameError(Kind::Framing, "bad sync byte");
    if (bytes.size() < kFrameOverhead) throw FrameError(Kind::Length, "truncated header");
    const std::size_t len = bytes[5];
    if (len > kMaxPayload) throw FrameError(Kind::Length, "payload length above 64");
    if (bytes.size() != kFrameOverhead + len) throw FrameError(Kind::Length, "length field does not match frame size");
    const std::size_t body = kHeaderSize + len;
    if (crc16_ccitt_false(bytes.first(body)) != get_u16(bytes, body)) {
        throw FrameError(Kind::Integrity, "crc mismatch");
    }
    if (!is_known_type(bytes[1])) throw FrameError(Kind::Framing, "unknown message type");
    Frame f;
    f.type = static_cast<MsgType>(bytes[1]);
    f.endpoint_id = get_u16(bytes, 2);
    f.seq = bytes[4];
    f.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + static_cast<std::ptrdiff_t>(body));
    return f;
}

Moisture SensorReport::moisture() const {
    Moisture m{};
    for (std::size_t i = 0; i < kLayers; ++i) m[i] = raw[i] / static_cast<double>(kMoistureScale);
    return m;
}

SensorReport make_sensor_report(const Moisture& m, std::uint32_t step) {
    SensorReport r;
    for (std::size_t i = 0; i < kLayers; ++i) {
        if (!(m[i] >= 0.0 && m[i] <= 1.0)) throw UsageError("sensor moisture outside [0,1]");
        r.raw[i] = static_cast<std::uint16_t>(std::lround(m[i] * kMoistureScale));
    }
    r.step = step;
    return r;
}

std::vector<std::uint8_t> encode_sensor_report(const SensorReport& report) {
    std::vector<std::uint8_t> out;
    out.reserve(12);
    for (auto v : report.raw) put_u16(out, v);
    put_u32(out, report.step);
    return out;
}

SensorReport decode_sensor_report(std::span<const std::uint8_t> payload) {
    if (payload.size() != 12) throw FrameError(FrameError::Kind::Payload, "sensor report must be 12 bytes");
    SensorReport r;
    for (std::size_t i = 0; i < kLayers; ++i) {
        r.raw[i] = get_u16(payload, 2 * i);
        if (r.raw[i] > kMoistureScale) throw FrameError(FrameError::Kind::Payload, "moisture word above 10000");
    }
    r.step = get_u32(payload, 8);
    return r;
}

std::vector<std::uint8_t> encode_command(Command command) { return {static_cast<std::uint8_t>(command)}; }

Command decode_command(std::span<const std::uint8_t> payload) {
    if (payload.size() != 1 || payload[0] > 1) throw FrameError(FrameError::Kind::Payload, "bad command payload");
    return static_cast<Command>(payload[0]);
}

std::vector<std::uint8_t> encode_step(std::uint32_t step) {
    std::vector<std::uint8_t> out;
    put_u32(out, step);
    return out;
}

std::uint32_t decode_step(std::span<const std::uint8_t> payload) {
    if (payload.size() != 4) throw FrameError(FrameError::Kind::Payload, "step payload must be 4 bytes");
    return get_u32(payload, 0);
}

}  // namespace greenhouse::iot

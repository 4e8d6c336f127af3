#pragma once

// Wire format shared by endpoints and the coordinator.
//
//   0xA5 | type | endpoint_id (BE16) | seq | len | payload[len] | crc (BE16)
//
// The CRC is CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection,
// no final xor) over every byte before it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "greenhouse/dataset.hpp"
#include "greenhouse/error.hpp"

namespace greenhouse::iot {

inline constexpr std::uint8_t kSync = 0xA5;
inline constexpr std::size_t kMaxPayload = 64;
inline constexpr std::size_t kHeaderSize = 6;
inline constexpr std::size_t kFrameOverhead = kHeaderSize + 2;

enum class MsgType : std::uint8_t {
    SensorReport = 0x01,
    IrrigationCmd = 0x02,
    Ack = 0x03,
    TimeoutError = 0x04,
    Heartbeat = 0x05,
};

bool is_known_type(std::uint8_t raw) noexcept;
const char* type_name(MsgType type) noexcept;

struct Frame {
    MsgType type = MsgType::SensorReport;
    std::uint16_t endpoint_id = 0;
    std::uint8_t seq = 0;
    std::vector<std::uint8_t> payload;

    bool operator==(const Frame&) const = default;
};

class FrameError : public DataError {
public:
    enum class Kind { Framing, Integrity, Length, Payload };
    FrameError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> bytes) noexcept;

/// Throws UsageError when the payload exceeds kMaxPayload.
std::vector<std::uint8_t> encode_frame(const Frame& frame);

/// Throws FrameError: Framing for a bad sync byte or unknown type, Length
/// for truncated/oversized input or a length field above kMaxPayload,
/// Integrity for a CRC mismatch.
Frame decode_frame(std::span<const std::uint8_t> bytes);

// Payloads ------------------------------------------------------------------

inline constexpr std::uint16_t kMoistureScale = 10000;

struct SensorReport {
    std::array<std::uint16_t, kLayers> raw{};  // moisture * 10000
    std::uint32_t step = 0;

    Moisture moisture() const;
    bool operator==(const SensorReport&) const = default;
};

/// Rounds each moisture to the nearest 1/10000. Throws UsageError outside [0,1].
SensorReport make_sensor_report(const Moisture& m, std::uint32_t step);
std::vector<std::uint8_t> encode_sensor_report(const SensorReport& report);
/// Throws FrameError(Payload) on a wrong length or a raw value above 10000.
SensorReport decode_sensor_report(std::span<const std::uint8_t> payload);

enum class Command : std::uint8_t { Close = 0x00, Open = 0x01 };
std::vector<std::uint8_t> encode_command(Command command);
Command decode_command(std::span<const std::uint8_t> payload);

/// TIMEOUT_ERROR and HEARTBEAT carry the step at which they were raised.
std::vector<std::uint8_t> encode_step(std::uint32_t step);
std::uint32_t decode_step(std::span<const std::uint8_t> payload);

}  // namespace greenhouse::iot

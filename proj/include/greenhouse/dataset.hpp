#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace greenhouse {

class Rng;

inline constexpr std::size_t kLayers = 4;
/// Index 0 is the top layer, index 3 the deepest.
using Moisture = std::array<double, kLayers>;

struct Timestamp {
    int year = 2020;
    int month = 1;
    int day = 1;
    int hour = 0;
    int minute = 0;
    int second = 0;

    auto operator<=>(const Timestamp&) const = default;

    /// Calendar-aware addition (month and year rollover, leap years).
    Timestamp plus_seconds(std::int64_t seconds) const;
};

struct Sample {
    Timestamp time;
    Moisture moisture{};

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::string soil_label;
    std::vector<Sample> samples;
};

struct WindowedPair {
    Moisture features{};
    double target = 0.0;
    std::size_t origin_index = 0;
};

inline constexpr std::string_view kCsvHeader =
    "year,month,day,hour,minute,second,moisture0,moisture1,moisture2,moisture3";

/// Reads the sensor CSV. Throws ParseError on malformed rows, RangeError on
/// moisture outside [0,1]. Row numbers are 1-based counting the header.
Dataset parse_csv(std::istream& in, std::string soil_label = {});
Dataset parse_csv_text(std::string_view text, std::string soil_label = {});

void write_csv(std::ostream& out, const Dataset& ds);
std::string to_csv(const Dataset& ds);

/// Pair i: features = row i, target = moisture3 of row i + horizon.
std::vector<WindowedPair> make_windows(const Dataset& ds, std::size_t horizon);

struct Split {
    std::vector<WindowedPair> train;
    std::vector<WindowedPair> test;
};

/// First n_train pairs, then the next n_test. Throws SizingError when short.
Split chronological_split(std::span<const WindowedPair> pairs, std::size_t n_train, std::size_t n_test);

// ---------------------------------------------------------------------------
// Synthetic layered-soil generator

struct SoilParams {
    double evaporation_rate = 0.0;
    /// Transfer coefficient from layer i to layer i+1.
    std::array<double, kLayers - 1> downward_coupling{};
    double drainage_rate = 0.0;
    double noise_std = 0.0;
    Moisture initial_moisture{};

    /// Throws UsageError if any rate is out of range.
    void validate() const;
};

struct IrrigationEvent {
    std::size_t step = 0;
    double amount = 0.0;
};

/// Seconds between generated rows.
inline constexpr std::int64_t kStepSeconds = 150;

/// One transition of the bucket model. Flows are computed from the
/// pre-step state; noise is added last, then every layer is clamped.
/// `evaporation_scale` multiplies both evaporation and drainage.
Moisture soil_step(const SoilParams& params, const Moisture& state, double irrigation, Rng& rng,
                   double evaporation_scale = 1.0);

/// Row k holds the state after k transitions; irrigation scheduled at step
/// s enters layer 0 during the transition from row s to row s+1.
Dataset generate_soil(const SoilParams& params, std::size_t steps,
                      std::span<const IrrigationEvent> schedule, std::uint64_t seed,
                      std::string soil_label = {}, Timestamp start = {2020, 3, 11, 14, 44, 39});

/// Named presets: "soil1" and "soil2" (the transfer pair, differing in
/// their couplings) and "bed", a fast-infiltrating bed used for closed-loop
/// simulation. Throws UsageError for other names.
SoilParams soil_preset(std::string_view name);
/// Canonical label used in files ("Soil1", "Soil2").
std::string preset_label(std::string_view name);

/// Periodic irrigation pulses with seeded jitter in spacing and amount,
/// keeping the trace stationary so chronological splits are comparable.
std::vector<IrrigationEvent> preset_schedule(std::string_view name, std::size_t steps, std::uint64_t seed);
/// The pulse pattern behind preset_schedule, independent of soil type.
std::vector<IrrigationEvent> periodic_schedule(std::size_t steps, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Metrics

struct MetricsReport {
    double sum_abs_error = 0.0;
    double mse = 0.0;
    std::size_t n = 0;
};

/// Throws UsageError on length mismatch or empty input.
MetricsReport evaluate_metrics(std::span<const double> targets, std::span<const double> predictions);

std::vector<double> targets_of(std::span<const WindowedPair> pairs);

}  // namespace greenhouse

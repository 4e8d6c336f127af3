#include "greenhouse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "greenhouse/error.hpp"
#include "greenhouse/rng.hpp"
#include "greenhouse/text.hpp"

namespace greenhouse {

Timestamp Timestamp::plus_seconds(std::int64_t seconds) const {
    using namespace std::chrono;
    const sys_days date = year_month_day{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                         std::chrono::day{static_cast<unsigned>(day)}};
    const sys_seconds t = date + hours{hour} + minutes{minute} + std::chrono::seconds{second} +
                          std::chrono::seconds{seconds};
    const sys_days new_date = floor<days>(t);
    const year_month_day ymd{new_date};
    const hh_mm_ss tod{t - new_date};
    return Timestamp{static_cast<int>(ymd.year()),
                     static_cast<int>(static_cast<unsigned>(ymd.month())),
                     static_cast<int>(static_cast<unsigned>(ymd.day())),
                     static_cast<int>(tod.hours().count()),
                     static_cast<int>(tod.minutes().count()),
                     static_cast<int>(tod.seconds().count())};
}

namespace {

constexpr std::array<std::string_view, 10> kColumns = {"year",      "month",     "day",      "hour",
                                                       "minute",    "second",    "moisture0", "moisture1",
                                                       "moisture2", "moisture3"};

Sample parse_row(std::string_view line, std::size_t row) {
    const auto fields = split(line, ',');
    if (fields.size() != kColumns.size()) {
        throw ParseError(row, "expected " + std::to_string(kColumns.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    Sample s;
    int* time_fields[] = {&s.time.year, &s.time.month, &s.time.day, &s.time.hour, &s.time.minute, &s.time.second};
    for (std::size_t c = 0; c < 6; ++c) {
        const auto v = parse_int(trim(fields[c]));
        if (!v) throw ParseError(row, "non-integer " + std::string(kColumns[c]) + " '" + std::string(fields[c]) + "'");
        *time_fields[c] = *v;
    }
    const auto& t = s.time;
    if (t.month < 1 || t.month > 12 || t.day < 1 || t.day > 31 || t.hour < 0 || t.hour > 23 || t.minute < 0 ||
        t.minute > 59 || t.second < 0 || t.second > 60) {
        throw ParseError(row, "invalid date-time");
    }
    for (std::size_t layer = 0; layer < kLayers; ++layer) {
        const std::size_t c = 6 + layer;
        const auto v = parse_double(trim(fields[c]));
        if (!v) throw ParseError(row, "non-numeric " + std::string(kColumns[c]) + " '" + std::string(fields[c]) + "'");
        if (!(*v >= 0.0 && *v <= 1.0)) throw RangeError(row, std::string(kColumns[c]), *v);
        s.moisture[layer] = *v;
    }
    return s;
}

}  // namespace

Dataset parse_csv(std::istream& in, std::string soil_label) {
    Dataset ds{std::move(soil_label), {}};
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    if (trim(line) != kCsvHeader) throw ParseError(1, "unexpected header '" + std::string(trim(line)) + "'");
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        Sample s = parse_row(line, row);
        if (!ds.samples.empty() && s.time < ds.samples.back().time) {
            throw ParseError(row, "timestamp earlier than previous row");
        }
        ds.samples.push_back(s);
    }
    return ds;
}

Dataset parse_csv_text(std::string_view text, std::string soil_label) {
    std::istringstream in{std::string(text)};
    return parse_csv(in, std::move(soil_label));
}

void write_csv(std::ostream& out, const Dataset& ds) {
    out << kCsvHeader << '\n';
    for (const auto& s : ds.samples) {
        const auto& t = s.time;
        out << t.year << ',' << t.month << ',' << t.day << ',' << t.hour << ',' << t.minute << ',' << t.second;
        for (double m : s.moisture) out << ',' << format_shortest(m);
        out << '\n';
    }
}

std::string to_csv(const Dataset& ds) {
    std::ostringstream out;
    write_csv(out, ds);
    return out.str();
}

std::vector<WindowedPair> make_windows(const Dataset& ds, std::size_t horizon) {
    const std::size_t n = ds.samples.size();
    std::vector<WindowedPair> pairs;
    if (n <= horizon) return pairs;
    pairs.reserve(n - horizon);
    for (std::size_t i = 0; i + horizon < n; ++i) {
        pairs.push_back({ds.samples[i].moisture, ds.samples[i + horizon].moisture[kLayers - 1], i});
    }
    return pairs;
}

Split chronological_split(std::span<const WindowedPair> pairs, std::size_t n_train, std::size_t n_test) {
    if (n_train + n_test > pairs.size()) throw SizingError(n_train + n_test, pairs.size());
    Split s;
    s.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train),
                  pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
    return s;
}

void SoilParams::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(evaporation_rate)) throw UsageError("evaporation_rate must lie in [0,1]");
    if (!in_unit(drainage_rate)) throw UsageError("drainage_rate must lie in [0,1]");
    // Above 0.5 a coupling can push more water down than equalizes the pair.
    for (double c : downward_coupling) {
        if (!(c >= 0.0 && c <= 0.5)) throw UsageError("downward_coupling must lie in [0,0.5]");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw UsageError("noise_std must be >= 0");
    for (double m : initial_moisture) {
        if (!in_unit(m)) throw UsageError("initial_moisture must lie in [0,1]");
    }
}

Moisture soil_step(const SoilParams& p, const Moisture& m, double irrigation, Rng& rng, double evaporation_scale) {
    std::array<double, kLayers - 1> flow{};
    for (std::size_t i = 0; i + 1 < kLayers; ++i) {
        flow[i] = p.downward_coupling[i] * std::max(m[i] - m[i + 1], 0.0);
    }
    Moisture next = m;
    next[0] += irrigation - evaporation_scale * p.evaporation_rate * m[0];
    next[kLayers - 1] -= evaporation_scale * p.drainage_rate * m[kLayers - 1];
    for (std::size_t i = 0; i + 1 < kLayers; ++i) {
        next[i] -= flow[i];
        next[i + 1] += flow[i];
    }
    for (double& v : next) {
        if (p.noise_std > 0.0) v += rng.normal(0.0, p.noise_std);
        v = std::clamp(v, 0.0, 1.0);
    }
    return next;
}

Dataset generate_soil(const SoilParams& params, std::size_t steps, std::span<const IrrigationEvent> schedule,
                      std::uint64_t seed, std::string soil_label, Timestamp start) {
    params.validate();
    if (steps < 1) throw UsageError("generate_soil needs steps >= 1");
    std::vector<double> irrigation(steps, 0.0);
    for (const auto& ev : schedule) {
        if (ev.step < steps) irrigation[ev.step] += ev.amount;
    }
    Rng rng(seed);
    Dataset ds{std::move(soil_label), {}};
    ds.samples.reserve(steps);
    Moisture state = params.initial_moisture;
    Timestamp t = start;
    for (std::size_t k = 0; k < steps; ++k) {
        ds.samples.push_back({t, state});
        state = soil_step(params, state, irrigation[k], rng);
        t = t.plus_seconds(kStepSeconds);
    }
    return ds;
}

SoilParams soil_preset(std::string_view name) {
    SoilParams p;
    if (name == "soil1") {
        // Top layer drains slowly; middle layers pass water quickly.
        p.evaporation_rate = 0.004;
        p.downward_coupling = {0.05, 0.12, 0.12};
        p.drainage_rate = 0.01;
        p.noise_std = 0.002;
        p.initial_moisture = {0.55, 0.50, 0.45, 0.40};
    } else if (name == "soil2") {
        // Water lingers on top and reaches the deepest layer slowly.
        p.evaporation_rate = 0.003;
        p.downward_coupling = {0.03, 0.05, 0.04};
        p.drainage_rate = 0.006;
        p.noise_std = 0.002;
        p.initial_moisture = {0.60, 0.55, 0.45, 0.35};
    } else if (name == "bed") {
        // Free-draining greenhouse bed: water reaches the deepest layer within
        // a few steps, which is what closed-loop control needs.
        p.evaporation_rate = 0.002;
        p.downward_coupling = {0.5, 0.5, 0.5};
        p.drainage_rate = 0.003;
        p.noise_std = 0.001;
        p.initial_moisture = {0.62, 0.61, 0.60, 0.60};
    } else {
        throw UsageError("unknown soil preset '" + std::string(name) + "' (expected soil1, soil2 or bed)");
    }
    return p;
}

std::string preset_label(std::string_view name) {
    if (name == "soil1") return "Soil1";
    if (name == "soil2") return "Soil2";
    if (name == "bed") return "Bed";
    throw UsageError("unknown soil preset '" + std::string(name) + "'");
}

std::vector<IrrigationEvent> preset_schedule(std::string_view name, std::size_t steps, std::uint64_t seed) {
    (void)soil_preset(name);
    return periodic_schedule(steps, seed);
}

std::vector<IrrigationEvent> periodic_schedule(std::size_t steps, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x5CED));
    std::vector<IrrigationEvent> events;
    std::size_t step = 10;
    while (step < steps) {
        events.push_back({step, rng.uniform(0.10, 0.25)});
        step += 30 + static_cast<std::size_t>(rng.below(31));
    }
    return events;
}

MetricsReport evaluate_metrics(std::span<const double> targets, std::span<const double> predictions) {
    if (targets.size() != predictions.size()) {
        throw UsageError("evaluate_metrics: length mismatch (" + std::to_string(targets.size()) + " vs " +
                         std::to_string(predictions.size()) + ")");
    }
    if (targets.empty()) throw UsageError("evaluate_metrics: empty input");
    MetricsReport r;
    r.n = targets.size();
    double sq = 0.0;
    for (std::size_t i = 0; i < r.n; ++i) {
        const double d = targets[i] - predictions[i];
        r.sum_abs_error += std::abs(d);
        sq += d * d;
    }
    r.mse = sq / static_cast<double>(r.n);
    return r;
}

std::vector<double> targets_of(std::span<const WindowedPair> pairs) {
    std::vector<double> y;
    y.reserve(pairs.size());
    for (const auto& p : pairs) y.push_back(p.target);
    return y;
}

}  // namespace greenhouse

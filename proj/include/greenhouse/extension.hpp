#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "greenhouse/ann.hpp"

namespace greenhouse {

/// A moisture sample augmented with one new climate input.
struct ExtendedSample {
    Moisture base_features{};
    double new_feature = 0.0;  // normalised to [0,1]
    double target = 0.0;
};

/// Copy of `source` grown by one input and one hidden unit. Every copied
/// weight is bit-equal to the source; every new connection is exactly 0,
/// so the grown network computes the same function as the source for any
/// value of the new input.
AnnParams extend_model(const AnnParams& source);

struct BlendConfig {
    double alpha = 0.999;
    double beta = 0.001;
    double blend_learning_rate = 0.05;
    double handover_threshold = 0.9;
    /// Optimizer for the per-sample steps on the two networks.
    AdamConfig model_adam;

    void validate() const;
};

/// Two networks blended as y = alpha * y_source + beta * y_target, with
/// (alpha, beta) kept on the unit simplex.
struct BlendState {
    double alpha = 0.999;
    double beta = 0.001;
    AnnParams source;
    AnnParams target;
    AdamState source_opt;
    AdamState target_opt;
    BlendConfig config;
    bool handed_over = false;
    std::optional<std::size_t> handover_step;
};

/// Builds the blend from a trained source: target = extend_model(source).
BlendState make_blend_state(const AnnParams& source, const BlendConfig& config = {});

struct BlendPrediction {
    double y_ans = 0.0;
    double y_source = 0.0;
    double y_target = 0.0;
};

BlendPrediction blend_predict(const BlendState& state, const ExtendedSample& sample);

/// Gradient of (alpha*y1 + beta*y2 - y)^2 with respect to (alpha, beta).
std::pair<double, double> blend_gradient(double alpha, double beta, double y_source, double y_target,
                                         double observed);

/// Euclidean projection onto {alpha + beta = 1, alpha, beta >= 0}.
std::pair<double, double> project_to_simplex(double alpha, double beta);

/// One online update. The blend step on (alpha, beta) uses the two network
/// outputs from before this sample was learned, so it compares held-out
/// predictions. Then each network takes one gradient step on |y - y_hat|
/// against the raw observation, source first (no dropout). The networks
/// never see the blend error. Throws UsageError once the state has handed
/// over.
void blend_update(BlendState& state, const ExtendedSample& sample, double observed);

struct TraceRow {
    std::size_t step = 0;
    double alpha = 0.0;  // weights used for this step's prediction
    double beta = 0.0;
    double y_ans = 0.0;
    double observed = 0.0;
    bool handed_over = false;  // after this step's update
};

struct ExtensionResult {
    BlendState state;
    std::vector<TraceRow> trace;
};

/// Applies blend_update to each sample until the stream or the budget is
/// exhausted, or until beta exceeds the handover threshold; at that point
/// the target becomes the main model and adaptation stops.
ExtensionResult run_extension(BlendState state, std::span<const ExtendedSample> stream, std::size_t budget);

void write_trace_tsv(std::ostream& out, std::span<const TraceRow> trace);

// ---------------------------------------------------------------------------
// Synthetic climate stream

enum class ClimateFeature {
    Informative,  // the feature drives evapotranspiration
    Noise,        // independent of the soil dynamics
};

struct ClimateStreamOptions {
    std::size_t samples = 5000;
    std::size_t horizon = 3;
    ClimateFeature feature = ClimateFeature::Informative;
    /// Steps for which one weather value holds.
    std::size_t weather_block = 6;
    /// Evapotranspiration multiplier spans [1 - swing, 1 + swing] as the
    /// climate driver goes from 0 to 1.
    double swing = 0.9;
    std::uint64_t seed = 0;
};

/// Runs the soil generator with a climate driver that scales evaporation and
/// drainage, and emits (moisture, feature, target) samples. With
/// ClimateFeature::Noise the soil sees the same kind of driver but the
/// emitted feature is an independent draw.
std::vector<ExtendedSample> generate_climate_stream(const SoilParams& params, const ClimateStreamOptions& options);

/// CSV `moisture0,moisture1,moisture2,moisture3,feature,target`.
void write_extended_csv(std::ostream& out, std::span<const ExtendedSample> samples);
/// Throws ParseError / RangeError like parse_csv.
std::vector<ExtendedSample> parse_extended_csv(std::istream& in);

/// Windowed pairs from the moisture part of a stream.
std::vector<WindowedPair> base_pairs(std::span<const ExtendedSample> samples);

}  // namespace greenhouse

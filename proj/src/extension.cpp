#include "greenhouse/extension.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "greenhouse/error.hpp"
#include "greenhouse/rng.hpp"
#include "greenhouse/text.hpp"

namespace greenhouse {

AnnParams extend_model(const AnnParams& source) {
    const std::size_t p = source.input_dim();
    const std::size_t q = source.hidden_dim();
    AnnParams target(p + 1, q + 1);
    for (std::size_t j = 0; j < q; ++j) {
        for (std::size_t i = 0; i < p; ++i) target.weight(j, i) = source.weight(j, i);
        target.hidden_bias(j) = source.hidden_bias(j);
        target.output_weight(j) = source.output_weight(j);
    }
    target.output_bias() = source.output_bias();
    return target;
}

void BlendConfig::validate() const {
    if (!(alpha >= 0.0 && beta >= 0.0 && std::abs(alpha + beta - 1.0) <= 1e-12)) {
        throw UsageError("blend weights must be non-negative and sum to 1");
    }
    if (!(blend_learning_rate > 0.0)) throw UsageError("blend_learning_rate must be > 0");
    if (!(handover_threshold >= 0.0 && handover_threshold < 1.0)) {
        throw UsageError("handover_threshold must be in [0,1)");
    }
    model_adam.validate();
}

BlendState make_blend_state(const AnnParams& source, const BlendConfig& config) {
    config.validate();
    if (source.input_dim() != kLayers) throw UsageError("extension source must take the four moisture inputs");
    BlendState s;
    s.alpha = config.alpha;
    s.beta = config.beta;
    s.source = source;
    s.target = extend_model(source);
    s.source_opt = AdamState(s.source.size());
    s.target_opt = AdamState(s.target.size());
    s.config = config;
    return s;
}

namespace {

std::array<double, kLayers + 1> extended_input(const ExtendedSample& sample) {
    std::array<double, kLayers + 1> x{};
    std::copy(sample.base_features.begin(), sample.base_features.end(), x.begin());
    x[kLayers] = sample.new_feature;
    return x;
}

void online_step(AnnParams& params, AdamState& opt, std::span<const double> x, double observed,
                 const AdamConfig& adam) {
    const LossGrad lg = ann_loss_grad(params, x, observed);
    adam_step(params, lg.grad, opt, adam);
}

}  // namespace

BlendPrediction blend_predict(const BlendState& state, const ExtendedSample& sample) {
    BlendPrediction p;
    p.y_source = ann_predict(state.source, sample.base_features);
    p.y_target = ann_predict(state.target, extended_input(sample));
    p.y_ans = state.alpha * p.y_source + state.beta * p.y_target;
    return p;
}

std::pair<double, double> blend_gradient(double alpha, double beta, double y_source, double y_target,
                                         double observed) {
    const double e = alpha * y_source + beta * y_target - observed;
    return {2.0 * e * y_source, 2.0 * e * y_target};
}

std::pair<double, double> project_to_simplex(double alpha, double beta) {
    const double shift = 0.5 * (alpha + beta - 1.0);
    alpha -= shift;
    beta -= shift;
    if (alpha < 0.0) return {0.0, 1.0};
    if (beta < 0.0) return {1.0, 0.0};
    return {alpha, beta};
}

void blend_update(BlendState& state, const ExtendedSample& sample, double observed) {
    if (state.handed_over) throw UsageError("blend_update called after handover");
    const auto x_ext = extended_input(sample);
    const double y1 = ann_predict(state.source, sample.base_features);
    const double y2 = ann_predict(state.target, x_ext);

    online_step(state.source, state.source_opt, sample.base_features, observed, state.config.model_adam);
    online_step(state.target, state.target_opt, x_ext, observed, state.config.model_adam);

    const auto [ga, gb] = blend_gradient(state.alpha, state.beta, y1, y2, observed);
    const double lr = state.config.blend_learning_rate;
    std::tie(state.alpha, state.beta) = project_to_simplex(state.alpha - lr * ga, state.beta - lr * gb);
}

ExtensionResult run_extension(BlendState state, std::span<const ExtendedSample> stream, std::size_t budget) {
    if (budget == 0) throw UsageError("run_extension: budget must be >= 1");
    ExtensionResult result;
    const std::size_t n = std::min(budget, stream.size());
    result.trace.reserve(n);
    for (std::size_t k = 0; k < n && !state.handed_over; ++k) {
        const auto& sample = stream[k];
        const BlendPrediction pred = blend_predict(state, sample);
        TraceRow row{k, state.alpha, state.beta, pred.y_ans, sample.target, false};
        blend_update(state, sample, sample.target);
        if (state.beta > state.config.handover_threshold) {
            state.handed_over = true;
            state.handover_step = k;
        }
        row.handed_over = state.handed_over;
        result.trace.push_back(row);
    }
    result.state = std::move(state);
    return result;
}

void write_trace_tsv(std::ostream& out, std::span<const TraceRow> trace) {
    out << "step\talpha\tbeta\ty_ans\tobserved\thanded_over\n";
    for (const auto& r : trace) {
        out << r.step << '\t' << format_g17(r.alpha) << '\t' << format_g17(r.beta) << '\t' << format_g17(r.y_ans)
            << '\t' << format_g17(r.observed) << '\t' << (r.handed_over ? 1 : 0) << '\n';
    }
}

std::vector<ExtendedSample> generate_climate_stream(const SoilParams& params, const ClimateStreamOptions& options) {
    params.validate();
    if (options.weather_block == 0) throw UsageError("weather_block must be >= 1");
    if (!(options.swing >= 0.0 && options.swing <= 1.0)) throw UsageError("swing must lie in [0,1]");

    const std::size_t rows = options.samples + options.horizon;
    Rng weather(mix_seed(options.seed, 1));
    Rng soil(mix_seed(options.seed, 2));
    Rng decoy(mix_seed(options.seed, 3));
    const auto schedule = periodic_schedule(rows, mix_seed(options.seed, 4));
    std::vector<double> irrigation(rows, 0.0);
    for (const auto& ev : schedule) irrigation[ev.step] += ev.amount;

    std::vector<Moisture> states;
    std::vector<double> driver;
    states.reserve(rows);
    driver.reserve(rows);
    Moisture m = params.initial_moisture;
    double current = weather.uniform();
    for (std::size_t k = 0; k < rows; ++k) {
        if (k % options.weather_block == 0) current = weather.uniform();
        states.push_back(m);
        driver.push_back(current);
        const double scale = 1.0 - options.swing + 2.0 * options.swing * current;
        m = soil_step(params, m, irrigation[k], soil, scale);
    }

    std::vector<ExtendedSample> out;
    out.reserve(options.samples);
    for (std::size_t k = 0; k < options.samples; ++k) {
        const double feature = options.feature == ClimateFeature::Informative ? driver[k] : decoy.uniform();
        out.push_back({states[k], feature, states[k + options.horizon][kLayers - 1]});
    }
    return out;
}

namespace {
constexpr std::string_view kExtendedHeader = "moisture0,moisture1,moisture2,moisture3,feature,target";
constexpr std::array<std::string_view, 6> kExtendedColumns = {"moisture0", "moisture1", "moisture2",
                                                              "moisture3", "feature",   "target"};
}  // namespace

void write_extended_csv(std::ostream& out, std::span<const ExtendedSample> samples) {
    out << kExtendedHeader << '\n';
    for (const auto& s : samples) {
        for (double v : s.base_features) out << format_shortest(v) << ',';
        out << format_shortest(s.new_feature) << ',' << format_shortest(s.target) << '\n';
    }
}

std::vector<ExtendedSample> parse_extended_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kExtendedHeader) throw ParseError(1, "unexpected header");
    std::vector<ExtendedSample> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != kExtendedColumns.size()) {
            throw ParseError(row, "expected 6 fields, got " + std::to_string(fields.size()));
        }
        std::array<double, 6> v{};
        for (std::size_t c = 0; c < v.size(); ++c) {
            const auto d = parse_double(trim(fields[c]));
            if (!d) throw ParseError(row, "non-numeric " + std::string(kExtendedColumns[c]));
            if (!(*d >= 0.0 && *d <= 1.0)) throw RangeError(row, std::string(kExtendedColumns[c]), *d);
            v[c] = *d;
        }
        out.push_back({{v[0], v[1], v[2], v[3]}, v[4], v[5]});
    }
    return out;
}

std::vector<WindowedPair> base_pairs(std::span<const ExtendedSample> samples) {
    std::vector<WindowedPair> pairs;
    pairs.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        pairs.push_back({samples[i].base_features, samples[i].target, i});
    }
    return pairs;
}

}  // namespace greenhouse

#include "greenhouse/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "greenhouse/error.hpp"
#include "greenhouse/extension.hpp"
#include "greenhouse/iotsim/simulate.hpp"
#include "greenhouse/model_io.hpp"
#include "greenhouse/svr.hpp"
#include "greenhouse/text.hpp"
#include "greenhouse/transfer.hpp"

namespace greenhouse::cli {

namespace fs = std::filesystem;

std::vector<std::string> config_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    std::vector<std::string> tokens;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string_view body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError(path + ":" + std::to_string(row) + ": expected key = value");
        }
        std::string key(trim(body.substr(0, eq)));
        std::string value(trim(body.substr(eq + 1)));
        if (key.empty()) throw FormatError(path + ":" + std::to_string(row) + ": empty key");
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        std::replace(key.begin(), key.end(), '_', '-');
        tokens.push_back("--" + key + "=" + value);
    }
    return tokens;
}

namespace {

// ---------------------------------------------------------------------------
// Shared helpers

struct Common {
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    std::string config;
};

void add_common(CLI::App& sub, Common& c) {
    sub.add_option("--out", c.out_dir, "Output directory");
    sub.add_option("--seed", c.seed, "Random seed");
    sub.add_option("--config", c.config, "key = value file; flags given on the command line take precedence");
}

fs::path prepare_out(const Common& c) {
    fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + c.out_dir + ": " + ec.message());
    return dir;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

Dataset load_dataset(const std::string& path) {
    auto in = open_in(path);
    return parse_csv(in, fs::path(path).stem().string());
}

std::string metrics_line(const std::string& label, const MetricsReport& m) {
    return label + " sum_abs_error=" + format_shortest(m.sum_abs_error) + " mse=" + format_shortest(m.mse) +
           " n=" + std::to_string(m.n);
}

/// Writes every option of `sub` with its effective value, so that
/// `greenhouse <cmd> --config <file>` replays the run.
void write_effective_config(const CLI::App& sub, const fs::path& dir) {
    auto out = open_out(dir / (sub.get_name() + ".config"));
    out << "# greenhouse " << sub.get_name() << " --config " << (dir / (sub.get_name() + ".config")).string() << '\n';
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config" || name == "scenario") continue;
        std::string value = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
        if (value.empty()) continue;
        std::string key = name;
        std::replace(key.begin(), key.end(), '-', '_');
        out << key << " = " << value << '\n';
    }
}

AdamConfig adam_with(double lr) {
    AdamConfig a;
    a.learning_rate = lr;
    a.validate();
    return a;
}

const AnnParams& require_ann(const StoredModel& m, const std::string& what) {
    if (const auto* ann = std::get_if<AnnParams>(&m.model)) return *ann;
    throw UsageError(what + " must be an ann model");
}

SweepMetric parse_metric(const std::string& s) {
    if (s == "sae" || s == "sum_abs_error") return SweepMetric::SumAbsError;
    if (s == "mse") return SweepMetric::Mse;
    throw UsageError("metric must be sae or mse");
}

std::vector<iot::OutageWindow> parse_outages(const std::string& spec) {
    std::vector<iot::OutageWindow> windows;
    if (trim(spec).empty()) return windows;
    for (const auto part : split(spec, ',')) {
        const auto bounds = split(trim(part), '-');
        const auto a = bounds.size() == 2 ? parse_int64(trim(bounds[0])) : std::nullopt;
        const auto b = bounds.size() == 2 ? parse_int64(trim(bounds[1])) : std::nullopt;
        if (!a || !b || *a < 0 || *b < *a) throw UsageError("outage windows look like 400-600,900-1100");
        windows.push_back({static_cast<std::uint64_t>(*a), static_cast<std::uint64_t>(*b)});
    }
    return windows;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenData {
    Common common;
    std::string preset = "soil1";
    std::size_t steps = 5003;
    std::string output;
    std::optional<double> evaporation;
    std::optional<double> drainage;
    std::optional<double> noise;
    std::string climate;  // empty, informative or noise
    std::size_t samples = 5000;
    std::size_t horizon = 3;
    std::size_t weather_block = 6;
    double swing = 0.9;
};

void setup_gen_data(CLI::App& sub, GenData& o) {
    add_common(sub, o.common);
    sub.add_option("--preset", o.preset, "Soil preset: soil1, soil2 or bed");
    sub.add_option("--steps", o.steps, "Rows to generate");
    sub.add_option("--output", o.output, "File name inside --out (default <preset>.csv)");
    sub.add_option("--evaporation", o.evaporation, "Override the preset evaporation rate");
    sub.add_option("--drainage", o.drainage, "Override the preset drainage rate");
    sub.add_option("--noise", o.noise, "Override the preset noise std");
    sub.add_option("--climate", o.climate, "informative|noise: write an extended climate CSV instead")
        ->check(CLI::IsMember({"informative", "noise"}));
    sub.add_option("--samples", o.samples, "Climate CSV: number of samples");
    sub.add_option("--horizon", o.horizon, "Climate CSV: target horizon in steps");
    sub.add_option("--weather-block", o.weather_block, "Climate CSV: steps per weather value");
    sub.add_option("--swing", o.swing, "Climate CSV: relative evapotranspiration swing");
}

int run_gen_data(const GenData& o, std::ostream& out) {
    SoilParams params = soil_preset(o.preset);
    if (o.evaporation) params.evaporation_rate = *o.evaporation;
    if (o.drainage) params.drainage_rate = *o.drainage;
    if (o.noise) params.noise_std = *o.noise;
    params.validate();
    const fs::path dir = prepare_out(o.common);

    if (!o.climate.empty()) {
        ClimateStreamOptions co;
        co.samples = o.samples;
        co.horizon = o.horizon;
        co.weather_block = o.weather_block;
        co.swing = o.swing;
        co.seed = o.common.seed;
        co.feature = o.climate == "informative" ? ClimateFeature::Informative : ClimateFeature::Noise;
        const auto stream = generate_climate_stream(params, co);
        const fs::path path = dir / (o.output.empty() ? o.preset + "_climate.csv" : o.output);
        auto f = open_out(path);
        write_extended_csv(f, stream);
        out << "wrote " << stream.size() << " climate samples to " << path.string() << '\n';
        return kExitOk;
    }

    const auto schedule = preset_schedule(o.preset, o.steps, o.common.seed);
    const Dataset ds = generate_soil(params, o.steps, schedule, o.common.seed, preset_label(o.preset));
    const fs::path path = dir / (o.output.empty() ? o.preset + ".csv" : o.output);
    auto f = open_out(path);
    write_csv(f, ds);
    out << "wrote " << ds.samples.size() << " rows to " << path.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct Train {
    Common common;
    std::string model = "ann";
    std::string data;
    std::size_t n_train = 4000;
    std::size_t n_test = 1000;
    std::size_t horizon = 3;
    std::size_t epochs = 20;
    double learning_rate = 0.001;
    double dropout = 0.2;
    std::size_t hidden = kDefaultHidden;
    std::string model_out = "model.txt";
};

void setup_train(CLI::App& sub, Train& o) {
    add_common(sub, o.common);
    sub.add_option("--model", o.model, "svr or ann")->check(CLI::IsMember({"svr", "ann"}));
    sub.add_option("--data", o.data, "Soil CSV")->required();
    sub.add_option("--train", o.n_train, "Training pairs (taken first)");
    sub.add_option("--test", o.n_test, "Test pairs (taken next)");
    sub.add_option("--horizon", o.horizon, "Prediction horizon in steps");
    sub.add_option("--epochs", o.epochs, "Training epochs");
    sub.add_option("--lr", o.learning_rate, "Adam learning rate");
    sub.add_option("--dropout", o.dropout, "Hidden-layer dropout rate (ann)");
    sub.add_option("--hidden", o.hidden, "Hidden units (ann)");
    sub.add_option("--model-out", o.model_out, "Model file name inside --out");
}

void print_history(std::ostream& out, const TrainHistory& h) {
    write_history_tsv(out, h);
}

int run_train(const Train& o, std::ostream& out) {
    const Dataset ds = load_dataset(o.data);
    const auto pairs = make_windows(ds, o.horizon);
    const Split split = chronological_split(pairs, o.n_train, o.n_test);
    const AdamConfig adam = adam_with(o.learning_rate);
    const fs::path dir = prepare_out(o.common);

    AnyModel model;
    TrainHistory history;
    if (o.model == "svr") {
        auto r = svr_train(split.train, o.epochs, adam, o.common.seed, split.test);
        model = r.model;
        history = std::move(r.history);
    } else {
        AnnTrainOptions opts;
        opts.epochs = o.epochs;
        opts.dropout.rate = o.dropout;
        opts.adam = adam;
        opts.seed = o.common.seed;
        auto r = ann_train(ann_init(kLayers, o.hidden, o.common.seed), split.train, opts, split.test);
        model = std::move(r.params);
        history = std::move(r.history);
    }

    save_model_file((dir / o.model_out).string(), model, {ds.soil_label, o.common.seed, o.epochs});
    {
        auto f = open_out(dir / "history.tsv");
        write_history_tsv(f, history);
        auto p = open_out(dir / "history_plot.tsv");
        write_history_tsv(p, history, true);
    }
    print_history(out, history);
    out << metrics_line("test", evaluate(model, split.test)) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct Eval {
    Common common;
    std::string model;
    std::string data;
    std::size_t horizon = 3;
};

void setup_eval(CLI::App& sub, Eval& o) {
    add_common(sub, o.common);
    sub.add_option("--model", o.model, "Model file")->required();
    sub.add_option("--data", o.data, "Soil CSV; every windowed pair is evaluated")->required();
    sub.add_option("--horizon", o.horizon, "Prediction horizon in steps");
}

int run_eval(const Eval& o, std::ostream& out) {
    const StoredModel m = load_model_file(o.model);
    const Dataset ds = load_dataset(o.data);
    const auto pairs = make_windows(ds, o.horizon);
    const MetricsReport r = evaluate(m.model, pairs);
    const fs::path dir = prepare_out(o.common);
    const std::string line = metrics_line("eval", r);
    auto f = open_out(dir / "eval.txt");
    f << line << '\n';
    out << line << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// transfer

struct Transfer {
    Common common;
    std::string pretrained;
    std::string data;
    std::size_t n_train = 4000;
    std::size_t n_test = 1000;
    std::size_t horizon = 3;
    std::size_t epochs = 20;
    double learning_rate = 0.001;
    double dropout = 0.2;
    double threshold = 0.05;
    bool scratch = false;
};

void setup_transfer(CLI::App& sub, Transfer& o) {
    add_common(sub, o.common);
    sub.add_option("--pretrained", o.pretrained, "Pretrained ann model file")->required();
    sub.add_option("--data", o.data, "Soil CSV of the new domain")->required();
    sub.add_option("--train", o.n_train, "Fine-tuning pairs (taken first)");
    sub.add_option("--test", o.n_test, "Evaluation pairs (taken next)");
    sub.add_option("--horizon", o.horizon, "Prediction horizon in steps");
    sub.add_option("--epochs", o.epochs, "Fine-tuning epochs");
    sub.add_option("--lr", o.learning_rate, "Adam learning rate");
    sub.add_option("--dropout", o.dropout, "Hidden-layer dropout rate");
    sub.add_option("--threshold", o.threshold, "MSE level for epochs_to_threshold");
    sub.add_flag("--scratch", o.scratch, "Also train a fresh network with the same seed for comparison");
}

std::string convergence_line(const std::string& label, const ConvergenceReport& r) {
    return label + " start_mse=" + format_shortest(r.start_eval.mse) + " epochs_to_threshold=" +
           (r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold) : std::string("none"));
}

int run_transfer(const Transfer& o, std::ostream& out) {
    const StoredModel pre = load_model_file(o.pretrained);
    const AnnParams& start = require_ann(pre, "--pretrained");
    const Dataset ds = load_dataset(o.data);
    const auto pairs = make_windows(ds, o.horizon);
    const Split split = chronological_split(pairs, o.n_train, o.n_test);
    AnnTrainOptions opts;
    opts.epochs = o.epochs;
    opts.dropout.rate = o.dropout;
    opts.adam = adam_with(o.learning_rate);
    opts.seed = o.common.seed;
    const fs::path dir = prepare_out(o.common);

    const FineTuneResult tuned = fine_tune(start, split.train, opts, split.test, o.threshold);
    save_model_file((dir / "finetuned.model").string(), tuned.params, {ds.soil_label, o.common.seed, o.epochs});
    {
        auto f = open_out(dir / "convergence.tsv");
        write_convergence_tsv(f, tuned.report);
        auto h = open_out(dir / "history.tsv");
        write_history_tsv(h, tuned.history);
        auto p = open_out(dir / "history_plot.tsv");
        write_history_tsv(p, tuned.history, true);
    }
    out << convergence_line("finetuned", tuned.report) << '\n';

    if (o.scratch) {
        const AnnParams fresh = ann_init(start.input_dim(), start.hidden_dim(), o.common.seed);
        const FineTuneResult scratch = fine_tune(fresh, split.train, opts, split.test, o.threshold);
        auto f = open_out(dir / "scratch_convergence.tsv");
        write_convergence_tsv(f, scratch.report);
        auto h = open_out(dir / "scratch_history.tsv");
        write_history_tsv(h, scratch.history);
        out << convergence_line("scratch", scratch.report) << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct Sweep {
    Common common;
    std::string data;
    std::size_t n_test = 1000;
    std::size_t horizon = 3;
    std::size_t step = 50;
    std::size_t max_size = 0;
    std::size_t epochs = 20;
    double learning_rate = 0.001;
    double dropout = 0.2;
    std::size_t hidden = kDefaultHidden;
    std::string metric = "sae";
    std::optional<double> baseline;
    std::string baseline_model;
    std::string pretrained;
    bool stop_at_crossing = false;
};

void setup_sweep(CLI::App& sub, Sweep& o) {
    add_common(sub, o.common);
    sub.add_option("--data", o.data, "Soil CSV; the last --test pairs form the test set")->required();
    sub.add_option("--test", o.n_test, "Test pairs taken from the end");
    sub.add_option("--horizon", o.horizon, "Prediction horizon in steps");
    sub.add_option("--step", o.step, "Training-size increment");
    sub.add_option("--max-size", o.max_size, "Largest training size (0 = whole pool)");
    sub.add_option("--epochs", o.epochs, "Epochs per row");
    sub.add_option("--lr", o.learning_rate, "Adam learning rate");
    sub.add_option("--dropout", o.dropout, "Hidden-layer dropout rate");
    sub.add_option("--hidden", o.hidden, "Hidden units of fresh networks");
    sub.add_option("--metric", o.metric, "sae or mse")->check(CLI::IsMember({"sae", "mse"}));
    sub.add_option("--baseline", o.baseline, "Target test error");
    sub.add_option("--baseline-model", o.baseline_model, "Model whose test error becomes the baseline");
    sub.add_option("--pretrained", o.pretrained, "Start every row from this ann instead of a fresh network");
    sub.add_flag("--stop-at-crossing", o.stop_at_crossing, "Stop after the first crossing row");
}

int run_sweep(const Sweep& o, std::ostream& out) {
    if (o.baseline.has_value() == !o.baseline_model.empty()) {
        throw UsageError("give exactly one of --baseline and --baseline-model");
    }
    const Dataset ds = load_dataset(o.data);
    const auto pairs = make_windows(ds, o.horizon);
    if (pairs.size() <= o.n_test) throw SizingError(o.n_test + 1, pairs.size());
    const std::span<const WindowedPair> all(pairs);
    const auto pool = all.first(pairs.size() - o.n_test);
    const auto test = all.last(o.n_test);

    SweepOptions so;
    so.step = o.step;
    so.max_size = o.max_size;
    so.metric = parse_metric(o.metric);
    so.hidden_dim = o.hidden;
    so.stop_at_crossing = o.stop_at_crossing;
    so.train.epochs = o.epochs;
    so.train.dropout.rate = o.dropout;
    so.train.adam = adam_with(o.learning_rate);
    so.train.seed = o.common.seed;
    if (!o.pretrained.empty()) so.start = require_ann(load_model_file(o.pretrained), "--pretrained");

    double baseline = o.baseline.value_or(0.0);
    if (!o.baseline_model.empty()) baseline = metric_value(evaluate(load_model_file(o.baseline_model).model, test), so.metric);

    const fs::path dir = prepare_out(o.common);
    const SweepReport report = sample_efficiency_sweep(baseline, pool, test, so);
    auto f = open_out(dir / "sweep.tsv");
    write_sweep_tsv(f, report);
    out << "baseline=" << format_shortest(report.baseline) << " rows=" << report.rows.size() << " crossing_size="
        << (report.crossing_size ? std::to_string(*report.crossing_size) : std::string("none")) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// extend

struct Extend {
    Common common;
    std::string source;
    std::string data;
    std::size_t budget = 5000;
    double alpha = 0.999;
    double beta = 0.001;
    double blend_lr = 0.05;
    double threshold = 0.9;
    double learning_rate = 0.001;
};

void setup_extend(CLI::App& sub, Extend& o) {
    add_common(sub, o.common);
    sub.add_option("--source", o.source, "Trained 4-input ann model")->required();
    sub.add_option("--data", o.data, "Extended climate CSV")->required();
    sub.add_option("--budget", o.budget, "Maximum number of online updates");
    sub.add_option("--alpha", o.alpha, "Initial source weight");
    sub.add_option("--beta", o.beta, "Initial target weight");
    sub.add_option("--blend-lr", o.blend_lr, "Step size for the blend weights");
    sub.add_option("--threshold", o.threshold, "Handover when beta exceeds this");
    sub.add_option("--lr", o.learning_rate, "Adam learning rate of the online network steps");
}

int run_extend(const Extend& o, std::ostream& out) {
    const StoredModel src = load_model_file(o.source);
    const AnnParams& source = require_ann(src, "--source");
    auto in = open_in(o.data);
    const auto stream = parse_extended_csv(in);
    BlendConfig bc;
    bc.alpha = o.alpha;
    bc.beta = o.beta;
    bc.blend_learning_rate = o.blend_lr;
    bc.handover_threshold = o.threshold;
    bc.model_adam = adam_with(o.learning_rate);
    const fs::path dir = prepare_out(o.common);

    const ExtensionResult r = run_extension(make_blend_state(source, bc), stream, o.budget);
    auto f = open_out(dir / "trace.tsv");
    write_trace_tsv(f, r.trace);
    save_model_file((dir / "target.model").string(), r.state.target, {src.metadata.soil_label, o.common.seed, 0});
    out << "updates=" << r.trace.size() << " alpha=" << format_shortest(r.state.alpha)
        << " beta=" << format_shortest(r.state.beta) << " handover="
        << (r.state.handover_step ? std::to_string(*r.state.handover_step) : std::string("none")) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct Simulate {
    Common common;
    std::string model;
    std::string soil = "bed";
    std::size_t endpoints = 4;
    std::size_t steps = 3000;
    double loss = 0.0;
    std::string outages;
    double setpoint = 0.65;
    double band = 0.05;
    double flow_rate = 0.03;
    std::size_t max_irrigation_steps = 20;
    std::size_t failover_threshold = 3;
    std::size_t heartbeat_interval = 1;
    std::size_t ticks_per_step = 12;
    std::size_t max_retransmissions = 4;
    std::size_t warmup = 200;
    bool local_model = true;
    std::string scenario;
};

void setup_simulate(CLI::App& sub, Simulate& o) {
    add_common(sub, o.common);
    sub.add_option("--scenario", o.scenario, "Scenario file (same key = value format as --config)");
    sub.add_option("--model", o.model, "Model used by the server and, when loaded, the coordinator")->required();
    sub.add_option("--soil", o.soil, "Soil preset of every endpoint");
    sub.add_option("--endpoints", o.endpoints, "Number of endpoints (ids 1..N)");
    sub.add_option("--steps", o.steps, "Simulation steps");
    sub.add_option("--loss", o.loss, "Per-transmission radio loss probability");
    sub.add_option("--outages", o.outages, "Server outage windows, e.g. 400-600,900-1100 (end exclusive)");
    sub.add_option("--setpoint", o.setpoint, "Deepest-layer moisture setpoint");
    sub.add_option("--band", o.band, "Relative tolerance around the setpoint");
    sub.add_option("--flow-rate", o.flow_rate, "Water added per open step");
    sub.add_option("--max-irrigation-steps", o.max_irrigation_steps, "Endpoint safety timeout");
    sub.add_option("--failover-threshold", o.failover_threshold, "Missed heartbeats before local control");
    sub.add_option("--heartbeat-interval", o.heartbeat_interval, "Steps between server heartbeats");
    sub.add_option("--ticks-per-step", o.ticks_per_step, "Radio slots per step");
    sub.add_option("--max-retransmissions", o.max_retransmissions, "Resends per frame after the first send");
    sub.add_option("--warmup", o.warmup, "Steps excluded from the in-band fraction");
    sub.add_flag("--local-model,!--no-local-model", o.local_model, "Download the model to the coordinator for failover");
}

int run_simulate(const Simulate& o, std::ostream& out) {
    iot::SimScenario sc;
    sc.seed = o.common.seed;
    sc.steps = o.steps;
    const SoilParams soil = soil_preset(o.soil);
    for (std::size_t i = 1; i <= o.endpoints; ++i) {
        if (i > 0xFFFF) throw UsageError("too many endpoints");
        sc.endpoints.push_back({static_cast<std::uint16_t>(i), soil, preset_label(o.soil)});
    }
    sc.loss_probability = o.loss;
    sc.outages = parse_outages(o.outages);
    sc.controller.setpoint = o.setpoint;
    sc.controller.band = o.band;
    sc.flow_rate = o.flow_rate;
    sc.max_irrigation_steps = o.max_irrigation_steps;
    sc.failover_threshold = o.failover_threshold;
    sc.heartbeat_interval = o.heartbeat_interval;
    sc.ticks_per_step = o.ticks_per_step;
    sc.reliable.max_retransmissions = o.max_retransmissions;
    sc.warmup = o.warmup;
    sc.model = load_model_file(o.model).model;
    sc.local_model = o.local_model;
    sc.validate();
    const fs::path dir = prepare_out(o.common);

    const iot::SimResult r = iot::simulate(sc);
    {
        auto f = open_out(dir / "events.log");
        r.log.write(f);
    }
    for (std::size_t e = 0; e < r.traces.size(); ++e) {
        auto f = open_out(dir / ("trace_" + std::to_string(sc.endpoints[e].id) + ".csv"));
        write_csv(f, r.traces[e]);
    }
    auto f = open_out(dir / "summary.txt");
    iot::write_summary(f, r.summary);
    iot::write_summary(out, r.summary);
    return kExitOk;
}

// ---------------------------------------------------------------------------

/// Moves tokens from a --config/--scenario file in front of the user's own
/// flags, so that the command line wins under the take-last policy.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    if (args.empty()) return args;
    std::vector<std::string> expanded{args.front()};
    std::vector<std::string> from_files;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        for (const std::string flag : {"--config", "--scenario"}) {
            std::optional<std::string> path;
            if (a == flag && i + 1 < args.size()) {
                path = args[i + 1];
            } else if (a.rfind(flag + "=", 0) == 0) {
                path = a.substr(flag.size() + 1);
            }
            if (path) {
                auto tokens = config_tokens(*path);
                from_files.insert(from_files.end(), tokens.begin(), tokens.end());
            }
        }
    }
    expanded.insert(expanded.end(), from_files.begin(), from_files.end());
    expanded.insert(expanded.end(), args.begin() + 1, args.end());
    return expanded;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Soil-moisture prediction, transfer, extension and irrigation simulation"};
    app.name("greenhouse");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

    GenData gen;
    Train train;
    Eval eval;
    Transfer transfer;
    Sweep sweep;
    Extend extend;
    Simulate simulate;

    struct Command {
        CLI::App* app;
        std::function<int()> run;
        const Common* common;
    };
    std::vector<Command> commands;
    const auto add = [&](const char* name, const char* help, auto& opts, auto setup, auto run) {
        CLI::App* sub = app.add_subcommand(name, help);
        setup(*sub, opts);
        commands.push_back({sub, [&opts, run, &out] { return run(opts, out); }, &opts.common});
    };
    add("gen-data", "Generate a synthetic soil CSV (or a climate CSV) from a preset", gen, setup_gen_data, run_gen_data);
    add("train", "Train an svr or ann model on a soil CSV", train, setup_train, run_train);
    add("eval", "Evaluate a model file on a soil CSV", eval, setup_eval, run_eval);
    add("transfer", "Fine-tune a pretrained ann on a new soil", transfer, setup_transfer, run_transfer);
    add("sweep", "Training-size sweep against a baseline error", sweep, setup_sweep, run_sweep);
    add("extend", "Grow a model for a climate input and blend it online", extend, setup_extend, run_extend);
    add("simulate", "Run the endpoint/coordinator/server simulation", simulate, setup_simulate, run_simulate);

    try {
        std::vector<std::string> argv = expand_config(args);
        std::reverse(argv.begin(), argv.end());
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "greenhouse: " << e.what() << "\n";
        err << "run 'greenhouse --help' for usage\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "greenhouse: " << e.what() << '\n';
        return kExitData;
    }

    try {
        for (const auto& c : commands) {
            if (!c.app->parsed()) continue;
            write_effective_config(*c.app, prepare_out(*c.common));
            return c.run();
        }
        err << "greenhouse: no subcommand\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "greenhouse: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "greenhouse: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace greenhouse::cli

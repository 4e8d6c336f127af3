#include "greenhouse/ann.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "greenhouse/error.hpp"
#include "greenhouse/rng.hpp"

namespace greenhouse {

AnnParams::AnnParams(std::size_t input_dim, std::size_t hidden_dim)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), values_(parameter_count(input_dim, hidden_dim), 0.0) {
    if (input_dim == 0 || hidden_dim == 0) throw UsageError("network dimensions must be >= 1");
}

bool AnnParams::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

AnnParams ann_init(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
    AnnParams p(input_dim, hidden_dim);
    Rng rng(seed);
    const double hidden_limit = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
    const double output_limit = std::sqrt(6.0 / static_cast<double>(hidden_dim + 1));
    for (std::size_t j = 0; j < hidden_dim; ++j) {
        for (std::size_t i = 0; i < input_dim; ++i) p.weight(j, i) = rng.uniform(-hidden_limit, hidden_limit);
    }
    for (std::size_t j = 0; j < hidden_dim; ++j) p.output_weight(j) = rng.uniform(-output_limit, output_limit);
    return p;
}

void DropoutConfig::validate() const {
    if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("dropout rate must lie in [0,1)");
}

DropoutMask DropoutMask::sample(std::size_t hidden_dim, const DropoutConfig& config, Rng& rng) {
    DropoutMask mask{std::vector<bool>(hidden_dim, true), 1.0 / (1.0 - config.rate)};
    if (config.rate > 0.0) {
        for (std::size_t j = 0; j < hidden_dim; ++j) mask.keep[j] = !rng.bernoulli(config.rate);
    }
    return mask;
}

namespace {

void check_dims(const AnnParams& params, std::span<const double> x, const DropoutMask* mask) {
    if (x.size() != params.input_dim()) {
        throw UsageError("ann: input has " + std::to_string(x.size()) + " values, network expects " +
                         std::to_string(params.input_dim()));
    }
    if (mask && mask->keep.size() != params.hidden_dim()) throw UsageError("ann: dropout mask length mismatch");
}

// Pre-activations are needed by the backward pass, so they are kept apart
// from the masked activations.
double forward_into(const AnnParams& p, std::span<const double> x, const DropoutMask* mask,
                    std::vector<double>& pre, std::vector<double>& hidden) {
    const std::size_t q = p.hidden_dim();
    pre.resize(q);
    hidden.resize(q);
    double y = p.output_bias();
    for (std::size_t j = 0; j < q; ++j) {
        double z = p.hidden_bias(j);
        for (std::size_t i = 0; i < x.size(); ++i) z += p.weight(j, i) * x[i];
        pre[j] = z;
        double h = z > 0.0 ? z : 0.0;
        if (mask) h = mask->keep[j] ? h * mask->scale : 0.0;
        hidden[j] = h;
        y += p.output_weight(j) * h;
    }
    return y;
}

}  // namespace

ForwardResult ann_forward(const AnnParams& params, std::span<const double> x, const DropoutMask* mask) {
    check_dims(params, x, mask);
    ForwardResult r;
    std::vector<double> pre;
    r.prediction = forward_into(params, x, mask, pre, r.hidden);
    return r;
}

double ann_predict(const AnnParams& params, std::span<const double> x) {
    return ann_forward(params, x).prediction;
}

LossGrad ann_loss_grad(const AnnParams& params, std::span<const double> x, double target, const DropoutMask* mask) {
    check_dims(params, x, mask);
    std::vector<double> pre;
    std::vector<double> hidden;
    const double y_hat = forward_into(params, x, mask, pre, hidden);
    LossGrad out{std::abs(target - y_hat), AnnParams(params.input_dim(), params.hidden_dim())};
    const double g = static_cast<double>((y_hat > target) - (y_hat < target));
    if (g == 0.0) return out;

    AnnParams& grad = out.grad;
    grad.output_bias() = g;
    for (std::size_t j = 0; j < params.hidden_dim(); ++j) {
        grad.output_weight(j) = g * hidden[j];
        if (pre[j] <= 0.0) continue;
        double dz = g * params.output_weight(j);
        if (mask) dz = mask->keep[j] ? dz * mask->scale : 0.0;
        grad.hidden_bias(j) = dz;
        for (std::size_t i = 0; i < x.size(); ++i) grad.weight(j, i) = dz * x[i];
    }
    return out;
}

void adam_step(AnnParams& params, const AnnParams& grads, AdamState& state, const AdamConfig& config) {
    if (!params.same_shape(grads)) throw UsageError("adam_step: gradient shape mismatch");
    adam_step(params.values(), grads.values(), state, config);
}

MetricsReport evaluate(const AnnParams& params, std::span<const WindowedPair> pairs) {
    std::vector<double> predictions;
    predictions.reserve(pairs.size());
    for (const auto& p : pairs) predictions.push_back(ann_predict(params, p.features));
    return evaluate_metrics(targets_of(pairs), predictions);
}

AnnResult ann_train(const AnnParams& start, std::span<const WindowedPair> pairs, const AnnTrainOptions& options,
                    std::span<const WindowedPair> eval_set) {
    if (pairs.empty()) throw UsageError("ann_train: empty training set");
    if (start.input_dim() != kLayers) {
        throw UsageError("ann_train: network expects " + std::to_string(start.input_dim()) +
                         " inputs, pairs carry " + std::to_string(kLayers));
    }
    options.dropout.validate();
    options.adam.validate();

    AnnResult result{start, {}};
    AnnParams& params = result.params;
    AdamState state(params.size());
    Rng rng(options.seed);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    AnnParams batch_grad(params.input_dim(), params.hidden_dim());

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start_idx = 0; start_idx < order.size(); start_idx += kBatchSize) {
            const std::size_t end = std::min(start_idx + kBatchSize, order.size());
            std::fill(batch_grad.values().begin(), batch_grad.values().end(), 0.0);
            for (std::size_t k = start_idx; k < end; ++k) {
                const auto& pair = pairs[order[k]];
                const DropoutMask mask = DropoutMask::sample(params.hidden_dim(), options.dropout, rng);
                const LossGrad lg = ann_loss_grad(params, pair.features, pair.target, &mask);
                auto acc = batch_grad.values();
                const auto g = lg.grad.values();
                for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
            }
            const double inv = 1.0 / static_cast<double>(end - start_idx);
            for (double& g : batch_grad.values()) g *= inv;
            adam_step(params, batch_grad, state, options.adam);
        }
        EpochRecord rec{epoch, evaluate(params, pairs), std::nullopt};
        if (!eval_set.empty()) rec.eval = evaluate(params, eval_set);
        result.history.push_back(rec);
    }
    return result;
}

}  // namespace greenhouse

#include "greenhouse/transfer.hpp"

#include <ostream>

#include "greenhouse/error.hpp"
#include "greenhouse/rng.hpp"
#include "greenhouse/text.hpp"

namespace greenhouse {

ConvergenceReport convergence_report(const MetricsReport& start_eval, const TrainHistory& history,
                                     double mse_threshold) {
    ConvergenceReport r;
    r.start_eval = start_eval;
    r.threshold = mse_threshold;
    for (std::size_t e = 1; e < history.size(); ++e) {
        r.loss_deltas.push_back(history[e].train.sum_abs_error - history[e - 1].train.sum_abs_error);
    }
    if (start_eval.mse <= mse_threshold) {
        r.epochs_to_threshold = 0;
        return r;
    }
    for (const auto& rec : history) {
        if (rec.eval && rec.eval->mse <= mse_threshold) {
            r.epochs_to_threshold = rec.epoch;
            break;
        }
    }
    return r;
}

FineTuneResult fine_tune(const AnnParams& pretrained, std::span<const WindowedPair> new_pairs,
                         const AnnTrainOptions& options, std::span<const WindowedPair> eval_set,
                         double mse_threshold) {
    if (pretrained.input_dim() != kLayers) {
        throw UsageError("fine_tune: pretrained network has " + std::to_string(pretrained.input_dim()) +
                         " inputs, new data has " + std::to_string(kLayers));
    }
    if (eval_set.empty()) throw UsageError("fine_tune: empty eval set");
    const MetricsReport start = evaluate(pretrained, eval_set);
    AnnResult trained = options.epochs == 0 ? AnnResult{pretrained, {}}
                                            : ann_train(pretrained, new_pairs, options, eval_set);
    ConvergenceReport report = convergence_report(start, trained.history, mse_threshold);
    return {std::move(trained.params), std::move(trained.history), std::move(report)};
}

double metric_value(const MetricsReport& m, SweepMetric metric) {
    return metric == SweepMetric::SumAbsError ? m.sum_abs_error : m.mse;
}

std::uint64_t sweep_row_seed(std::uint64_t base_seed, std::size_t training_size) {
    return mix_seed(base_seed, training_size);
}

SweepReport sample_efficiency_sweep(double baseline_error, std::span<const WindowedPair> pool,
                                    std::span<const WindowedPair> test_set, const SweepOptions& options) {
    if (pool.empty()) throw UsageError("sweep: empty pool");
    if (options.step == 0) throw UsageError("sweep: step must be >= 1");
    if (pool.size() < options.step) throw UsageError("sweep: pool smaller than one step");
    if (test_set.empty()) throw UsageError("sweep: empty test set");

    const std::size_t max_size = options.max_size == 0 ? pool.size() : std::min(options.max_size, pool.size());
    SweepReport report;
    report.baseline = baseline_error;
    report.metric = options.metric;
    for (std::size_t size = options.step; size <= max_size; size += options.step) {
        AnnTrainOptions train = options.train;
        train.seed = sweep_row_seed(options.train.seed, size);
        const AnnParams start = options.start ? *options.start : ann_init(kLayers, options.hidden_dim, train.seed);
        const AnnResult result = ann_train(start, pool.first(size), train);
        const MetricsReport test = evaluate(result.params, test_set);
        report.rows.push_back({size, test});
        if (!report.crossing_size && metric_value(test, options.metric) <= baseline_error) {
            report.crossing_size = size;
            if (options.stop_at_crossing) break;
        }
    }
    return report;
}

namespace {
void write_metrics(std::ostream& out, const MetricsReport& m, bool plot_scale) {
    out << format_g17(m.sum_abs_error) << '\t' << format_g17(plot_scale ? 10.0 * m.mse : m.mse);
}
}  // namespace

void write_history_tsv(std::ostream& out, const TrainHistory& history, bool plot_scale) {
    const char* mse = plot_scale ? "mse_x10" : "mse";
    out << "epoch\ttrain_sum_abs_error\ttrain_" << mse << "\teval_sum_abs_error\teval_" << mse << '\n';
    for (const auto& rec : history) {
        out << rec.epoch << '\t';
        write_metrics(out, rec.train, plot_scale);
        out << '\t';
        if (rec.eval) {
            write_metrics(out, *rec.eval, plot_scale);
        } else {
            out << "nan\tnan";
        }
        out << '\n';
    }
}

void write_convergence_tsv(std::ostream& out, const ConvergenceReport& report) {
    out << "# start_eval_sum_abs_error\t" << format_g17(report.start_eval.sum_abs_error) << '\n';
    out << "# start_eval_mse\t" << format_g17(report.start_eval.mse) << '\n';
    out << "# mse_threshold\t" << format_g17(report.threshold) << '\n';
    out << "# epochs_to_threshold\t"
        << (report.epochs_to_threshold ? std::to_string(*report.epochs_to_threshold) : std::string("never")) << '\n';
    out << "epoch\tloss_delta\n";
    for (std::size_t i = 0; i < report.loss_deltas.size(); ++i) {
        out << (i + 2) << '\t' << format_g17(report.loss_deltas[i]) << '\n';
    }
}

void write_sweep_tsv(std::ostream& out, const SweepReport& report) {
    out << "# metric\t" << (report.metric == SweepMetric::SumAbsError ? "sum_abs_error" : "mse") << '\n';
    out << "# baseline\t" << format_g17(report.baseline) << '\n';
    out << "# crossing_size\t"
        << (report.crossing_size ? std::to_string(*report.crossing_size) : std::string("not reached")) << '\n';
    out << "training_size\ttest_sum_abs_error\ttest_mse\n";
    for (const auto& row : report.rows) {
        out << row.training_size << '\t' << format_g17(row.test.sum_abs_error) << '\t' << format_g17(row.test.mse)
            << '\n';
    }
}

}  // namespace greenhouse
